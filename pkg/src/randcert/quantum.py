"""Quantum behaviors from two-qubit pure states and projective qubit measurements.

The state is ``alpha|01> + s sqrt(1 - alpha^2)|10>`` with ``s = +-1``.  Its
correlation tensor is ``diag(2 s alpha beta, 2 s alpha beta, -1)`` and its local
Bloch vectors point along ``z``, so every probability has a short closed form in
the nine parameters

    (theta_x1, theta_x2, theta_y1, theta_y2, phi_x1, phi_x2, phi_y1, phi_y2, alpha)

which is also the order used by the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .behavior import Behavior, CorrelatorSet, behavior_from_correlators

__all__ = [
    "Sign",
    "PureState",
    "MeasurementSettings",
    "Family",
    "TiltedFamilyParams",
    "correlators_from_params",
    "probabilities",
    "probability_jacobian",
    "probabilities_and_jacobian",
    "outcome_amplitude",
    "behavior_from_state",
    "behavior_from_params",
    "state_vector",
    "canonical_correlators",
    "canonical_behavior",
    "witness_maximum",
    "HARDY_MAX",
    "SQRT5",
]

SQRT5 = math.sqrt(5.0)
HARDY_MAX = (5 * SQRT5 - 11) / 2

_SIGN = np.array([1.0, -1.0])
# Probability cell weights: P[x, y, ia, ib] = (1 + sa A_x + sb B_y + sa sb C_xy) / 4
_SA = np.repeat(_SIGN, 2)  # over (ia, ib) flattened
_SB = np.tile(_SIGN, 2)


class Sign(str, Enum):
    PLUS = "plus"
    MINUS = "minus"

    @property
    def value_int(self) -> int:
        return 1 if self is Sign.PLUS else -1


@dataclass(frozen=True)
class PureState:
    alpha: float
    sign: Sign = Sign.MINUS

    def __post_init__(self):
        alpha = float(self.alpha)
        if not (0.0 <= alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sign", Sign(self.sign))

    @property
    def beta(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.alpha**2))


@dataclass(frozen=True)
class MeasurementSettings:
    """Polar angles ``theta`` (x1, x2, y1, y2) in [0, pi] and azimuths ``phi`` in [0, 2 pi]."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(4)
        phi = np.array(self.phi, dtype=float).reshape(4)
        if np.any(theta < 0) or np.any(theta > math.pi):
            raise ValueError("polar angles must lie in [0, pi]")
        if np.any(phi < 0) or np.any(phi > 2 * math.pi):
            raise ValueError("azimuthal angles must lie in [0, 2 pi]")
        theta.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    def directions(self) -> np.ndarray:
        """Unit Bloch vectors, shape ``(4, 3)``."""
        st = np.sin(self.theta)
        return np.column_stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


def _pack(state: PureState, settings: MeasurementSettings) -> np.ndarray:
    return np.concatenate([settings.theta, settings.phi, [state.alpha]])


def _parts(params, sign):
    params = np.asarray(params, dtype=float)
    th = params[:4]
    ph = params[4:8]
    alpha = params[8]
    s = float(sign)
    ct, st = np.cos(th), np.sin(th)
    beta = math.sqrt(max(0.0, 1.0 - alpha * alpha))
    k = 2.0 * s * alpha * beta
    delta = ph[:2, None] - ph[None, 2:]
    return th, ph, alpha, beta, s, ct, st, k, delta


def correlators_from_params(params, sign: int = -1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(<X_x>, <Y_y>, <X_x Y_y>)`` as plain arrays; no validation."""
    _, _, alpha, _, _, ct, st, k, delta = _parts(params, sign)
    z = 2 * alpha * alpha - 1
    ax = z * ct[:2]
    by = -z * ct[2:]
    axby = k * np.outer(st[:2], st[2:]) * np.cos(delta) - np.outer(ct[:2], ct[2:])
    return ax, by, axby


def probabilities(params, sign: int = -1) -> np.ndarray:
    """The sixteen probabilities in flat ``(x, y, a, b)`` order."""
    ax, by, axby = correlators_from_params(params, sign)
    t = 0.25 * (
        1.0
        + ax[:, None, None] * _SA[None, None, :]
        + by[None, :, None] * _SB[None, None, :]
        + axby[:, :, None] * (_SA * _SB)[None, None, :]
    )
    return t.reshape(16)


def probability_jacobian(params, sign: int = -1) -> np.ndarray:
    """Analytic ``d P / d params``, shape ``(16, 9)``.

    The derivative in ``alpha`` diverges at ``alpha = 1``; it is evaluated with
    ``beta`` floored at 1e-12.
    """
    return probabilities_and_jacobian(params, sign)[1]


_X, _Y = np.meshgrid([0, 1], [0, 1], indexing="ij")
_W_AX = _SA[None, None, :, None]
_W_BY = _SB[None, None, :, None]
_W_C = (_SA * _SB)[None, None, :, None]


def probabilities_and_jacobian(params, sign: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and their Jacobian from one pass over the trigonometric terms."""
    th, ph, alpha, beta, s, ct, st, k, delta = _parts(params, sign)
    z = 2 * alpha * alpha - 1
    cd, sd = np.cos(delta), np.sin(delta)
    dk = 2.0 * s * (1.0 - 2.0 * alpha * alpha) / max(beta, 1e-12)
    cta, ctb, sta, stb = ct[:2], ct[2:], st[:2], st[2:]

    ax = z * cta
    by = -z * ctb
    ss = np.outer(sta, stb)
    axby = k * ss * cd - np.outer(cta, ctb)
    t = 0.25 * (
        1.0
        + ax[:, None, None] * _SA[None, None, :]
        + by[None, :, None] * _SB[None, None, :]
        + axby[:, :, None] * (_SA * _SB)[None, None, :]
    )

    d_ax = np.zeros((2, 9))
    d_ax[[0, 1], [0, 1]] = -z * sta
    d_ax[:, 8] = 4 * alpha * cta
    d_by = np.zeros((2, 9))
    d_by[[0, 1], [2, 3]] = z * stb
    d_by[:, 8] = -4 * alpha * ctb
    d_c = np.zeros((2, 2, 9))
    d_c[_X, _Y, _X] = k * np.outer(cta, stb) * cd + np.outer(sta, ctb)
    d_c[_X, _Y, 2 + _Y] = k * np.outer(sta, ctb) * cd + np.outer(cta, stb)
    d_c[_X, _Y, 4 + _X] = -k * ss * sd
    d_c[_X, _Y, 6 + _Y] = k * ss * sd
    d_c[:, :, 8] = dk * ss * cd
    jac = 0.25 * (d_ax[:, None, None, :] * _W_AX + d_by[None, :, None, :] * _W_BY + d_c[:, :, None, :] * _W_C)
    return t.reshape(16), jac.reshape(16, 9)


def outcome_amplitude(params, x: int, y: int, a: int, b: int, sign: int = -1) -> tuple[complex, np.ndarray]:
    """Amplitude ``<u_a| <v_b| psi>`` of one outcome pair and its gradient, shape ``(9,)``.

    ``P(a, b | x, y)`` is the squared modulus.  A zero probability written as
    ``Re = Im = 0`` keeps a nonvanishing gradient, unlike the probability itself.
    """
    params = np.asarray(params, dtype=float)
    alpha = params[8]
    beta = math.sqrt(max(0.0, 1.0 - alpha * alpha))
    dbeta = -alpha / max(beta, 1e-12)
    s = float(sign)

    def spinor(theta, phi, out):
        # conjugated components of the +-1 eigenvectors and their derivatives
        c, sn = math.cos(theta / 2), math.sin(theta / 2)
        e = complex(math.cos(phi), -math.sin(phi))
        if out == 1:
            u = (c, e * sn)
            du_t = (-sn / 2, e * c / 2)
            du_p = (0.0, -1j * e * sn)
        else:
            u = (sn, -e * c)
            du_t = (c / 2, e * sn / 2)
            du_p = (0.0, 1j * e * c)
        return u, du_t, du_p

    u, ut, up = spinor(params[x], params[4 + x], a)
    v, vt, vp = spinor(params[2 + y], params[6 + y], b)
    amp = alpha * u[0] * v[1] + s * beta * u[1] * v[0]
    g = np.zeros(9, dtype=complex)
    g[x] = alpha * ut[0] * v[1] + s * beta * ut[1] * v[0]
    g[4 + x] = alpha * up[0] * v[1] + s * beta * up[1] * v[0]
    g[2 + y] = alpha * u[0] * vt[1] + s * beta * u[1] * vt[0]
    g[6 + y] = alpha * u[0] * vp[1] + s * beta * u[1] * vp[0]
    g[8] = u[0] * v[1] + s * dbeta * u[1] * v[0]
    return complex(amp), g


def behavior_from_params(params, sign: int = -1, label: str = "") -> Behavior:
    return Behavior(np.clip(probabilities(params, sign), 0.0, 1.0), label=label)


def behavior_from_state(state: PureState, settings: MeasurementSettings) -> Behavior:
    return behavior_from_params(_pack(state, settings), state.sign.value_int)


def state_vector(state: PureState) -> np.ndarray:
    """Amplitudes in the computational basis ``|00>, |01>, |10>, |11>``."""
    return np.array([0.0, state.alpha, state.sign.value_int * state.beta, 0.0])


class Family(str, Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    MAX_HARDY = "MaxHardy"
    MAX_CL = "MaxCL"


@dataclass(frozen=True)
class TiltedFamilyParams:
    """Parameters of the tilted-CHSH extremal families.

    ``t >= 1`` is used by Case 2 only; ``theta`` in [0, pi/4] by Case 2 and
    Case 3.  Case 2 defaults to ``theta = pi/4``, the member that is extremal.
    """

    family: Family
    t: float = 1.0
    theta: float = math.pi / 4

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.CASE2 and not self.t >= 1.0:
            raise ValueError(f"Case 2 needs t >= 1, got {self.t}")
        if family in (Family.CASE2, Family.CASE3) and not (0.0 <= self.theta <= math.pi / 4):
            raise ValueError(f"theta must lie in [0, pi/4], got {self.theta}")


# Correlators of the numerically maximal CL behavior at four printed decimals.
MAX_CL_PRINTED = CorrelatorSet(
    ax=[-0.4460, -0.2820],
    by=[-0.4460, -0.2820],
    axby=[[0.4224, 0.8360], [0.8360, -0.3369]],
)


def _tilted(t: float, theta: float) -> CorrelatorSet:
    s2 = math.sin(2 * theta) ** 2
    c2 = math.cos(2 * theta)
    n = math.sqrt(t * t + s2)
    return CorrelatorSet(
        ax=[c2, 0.0],
        by=[t * c2 / n, t * c2 / n],
        axby=[[t / n, t / n], [s2 / n, -s2 / n]],
    )


def canonical_correlators(family: TiltedFamilyParams | Family | str) -> CorrelatorSet:
    """Correlators of the named extremal families.

    Case 3 coincides with Case 2 at ``t = 1``; both are written with
    ``<X2 Y2> = -<X2 Y1>`` so that the CHSH value is
    ``2 (t + sin^2 2 theta) / sqrt(t^2 + sin^2 2 theta)``.
    """
    if not isinstance(family, TiltedFamilyParams):
        family = TiltedFamilyParams(Family(family))
    fam = family.family
    if fam is Family.CASE1:
        r = 1 / math.sqrt(2)
        return CorrelatorSet(ax=[0, 0], by=[0, 0], axby=[[r, r], [r, -r]])
    if fam is Family.CASE2:
        return _tilted(family.t, family.theta)
    if fam is Family.CASE3:
        th = family.theta
        d = math.sqrt(3 - math.cos(4 * th))
        s2 = math.sin(2 * th) ** 2
        e = s2 / math.sqrt(1 + s2)
        m = math.sqrt(2) * math.cos(2 * th) / d
        return CorrelatorSet(
            ax=[math.cos(2 * th), 0.0],
            by=[m, m],
            axby=[[math.sqrt(2) / d, math.sqrt(2) / d], [e, -e]],
        )
    if fam is Family.MAX_HARDY:
        return CorrelatorSet(
            ax=[5 - 2 * SQRT5, SQRT5 - 2],
            by=[5 - 2 * SQRT5, SQRT5 - 2],
            axby=[[6 * SQRT5 - 13, 3 * SQRT5 - 6], [3 * SQRT5 - 6, 2 * SQRT5 - 5]],
        )
    if fam is Family.MAX_CL:
        from .bounds import max_cl_correlators

        return max_cl_correlators()
    raise ValueError(f"unknown family {fam!r}")


def canonical_behavior(family: TiltedFamilyParams | Family | str) -> Behavior:
    return behavior_from_correlators(canonical_correlators(family))


def witness_maximum(state: PureState, kind, starts: int = 20, seed: int = 0):
    """Largest Hardy or CL value reachable with the fixed ``state`` over all settings.

    Returns an :class:`~randcert.optimize.OptOutcome` whose ``best_value`` is the
    witness value and whose ``params`` hold the eight angles plus ``alpha``.
    """
    from .optimize import maximize_witness

    return maximize_witness(kind, starts=starts, seed=seed, alpha=state.alpha, sign=state.sign.value_int)
