"""Behaviors of the 2-2-2 Bell scenario and the arithmetic defined on them.

A behavior is the table of sixteen joint probabilities ``P(a, b | x, y)``.
Everything in the package uses one flat layout::

    index = 8 * x + 4 * y + 2 * ia + ib

with settings ``x, y in {0, 1}`` (X1/X2, Y1/Y2) and outcome indices
``ia, ib in {0, 1}`` standing for the outcomes ``+1, -1``.  The helpers
:func:`flat_index` and :func:`outcome_index` perform the mapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NORMALIZATION_TOL",
    "NS_TOL",
    "RESIDUAL_TOL",
    "OUTCOMES",
    "Behavior",
    "CorrelatorSet",
    "InvalidBehaviorError",
    "WitnessKind",
    "WitnessSpec",
    "WitnessReading",
    "flat_index",
    "outcome_index",
    "behavior_from_correlators",
    "witness_value",
    "min_entropy",
    "guessing_probability",
    "mix",
    "chsh_from_witness_probs",
    "is_factorisable",
    "hardy_probs",
]

NORMALIZATION_TOL = 1e-12
NS_TOL = 1e-9
RESIDUAL_TOL = 1e-9

OUTCOMES = (1, -1)
_SIGN = np.array([1.0, -1.0])


class InvalidBehaviorError(ValueError):
    """Raised when a probability table violates the behavior invariants."""


def outcome_index(value: int) -> int:
    """Map an outcome ``+1``/``-1`` to its array index ``0``/``1``."""
    if value == 1:
        return 0
    if value == -1:
        return 1
    raise ValueError(f"outcome must be +1 or -1, got {value!r}")


def flat_index(x: int, y: int, a: int, b: int) -> int:
    """Flat position of ``P(a, b | x, y)``; settings are 0-based, outcomes are +-1."""
    if x not in (0, 1) or y not in (0, 1):
        raise ValueError(f"settings must be 0 or 1, got x={x!r}, y={y!r}")
    return 8 * x + 4 * y + 2 * outcome_index(a) + outcome_index(b)


class WitnessKind(str, Enum):
    CHSH = "CHSH"
    HARDY = "Hardy"
    CL = "CL"

    @classmethod
    def parse(cls, value: "WitnessKind | str") -> "WitnessKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown witness kind {value!r}; expected CHSH, Hardy or CL")


_WITNESS_RANGE = {
    WitnessKind.CHSH: (-4.0, 4.0),
    WitnessKind.HARDY: (0.0, 0.5),
    WitnessKind.CL: (0.0, 0.5),
}


@dataclass(frozen=True)
class WitnessSpec:
    """A nonlocality witness together with its observed value."""

    kind: WitnessKind
    value: float

    def __post_init__(self):
        kind = WitnessKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        value = float(self.value)
        lo, hi = _WITNESS_RANGE[kind]
        if not (lo <= value <= hi) or math.isnan(value):
            raise ValueError(f"{kind.value} value {value} outside [{lo}, {hi}]")
        object.__setattr__(self, "value", value)


def _check_table(p: np.ndarray) -> None:
    if p.shape != (16,):
        raise InvalidBehaviorError(f"expected 16 probabilities, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidBehaviorError("probabilities must be finite")
    if np.any(p < -NORMALIZATION_TOL) or np.any(p > 1 + NORMALIZATION_TOL):
        raise InvalidBehaviorError("probabilities must lie in [0, 1]")
    sums = p.reshape(4, 4).sum(axis=1)
    if np.any(np.abs(sums - 1.0) > NORMALIZATION_TOL):
        raise InvalidBehaviorError(f"each setting pair must sum to 1, got {sums}")
    t = p.reshape(2, 2, 2, 2)
    alice = t.sum(axis=3)  # [x, y, a]
    bob = t.sum(axis=2)  # [x, y, b]
    if np.any(np.abs(alice[:, 0] - alice[:, 1]) > NS_TOL) or np.any(
        np.abs(bob[0] - bob[1]) > NS_TOL
    ):
        raise InvalidBehaviorError("behavior is signalling")


@dataclass(frozen=True, eq=False)
class Behavior:
    """Sixteen joint probabilities ``P(a, b | x, y)`` in the flat layout.

    Construction validates range, normalization (1e-12) and no-signalling
    (1e-9).  The stored array is read-only.
    """

    probs: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        _check_table(p)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __eq__(self, other):
        if not isinstance(other, Behavior):
            return NotImplemented
        return bool(np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash(self.probs.tobytes())

    @property
    def table(self) -> np.ndarray:
        """View indexed ``[x, y, ia, ib]``."""
        return self.probs.reshape(2, 2, 2, 2)

    def p(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.probs[flat_index(x, y, a, b)])

    def marginal_a(self) -> np.ndarray:
        """``P(a | x)`` as a ``[x, ia]`` array (averaged over Bob's setting)."""
        return self.table.sum(axis=3).mean(axis=1)

    def marginal_b(self) -> np.ndarray:
        """``P(b | y)`` as a ``[y, ib]`` array."""
        return self.table.sum(axis=2).mean(axis=0)

    def correlators(self) -> "CorrelatorSet":
        ma = self.marginal_a()
        mb = self.marginal_b()
        ax = ma[:, 0] - ma[:, 1]
        by = mb[:, 0] - mb[:, 1]
        axby = np.einsum("xyab,a,b->xy", self.table, _SIGN, _SIGN)
        return CorrelatorSet(ax, by, axby)

    def to_dict(self) -> dict:
        out = {}
        for x in (1, 2):
            for y in (1, 2):
                for a in OUTCOMES:
                    for b in OUTCOMES:
                        key = f"p[{x}][{y}][{_sym(a)}][{_sym(b)}]"
                        out[key] = float(self.probs[flat_index(x - 1, y - 1, a, b)])
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict, label: str = "") -> "Behavior":
        probs = np.empty(16)
        seen = set()
        for key, value in data.items():
            x, y, a, b = _parse_key(key)
            i = flat_index(x - 1, y - 1, a, b)
            probs[i] = float(value)
            seen.add(i)
        if len(seen) != 16:
            raise InvalidBehaviorError(f"expected 16 distinct entries, got {len(seen)}")
        return cls(probs, label=label)

    @classmethod
    def from_json(cls, text: str, label: str = "") -> "Behavior":
        return cls.from_dict(json.loads(text), label=label)

    @classmethod
    def uniform(cls) -> "Behavior":
        return cls(np.full(16, 0.25), label="uniform")

    @classmethod
    def product(cls, pa: Sequence[float], pb: Sequence[float]) -> "Behavior":
        """Factorised behavior with ``P(+1 | X_x) = pa[x]`` and ``P(+1 | Y_y) = pb[y]``."""
        t = np.empty((2, 2, 2, 2))
        for x in range(2):
            for y in range(2):
                ra = np.array([pa[x], 1 - pa[x]])
                rb = np.array([pb[y], 1 - pb[y]])
                t[x, y] = np.outer(ra, rb)
        return cls(t.reshape(16))


def _sym(v: int) -> str:
    return "+" if v == 1 else "-"


def _parse_key(key: str) -> tuple[int, int, int, int]:
    parts = key.replace("]", "").split("[")
    if len(parts) != 5 or parts[0] != "p":
        raise InvalidBehaviorError(f"malformed behavior key {key!r}")
    try:
        x, y = int(parts[1]), int(parts[2])
        a = {"+": 1, "-": -1}[parts[3]]
        b = {"+": 1, "-": -1}[parts[4]]
    except (ValueError, KeyError) as exc:
        raise InvalidBehaviorError(f"malformed behavior key {key!r}") from exc
    if x not in (1, 2) or y not in (1, 2):
        raise InvalidBehaviorError(f"malformed behavior key {key!r}")
    return x, y, a, b


@dataclass(frozen=True, eq=False)
class CorrelatorSet:
    """Marginal and joint expectations ``<X_x>``, ``<Y_y>``, ``<X_x Y_y>``."""

    ax: np.ndarray
    by: np.ndarray
    axby: np.ndarray

    def __post_init__(self):
        ax = np.array(self.ax, dtype=float).reshape(2)
        by = np.array(self.by, dtype=float).reshape(2)
        axby = np.array(self.axby, dtype=float).reshape(2, 2)
        for arr in (ax, by, axby):
            if np.any(np.abs(arr) > 1 + NORMALIZATION_TOL) or not np.all(np.isfinite(arr)):
                raise InvalidBehaviorError("correlators must lie in [-1, 1]")
            arr.setflags(write=False)
        object.__setattr__(self, "ax", ax)
        object.__setattr__(self, "by", by)
        object.__setattr__(self, "axby", axby)

    def probability_table(self) -> np.ndarray:
        """Unvalidated ``[x, y, ia, ib]`` table from the correlator formula."""
        return 0.25 * (
            1
            + np.einsum("x,a->xa", self.ax, _SIGN)[:, None, :, None]
            + np.einsum("y,b->yb", self.by, _SIGN)[None, :, None, :]
            + np.einsum("xy,a,b->xyab", self.axby, _SIGN, _SIGN)
        )

    def chsh(self) -> float:
        c = self.axby
        return float(c[0, 0] + c[0, 1] + c[1, 0] - c[1, 1])

    def allclose(self, other: "CorrelatorSet", atol: float = 1e-12) -> bool:
        return (
            np.allclose(self.ax, other.ax, atol=atol, rtol=0)
            and np.allclose(self.by, other.by, atol=atol, rtol=0)
            and np.allclose(self.axby, other.axby, atol=atol, rtol=0)
        )


def behavior_from_correlators(c: CorrelatorSet, label: str = "") -> Behavior:
    """Invert the correlator definitions, ``P = (1 + a<A> + b<B> + ab<AB>) / 4``."""
    t = c.probability_table()
    if np.any(t < -NORMALIZATION_TOL):
        raise InvalidBehaviorError(
            f"correlators give a negative probability (min {t.min():.3e})"
        )
    return Behavior(np.clip(t, 0.0, 1.0).reshape(16), label=label)


def hardy_probs(b: Behavior) -> tuple[float, float, float, float]:
    """``(p1, p2, p3, p4)``: P(++|11), P(-+|21), P(+-|12), P(++|22)."""
    return (
        b.p(1, 1, 0, 0),
        b.p(-1, 1, 1, 0),
        b.p(1, -1, 0, 1),
        b.p(1, 1, 1, 1),
    )


@dataclass(frozen=True)
class WitnessReading:
    """Value of a witness plus the zero-constraint residuals it relies on.

    ``exact`` is False when a Hardy/CL residual exceeds ``RESIDUAL_TOL``,
    i.e. the behavior does not actually satisfy the witness relations.
    """

    kind: WitnessKind
    value: float
    residuals: tuple[float, ...] = ()

    @property
    def exact(self) -> bool:
        return all(abs(r) <= RESIDUAL_TOL for r in self.residuals)

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    def __float__(self) -> float:
        return self.value


def witness_value(b: Behavior, kind: WitnessKind | str) -> WitnessReading:
    kind = WitnessKind.parse(kind)
    if kind is WitnessKind.CHSH:
        return WitnessReading(kind, b.correlators().chsh())
    p1, p2, p3, p4 = hardy_probs(b)
    if kind is WitnessKind.HARDY:
        return WitnessReading(kind, p1, (p2, p3, p4))
    return WitnessReading(kind, p1 - p4, (p2, p3))


def min_entropy(b: Behavior, x: int, y: int) -> float:
    """Min-entropy in bits of the outcome pair at settings ``(x, y)`` (0-based)."""
    pmax = float(b.table[x, y].max())
    return -math.log2(pmax)


def guessing_probability(b: Behavior) -> tuple[float, tuple[int, int, int, int]]:
    """Largest of the sixteen probabilities and its ``(x, y, a, b)`` cell.

    Ties go to the first cell in lexicographic ``(x, y, a, b)`` order with
    ``+1`` before ``-1``, which is also the flat order.
    """
    i = int(np.argmax(b.probs))
    x, rest = divmod(i, 8)
    y, rest = divmod(rest, 4)
    ia, ib = divmod(rest, 2)
    return float(b.probs[i]), (x, y, OUTCOMES[ia], OUTCOMES[ib])


def mix(behaviors: Sequence[Behavior], weights: Iterable[float], label: str = "") -> Behavior:
    """Convex combination of behaviors."""
    w = np.asarray(list(weights), dtype=float)
    if len(w) != len(behaviors):
        raise ValueError(f"{len(behaviors)} behaviors but {len(w)} weights")
    if len(w) == 0:
        raise ValueError("need at least one behavior")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    stacked = np.stack([bh.probs for bh in behaviors])
    return Behavior(np.clip(w @ stacked, 0.0, 1.0), label=label)


def chsh_from_witness_probs(p1: float, p2: float, p3: float, p4: float) -> float:
    """CHSH value of any no-signalling behavior from its four Hardy probabilities."""
    return 2.0 + 4.0 * (p1 - p2 - p3 - p4)


def is_factorisable(b: Behavior, tol: float = 1e-9) -> bool:
    ma = b.marginal_a()
    mb = b.marginal_b()
    prod = np.einsum("xa,yb->xyab", ma, mb)
    return bool(np.max(np.abs(prod - b.table)) <= tol)
