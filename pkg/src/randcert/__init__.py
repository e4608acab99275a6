"""Certified randomness of 2-2-2 Bell correlations from CHSH, Hardy and CL witnesses."""

from .behavior import (
    Behavior,
    CorrelatorSet,
    WitnessKind,
    WitnessSpec,
    guessing_probability,
    min_entropy,
    witness_value,
)
from .bounds import BoundModel, DomainError, guaranteed_bound
from .sdp import DiResult, InfeasibleWitnessError, Level, di_guaranteed, ns_lp
from .vertices import catalog, local_deterministic, pr_box

__version__ = "0.1.0"

__all__ = [
    "Behavior",
    "CorrelatorSet",
    "WitnessKind",
    "WitnessSpec",
    "guessing_probability",
    "min_entropy",
    "witness_value",
    "BoundModel",
    "DomainError",
    "guaranteed_bound",
    "DiResult",
    "InfeasibleWitnessError",
    "Level",
    "di_guaranteed",
    "ns_lp",
    "catalog",
    "local_deterministic",
    "pr_box",
    "__version__",
]
