"""The 24 extreme points of the 2-2-2 no-signalling polytope.

Numbering follows the usual published tables: PR-Box 1..8 and LD 1..16.
Rows are the setting pairs X1Y1, X1Y2, X2Y1, X2Y2; columns are the outcome
pairs ++, +-, -+, --.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behavior import Behavior

__all__ = [
    "PR_PATTERNS",
    "LD_OUTCOMES",
    "HARDY_LD",
    "CL_LD",
    "VertexCatalog",
    "catalog",
    "pr_box",
    "local_deterministic",
]

# "c": correlated row (1/2, 0, 0, 1/2); "a": anticorrelated row (0, 1/2, 1/2, 0)
PR_PATTERNS = {
    1: "ccca",
    2: "aaac",
    3: "ccac",
    4: "aaca",
    5: "cacc",
    6: "acaa",
    7: "accc",
    8: "caaa",
}

# Deterministic outcomes (a1, a2, b1, b2).  LD 9's printed X2Y2 row reads
# (1, 0, 1, 0); the only deterministic point matching its other three rows
# has X2Y2 -> (-1, +1), which is what is stored here.
LD_OUTCOMES = {
    1: (1, 1, 1, 1),
    2: (1, 1, -1, -1),
    3: (-1, -1, 1, 1),
    4: (-1, -1, -1, -1),
    5: (1, 1, 1, -1),
    6: (1, 1, -1, 1),
    7: (-1, -1, 1, -1),
    8: (-1, -1, -1, 1),
    9: (1, -1, 1, 1),
    10: (1, -1, -1, -1),
    11: (-1, 1, 1, 1),
    12: (-1, 1, -1, -1),
    13: (1, -1, 1, -1),
    14: (1, -1, -1, 1),
    15: (-1, 1, 1, -1),
    16: (-1, 1, -1, 1),
}

# LD points compatible with the Hardy zeros, resp. the two CL zeros.
HARDY_LD = (4, 8, 12, 14, 15)
CL_LD = (1, 4, 6, 8, 11, 12, 14, 15, 16)

_ROWS = {"c": (0.5, 0.0, 0.0, 0.5), "a": (0.0, 0.5, 0.5, 0.0)}


def pr_box(n: int) -> Behavior:
    pattern = PR_PATTERNS[n]
    probs = np.array([v for ch in pattern for v in _ROWS[ch]])
    return Behavior(probs, label=f"PR-Box {n}")


def local_deterministic(n: int) -> Behavior:
    a1, a2, b1, b2 = LD_OUTCOMES[n]
    t = np.zeros((2, 2, 2, 2))
    for x, a in enumerate((a1, a2)):
        for y, b in enumerate((b1, b2)):
            t[x, y, 0 if a == 1 else 1, 0 if b == 1 else 1] = 1.0
    return Behavior(t.reshape(16), label=f"LD {n}")


@dataclass(frozen=True)
class VertexCatalog:
    pr: tuple[Behavior, ...]
    ld: tuple[Behavior, ...]

    def all(self) -> tuple[Behavior, ...]:
        return self.pr + self.ld

    def matrix(self) -> np.ndarray:
        """``(24, 16)`` array, PR boxes first."""
        return np.stack([v.probs for v in self.all()])


_CATALOG = VertexCatalog(
    pr=tuple(pr_box(n) for n in range(1, 9)),
    ld=tuple(local_deterministic(n) for n in range(1, 17)),
)


def catalog() -> VertexCatalog:
    return _CATALOG
