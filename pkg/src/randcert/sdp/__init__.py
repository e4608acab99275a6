"""NPA relaxations, the interior-point solver and the guaranteed-randomness programs."""

from .guaranteed import *  # noqa: F401,F403
from .guaranteed import __all__ as _g
from .npa import *  # noqa: F401,F403
from .npa import __all__ as _n
from .solver import *  # noqa: F401,F403
from .solver import __all__ as _s

__all__ = sorted(set(_g) | set(_n) | set(_s))
