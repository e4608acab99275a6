"""Multistart constrained optimisation, device-dependent randomness and extremality tools."""

from .auglag import *  # noqa: F401,F403
from .auglag import __all__ as _a
from .extremal import *  # noqa: F401,F403
from .extremal import __all__ as _e
from .randomness import *  # noqa: F401,F403
from .randomness import __all__ as _r

__all__ = [*_a, *_r, *_e]
