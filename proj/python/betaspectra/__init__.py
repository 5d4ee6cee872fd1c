"""Level statistics of 1-D random Schrodinger operators, their limit SDEs,
and the Gaussian beta ensemble, backed by the C++ core."""

try:
    from ._betaspectra import *  # noqa: F401,F403
except ImportError:  # extension built out-of-tree (plain CMake builds)
    from _betaspectra import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
