"""Gaussian-process latent force model virtual sensing (bindings to the C++ core)."""

from ._core import *  # noqa: F401,F403
from ._core import __version__

__all__ = [name for name in dir() if not name.startswith("_")]
