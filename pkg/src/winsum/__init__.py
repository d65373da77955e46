"""Windowed pointer-generator summarization for arbitrarily long documents."""

__version__ = "0.1.0"

from .kernels import backend_name

__all__ = ["backend_name", "__version__"]
