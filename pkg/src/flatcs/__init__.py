"""Chern-Simons functionals, degrees of gauge transformations and flat connections on the 3-torus."""
from __future__ import annotations

__version__ = "0.1.0"

from .lie import LieAlgebraSpec  # noqa: E402
from .forms import VForm  # noqa: E402

__all__ = ["LieAlgebraSpec", "VForm", "__version__"]
