"""Figure rendering for roughflow report files (CSV / JSON / field binaries)."""

__version__ = "0.1.0"

from .render import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render", "__version__"]
