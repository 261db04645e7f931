"""mixsim-plot: figure rendering over the mixsim results CSV schema."""

from .figures import FigureError, FigureSpec, parse_spec, render

__version__ = "0.1.0"

__all__ = ["FigureError", "FigureSpec", "parse_spec", "render", "__version__"]
