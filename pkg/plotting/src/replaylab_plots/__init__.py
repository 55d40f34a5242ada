"""Figure rendering for replaylab harness CSVs."""

from .figures import FigureSpec, Series, plot_curves, plot_heatmap

__all__ = ["FigureSpec", "Series", "plot_curves", "plot_heatmap"]
__version__ = "0.1.0"
