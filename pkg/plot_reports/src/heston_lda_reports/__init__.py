"""Figures from heston-lda CSV artifacts.

This package never computes model quantities; it renders what the CSV
files already contain.  One figure per call, written as PNG.
"""

from .render import KINDS, PlotSpec, ReportError, render_report

__version__ = "0.1.0"

__all__ = ["KINDS", "PlotSpec", "ReportError", "render_report", "__version__"]
