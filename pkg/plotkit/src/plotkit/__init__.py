"""Offline figure generation from isomctl run directories.

Consumes only the published run artifacts: comma-separated CSV files with
header rows (``field.csv``, ``spectrogram.csv``, ``trajectory.csv``) and
the run's ``manifest.json``.
"""

__version__ = "0.1.0"

from .bundle import BundleError, FigureBundle          # noqa: F401
from .render import render_three_panel                 # noqa: F401
