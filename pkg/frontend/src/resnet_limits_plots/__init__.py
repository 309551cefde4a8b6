"""Figure scripts for resnet-limits experiment outputs."""

from .figures import FIGURE_IDS, FigureSpec, render
from .io import SchemaError, Table, read_curve, read_summary, read_table

__version__ = "0.1.0"
