"""Bridge server and plot emitter companion tools for the distval engine."""

from .bridge import BridgeModel, serve_bridge
from .plots import PlotJob, SchemaError, render

__version__ = "0.1.0"
