"""Multimodal onboarding assistant service for visualization dashboards.

A dashboard spec goes in; out comes a chat/voice/lasso-driven guide that
explains how to read and operate the dashboard, anchored to pulsating
visual highlights, without ever answering from the data itself.
"""

from .errors import VizguideError
from .model import DashboardSpec, RegionKind, VisualKind, parse_dashboard_spec, serialize_dashboard_spec
from .subregions import infer_sub_regions

__all__ = [
    "DashboardSpec",
    "RegionKind",
    "VisualKind",
    "VizguideError",
    "infer_sub_regions",
    "parse_dashboard_spec",
    "serialize_dashboard_spec",
]

__version__ = "0.1.0"
