"""Flow feature extraction and labelling for classic PCAP captures."""

import json as _json

from ._core import (
    ExportError,
    LabelError,
    PcapError,
    ProfileError,
    ScenarioError,
    extract,
    gen,
    label,
    profiles,
    stats,
)
from ._core import export_json as _export_json

__all__ = [
    "ExportError",
    "LabelError",
    "PcapError",
    "ProfileError",
    "ScenarioError",
    "export",
    "extract",
    "gen",
    "label",
    "profiles",
    "stats",
]


def export(inputs, **kwargs):
    """Export one CSV per capture; returns the run summary as a dict."""
    if isinstance(inputs, (str, bytes)) or hasattr(inputs, "__fspath__"):
        inputs = [inputs]
    return _json.loads(_export_json([str(p) for p in inputs], **kwargs))
