"""Access to the bundled sample dashboard and trace suite."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .model import DashboardSpec, parse_dashboard_spec
from .subregions import infer_sub_regions


def sample_dashboard_path() -> Path:
    return Path(str(resources.files("vizguide").joinpath("data/sample-dashboard.json")))


def load_sample_document() -> dict:
    return json.loads(sample_dashboard_path().read_text(encoding="utf-8"))


def load_sample_dashboard(inferred: bool = True) -> DashboardSpec:
    spec = parse_dashboard_spec(load_sample_document())
    return infer_sub_regions(spec) if inferred else spec


def trace_dir() -> Path:
    return Path(str(resources.files("vizguide").joinpath("data/traces")))


def sample_data_tokens() -> set[str]:
    """Lower-cased tokens of every display-only sample value in the bundle.

    Walks the `sampleData` subtrees of the shipped document and collects
    the alphanumeric tokens of each leaf value (strings and numbers). This
    is the deny-list the prompt guardrail is checked against.
    """
    document = load_sample_document()
    tokens: set[str] = set()

    def walk(node) -> None:
        if isinstance(node, dict):
            for value in node.values():
                walk(value)
        elif isinstance(node, list):
            for item in node:
                walk(item)
        elif isinstance(node, bool):
            pass
        elif isinstance(node, (int, float)):
            tokens.add(format(node, "g").lower())
        elif isinstance(node, str):
            for run in _alnum_runs(node):
                tokens.add(run.lower())

    for visual in document.get("visuals", []):
        if "sampleData" in visual:
            walk(visual["sampleData"])
    return tokens


def _alnum_runs(text: str) -> list[str]:
    runs: list[str] = []
    current: list[str] = []
    for ch in text:
        if ch.isalnum():
            current.append(ch)
        elif current:
            runs.append("".join(current))
            current = []
    if current:
        runs.append("".join(current))
    return runs
