"""Highlight anchors: addressable dashboard sub-regions and inline markup.

An anchor id is ``<visualId>.<part>`` where part is one of body, axis-x,
axis-y, legend, title, data. Assistant replies reference anchors through
inline markers of the form ``[[hl:<anchorId>|<label>]]``; the label may
contain ``|``, ``]`` or ``\\`` only escaped as ``\\|``, ``\\]``, ``\\\\``.
The web client renders markers as hoverable links that pulse the anchored
rectangle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import OverlappingSpans, UnknownAnchor
from .geometry import Rect
from .model import DashboardSpec, RegionKind

DEFAULT_HIGHLIGHT_DURATION_MS = 4000

PART_TO_REGION = {
    "body": RegionKind.VISUAL_BODY,
    "axis-x": RegionKind.AXIS_X,
    "axis-y": RegionKind.AXIS_Y,
    "legend": RegionKind.LEGEND,
    "title": RegionKind.TITLE,
    "data": RegionKind.DATA_AREA,
}

REGION_TO_PART = {region: part for part, region in PART_TO_REGION.items()}

_ANCHOR_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


@dataclass(frozen=True)
class HighlightAnchor:
    anchor_id: str
    bounds: Rect

    def to_dict(self) -> dict:
        return {"anchorId": self.anchor_id, "bounds": self.bounds.to_dict()}


@dataclass(frozen=True)
class HighlightCommand:
    anchor: HighlightAnchor
    duration_ms: int = DEFAULT_HIGHLIGHT_DURATION_MS
    sequence_index: int = 0
    style: str = "pulse"

    def to_dict(self) -> dict:
        return {
            "anchorId": self.anchor.anchor_id,
            "bounds": self.anchor.bounds.to_dict(),
            "style": self.style,
            "durationMs": self.duration_ms,
            "sequenceIndex": self.sequence_index,
        }


def anchor_id_for(visual_id: str, region: RegionKind) -> str:
    return f"{visual_id}.{REGION_TO_PART[region]}"


def resolve_anchor(anchor_id: str, spec: DashboardSpec) -> HighlightAnchor:
    """Geometry for an anchor id against a spec with inferred sub-regions.

    Raises UnknownAnchor for a missing visual or a part the visual's kind
    does not expose (for example axis parts on a KPI card).
    """
    visual_id, sep, part = anchor_id.rpartition(".")
    if not sep or part not in PART_TO_REGION:
        raise UnknownAnchor(f"malformed anchor id {anchor_id!r}")
    visual = spec.visual(visual_id)
    if visual is None:
        raise UnknownAnchor(f"anchor {anchor_id!r}: no visual {visual_id!r}")
    region = PART_TO_REGION[part]
    rect = visual.region_rect(region)
    if rect is None:
        raise UnknownAnchor(f"anchor {anchor_id!r}: part {part!r} not available on a {visual.kind.value}")
    return HighlightAnchor(anchor_id=anchor_id, bounds=rect)


# ---------------------------------------------------------------------------
# Inline markup
# ---------------------------------------------------------------------------


def _escape_label(label: str) -> str:
    return label.replace("\\", "\\\\").replace("|", "\\|").replace("]", "\\]")


def render_anchors(text: str, anchors: list[tuple[tuple[int, int], str]]) -> str:
    """Wrap the given spans of plain text in highlight markers.

    Spans are (start, end) indexes into `text`, must lie within it, and
    must not overlap (adjacent is fine). Raises OverlappingSpans otherwise.
    """
    for (start, end), anchor_id in anchors:
        if not (0 <= start <= end <= len(text)):
            raise OverlappingSpans(f"span {start}..{end} outside text of length {len(text)}")
        if not _ANCHOR_ID_RE.match(anchor_id):
            raise ValueError(f"anchor id {anchor_id!r} has characters the markup grammar forbids")
    ordered = sorted(anchors, key=lambda item: item[0])
    for ((_, prev_end), _), ((next_start, _), _) in zip(ordered, ordered[1:]):
        if next_start < prev_end:
            raise OverlappingSpans("anchor spans overlap")

    out: list[str] = []
    cursor = 0
    for (start, end), anchor_id in ordered:
        out.append(text[cursor:start])
        out.append(f"[[hl:{anchor_id}|{_escape_label(text[start:end])}]]")
        cursor = end
    out.append(text[cursor:])
    return "".join(out)


def parse_anchors(marked_up: str) -> tuple[str, list[tuple[tuple[int, int], str]]]:
    """Inverse of render_anchors; tolerant of malformed markers.

    Returns the plain text and the anchor spans in plain-text coordinates.
    Anything that does not scan as a well-formed marker passes through as
    literal text.
    """
    plain: list[str] = []
    anchors: list[tuple[tuple[int, int], str]] = []
    i = 0
    plain_len = 0
    while True:
        start = marked_up.find("[[hl:", i)
        if start == -1:
            tail = marked_up[i:]
            plain.append(tail)
            plain_len += len(tail)
            break
        parsed = _scan_marker(marked_up, start)
        if parsed is None:
            # malformed: emit up to and including the opener, keep scanning
            chunk = marked_up[i : start + 5]
            plain.append(chunk)
            plain_len += len(chunk)
            i = start + 5
            continue
        anchor_id, label, after = parsed
        chunk = marked_up[i:start]
        plain.append(chunk)
        plain_len += len(chunk)
        anchors.append(((plain_len, plain_len + len(label)), anchor_id))
        plain.append(label)
        plain_len += len(label)
        i = after
    return "".join(plain), anchors


def _scan_marker(text: str, start: int) -> tuple[str, str, int] | None:
    """Scan one `[[hl:id|label]]` marker starting at `start`; None if malformed."""
    i = start + 5  # past "[[hl:"
    id_end = text.find("|", i)
    if id_end == -1:
        return None
    anchor_id = text[i:id_end]
    if not _ANCHOR_ID_RE.match(anchor_id):
        return None
    label_chars: list[str] = []
    j = id_end + 1
    while j < len(text):
        ch = text[j]
        if ch == "\\" and j + 1 < len(text) and text[j + 1] in ("|", "]", "\\"):
            label_chars.append(text[j + 1])
            j += 2
            continue
        if ch == "|":
            return None  # unescaped separator inside label
        if ch == "]":
            if text.startswith("]]", j):
                return anchor_id, "".join(label_chars), j + 2
            return None  # lone unescaped ]
        label_chars.append(ch)
        j += 1
    return None  # ran off the end


def strip_anchor(marked_up: str, anchor_id: str) -> str:
    """Replace every marker for `anchor_id` with its bare label."""
    plain, anchors = parse_anchors(marked_up)
    keep = [(span, aid) for span, aid in anchors if aid != anchor_id]
    return render_anchors(plain, keep)
