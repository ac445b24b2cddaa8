"""Heuristic sub-region geometry for visuals that do not declare it.

Dashboard authors rarely annotate where the title band, axis strips, or
legend sit inside a visual, so we infer them. Rendered label text has a
roughly fixed pixel size regardless of chart size, which is why the strip
sizes below are fixed pixel values; the page-relative fractions only kick
in to shrink them on absurdly small pages.

Strips are carved from the visual bounds in a fixed order (title, legend,
x-axis, y-axis) so the resulting rectangles are pairwise disjoint, and
whatever content box remains becomes the data area (or the filter control
for slicers). A visual too small to fit its strips plus a usable content
box is a GeometryError.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import GeometryError
from .geometry import Rect
from .model import (
    DashboardSpec,
    KIND_REGIONS,
    LegendPosition,
    RegionKind,
    VisualKind,
    VisualSpec,
)

# strip = min(cap_px, fraction * page dimension); on any normal-sized page
# the cap wins, giving label-text-sized strips.
TITLE_FRACTION = 0.10
TITLE_CAP_PX = 30.0
AXIS_Y_FRACTION = 0.12
AXIS_Y_CAP_PX = 48.0
AXIS_X_FRACTION = 0.12
AXIS_X_CAP_PX = 36.0
LEGEND_FRACTION = 0.15  # of the visual's own dimension on the legend side


def _strip_size(fraction: float, cap: float, page_dim: float) -> float:
    return min(cap, fraction * page_dim)


# Each cut derives the remainder from the strip's own edges with the same
# expressions _shrink_past uses, so re-running inference over already
# materialized strips reproduces bit-identical rectangles.


def _cut_top(content: Rect, size: float) -> tuple[Rect, Rect]:
    strip = Rect(content.x, content.y, content.w, size)
    rest = Rect(content.x, strip.bottom, content.w, content.bottom - strip.bottom)
    return strip, rest


def _cut_bottom(content: Rect, size: float) -> tuple[Rect, Rect]:
    strip = Rect(content.x, content.bottom - size, content.w, size)
    rest = Rect(content.x, content.y, content.w, strip.y - content.y)
    return strip, rest


def _cut_left(content: Rect, size: float) -> tuple[Rect, Rect]:
    strip = Rect(content.x, content.y, size, content.h)
    rest = Rect(strip.right, content.y, content.right - strip.right, content.h)
    return strip, rest


def _cut_right(content: Rect, size: float) -> tuple[Rect, Rect]:
    strip = Rect(content.right - size, content.y, size, content.h)
    rest = Rect(content.x, content.y, strip.x - content.x, content.h)
    return strip, rest


_LEGEND_CUTS = {
    LegendPosition.TOP: _cut_top,
    LegendPosition.TOP_RIGHT: _cut_top,
    LegendPosition.BOTTOM: _cut_bottom,
    LegendPosition.LEFT: _cut_left,
    LegendPosition.RIGHT: _cut_right,
}


def _shrink_past(content: Rect, strip: Rect) -> Rect:
    """Largest sub-rectangle of `content` that avoids `strip`.

    Used when a strip rectangle was author-provided and may not align
    exactly with a content-box edge.
    """
    if not content.overlaps(strip):
        return content
    candidates = [
        Rect(content.x, content.y, strip.x - content.x, content.h),          # left of strip
        Rect(strip.right, content.y, content.right - strip.right, content.h),  # right of strip
        Rect(content.x, content.y, content.w, strip.y - content.y),          # above strip
        Rect(content.x, strip.bottom, content.w, content.bottom - strip.bottom),  # below strip
    ]
    best = max(candidates, key=lambda r: max(r.w, 0.0) * max(r.h, 0.0))
    if best.w <= 0 or best.h <= 0:
        raise GeometryError("strips leave no content area (visual too small)")
    return best


def _infer_visual(visual: VisualSpec, page: Rect) -> VisualSpec:
    allowed = KIND_REGIONS[visual.kind]
    if not allowed:
        return replace(visual, regions={})

    regions: dict[RegionKind, Rect] = {}
    content = visual.bounds

    def carve(region: RegionKind, provided: Rect | None, cut, size: float) -> None:
        nonlocal content
        if provided is not None:
            regions[region] = provided
            content = _shrink_past(content, provided)
            return
        if size >= min(content.w, content.h) or size <= 0:
            raise GeometryError(
                f"visual {visual.id}: {region.value} strip ({size:.0f}px) does not fit in "
                f"{visual.bounds.w:.0f}x{visual.bounds.h:.0f} (visual too small)"
            )
        strip, rest = cut(content, size)
        regions[region] = strip
        content = rest

    if RegionKind.TITLE in allowed:
        provided = visual.regions.get(RegionKind.TITLE)
        carve(RegionKind.TITLE, provided, _cut_top, _strip_size(TITLE_FRACTION, TITLE_CAP_PX, page.h))

    legend = visual.encodings.legend
    if legend is not None and RegionKind.LEGEND in allowed:
        cut = _LEGEND_CUTS[legend.position]
        side_dim = visual.bounds.h if cut in (_cut_top, _cut_bottom) else visual.bounds.w
        carve(RegionKind.LEGEND, legend.sub_bounds, cut, LEGEND_FRACTION * side_dim)

    if visual.encodings.axis_x is not None and RegionKind.AXIS_X in allowed:
        carve(
            RegionKind.AXIS_X,
            visual.encodings.axis_x.sub_bounds,
            _cut_bottom,
            _strip_size(AXIS_X_FRACTION, AXIS_X_CAP_PX, page.h),
        )
    if visual.encodings.axis_y is not None and RegionKind.AXIS_Y in allowed:
        carve(
            RegionKind.AXIS_Y,
            visual.encodings.axis_y.sub_bounds,
            _cut_left,
            _strip_size(AXIS_Y_FRACTION, AXIS_Y_CAP_PX, page.w),
        )

    if content.w <= 0 or content.h <= 0:
        raise GeometryError(f"visual {visual.id}: strips leave no content area (visual too small)")

    if visual.kind is VisualKind.SLICER:
        regions[RegionKind.FILTER_CONTROL] = content
    elif RegionKind.DATA_AREA in allowed:
        regions[RegionKind.DATA_AREA] = content

    encodings = visual.encodings
    if encodings.axis_x is not None and RegionKind.AXIS_X in regions:
        encodings = replace(encodings, axis_x=replace(encodings.axis_x, sub_bounds=regions[RegionKind.AXIS_X]))
    if encodings.axis_y is not None and RegionKind.AXIS_Y in regions:
        encodings = replace(encodings, axis_y=replace(encodings.axis_y, sub_bounds=regions[RegionKind.AXIS_Y]))
    if encodings.legend is not None and RegionKind.LEGEND in regions:
        encodings = replace(encodings, legend=replace(encodings.legend, sub_bounds=regions[RegionKind.LEGEND]))

    return replace(visual, encodings=encodings, regions=regions)


def infer_sub_regions(spec: DashboardSpec) -> DashboardSpec:
    """Fill in missing sub-region geometry for every visual.

    Author-provided subBounds are kept verbatim; only the gaps are
    inferred. Running the inference twice yields identical geometry.
    """
    return replace(spec, visuals=tuple(_infer_visual(v, spec.page_bounds) for v in spec.visuals))
