"""Resolve lasso polygons and hover points to dashboard sub-regions.

A lasso is matched to the visual it overlaps most (by intersection area),
with z-order breaking ties. Within that visual a specific sub-region
(axis, legend, title, filter control) claims the selection when the lasso
covers at least `SPECIFICITY_THRESHOLD` of it; otherwise the region with
the largest intersection wins, preferring the more specific of equals so
a lasso inside the plot area reads as the plotted data, not the whole
visual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import NoHit
from .geometry import Point, Rect, normalize_path, polygon_area, polygon_rect_intersection_area
from .model import DashboardSpec, RegionKind, VisualSpec

# Fraction of a specific sub-region a lasso must cover to claim it over
# the visual body / data area. The tight-rectangle-around-an-axis gesture
# clears this easily; a loose scribble across the chart does not.
SPECIFICITY_THRESHOLD = 0.5

SPECIFIC_REGIONS = (
    RegionKind.AXIS_Y,
    RegionKind.AXIS_X,
    RegionKind.LEGEND,
    RegionKind.TITLE,
    RegionKind.FILTER_CONTROL,
)

# Lower index = more specific; used only to break exact area ties.
_REGION_PRECEDENCE = {
    RegionKind.AXIS_Y: 0,
    RegionKind.AXIS_X: 1,
    RegionKind.LEGEND: 2,
    RegionKind.TITLE: 3,
    RegionKind.FILTER_CONTROL: 4,
    RegionKind.DATA_AREA: 5,
    RegionKind.VISUAL_BODY: 6,
}


@dataclass(frozen=True)
class LassoPath:
    points: tuple[Point, ...]

    @classmethod
    def of(cls, points: Sequence[Sequence[float]]) -> "LassoPath":
        return cls(tuple((float(p[0]), float(p[1])) for p in points))


@dataclass(frozen=True)
class RegionCandidate:
    visual_id: str
    region: RegionKind
    overlap_fraction: float
    intersection_area: float
    anchor_bounds: Rect


@dataclass(frozen=True)
class RegionHit:
    visual_id: str
    region: RegionKind
    overlap_fraction: float
    anchor_bounds: Rect
    alternates: tuple[RegionCandidate, ...] = ()

    def to_dict(self) -> dict:
        return {
            "visualId": self.visual_id,
            "region": self.region.value,
            "overlapFraction": self.overlap_fraction,
            "anchorBounds": self.anchor_bounds.to_dict(),
            "alternates": [
                {
                    "visualId": a.visual_id,
                    "region": a.region.value,
                    "overlapFraction": a.overlap_fraction,
                }
                for a in self.alternates
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegionHit":
        return cls(
            visual_id=data["visualId"],
            region=RegionKind(data["region"]),
            overlap_fraction=float(data["overlapFraction"]),
            anchor_bounds=Rect.from_dict(data["anchorBounds"]),
            alternates=tuple(
                RegionCandidate(
                    visual_id=a["visualId"],
                    region=RegionKind(a["region"]),
                    overlap_fraction=float(a["overlapFraction"]),
                    intersection_area=0.0,
                    anchor_bounds=Rect.from_dict(data["anchorBounds"]),
                )
                for a in data.get("alternates", [])
            ),
        )


def _region_rects(visual: VisualSpec) -> list[tuple[RegionKind, Rect]]:
    rects = [(RegionKind.VISUAL_BODY, visual.bounds)]
    rects.extend((region, rect) for region, rect in visual.regions.items())
    return rects


def _rank_candidates(candidates: list[RegionCandidate]) -> list[RegionCandidate]:
    """Order within one visual: qualifying specific regions first (largest
    covered area first), then everything else by intersection area."""
    qualifying = [
        c
        for c in candidates
        if c.region in SPECIFIC_REGIONS and c.overlap_fraction >= SPECIFICITY_THRESHOLD
    ]
    qualifying.sort(key=lambda c: (-c.intersection_area, _REGION_PRECEDENCE[c.region]))
    rest = [c for c in candidates if c not in qualifying]
    rest.sort(key=lambda c: (-c.intersection_area, _REGION_PRECEDENCE[c.region]))
    return qualifying + rest


def resolve_lasso(path: LassoPath, spec: DashboardSpec, max_alternates: int = 5) -> RegionHit:
    """Match a lasso path to the most plausible (visual, sub-region) pair.

    Requires a spec with inferred sub-regions. Raises NoHit when the path
    overlaps no visual, and DegenerateGeometry when it encloses no area.
    """
    polygon = normalize_path(path.points)
    # Probe area once so degenerate paths fail uniformly.
    polygon_rect_intersection_area(polygon, spec.page_bounds)

    per_visual: list[tuple[float, int, str, list[RegionCandidate]]] = []
    for visual in spec.visuals:
        visual_area = polygon_rect_intersection_area(polygon, visual.bounds)
        if visual_area <= 0:
            continue
        candidates: list[RegionCandidate] = []
        for region, rect in _region_rects(visual):
            if rect.area <= 0:
                continue
            inter = polygon_rect_intersection_area(polygon, rect)
            if inter <= 0:
                continue
            candidates.append(
                RegionCandidate(
                    visual_id=visual.id,
                    region=region,
                    overlap_fraction=min(inter / rect.area, 1.0),
                    intersection_area=inter,
                    anchor_bounds=rect,
                )
            )
        if candidates:
            per_visual.append((visual_area, spec.z_index(visual.id), visual.id, candidates))

    if not per_visual:
        raise NoHit("lasso selection touches no visual")

    # Largest overlap wins; the topmost (highest z) then lexicographically
    # smallest id break ties.
    per_visual.sort(key=lambda item: (-item[0], -item[1], item[2]))

    ordered: list[RegionCandidate] = []
    for _, _, _, candidates in per_visual:
        ordered.extend(_rank_candidates(candidates))

    winner = ordered[0]
    return RegionHit(
        visual_id=winner.visual_id,
        region=winner.region,
        overlap_fraction=winner.overlap_fraction,
        anchor_bounds=winner.anchor_bounds,
        alternates=tuple(ordered[1 : 1 + max_alternates]),
    )


def resolve_point(point: Point, spec: DashboardSpec) -> RegionHit:
    """Hover resolution: topmost visual under the point, most specific
    sub-region containing it (rectangles own their left/top edges)."""
    px, py = float(point[0]), float(point[1])
    for visual in reversed(spec.visuals):  # topmost first
        if not visual.bounds.contains(px, py):
            continue
        best: tuple[int, RegionKind, Rect] | None = None
        for region, rect in _region_rects(visual):
            if rect.contains(px, py):
                precedence = _REGION_PRECEDENCE[region]
                if best is None or precedence < best[0]:
                    best = (precedence, region, rect)
        assert best is not None  # VISUAL_BODY contains the point
        _, region, rect = best
        return RegionHit(
            visual_id=visual.id,
            region=region,
            overlap_fraction=1.0,
            anchor_bounds=rect,
        )
    raise NoHit("point lies outside every visual")
