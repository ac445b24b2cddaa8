"""Rectangles and polygon clipping in page-pixel coordinates.

Coordinates follow the CSS convention: origin top-left, x grows right,
y grows down. Rectangles are half-open: they contain their left/top
edges and exclude their right/bottom edges, which removes ambiguity for
points sitting exactly on a shared strip boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateGeometry

Point = tuple[float, float]

# Tolerance for near-parallel edges and near-zero areas.
EPS = 1e-9


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains(self, px: float, py: float) -> bool:
        """Half-open containment: left/top edges in, right/bottom out."""
        return self.x <= px < self.right and self.y <= py < self.bottom

    def contains_rect(self, other: "Rect") -> bool:
        return (
            other.x >= self.x - EPS
            and other.y >= self.y - EPS
            and other.right <= self.right + EPS
            and other.bottom <= self.bottom + EPS
        )

    def intersect(self, other: "Rect") -> "Rect | None":
        x0 = max(self.x, other.x)
        y0 = max(self.y, other.y)
        x1 = min(self.right, other.right)
        y1 = min(self.bottom, other.bottom)
        # sub-epsilon slivers are rounding noise, not real overlap
        if x1 - x0 <= EPS or y1 - y0 <= EPS:
            return None
        return Rect(x0, y0, x1 - x0, y1 - y0)

    def overlaps(self, other: "Rect") -> bool:
        return self.intersect(other) is not None

    def corners(self) -> list[Point]:
        """Corner loop in drawing order (clockwise in screen coords)."""
        return [
            (self.x, self.y),
            (self.right, self.y),
            (self.right, self.bottom),
            (self.x, self.bottom),
        ]

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, data: dict) -> "Rect":
        return cls(float(data["x"]), float(data["y"]), float(data["w"]), float(data["h"]))


def signed_area(points: Sequence[Point]) -> float:
    """Shoelace formula; sign depends on winding."""
    n = len(points)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def polygon_area(points: Sequence[Point]) -> float:
    return abs(signed_area(points))


def bounding_box(points: Iterable[Point]) -> Rect:
    pts = list(points)
    if not pts:
        return Rect(0.0, 0.0, 0.0, 0.0)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return Rect(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))


def _segments_properly_intersect(a: Point, b: Point, c: Point, d: Point) -> bool:
    """True when segments ab and cd cross at an interior point."""

    def orient(p: Point, q: Point, r: Point) -> float:
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < -EPS) and (o3 * o4 < -EPS)


def is_self_intersecting(points: Sequence[Point]) -> bool:
    """O(n^2) proper-crossing test, skipping adjacent edges.

    Lasso paths are short enough that the quadratic scan is cheap.
    """
    n = len(points)
    if n < 4:
        return False
    for i in range(n):
        a, b = points[i], points[(i + 1) % n]
        for j in range(i + 1, n):
            # skip edges sharing a vertex (adjacent, incl. the wrap pair)
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = points[j], points[(j + 1) % n]
            if _segments_properly_intersect(a, b, c, d):
                return True
    return False


def normalize_path(points: Sequence[Point]) -> list[Point]:
    """Normalize a freehand path into a simple polygon.

    Consecutive duplicate points are dropped. Paths that remain degenerate
    (fewer than 3 distinct points, zero enclosed area, or self-crossing)
    collapse to their bounding box: users scribble, and the box is the
    honest reading of a scribble. The result may still have zero area;
    callers that need area raise DegenerateGeometry on that.
    """
    deduped: list[Point] = []
    for p in points:
        fp = (float(p[0]), float(p[1]))
        if not deduped or (abs(fp[0] - deduped[-1][0]) > EPS or abs(fp[1] - deduped[-1][1]) > EPS):
            deduped.append(fp)
    # the implicit closing edge can also duplicate the first point
    while len(deduped) > 1 and abs(deduped[0][0] - deduped[-1][0]) <= EPS and abs(deduped[0][1] - deduped[-1][1]) <= EPS:
        deduped.pop()

    if len(deduped) >= 3 and not is_self_intersecting(deduped) and polygon_area(deduped) > EPS:
        return deduped
    return bounding_box(deduped).corners() if deduped else []


def clip_polygon_to_rect(points: Sequence[Point], rect: Rect) -> list[Point]:
    """Sutherland-Hodgman clip of a simple polygon against an axis-aligned rect."""
    # Each clip stage keeps the half-plane on the rect side of one edge.
    stages = (
        (lambda p: p[0] >= rect.x, lambda a, b: _cross_x(a, b, rect.x)),
        (lambda p: p[0] <= rect.right, lambda a, b: _cross_x(a, b, rect.right)),
        (lambda p: p[1] >= rect.y, lambda a, b: _cross_y(a, b, rect.y)),
        (lambda p: p[1] <= rect.bottom, lambda a, b: _cross_y(a, b, rect.bottom)),
    )
    output = list(points)
    for inside, crossing in stages:
        if not output:
            return []
        current, output = output, []
        prev = current[-1]
        prev_in = inside(prev)
        for vertex in current:
            cur_in = inside(vertex)
            if cur_in:
                if not prev_in:
                    output.append(crossing(prev, vertex))
                output.append(vertex)
            elif prev_in:
                output.append(crossing(prev, vertex))
            prev, prev_in = vertex, cur_in
    return output


def _cross_x(a: Point, b: Point, x: float) -> Point:
    t = (x - a[0]) / (b[0] - a[0])
    return (x, a[1] + t * (b[1] - a[1]))


def _cross_y(a: Point, b: Point, y: float) -> Point:
    t = (y - a[1]) / (b[1] - a[1])
    return (a[0] + t * (b[0] - a[0]), y)


def polygon_rect_intersection_area(points: Sequence[Point], rect: Rect) -> float:
    """Exact overlap area between a normalized polygon and a rectangle.

    Raises DegenerateGeometry when either input has zero area after
    normalization.
    """
    if rect.w <= 0 or rect.h <= 0:
        raise DegenerateGeometry("rectangle has non-positive extent")
    normalized = normalize_path(points)
    if polygon_area(normalized) <= EPS:
        raise DegenerateGeometry("path encloses no area after normalization")
    clipped = clip_polygon_to_rect(normalized, rect)
    return polygon_area(clipped)
