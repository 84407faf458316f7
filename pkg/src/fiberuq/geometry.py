"""Exact 2D polygon primitives used by every probability model.

All polygons live in attribute space. A trait is a simple polygon stored
counterclockwise; points exactly on its boundary count as interior (the
same tie-break is used everywhere in the package).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TraitError

# Clip outputs with less area than this (attribute units squared) are
# collapsed to the empty polygon: numerical noise at tangential contact.
DEGENERATE_CLIP_AREA = 1e-15

# On-edge tolerance for point tests, absolute, applied after translating
# the query into the polygon's bounding-box frame.
ON_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class Rect2:
    """Axis-aligned rectangle x0 <= x1, y0 <= y1."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 <= self.x1 and self.y0 <= self.y1):
            raise ValueError(f"invalid rectangle bounds {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def area(self) -> float:
        return self.width * self.height

    def intersects(self, other: "Rect2") -> bool:
        return not (
            self.x1 < other.x0
            or other.x1 < self.x0
            or self.y1 < other.y0
            or other.y1 < self.y0
        )


@dataclass(frozen=True)
class TraitPolygon:
    """Simple polygon in attribute space, normalized to counterclockwise order.

    Construction collapses duplicated consecutive vertices, drops a closing
    vertex equal to the first, rejects self-intersecting or zero-area input,
    and reverses clockwise input.
    """

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise TraitError("trait vertices must be an (n, 2) array")
        if not np.isfinite(verts).all():
            raise TraitError("trait vertices must be finite")
        verts = _collapse_duplicates(verts)
        if len(verts) < 3:
            raise TraitError(f"trait needs at least 3 distinct vertices, got {len(verts)}")
        area = _signed_area(verts)
        if abs(area) < DEGENERATE_CLIP_AREA:
            raise TraitError("trait polygon has zero area")
        if area < 0.0:
            verts = verts[::-1].copy()
        if not _is_simple(verts):
            raise TraitError("trait polygon is self-intersecting")
        object.__setattr__(self, "vertices", verts)
        self.vertices.setflags(write=False)

    def __len__(self) -> int:
        return len(self.vertices)


def _collapse_duplicates(verts: np.ndarray) -> np.ndarray:
    keep = [verts[0]]
    for v in verts[1:]:
        if not (v[0] == keep[-1][0] and v[1] == keep[-1][1]):
            keep.append(v)
    if len(keep) > 1 and keep[0][0] == keep[-1][0] and keep[0][1] == keep[-1][1]:
        keep.pop()
    return np.array(keep, dtype=float)


def _signed_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def _segments_properly_cross(p, q, r, s) -> bool:
    """True when open segments pq and rs intersect (including collinear overlap)."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(r, s, p)
    d2 = orient(r, s, q)
    d3 = orient(p, q, r)
    d4 = orient(p, q, s)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    if d1 == 0 and on_segment(r, s, p):
        return True
    if d2 == 0 and on_segment(r, s, q):
        return True
    if d3 == 0 and on_segment(p, q, r):
        return True
    if d4 == 0 and on_segment(p, q, s):
        return True
    return False


def _is_simple(verts: np.ndarray) -> bool:
    n = len(verts)
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                # adjacent edges share an endpoint by construction
                continue
            r, s = verts[j], verts[(j + 1) % n]
            if _segments_properly_cross(p, q, r, s):
                return False
    return True


def signed_area(poly: TraitPolygon | np.ndarray) -> float:
    """Shoelace area: positive for counterclockwise, negative for clockwise."""
    verts = poly.vertices if isinstance(poly, TraitPolygon) else np.asarray(poly, float)
    return _signed_area(verts)


def bounding_rect(poly: TraitPolygon | np.ndarray) -> Rect2:
    """Tight axis-aligned bounds of a polygon."""
    verts = poly.vertices if isinstance(poly, TraitPolygon) else np.asarray(poly, float)
    return Rect2(
        float(verts[:, 0].min()),
        float(verts[:, 0].max()),
        float(verts[:, 1].min()),
        float(verts[:, 1].max()),
    )


def point_in_polygon(p, poly: TraitPolygon | np.ndarray) -> bool:
    """Inside-or-on-boundary test for a single point."""
    verts = poly.vertices if isinstance(poly, TraitPolygon) else np.asarray(poly, float)
    return bool(
        points_in_polygon(np.asarray(p, float).reshape(1, 2), verts)[0]
    )


def points_in_polygon(points: np.ndarray, poly: TraitPolygon | np.ndarray) -> np.ndarray:
    """Vectorized inside-or-on-boundary test.

    Crossing-number test with a boundary override: points within
    ON_EDGE_EPS of any edge (measured in the polygon's bounding-box frame)
    count as interior.
    """
    verts = poly.vertices if isinstance(poly, TraitPolygon) else np.asarray(poly, float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    # translate to the local bounding-box frame for a scale-robust epsilon
    shift = verts.min(axis=0)
    vx = verts[:, 0] - shift[0]
    vy = verts[:, 1] - shift[1]
    px = pts[:, 0] - shift[0]
    py = pts[:, 1] - shift[1]

    vxn = np.roll(vx, -1)
    vyn = np.roll(vy, -1)

    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    for a_x, a_y, b_x, b_y in zip(vx, vy, vxn, vyn):
        ex, ey = b_x - a_x, b_y - a_y
        # distance to the segment
        qx = px - a_x
        qy = py - a_y
        seg_len2 = ex * ex + ey * ey
        if seg_len2 > 0.0:
            t = np.clip((qx * ex + qy * ey) / seg_len2, 0.0, 1.0)
        else:
            t = 0.0
        dx = qx - t * ex
        dy = qy - t * ey
        on_edge |= dx * dx + dy * dy <= ON_EDGE_EPS * ON_EDGE_EPS
        # half-open crossing rule
        crosses = (a_y > py) != (b_y > py)
        if np.any(crosses):
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = a_x + (py - a_y) * ex / np.where(ey == 0.0, 1.0, ey)
            inside ^= crosses & (px < x_at)
    return inside | on_edge


def clip_to_rect(poly: TraitPolygon | np.ndarray, r: Rect2) -> np.ndarray:
    """Sutherland-Hodgman clip of a simple CCW polygon against a rectangle.

    Returns the intersection polygon as an (n, 2) array in CCW order, or an
    empty (0, 2) array when the intersection is (numerically) empty.
    """
    verts = poly.vertices if isinstance(poly, TraitPolygon) else np.asarray(poly, float)
    out = _clip_halfplane(verts, 0, r.x0, True)
    out = _clip_halfplane(out, 0, r.x1, False)
    out = _clip_halfplane(out, 1, r.y0, True)
    out = _clip_halfplane(out, 1, r.y1, False)
    if len(out) < 3:
        return np.empty((0, 2), dtype=float)
    out = _collapse_duplicates(out)
    if len(out) < 3 or abs(_signed_area(out)) < DEGENERATE_CLIP_AREA:
        return np.empty((0, 2), dtype=float)
    return out


def _clip_halfplane(verts: np.ndarray, axis: int, bound: float, keep_ge: bool) -> np.ndarray:
    if len(verts) == 0:
        return verts
    out = []
    n = len(verts)
    for i in range(n):
        cur = verts[i]
        nxt = verts[(i + 1) % n]
        cin = cur[axis] >= bound if keep_ge else cur[axis] <= bound
        nin = nxt[axis] >= bound if keep_ge else nxt[axis] <= bound
        if cin and nin:
            out.append(nxt)
        elif cin and not nin:
            out.append(_axis_intersection(cur, nxt, axis, bound))
        elif not cin and nin:
            out.append(_axis_intersection(cur, nxt, axis, bound))
            out.append(nxt)
    return np.array(out, dtype=float) if out else np.empty((0, 2), dtype=float)


def _axis_intersection(a, b, axis: int, bound: float) -> np.ndarray:
    t = (bound - a[axis]) / (b[axis] - a[axis])
    p = a + t * (b - a)
    p[axis] = bound  # exact on the clip line
    return p


def overlap_area(poly: TraitPolygon | np.ndarray, r: Rect2) -> float:
    """Area of the polygon/rectangle intersection."""
    clipped = clip_to_rect(poly, r)
    if len(clipped) < 3:
        return 0.0
    return abs(_signed_area(clipped))


def signed_distance_to_polygon(p, poly: TraitPolygon | np.ndarray) -> float:
    """Euclidean distance to the polygon boundary, negative inside."""
    return float(signed_distances_to_polygon(np.asarray(p, float).reshape(1, 2), poly)[0])


def signed_distances_to_polygon(points: np.ndarray, poly: TraitPolygon | np.ndarray) -> np.ndarray:
    """Vectorized signed boundary distance; sign comes from points_in_polygon."""
    verts = poly.vertices if isinstance(poly, TraitPolygon) else np.asarray(poly, float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    vxn = np.roll(verts, -1, axis=0)
    best = np.full(len(pts), np.inf)
    for a, b in zip(verts, vxn):
        e = b - a
        q = pts - a
        seg_len2 = float(e @ e)
        if seg_len2 > 0.0:
            t = np.clip((q @ e) / seg_len2, 0.0, 1.0)
        else:
            t = 0.0
        d = q - np.outer(t, e) if seg_len2 > 0.0 else q
        best = np.minimum(best, np.einsum("ij,ij->i", d, d))
    dist = np.sqrt(best)
    inside = points_in_polygon(pts, verts)
    return np.where(inside, -dist, dist)
