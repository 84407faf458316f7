"""Surface extraction: marching cubes, most-probable fiber surfaces,
probabilistic segmentation, and crisp reference surfaces.

Vertex classification uses the closed inequality value >= isovalue
(exactly-on-isovalue vertices count as interior). Ambiguous faces are
resolved by the standard 256-case table without an asymptotic decider.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._mc_tables import EDGE_TABLE, EDGE_VERTICES, TRI_TABLE
from .geometry import (
    TraitPolygon,
    points_in_polygon,
    signed_distance_to_polygon,
    signed_distances_to_polygon,
)
from .grid import EnsembleField, ProbabilityVolume, TriangleMesh, UniformGrid3

__all__ = [
    "SignField", "classify_vertices", "cell_cases", "extract_isosurface",
    "most_probable_fiber_surface", "probabilistic_segmentation",
    "crisp_fiber_surface", "signed_distance_to_polygon",
]

# offsets of the 8 cube corners in (z, y, x) index order, Bourke numbering
_CORNER_OFFSETS = np.array([
    (0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0),
    (1, 0, 0), (1, 0, 1), (1, 1, 1), (1, 1, 0),
], dtype=np.int64)


@dataclass(frozen=True)
class SignField:
    """Per-vertex interior/exterior classification (+ stored as True)."""

    grid: UniformGrid3
    signs: np.ndarray = field(repr=False)

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=bool).reshape(-1)
        if signs.shape[0] != self.grid.vertex_count:
            raise ValueError("one sign per grid vertex required")
        object.__setattr__(self, "signs", signs)
        self.signs.setflags(write=False)


def classify_vertices(vol: ProbabilityVolume, threshold: float = 0.5) -> SignField:
    """Sign is + exactly when the interior probability is >= threshold."""
    return SignField(vol.grid, vol.values >= np.float32(threshold))


def _field3d(grid: UniformGrid3, values) -> np.ndarray:
    d1, d2, d3 = grid.dims
    return np.asarray(values, dtype=np.float64).reshape(d3, d2, d1)


def cell_cases(grid: UniformGrid3, inside_flat) -> np.ndarray:
    """Per-cell 8-bit classification code, bit c set when corner c is inside.

    Cells are returned flat in x-fastest cell order; this is the marching
    cubes topology case induced by a vertex classification.
    """
    d1, d2, d3 = grid.dims
    if min(d1, d2, d3) < 2:
        raise ValueError("cell cases need at least 2 vertices per axis")
    inside = np.asarray(inside_flat, dtype=bool).reshape(d3, d2, d1)
    cases = np.zeros((d3 - 1, d2 - 1, d1 - 1), dtype=np.uint8)
    for c, (dz, dy, dx) in enumerate(_CORNER_OFFSETS):
        corner = inside[dz:dz + d3 - 1, dy:dy + d2 - 1, dx:dx + d1 - 1]
        cases |= corner.astype(np.uint8) << c
    return cases.reshape(-1)


def extract_isosurface(grid_or_vol, isovalue: float, values=None) -> TriangleMesh:
    """Marching cubes with linear edge interpolation in world coordinates.

    Accepts either (grid, isovalue, values) or a ProbabilityVolume plus
    isovalue. Inside means value >= isovalue. Returns an empty mesh when
    the field never crosses the isovalue; degenerate (zero-area)
    triangles are dropped.
    """
    if isinstance(grid_or_vol, ProbabilityVolume):
        grid = grid_or_vol.grid
        values = grid_or_vol.values
    else:
        grid = grid_or_vol
    d1, d2, d3 = grid.dims
    if min(d1, d2, d3) < 2:
        raise ValueError("surface extraction needs dims >= 2 per axis")
    f = _field3d(grid, values)
    if not np.isfinite(f).all():
        raise ValueError("non-finite field values")
    iso = float(isovalue)
    inside = f >= iso

    # interpolated crossing vertices per axis-aligned grid edge
    verts_xyz = []
    edge_ids = {}
    n_verts = 0
    origin = np.asarray(grid.origin)
    spacing = np.asarray(grid.spacing)
    for axis, (az, ay, ax_) in (("x", (0, 0, 1)), ("y", (0, 1, 0)), ("z", (1, 0, 0))):
        lo = f[: d3 - az, : d2 - ay, : d1 - ax_]
        hi = f[az:, ay:, ax_:]
        crossed = (lo >= iso) != (hi >= iso)
        zz, yy, xx = np.nonzero(crossed)
        t = (iso - lo[zz, yy, xx]) / (hi[zz, yy, xx] - lo[zz, yy, xx])
        base = np.stack([xx, yy, zz], axis=1).astype(np.float64)
        step = np.array([ax_, ay, az], dtype=np.float64)
        pos = origin + spacing * (base + t[:, None] * step)
        ids = np.full(crossed.shape, -1, dtype=np.int64)
        ids[zz, yy, xx] = n_verts + np.arange(len(zz))
        n_verts += len(zz)
        verts_xyz.append(pos)
        edge_ids[axis] = ids

    if n_verts == 0:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    verts = np.concatenate(verts_xyz, axis=0)

    # map the 12 cube edges of each cell to global crossing-vertex ids
    cz, cy, cx = d3 - 1, d2 - 1, d1 - 1
    ex, ey, ez = edge_ids["x"], edge_ids["y"], edge_ids["z"]
    cube_edge_ids = np.empty((12, cz, cy, cx), dtype=np.int64)
    cube_edge_ids[0] = ex[:cz, :cy, :]
    cube_edge_ids[1] = ey[:cz, :, 1:]
    cube_edge_ids[2] = ex[:cz, 1:, :]
    cube_edge_ids[3] = ey[:cz, :, :cx]
    cube_edge_ids[4] = ex[1:, :cy, :]
    cube_edge_ids[5] = ey[1:, :, 1:]
    cube_edge_ids[6] = ex[1:, 1:, :]
    cube_edge_ids[7] = ey[1:, :, :cx]
    cube_edge_ids[8] = ez[:, :cy, :cx]
    cube_edge_ids[9] = ez[:, :cy, 1:]
    cube_edge_ids[10] = ez[:, 1:, 1:]
    cube_edge_ids[11] = ez[:, 1:, :cx]
    cube_edge_ids = cube_edge_ids.reshape(12, -1)

    # Bourke case index: bit set when the corner is below the isovalue
    cases = 255 - cell_cases(grid, inside.reshape(-1))

    tris = []
    for case in np.unique(cases):
        if EDGE_TABLE[case] == 0:
            continue
        cells = np.nonzero(cases == case)[0]
        row = TRI_TABLE[case]
        n_tri = int((row >= 0).sum()) // 3
        for t in range(n_tri):
            e0, e1, e2 = row[3 * t], row[3 * t + 1], row[3 * t + 2]
            tris.append(np.stack([
                cube_edge_ids[e0, cells],
                cube_edge_ids[e1, cells],
                cube_edge_ids[e2, cells],
            ], axis=1))
    if not tris:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    # deterministic order: sort triangles by cell linear index (stable)
    tri = _sort_triangles_by_cell(cases, np.concatenate(tris, axis=0))

    # drop degenerate (zero-area) triangles
    a = verts[tri[:, 0]]
    b = verts[tri[:, 1]]
    c = verts[tri[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    tri = tri[areas > 0.0]
    return _compact_mesh(verts, tri)


def _sort_triangles_by_cell(cases, tri):
    """Rebuild triangle order as cell-major (ascending cell linear index)."""
    cell_of_tri = []
    for case in np.unique(cases):
        if EDGE_TABLE[case] == 0:
            continue
        cells = np.nonzero(cases == case)[0]
        n_tri = int((TRI_TABLE[case] >= 0).sum()) // 3
        for _ in range(n_tri):
            cell_of_tri.append(cells)
    order = np.argsort(np.concatenate(cell_of_tri), kind="stable")
    return tri[order]


def _compact_mesh(verts, tri) -> TriangleMesh:
    """Keep only referenced vertices, renumbering triangles."""
    if len(tri) == 0:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    used, inverse = np.unique(tri.reshape(-1), return_inverse=True)
    return TriangleMesh(verts[used], inverse.reshape(-1, 3).astype(np.int64))


def most_probable_fiber_surface(vol: ProbabilityVolume) -> TriangleMesh:
    """Isosurface of the interior-probability volume at 0.5.

    Cell-level topology equals the classification of classify_vertices at
    threshold 0.5 by construction.
    """
    return extract_isosurface(vol, 0.5)


def probabilistic_segmentation(vol: ProbabilityVolume, thresholds) -> list[TriangleMesh]:
    """One isosurface per threshold; thresholds strictly increasing in (0,1)."""
    ts = [float(t) for t in thresholds]
    if any(not 0.0 < t < 1.0 for t in ts):
        raise ValueError(f"thresholds must lie in (0,1), got {ts}")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError(f"thresholds must be strictly increasing, got {ts}")
    return [extract_isosurface(vol, t) for t in ts]


def crisp_fiber_surface(field: EnsembleField, trait: TraitPolygon) -> TriangleMesh:
    """Fiber surface of a deterministic bivariate field.

    Vertices are classified interior exactly when their attribute pair
    lies inside the trait (boundary included). The surface is extracted
    from the negated attribute-space distance to the trait boundary, so
    the >= 0 side of the extraction is precisely the interior set.
    """
    if field.member_count != 1:
        raise ValueError("crisp surface expects a single-member field; "
                         "reduce with member() or mean_field() first")
    pairs = field.attribute_pairs(0)
    sdist = signed_distances_to_polygon(pairs, trait)
    return extract_isosurface(field.grid, 0.0, -sdist)


def crisp_interior_mask(field: EnsembleField, trait: TraitPolygon) -> np.ndarray:
    """Boolean interior classification used by crisp_fiber_surface."""
    if field.member_count != 1:
        raise ValueError("expects a single-member field")
    return points_in_polygon(field.attribute_pairs(0), trait)
