"""Spatial domain types: grids, ensembles, probability volumes, meshes.

Vertex data are stored flat in x-fastest order: linear index
ix + D1*(iy + D2*iz). All types are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class UniformGrid3:
    """Uniform rectilinear grid: dims (D1,D2,D3), world origin and spacing."""

    dims: tuple[int, int, int]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        origin = tuple(float(v) for v in self.origin)
        spacing = tuple(float(v) for v in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {dims}")
        if any(not s > 0.0 for s in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)

    @property
    def vertex_count(self) -> int:
        d = self.dims
        return d[0] * d[1] * d[2]

    def linear_index(self, ix, iy, iz):
        return ix + self.dims[0] * (iy + self.dims[1] * iz)

    def index_of(self, linear):
        d1, d2, _ = self.dims
        ix = linear % d1
        iy = (linear // d1) % d2
        iz = linear // (d1 * d2)
        return ix, iy, iz

    def vertex_coords(self):
        """World coordinates of every vertex, shape (n, 3), x-fastest."""
        d1, d2, d3 = self.dims
        ix = np.arange(d1)
        iy = np.arange(d2)
        iz = np.arange(d3)
        zz, yy, xx = np.meshgrid(iz, iy, ix, indexing="ij")
        idx = np.stack([xx, yy, zz], axis=-1).reshape(-1, 3).astype(float)
        return np.asarray(self.origin) + idx * np.asarray(self.spacing)


@dataclass(frozen=True)
class EnsembleField:
    """Bivariate scalar ensemble: values has shape (n_vertices, 2, members)."""

    grid: UniformGrid3
    values: np.ndarray = field(repr=False)
    variable_names: tuple[str, str] = ("A1", "A2")

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype != np.float32:
            vals = vals.astype(np.float32)
        n = self.grid.vertex_count
        if vals.ndim != 3 or vals.shape[0] != n or vals.shape[1] != 2:
            raise ValueError(
                f"values must be (vertices={n}, variables=2, members), got {vals.shape}")
        if vals.shape[2] < 1:
            raise ValueError("member_count must be >= 1")
        bad = ~np.isfinite(vals)
        if bad.any():
            v = int(np.nonzero(bad.any(axis=(1, 2)))[0][0])
            raise ValueError(f"non-finite sample at vertex {v}")
        object.__setattr__(self, "values", vals)
        self.values.setflags(write=False)

    @property
    def member_count(self) -> int:
        return self.values.shape[2]

    def member(self, index: int) -> "EnsembleField":
        """Single-member field holding member `index`."""
        return EnsembleField(self.grid, self.values[:, :, index:index + 1],
                             self.variable_names)

    def mean_field(self) -> "EnsembleField":
        """Per-vertex ensemble mean as a single-member field."""
        mean = self.values.astype(np.float64).mean(axis=2, keepdims=True)
        return EnsembleField(self.grid, mean.astype(np.float32), self.variable_names)

    def attribute_pairs(self, member: int = 0) -> np.ndarray:
        """(n, 2) float64 attribute pairs of one member."""
        return self.values[:, :, member].astype(np.float64)


@dataclass(frozen=True)
class ProbabilityVolume:
    """One interior probability per grid vertex, stored float32 in [0, 1]."""

    grid: UniformGrid3
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype != np.float32:
            vals = vals.astype(np.float32)
        vals = vals.reshape(-1)
        if vals.shape[0] != self.grid.vertex_count:
            raise ValueError(
                f"expected {self.grid.vertex_count} values, got {vals.shape[0]}")
        if not np.isfinite(vals).all():
            raise ValueError("probability values must be finite")
        if float(vals.min(initial=0.0)) < 0.0 or float(vals.max(initial=0.0)) > 1.0:
            raise ValueError(
                f"probabilities outside [0,1]: min {vals.min()}, max {vals.max()}")
        object.__setattr__(self, "values", vals)
        self.values.setflags(write=False)

    def as_array3d(self) -> np.ndarray:
        """Values reshaped to (D3, D2, D1), i.e. [z, y, x]."""
        d1, d2, d3 = self.grid.dims
        return self.values.reshape(d3, d2, d1)


def require_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle soup with shared vertices; world-space coordinates."""

    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
            raise ValueError("triangle indices out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
