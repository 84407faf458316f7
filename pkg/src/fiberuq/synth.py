"""Synthetic experiment machinery: tangle/sphere fields, bimodal noise
ensembles, hixel reduction, ground-truth volumes, and the interior
probability error metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .geometry import TraitPolygon, points_in_polygon
from .grid import EnsembleField, ProbabilityVolume, UniformGrid3, require_same_grid

#: sampling domain of the synthetic fields, per axis
DOMAIN = (-2.5, 2.5)


def sphere(x, y, z):
    """x^2 + y^2 + z^2."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    return x * x + y * y + z * z


def tangle(x, y, z):
    """Tangle cube implicit function x^4 - 5x^2 + y^4 - 5y^2 + z^4 - 5z^2 + 11.8."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    return (x ** 4 - 5.0 * x * x + y ** 4 - 5.0 * y * y
            + z ** 4 - 5.0 * z * z + 11.8)


def _as_cov(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape == ():
        c = np.array([[float(c), 0.0], [0.0, float(c)]])
    elif c.shape == (2,):
        c = np.diag(c)
    if c.shape != (2, 2) or not np.allclose(c, c.T):
        raise ValueError(f"covariance must be symmetric 2x2, got {c}")
    if np.linalg.eigvalsh(c).min() < 0.0:
        raise ValueError("covariance must be positive semi-definite")
    return c


@dataclass(frozen=True)
class BimodalNoiseSpec:
    """Two-mode Gaussian noise: a main mode near the truth plus outliers.

    Offsets and covariances are per attribute pair. With correlated=False
    the off-diagonals must vanish and each variable draws its mode
    independently; with correlated=True one joint 2D draw is made per
    (vertex, member).
    """

    main_weight: float
    main_offset: tuple[float, float]
    main_cov: np.ndarray
    outlier_offset: tuple[float, float]
    outlier_cov: np.ndarray
    correlated: bool = False

    def __post_init__(self):
        if not 0.0 < self.main_weight < 1.0:
            raise ValueError("main_weight must be in (0, 1)")
        mc = _as_cov(self.main_cov)
        oc = _as_cov(self.outlier_cov)
        if not self.correlated and (mc[0, 1] != 0.0 or oc[0, 1] != 0.0):
            raise ValueError("off-diagonal covariance requires correlated=True")
        object.__setattr__(self, "main_offset", tuple(float(v) for v in self.main_offset))
        object.__setattr__(self, "outlier_offset", tuple(float(v) for v in self.outlier_offset))
        object.__setattr__(self, "main_cov", mc)
        object.__setattr__(self, "outlier_cov", oc)


def default_bimodal_spec(ranges, correlated=False, rho=0.0) -> BimodalNoiseSpec:
    """The acceptance-test noise regime: main mode centered on the truth
    with sigma = 4% of each variable's range, an outlier mode offset by
    +25% of range with the same sigma, weighted 0.8/0.2."""
    rx, ry = float(ranges[0]), float(ranges[1])
    sx, sy = 0.04 * rx, 0.04 * ry
    cov_m = np.array([[sx * sx, rho * sx * sy], [rho * sx * sy, sy * sy]])
    cov_o = cov_m.copy()
    return BimodalNoiseSpec(
        main_weight=0.8,
        main_offset=(0.0, 0.0),
        main_cov=cov_m,
        outlier_offset=(0.25 * rx, 0.25 * ry),
        outlier_cov=cov_o,
        correlated=correlated or rho != 0.0,
    )


def sample_bimodal(spec: BimodalNoiseSpec, rng, members: int) -> np.ndarray:
    """(members, 2) noise draws for one vertex, fixed draw order."""
    moff = np.asarray(spec.main_offset)
    ooff = np.asarray(spec.outlier_offset)
    if spec.correlated:
        u = rng.random(members)
        z = rng.standard_normal((members, 2))
        lm = np.linalg.cholesky(spec.main_cov)
        lo = np.linalg.cholesky(spec.outlier_cov)
        main = moff + z @ lm.T
        outl = ooff + z @ lo.T
        pick = (u < spec.main_weight)[:, None]
        return np.where(pick, main, outl)
    u = rng.random((members, 2))
    z = rng.standard_normal((members, 2))
    sig_m = np.sqrt(np.diag(spec.main_cov))
    sig_o = np.sqrt(np.diag(spec.outlier_cov))
    pick = u < spec.main_weight
    return np.where(pick, moff + z * sig_m, ooff + z * sig_o)


def tangle_sphere_truth(res: int) -> EnsembleField:
    """Noise-free (sphere, tangle) field sampled on res^3 over the domain."""
    lo, hi = DOMAIN
    spacing = (hi - lo) / (res - 1) if res > 1 else 1.0
    grid = UniformGrid3((res, res, res), (lo, lo, lo), (spacing,) * 3)
    coords = grid.vertex_coords()
    a1 = sphere(coords[:, 0], coords[:, 1], coords[:, 2])
    a2 = tangle(coords[:, 0], coords[:, 1], coords[:, 2])
    values = np.stack([a1, a2], axis=1)[:, :, None].astype(np.float32)
    return EnsembleField(grid, values, ("sphere", "tangle"))


def gen_tangle_sphere_ensemble(res: int, members: int, noise: BimodalNoiseSpec,
                               seed: int) -> EnsembleField:
    """Ground truth plus per-vertex bimodal noise, one stream per vertex.

    Streams are counter-based (keyed by seed, counter by vertex index), so
    the ensemble is reproducible bit-exactly from (res, members, spec, seed).
    """
    if res < 2:
        raise ValueError("res must be >= 2")
    truth = tangle_sphere_truth(res)
    base = truth.values[:, :, 0].astype(np.float64)
    n = truth.grid.vertex_count
    values = np.empty((n, 2, members), dtype=np.float32)
    for v in range(n):
        rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, v, 0, 0]))
        noise_draws = sample_bimodal(noise, rng, members)
        values[v] = (base[v][None, :] + noise_draws).T.astype(np.float32)
    return EnsembleField(truth.grid, values, truth.variable_names)


def attribute_ranges(field: EnsembleField) -> tuple[float, float]:
    """(max - min) of each attribute over all vertices and members."""
    vals = field.values
    return (
        float(vals[:, 0, :].max() - vals[:, 0, :].min()),
        float(vals[:, 1, :].max() - vals[:, 1, :].min()),
    )


def hixel_reduce(field: EnsembleField, block: int = 2) -> EnsembleField:
    """Summarize block^3 bricks of a single-member field as sample sets.

    The output grid has dims ceil(dims/block) with vertices at brick
    centers; each output vertex carries the brick's block^3 original
    values as members. Dimensions not divisible by the block size are
    padded by edge clamping (which duplicates boundary samples).
    """
    if field.member_count != 1:
        raise ValueError("hixel reduction expects a single-member field")
    if block < 1:
        raise ValueError("block must be >= 1")
    d1, d2, d3 = field.grid.dims
    vals = field.values[:, :, 0].reshape(d3, d2, d1, 2)
    pad = [(0, (-d) % block) for d in (d3, d2, d1)] + [(0, 0)]
    vals = np.pad(vals, pad, mode="edge")
    e3, e2, e1 = vals.shape[0] // block, vals.shape[1] // block, vals.shape[2] // block
    bricks = vals.reshape(e3, block, e2, block, e1, block, 2)
    # (z, y, x, variable, member) with members enumerating the brick cells
    bricks = bricks.transpose(0, 2, 4, 6, 1, 3, 5).reshape(e3, e2, e1, 2, block ** 3)
    sp = field.grid.spacing
    origin = tuple(o + s * (block - 1) / 2.0 for o, s in zip(field.grid.origin, sp))
    grid = UniformGrid3((e1, e2, e3), origin, tuple(s * block for s in sp))
    return EnsembleField(grid, bricks.reshape(-1, 2, block ** 3), field.variable_names)


def ground_truth_interior_volume(field: EnsembleField, trait: TraitPolygon
                                 ) -> ProbabilityVolume:
    """Binary indicator volume: 1 where the vertex attribute pair is inside."""
    if field.member_count != 1:
        raise ValueError("ground truth expects a single-member field")
    inside = points_in_polygon(field.attribute_pairs(0), trait)
    return ProbabilityVolume(field.grid, inside.astype(np.float32))


def interior_probability_error(a: ProbabilityVolume, b: ProbabilityVolume) -> float:
    """Euclidean 2-norm of the per-vertex probability difference."""
    require_same_grid(a, b)
    diff = a.values.astype(np.float64) - b.values.astype(np.float64)
    return float(np.sqrt(np.sum(diff * diff)))
