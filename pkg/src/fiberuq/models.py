"""Per-vertex noise models and their interior-probability operations.

Every model answers one question: given the distribution of a vertex's
uncertain attribute pair, how much probability mass falls inside a trait
polygon. Closed forms exist for independent kernels/KDE/histograms and
for correlated 2D histograms; bivariate KDE is integrated numerically;
Monte Carlo estimates work for everything that can be sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from ._clip import clip_polygon_to_boxes, ring_areas
from .errors import ModelConfigError
from .geometry import TraitPolygon, bounding_rect, points_in_polygon
from .integrate import gaussian_pair_grid_probs, greens_prob_batch
from .kernels import (
    KernelKind,
    ScaledKernel,
    effective_support_radius,
    fit_parametric,
    kde_bandwidth,
    scale_floor,
)

_WEIGHT_TOL = 1e-12


# ---------------------------------------------------------------------------
# vertex distribution representations


@dataclass(frozen=True)
class ParametricPair:
    """Independent scaled kernels on each attribute axis."""

    center_x: float
    scale_x: float
    center_y: float
    scale_y: float

    def __post_init__(self):
        if not (self.scale_x > 0.0 and self.scale_y > 0.0):
            raise ValueError("parametric scales must be positive")


@dataclass(frozen=True)
class SampleSet:
    """Raw per-vertex samples of the two attributes (equal length m >= 1)."""

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, float))
        y = np.atleast_1d(np.asarray(self.y, float))
        if x.shape != y.shape or x.ndim != 1 or len(x) < 1:
            raise ValueError("sample arrays must be equal-length 1D with m >= 1")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def _check_hist(edges, weights, label):
    edges = np.asarray(edges, float)
    weights = np.asarray(weights, float)
    if not (np.diff(edges) > 0.0).all():
        raise ValueError(f"{label} edges must be strictly increasing")
    if (weights < 0.0).any():
        raise ValueError(f"{label} weights must be non-negative")
    total = float(weights.sum())
    if abs(total - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"{label} weights sum to {total}, expected 1")
    return edges, weights


@dataclass(frozen=True)
class Hist1DPair:
    """Independent marginal histograms for the two attributes."""

    edges_x: np.ndarray = field(repr=False)
    weights_x: np.ndarray = field(repr=False)
    edges_y: np.ndarray = field(repr=False)
    weights_y: np.ndarray = field(repr=False)

    def __post_init__(self):
        ex, wx = _check_hist(self.edges_x, self.weights_x, "x")
        ey, wy = _check_hist(self.edges_y, self.weights_y, "y")
        if len(wx) != len(ex) - 1 or len(wy) != len(ey) - 1:
            raise ValueError("weights must have one entry per bin")
        object.__setattr__(self, "edges_x", ex)
        object.__setattr__(self, "weights_x", wx)
        object.__setattr__(self, "edges_y", ey)
        object.__setattr__(self, "weights_y", wy)


@dataclass(frozen=True)
class Hist2D:
    """Joint 2D histogram capturing attribute correlation."""

    edges_x: np.ndarray = field(repr=False)
    edges_y: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        ex = np.asarray(self.edges_x, float)
        ey = np.asarray(self.edges_y, float)
        w = np.asarray(self.weights, float)
        if not ((np.diff(ex) > 0.0).all() and (np.diff(ey) > 0.0).all()):
            raise ValueError("histogram edges must be strictly increasing")
        if w.shape != (len(ex) - 1, len(ey) - 1):
            raise ValueError("weights must be (len(edges_x)-1, len(edges_y)-1)")
        if (w < 0.0).any():
            raise ValueError("weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {float(w.sum())}, expected 1")
        object.__setattr__(self, "edges_x", ex)
        object.__setattr__(self, "edges_y", ey)
        object.__setattr__(self, "weights", w)


VertexDistribution = ParametricPair | SampleSet | Hist1DPair | Hist2D


# ---------------------------------------------------------------------------
# model configuration

MODEL_NAMES = (
    "parametric-uniform", "parametric-epanechnikov", "parametric-gaussian",
    "kde-uniform", "kde-epanechnikov", "kde-gaussian",
    "histogram", "histogram2d", "bkde", "monte-carlo", "mean-field",
)

_BASE_NAMES = tuple(n for n in MODEL_NAMES if n not in ("monte-carlo", "bkde", "mean-field"))


@dataclass(frozen=True)
class NoiseModelConfig:
    """How to turn a vertex's member samples into a distribution and integrate it."""

    kind: str
    kernel: KernelKind | None = None
    bins: int | None = None
    integration_resolution: int | None = None
    sample_count: int | None = None
    seed: int | None = None
    base: "NoiseModelConfig | None" = None
    renormalize: bool = False

    def __post_init__(self):
        if self.kind in ("parametric", "kde"):
            if self.kernel is None:
                raise ModelConfigError(f"{self.kind} model requires a kernel")
        elif self.kind in ("histogram", "histogram2d"):
            if self.bins is None or self.bins < 1:
                raise ModelConfigError(f"{self.kind} model requires bins >= 1")
        elif self.kind == "bkde":
            if self.integration_resolution is None or self.integration_resolution < 2:
                raise ModelConfigError("bkde requires integration_resolution >= 2")
        elif self.kind == "monte-carlo":
            if self.sample_count is None or self.sample_count < 1:
                raise ModelConfigError("monte-carlo requires sample_count >= 1")
            if self.seed is None:
                raise ModelConfigError("monte-carlo requires a seed for reproducibility")
            if self.base is None or self.base.kind == "monte-carlo":
                raise ModelConfigError("monte-carlo requires a sampleable base model")
        elif self.kind == "mean-field":
            pass
        else:
            raise ModelConfigError(f"unknown model kind {self.kind!r}")

    @classmethod
    def from_name(cls, name: str, *, bins=None, integration_resolution=None,
                  sample_count=None, seed=None, base=None, renormalize=False):
        """Parse CLI-style model names like 'parametric-gaussian' or 'kde-uniform'."""
        if name not in MODEL_NAMES:
            raise ModelConfigError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
        if name.startswith("parametric-") or name.startswith("kde-"):
            kind, kernel = name.split("-", 1)
            return cls(kind=kind, kernel=KernelKind(kernel), bins=bins)
        if name == "monte-carlo":
            if base is None or base not in _BASE_NAMES:
                raise ModelConfigError(
                    f"monte-carlo requires a base model from {_BASE_NAMES}")
            return cls(kind=name, sample_count=sample_count, seed=seed,
                       base=cls.from_name(base, bins=bins))
        return cls(kind=name, bins=bins,
                   integration_resolution=integration_resolution,
                   renormalize=renormalize)


# ---------------------------------------------------------------------------
# histogram construction (per-vertex min/max edges, equal-width bins,
# a sample equal to the max falls in the last bin)


def _bin_range(samples):
    lo = float(np.min(samples))
    hi = float(np.max(samples))
    if hi <= lo:
        half = scale_floor(lo)
        lo, hi = lo - half, lo + half
    return lo, hi


def _bin_indices(samples, lo, hi, bins):
    idx = np.floor((np.asarray(samples, float) - lo) * (bins / (hi - lo))).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def histogram_from_samples(samples, bins: int):
    """Equal-width histogram over [min, max] with weights summing to one."""
    lo, hi = _bin_range(samples)
    idx = _bin_indices(samples, lo, hi, bins)
    weights = np.bincount(idx, minlength=bins).astype(float) / len(samples)
    return np.linspace(lo, hi, bins + 1), weights


def hist_pair_from_samples(xs, ys, bins: int) -> Hist1DPair:
    ex, wx = histogram_from_samples(xs, bins)
    ey, wy = histogram_from_samples(ys, bins)
    return Hist1DPair(ex, wx, ey, wy)


def hist2d_from_samples(xs, ys, bins: int) -> Hist2D:
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    lox, hix = _bin_range(xs)
    loy, hiy = _bin_range(ys)
    ix = _bin_indices(xs, lox, hix, bins)
    iy = _bin_indices(ys, loy, hiy, bins)
    w = np.bincount(ix * bins + iy, minlength=bins * bins).astype(float) / len(xs)
    return Hist2D(
        np.linspace(lox, hix, bins + 1),
        np.linspace(loy, hiy, bins + 1),
        w.reshape(bins, bins),
    )


# ---------------------------------------------------------------------------
# closed-form interior probabilities


def interior_prob_parametric(px: ScaledKernel, py: ScaledKernel, trait: TraitPolygon) -> float:
    """Green's-theorem interior probability for one independent kernel pair."""
    if px.kind != py.kind:
        raise ValueError("parametric model uses one kernel kind on both axes")
    p = greens_prob_batch(
        px.kind,
        np.array([px.center]), np.array([py.center]),
        np.array([px.bandwidth]), np.array([py.bandwidth]),
        _trait_verts(trait),
    )
    return float(p[0])


def _trait_verts(trait):
    return trait.vertices if isinstance(trait, TraitPolygon) else np.asarray(trait, float)


def _pair_cull_mask(cx, cy, hx, hy, radius_x, radius_y, rect):
    """True for kernel pairs whose support box overlaps the trait bounding box."""
    return ~(
        (cx + radius_x * hx < rect.x0)
        | (cx - radius_x * hx > rect.x1)
        | (cy + radius_y * hy < rect.y0)
        | (cy - radius_y * hy > rect.y1)
    )


def _default_bandwidth(samples) -> float:
    return kde_bandwidth(samples) if len(samples) > 1 else scale_floor(samples[0])


def _kde_pair_probs_flat(xs, ys, hx, hy, kind: KernelKind, trait, cull):
    """Flat per-pair probabilities for rows of samples; pair order is
    i-major in the x sample, j-minor in the y sample."""
    g, m = xs.shape
    if kind == KernelKind.GAUSSIAN:
        # clipping-free separable engine; exact and O(m) transcendentals
        return gaussian_pair_grid_probs(
            xs, ys, hx, hy, _trait_verts(trait), cull=cull).ravel()
    cx = np.repeat(xs, m, axis=1).ravel()
    cy = np.tile(ys, (1, m)).ravel()
    hxa = np.repeat(np.asarray(hx, float), m * m)
    hya = np.repeat(np.asarray(hy, float), m * m)
    probs = np.zeros(g * m * m)
    if cull:
        r = effective_support_radius(kind)
        keep = _pair_cull_mask(cx, cy, hxa, hya, r, r,
                               bounding_rect(_trait_verts(trait)))
    else:
        keep = np.ones(g * m * m, dtype=bool)
    if keep.any():
        probs[keep] = greens_prob_batch(
            kind, cx[keep], cy[keep], hxa[keep], hya[keep], _trait_verts(trait))
    return probs


def kde_pair_probabilities(xs, ys, kind: KernelKind, trait, hx=None, hy=None,
                           cull=True):
    """Per-pair interior probabilities of the KDE double sum (row-major in i, j).

    Pairs whose joint support rectangle misses the trait bounding rectangle
    are culled (their probability is exactly zero).
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if hx is None:
        hx = _default_bandwidth(xs)
    if hy is None:
        hy = _default_bandwidth(ys)
    return _kde_pair_probs_flat(xs.reshape(1, -1), ys.reshape(1, -1),
                                [hx], [hy], kind, trait, cull)


def kde_group_probabilities(xs, ys, kind: KernelKind, trait, hx, hy, cull=True):
    """Independent-KDE probabilities for several vertices at once.

    xs, ys are (g, m) sample rows with per-row bandwidths hx, hy. Each
    row's value is the mean of its m^2 kernel-pair probabilities and is
    bitwise independent of which other rows share the batch.
    """
    xs = np.atleast_2d(np.asarray(xs, float))
    ys = np.atleast_2d(np.asarray(ys, float))
    g, m = xs.shape
    probs = _kde_pair_probs_flat(xs, ys, hx, hy, kind, trait, cull)
    return probs.reshape(g, m * m).sum(axis=1) / (m * m)


def interior_prob_kde_independent(xs, ys, kind: KernelKind, trait,
                                  hx=None, hy=None, cull=True) -> float:
    """Independent-KDE interior probability: mean over all kernel pairs."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if hx is None:
        hx = _default_bandwidth(xs)
    if hy is None:
        hy = _default_bandwidth(ys)
    return float(kde_group_probabilities(
        xs.reshape(1, -1), ys.reshape(1, -1), kind, trait, [hx], [hy], cull)[0])


def _rect_overlap_fractions(rx0, rx1, ry0, ry1, trait_verts):
    """overlap_area(trait, rect)/area(rect) for a batch of rectangles."""
    vx, vy, _ = clip_polygon_to_boxes(trait_verts, rx0, rx1, ry0, ry1)
    areas = np.abs(ring_areas(vx, vy))
    return areas / ((rx1 - rx0) * (ry1 - ry0))


def hist_rect_contributions(weights, rx0, rx1, ry0, ry1, trait_verts):
    """weight * overlap fraction for the nonzero-weight bins of a histogram.

    Returns the contribution array and the surviving bin order; summing in
    that order is the canonical evaluation shared by scalar and volume paths.
    """
    keep = weights > 0.0
    frac = _rect_overlap_fractions(rx0[keep], rx1[keep], ry0[keep], ry1[keep], trait_verts)
    return weights[keep] * frac, keep


def interior_prob_hist_independent(h: Hist1DPair, trait) -> float:
    """Closed-form probability for independent marginal histograms."""
    verts = _trait_verts(trait)
    wx, wy = h.weights_x, h.weights_y
    w = np.outer(wx, wy).ravel()
    bx = len(wx)
    by = len(wy)
    rx0 = np.repeat(h.edges_x[:-1], by)
    rx1 = np.repeat(h.edges_x[1:], by)
    ry0 = np.tile(h.edges_y[:-1], bx)
    ry1 = np.tile(h.edges_y[1:], bx)
    contrib, _ = hist_rect_contributions(w, rx0, rx1, ry0, ry1, verts)
    return float(min(1.0, contrib.sum()))


def interior_prob_hist2d(h: Hist2D, trait) -> float:
    """Closed-form probability for a joint 2D histogram."""
    verts = _trait_verts(trait)
    bx, by = h.weights.shape
    w = h.weights.ravel()
    rx0 = np.repeat(h.edges_x[:-1], by)
    rx1 = np.repeat(h.edges_x[1:], by)
    ry0 = np.tile(h.edges_y[:-1], bx)
    ry1 = np.tile(h.edges_y[1:], bx)
    contrib, _ = hist_rect_contributions(w, rx0, rx1, ry0, ry1, verts)
    return float(min(1.0, contrib.sum()))


# ---------------------------------------------------------------------------
# bivariate KDE with numerical integration


def _bkde_bandwidth_matrix(xs, ys):
    """Scott's factor m^(-1/6) applied to the sample covariance square root.

    Falls back to floored diagonal bandwidths when the covariance is
    singular. Returns (H, hx, hy) with hx/hy the marginal bandwidths used
    for grid padding.
    """
    m = len(xs)
    factor = m ** (-1.0 / 6.0)
    cov = np.cov(np.stack([xs, ys]))
    hx = max(factor * float(np.sqrt(max(cov[0, 0], 0.0))), scale_floor(np.mean(xs)))
    hy = max(factor * float(np.sqrt(max(cov[1, 1], 0.0))), scale_floor(np.mean(ys)))
    h_mat = factor * factor * cov
    # require a usable Cholesky factor; otherwise treat axes as independent
    try:
        chol = np.linalg.cholesky(h_mat)
        if not np.isfinite(chol).all():
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        h_mat = np.diag([hx * hx, hy * hy])
        chol = np.diag([hx, hy])
    return h_mat, chol, hx, hy


def bkde_density(xs, ys, points):
    """Bivariate Gaussian KDE density evaluated at (k, 2) points."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    _, chol, _, _ = _bkde_bandwidth_matrix(xs, ys)
    m = len(xs)
    diff = points[:, None, :] - np.stack([xs, ys], axis=1)[None, :, :]
    sol = np.linalg.solve(chol, diff.reshape(-1, 2).T).T.reshape(diff.shape)
    q = (sol * sol).sum(axis=-1)
    det = chol[0, 0] * chol[1, 1]
    return np.exp(-0.5 * q).sum(axis=1) / (2.0 * np.pi * det * m)


def interior_prob_bkde(xs, ys, resolution: int, trait, renormalize=False) -> float:
    """Midpoint Riemann sum of the bivariate KDE over the trait interior.

    The integration grid covers the sample bounding box padded by three
    marginal bandwidths with resolution x resolution cell-midpoint nodes.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if len(xs) < 2:
        raise ValueError("bivariate KDE needs at least 2 samples")
    if resolution < 2:
        raise ValueError("integration resolution must be >= 2")
    _, chol, hx, hy = _bkde_bandwidth_matrix(xs, ys)
    x0, x1 = xs.min() - 3.0 * hx, xs.max() + 3.0 * hx
    y0, y1 = ys.min() - 3.0 * hy, ys.max() + 3.0 * hy
    stepx = (x1 - x0) / resolution
    stepy = (y1 - y0) / resolution
    gx = x0 + (np.arange(resolution) + 0.5) * stepx
    gy = y0 + (np.arange(resolution) + 0.5) * stepy
    nodes = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)

    verts = _trait_verts(trait)
    inside = points_in_polygon(nodes, verts)
    if not inside.any():
        return 0.0
    cell = stepx * stepy
    density_in = _bkde_density_chunked(xs, ys, chol, nodes[inside])
    p = float(density_in.sum() * cell)
    if renormalize:
        total = float(_bkde_density_chunked(xs, ys, chol, nodes).sum() * cell)
        if total > 0.0:
            p /= total
    return min(1.0, max(0.0, p))


def _bkde_density_chunked(xs, ys, chol, points, chunk=262144):
    m = len(xs)
    det = chol[0, 0] * chol[1, 1]
    samples = np.stack([xs, ys], axis=1)
    inv = np.linalg.inv(chol)
    out = np.empty(len(points))
    step = max(1, chunk // max(m, 1))
    for lo in range(0, len(points), step):
        pts = points[lo:lo + step]
        diff = pts[:, None, :] - samples[None, :, :]
        sol = diff @ inv.T
        q = np.einsum("kmi,kmi->km", sol, sol)
        out[lo:lo + step] = np.exp(-0.5 * q).sum(axis=1)
    return out / (2.0 * np.pi * det * m)


# ---------------------------------------------------------------------------
# Monte Carlo estimation


def sample_unit_kernel(kind: KernelKind, rng, n: int):
    if kind == KernelKind.UNIFORM:
        return rng.uniform(-1.0, 1.0, n)
    if kind == KernelKind.EPANECHNIKOV:
        # the median of three uniforms on [-1, 1] is Epanechnikov-distributed
        return np.median(rng.uniform(-1.0, 1.0, (3, n)), axis=0)
    if kind == KernelKind.GAUSSIAN:
        return rng.standard_normal(n)
    raise ValueError(f"unknown kernel kind {kind!r}")


def _sample_marginal_hist(edges, weights, rng, n):
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    idx = np.minimum(idx, len(weights) - 1)
    frac = rng.random(n)
    widths = np.diff(edges)
    return edges[idx] + frac * widths[idx]


def sample_model(model: VertexDistribution, kind: KernelKind | None, rng, n: int):
    """Draw n attribute pairs from a vertex distribution.

    The draw order is fixed per model so that results are reproducible for
    a given generator state.
    """
    if isinstance(model, ParametricPair):
        if kind is None:
            raise ValueError("parametric sampling requires a kernel kind")
        x = model.center_x + model.scale_x * sample_unit_kernel(kind, rng, n)
        y = model.center_y + model.scale_y * sample_unit_kernel(kind, rng, n)
        return x, y
    if isinstance(model, SampleSet):
        if kind is None:
            raise ValueError("KDE sampling requires a kernel kind")
        m = len(model.x)
        hx = kde_bandwidth(model.x) if m > 1 else scale_floor(model.x[0])
        hy = kde_bandwidth(model.y) if m > 1 else scale_floor(model.y[0])
        ix = rng.integers(0, m, n)
        x = model.x[ix] + hx * sample_unit_kernel(kind, rng, n)
        iy = rng.integers(0, m, n)
        y = model.y[iy] + hy * sample_unit_kernel(kind, rng, n)
        return x, y
    if isinstance(model, Hist1DPair):
        x = _sample_marginal_hist(model.edges_x, model.weights_x, rng, n)
        y = _sample_marginal_hist(model.edges_y, model.weights_y, rng, n)
        return x, y
    if isinstance(model, Hist2D):
        bx, by = model.weights.shape
        cdf = np.cumsum(model.weights.ravel())
        cdf[-1] = 1.0
        flat = np.searchsorted(cdf, rng.random(n), side="right")
        flat = np.minimum(flat, bx * by - 1)
        ix, iy = flat // by, flat % by
        wx = np.diff(model.edges_x)
        wy = np.diff(model.edges_y)
        x = model.edges_x[ix] + rng.random(n) * wx[ix]
        y = model.edges_y[iy] + rng.random(n) * wy[iy]
        return x, y
    raise TypeError(f"cannot sample from {type(model).__name__}")


def interior_prob_monte_carlo(model: VertexDistribution, trait, sample_count: int,
                              seed: int | None = None, kind: KernelKind | None = None,
                              rng=None) -> float:
    """Estimate the interior probability as S/R over R model draws."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if rng is None:
        if seed is None:
            raise ValueError("either a seed or a generator is required")
        rng = np.random.Generator(np.random.Philox(key=seed))
    verts = _trait_verts(trait)
    hits = 0
    chunk = 1 << 20
    remaining = sample_count
    while remaining > 0:
        n = min(chunk, remaining)
        x, y = sample_model(model, kind, rng, n)
        hits += int(points_in_polygon(np.stack([x, y], axis=1), verts).sum())
        remaining -= n
    return hits / sample_count
