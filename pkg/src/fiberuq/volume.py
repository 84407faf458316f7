"""Whole-grid interior-probability computation.

Lifts the scalar per-vertex models over an ensemble grid. Vertices are
processed in fixed-size blocks distributed over a thread pool; every
per-vertex value is a pure function of that vertex's samples and the
global configuration, so the output is bitwise identical for any worker
count. Vertices whose model support rectangle misses the trait bounding
rectangle are culled to probability zero without integration.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FiberUQError, ModelConfigError
from .geometry import TraitPolygon, bounding_rect, points_in_polygon
from .grid import EnsembleField, ProbabilityVolume
from .integrate import greens_prob_batch
from .kernels import KernelKind, effective_support_radius, fit_parametric, scale_floor
from .models import (
    Hist1DPair,
    Hist2D,
    NoiseModelConfig,
    SampleSet,
    ParametricPair,
    _rect_overlap_fractions,
    hist_pair_from_samples,
    hist2d_from_samples,
    interior_prob_bkde,
    interior_prob_monte_carlo,
    kde_group_probabilities,
)

_BLOCK = 512


@dataclass(frozen=True)
class ComputeStats:
    culled_vertices: int
    seconds: float
    threads: int


class ComputeError(FiberUQError):
    """Per-vertex model failure, annotated with the vertex grid coordinates."""


def compute_probability_volume(ens: EnsembleField, cfg: NoiseModelConfig,
                               trait: TraitPolygon, threads: int | None = None
                               ) -> ProbabilityVolume:
    vol, _ = compute_probability_volume_ex(ens, cfg, trait, threads)
    return vol


def compute_probability_volume_ex(ens: EnsembleField, cfg: NoiseModelConfig,
                                  trait: TraitPolygon, threads: int | None = None
                                  ) -> tuple[ProbabilityVolume, ComputeStats]:
    """compute_probability_volume plus wall time and culled-vertex count."""
    start = time.perf_counter()
    threads = threads or os.cpu_count() or 1
    n = ens.grid.vertex_count
    out = np.empty(n, dtype=np.float64)
    culled = np.zeros(1, dtype=np.int64)
    block_fn = _BLOCK_FNS.get(cfg.kind)
    if block_fn is None:
        raise ModelConfigError(f"unknown model kind {cfg.kind!r}")

    blocks = [(lo, min(lo + _BLOCK, n)) for lo in range(0, n, _BLOCK)]

    def run_block(bounds):
        lo, hi = bounds
        xs = ens.values[lo:hi, 0, :].astype(np.float64)
        ys = ens.values[lo:hi, 1, :].astype(np.float64)
        try:
            probs, n_culled = block_fn(xs, ys, cfg, trait, lo)
        except Exception as e:
            raise _locate_failure(ens, cfg, trait, lo, hi, e) from e
        out[lo:hi] = probs
        culled[0] += n_culled  # benign under GIL: += on int64 scalar per block

    if threads <= 1 or len(blocks) == 1:
        for b in blocks:
            run_block(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, blocks))

    vol = ProbabilityVolume(ens.grid, out.astype(np.float32))
    stats = ComputeStats(int(culled[0]), time.perf_counter() - start, threads)
    return vol, stats


def _locate_failure(ens, cfg, trait, lo, hi, err):
    """Re-run a failed block vertex by vertex to name the offending vertex."""
    block_fn = _BLOCK_FNS[cfg.kind]
    for v in range(lo, hi):
        xs = ens.values[v:v + 1, 0, :].astype(np.float64)
        ys = ens.values[v:v + 1, 1, :].astype(np.float64)
        try:
            block_fn(xs, ys, cfg, trait, v)
        except Exception as e:
            ix, iy, iz = ens.grid.index_of(v)
            return ComputeError(f"model failed at vertex ({ix}, {iy}, {iz}): {e}")
    return ComputeError(f"model failed in vertex block [{lo}, {hi}): {err}")


# ---------------------------------------------------------------------------
# per-kind block implementations; each returns (probs, culled_count)


def _box_overlaps(rect, x0, x1, y0, y1):
    return ~((x1 < rect.x0) | (x0 > rect.x1) | (y1 < rect.y0) | (y0 > rect.y1))


def _mean_field_block(xs, ys, cfg, trait, lo):
    mx = xs.mean(axis=1)
    my = ys.mean(axis=1)
    rect = bounding_rect(trait)
    live = _box_overlaps(rect, mx, mx, my, my)
    probs = np.zeros(len(mx))
    if live.any():
        pts = np.stack([mx[live], my[live]], axis=1)
        probs[live] = points_in_polygon(pts, trait).astype(float)
    return probs, int((~live).sum())


def _fit_axis(vals, kind: KernelKind):
    """Vectorized fit_parametric over rows; bitwise-matches the scalar fit."""
    if kind == KernelKind.UNIFORM:
        lo = vals.min(axis=1)
        hi = vals.max(axis=1)
        center = 0.5 * (lo + hi)
        scale = 0.5 * (hi - lo)
    elif kind == KernelKind.GAUSSIAN:
        center = vals.mean(axis=1)
        scale = vals.std(axis=1)
    else:
        center = vals.mean(axis=1)
        scale = np.sqrt(5.0) * vals.std(axis=1)
    floor = np.maximum(1e-12, 1e-9 * np.abs(center))
    return center, np.maximum(scale, floor)


def _parametric_block(xs, ys, cfg, trait, lo):
    kind = cfg.kernel
    cx, sx = _fit_axis(xs, kind)
    cy, sy = _fit_axis(ys, kind)
    r = effective_support_radius(kind)
    rect = bounding_rect(trait)
    live = _box_overlaps(rect, cx - r * sx, cx + r * sx, cy - r * sy, cy + r * sy)
    probs = np.zeros(len(cx))
    if live.any():
        probs[live] = greens_prob_batch(
            kind, cx[live], cy[live], sx[live], sy[live], trait.vertices)
    return probs, int((~live).sum())


def _kde_bandwidths(vals):
    """Vectorized Silverman bandwidths with the degenerate-sample floor."""
    m = vals.shape[1]
    mean = vals.mean(axis=1)
    floor = np.maximum(1e-12, 1e-9 * np.abs(mean))
    if m < 2:
        return floor
    sd = vals.std(axis=1)
    q75, q25 = np.percentile(vals, [75.0, 25.0], axis=1)
    h = 0.9 * np.minimum(sd, (q75 - q25) / 1.34) * m ** (-0.2)
    return np.where(h > 0.0, h, floor)


def _kde_block(xs, ys, cfg, trait, lo):
    kind = cfg.kernel
    m = xs.shape[1]
    hx = _kde_bandwidths(xs)
    hy = _kde_bandwidths(ys)
    r = effective_support_radius(kind)
    rect = bounding_rect(trait)
    live = _box_overlaps(
        rect,
        xs.min(axis=1) - r * hx, xs.max(axis=1) + r * hx,
        ys.min(axis=1) - r * hy, ys.max(axis=1) + r * hy,
    )
    probs = np.zeros(len(hx))
    idx = np.nonzero(live)[0]
    group = max(1, 65536 // (m * m))
    for g0 in range(0, len(idx), group):
        gi = idx[g0:g0 + group]
        probs[gi] = kde_group_probabilities(
            xs[gi], ys[gi], kind, trait, hx[gi], hy[gi])
    return probs, int((~live).sum())


def _hist_ranges(vals):
    lo = vals.min(axis=1)
    hi = vals.max(axis=1)
    degenerate = ~(hi > lo)
    if degenerate.any():
        half = np.maximum(1e-12, 1e-9 * np.abs(lo))
        lo = np.where(degenerate, lo - half, lo)
        hi = np.where(degenerate, hi + half, hi)
    return lo, hi


def _hist_weights(vals, lo, hi, bins):
    """Per-row equal-width histogram weights; max sample in the last bin."""
    n, m = vals.shape
    idx = np.floor((vals - lo[:, None]) * (bins / (hi - lo))[:, None]).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    offsets = np.arange(n, dtype=np.int64)[:, None] * bins
    counts = np.bincount((idx + offsets).ravel(), minlength=n * bins)
    return counts.reshape(n, bins).astype(float) / m


def _hist_grid_probs(w_all, live, lox, hix, loy, hiy, bins, trait):
    """Per-vertex sums of weight * overlap fraction over nonzero joint bins.

    w_all is (n, bins*bins) in i-major bin order, matching the scalar
    histogram operations bin for bin.
    """
    probs = np.zeros(len(lox))
    vi = np.nonzero(live)[0]
    if not len(vi):
        return probs
    ex = np.linspace(lox[vi], hix[vi], bins + 1, axis=1)
    ey = np.linspace(loy[vi], hiy[vi], bins + 1, axis=1)
    nz_row, nz_bin = np.nonzero(w_all[vi] > 0.0)
    bi, bj = nz_bin // bins, nz_bin % bins
    w = w_all[vi][nz_row, nz_bin]
    rx0 = ex[nz_row, bi]
    rx1 = ex[nz_row, bi + 1]
    ry0 = ey[nz_row, bj]
    ry1 = ey[nz_row, bj + 1]
    contrib = np.empty(len(w))
    chunk = 262144
    for c0 in range(0, len(w), chunk):
        sl = slice(c0, min(c0 + chunk, len(w)))
        frac = _rect_overlap_fractions(rx0[sl], rx1[sl], ry0[sl], ry1[sl],
                                       trait.vertices)
        contrib[sl] = w[sl] * frac
    bounds = np.zeros(len(vi) + 1, dtype=np.int64)
    np.cumsum(np.bincount(nz_row, minlength=len(vi)), out=bounds[1:])
    for k, v in enumerate(vi):
        probs[v] = min(1.0, contrib[bounds[k]:bounds[k + 1]].sum())
    return probs


def _hist_block(xs, ys, cfg, trait, lo):
    bins = cfg.bins
    lox, hix = _hist_ranges(xs)
    loy, hiy = _hist_ranges(ys)
    rect = bounding_rect(trait)
    live = _box_overlaps(rect, lox, hix, loy, hiy)
    wx = _hist_weights(xs, lox, hix, bins)
    wy = _hist_weights(ys, loy, hiy, bins)
    w_all = np.einsum("ni,nj->nij", wx, wy).reshape(len(wx), bins * bins)
    probs = _hist_grid_probs(w_all, live, lox, hix, loy, hiy, bins, trait)
    return probs, int((~live).sum())


def _hist2d_block(xs, ys, cfg, trait, lo):
    bins = cfg.bins
    lox, hix = _hist_ranges(xs)
    loy, hiy = _hist_ranges(ys)
    rect = bounding_rect(trait)
    live = _box_overlaps(rect, lox, hix, loy, hiy)
    n, m = xs.shape
    ix = np.clip(np.floor((xs - lox[:, None]) * (bins / (hix - lox))[:, None]),
                 0, bins - 1).astype(np.int64)
    iy = np.clip(np.floor((ys - loy[:, None]) * (bins / (hiy - loy))[:, None]),
                 0, bins - 1).astype(np.int64)
    offsets = np.arange(n, dtype=np.int64)[:, None] * (bins * bins)
    counts = np.bincount((ix * bins + iy + offsets).ravel(), minlength=n * bins * bins)
    w_all = counts.reshape(n, bins * bins).astype(float) / m
    probs = _hist_grid_probs(w_all, live, lox, hix, loy, hiy, bins, trait)
    return probs, int((~live).sum())


def _bkde_block(xs, ys, cfg, trait, lo):
    res = cfg.integration_resolution
    m = xs.shape[1]
    factor = m ** (-1.0 / 6.0) if m > 1 else 1.0
    hx = np.maximum(factor * xs.std(axis=1, ddof=1) if m > 1 else 0.0,
                    np.maximum(1e-12, 1e-9 * np.abs(xs.mean(axis=1))))
    hy = np.maximum(factor * ys.std(axis=1, ddof=1) if m > 1 else 0.0,
                    np.maximum(1e-12, 1e-9 * np.abs(ys.mean(axis=1))))
    rect = bounding_rect(trait)
    live = _box_overlaps(
        rect,
        xs.min(axis=1) - 3.0 * hx, xs.max(axis=1) + 3.0 * hx,
        ys.min(axis=1) - 3.0 * hy, ys.max(axis=1) + 3.0 * hy,
    )
    probs = np.zeros(len(hx))
    for v in np.nonzero(live)[0]:
        probs[v] = interior_prob_bkde(xs[v], ys[v], res, trait,
                                      renormalize=cfg.renormalize)
    return probs, int((~live).sum())


def build_vertex_distribution(xs, ys, cfg: NoiseModelConfig):
    """Vertex distribution + kernel kind implied by a sampleable model config."""
    if cfg.kind == "parametric":
        cx, sx = fit_parametric(xs, cfg.kernel)
        cy, sy = fit_parametric(ys, cfg.kernel)
        return ParametricPair(cx, sx, cy, sy), cfg.kernel
    if cfg.kind == "kde":
        return SampleSet(xs, ys), cfg.kernel
    if cfg.kind == "histogram":
        return hist_pair_from_samples(xs, ys, cfg.bins), None
    if cfg.kind == "histogram2d":
        return hist2d_from_samples(xs, ys, cfg.bins), None
    raise ModelConfigError(f"model kind {cfg.kind!r} cannot be sampled")


def _model_support_box(model, kind):
    if isinstance(model, ParametricPair):
        r = effective_support_radius(kind)
        return (model.center_x - r * model.scale_x, model.center_x + r * model.scale_x,
                model.center_y - r * model.scale_y, model.center_y + r * model.scale_y)
    if isinstance(model, SampleSet):
        r = effective_support_radius(kind)
        from .kernels import kde_bandwidth
        hx = kde_bandwidth(model.x) if len(model.x) > 1 else scale_floor(model.x[0])
        hy = kde_bandwidth(model.y) if len(model.y) > 1 else scale_floor(model.y[0])
        return (model.x.min() - r * hx, model.x.max() + r * hx,
                model.y.min() - r * hy, model.y.max() + r * hy)
    if isinstance(model, Hist1DPair):
        return (model.edges_x[0], model.edges_x[-1],
                model.edges_y[0], model.edges_y[-1])
    if isinstance(model, Hist2D):
        return (model.edges_x[0], model.edges_x[-1],
                model.edges_y[0], model.edges_y[-1])
    raise TypeError(type(model).__name__)


def _monte_carlo_block(xs, ys, cfg, trait, lo):
    rect = bounding_rect(trait)
    probs = np.zeros(len(xs))
    culled = 0
    for i in range(len(xs)):
        model, kind = build_vertex_distribution(xs[i], ys[i], cfg.base)
        x0, x1, y0, y1 = _model_support_box(model, kind)
        if x1 < rect.x0 or x0 > rect.x1 or y1 < rect.y0 or y0 > rect.y1:
            culled += 1
            continue
        # counter-based stream keyed by (seed, vertex linear index):
        # deterministic regardless of scheduling
        rng = np.random.Generator(np.random.Philox(key=cfg.seed,
                                                   counter=[0, lo + i, 0, 0]))
        probs[i] = interior_prob_monte_carlo(model, trait, cfg.sample_count,
                                             kind=kind, rng=rng)
    return probs, culled


_BLOCK_FNS = {
    "mean-field": _mean_field_block,
    "parametric": _parametric_block,
    "kde": _kde_block,
    "histogram": _hist_block,
    "histogram2d": _hist2d_block,
    "bkde": _bkde_block,
    "monte-carlo": _monte_carlo_block,
}
