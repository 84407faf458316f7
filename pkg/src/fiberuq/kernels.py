"""Noise kernels, their CDFs, bandwidth selection, and parametric fits.

Three kernels are supported: uniform, Epanechnikov, and Gaussian. The
compact kernels live on [-1, 1]; the Gaussian is truncated at eight
bandwidths only when integration regions must be bounded (mass outside
is below 1e-14).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf

from .errors import DegenerateSamplesError


class KernelKind(str, Enum):
    UNIFORM = "uniform"
    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"


#: Truncation radius (in bandwidths) used when a bounded support box is
#: needed; exact for the compact kernels, 8 sigma for the Gaussian.
GAUSSIAN_TRUNCATION = 8.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_SQRT_2 = 1.0 / math.sqrt(2.0)


def effective_support_radius(kind: KernelKind) -> float:
    """Half-width (in bandwidth units) of the region carrying the kernel mass."""
    return 1.0 if kind != KernelKind.GAUSSIAN else GAUSSIAN_TRUNCATION


def unit_pdf(kind: KernelKind, u):
    """Density of the unit-bandwidth kernel centered at 0."""
    u = np.asarray(u, dtype=float)
    if kind == KernelKind.UNIFORM:
        out = np.where(np.abs(u) <= 1.0, 0.5, 0.0)
    elif kind == KernelKind.EPANECHNIKOV:
        out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    elif kind == KernelKind.GAUSSIAN:
        out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return out if out.ndim else float(out)


def unit_cdf(kind: KernelKind, u):
    """Antiderivative of unit_pdf fixed so that CDF(-inf) = 0."""
    u = np.asarray(u, dtype=float)
    if kind == KernelKind.UNIFORM:
        out = np.clip(0.5 * (u + 1.0), 0.0, 1.0)
    elif kind == KernelKind.EPANECHNIKOV:
        uc = np.clip(u, -1.0, 1.0)
        out = 0.75 * (uc - uc * uc * uc / 3.0) + 0.5
    elif kind == KernelKind.GAUSSIAN:
        out = 0.5 * erf(u * _INV_SQRT_2) + 0.5
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ScaledKernel:
    """Kernel of a given kind shifted to ``center`` and scaled to bandwidth ``h``."""

    kind: KernelKind
    center: float
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    def support(self) -> tuple[float, float]:
        r = effective_support_radius(self.kind) * self.bandwidth
        return self.center - r, self.center + r


def scaled_pdf(k: ScaledKernel, x):
    """K_h(x - center) = K((x - center)/h) / h."""
    out = unit_pdf(k.kind, (np.asarray(x, float) - k.center) / k.bandwidth) / k.bandwidth
    return out if np.ndim(out) else float(out)


def scaled_cdf(k: ScaledKernel, x):
    return unit_cdf(k.kind, (np.asarray(x, float) - k.center) / k.bandwidth)


def scale_floor(center) -> float:
    """Lower bound applied to bandwidths/scales of degenerate sample sets."""
    return max(1e-12, 1e-9 * abs(float(center)))


def silverman_bandwidth(samples) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(std, IQR/1.34) * m^(-1/5).

    The standard deviation uses the population convention (divide by m).
    Raises DegenerateSamplesError when the result would not be positive
    (all-equal samples, or zero interquartile range); callers substitute
    the scale floor in that case.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise DegenerateSamplesError(f"need at least 2 samples, got shape {x.shape}")
    sd = float(np.std(x))
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    h = 0.9 * min(sd, iqr / 1.34) * len(x) ** (-0.2)
    if not h > 0.0:
        raise DegenerateSamplesError("samples have no usable spread")
    return h


def kde_bandwidth(samples) -> float:
    """silverman_bandwidth with the degenerate case floored instead of raised."""
    try:
        return silverman_bandwidth(samples)
    except DegenerateSamplesError:
        return scale_floor(np.mean(np.asarray(samples, float)))


def fit_parametric(samples, kind: KernelKind) -> tuple[float, float]:
    """Fit (center, scale) of a single kernel to a sample set.

    gaussian: (mean, population std); uniform: (midrange, half-range);
    epanechnikov: (mean, sqrt(5) * std) so the kernel variance scale^2/5
    matches the sample variance. The scale is floored for zero-spread sets.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 1:
        raise ValueError(f"need a 1D sample set, got shape {x.shape}")
    if kind == KernelKind.UNIFORM:
        lo, hi = float(x.min()), float(x.max())
        center = 0.5 * (lo + hi)
        scale = 0.5 * (hi - lo)
    elif kind == KernelKind.GAUSSIAN:
        center = float(np.mean(x))
        scale = float(np.std(x))
    elif kind == KernelKind.EPANECHNIKOV:
        center = float(np.mean(x))
        scale = math.sqrt(5.0) * float(np.std(x))
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return center, max(scale, scale_floor(center))
