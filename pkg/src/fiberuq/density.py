"""Attribute-density images and probability-volume slices.

The density image is a binned stand-in for a continuous scatterplot: the
mean-field attribute pairs of an ensemble are counted into a 2D
histogram whose image is used as the backdrop for trait drawing.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .grid import EnsembleField, ProbabilityVolume

_AXES = {"x": 0, "y": 1, "z": 2}


def attribute_density(field: EnsembleField, bins: int):
    """Mean-field attribute pairs binned into a (bins, bins) count grid.

    Returns (counts, ranges) with counts[i, j] the number of vertices in
    attribute-1 bin i and attribute-2 bin j; counts sum to the vertex
    count. ranges is (a1_min, a1_max, a2_min, a2_max).
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    pairs = field.mean_field().attribute_pairs(0)
    a1, a2 = pairs[:, 0], pairs[:, 1]
    lo1, hi1 = float(a1.min()), float(a1.max())
    lo2, hi2 = float(a2.min()), float(a2.max())
    if hi1 <= lo1:
        hi1 = lo1 + 1.0
    if hi2 <= lo2:
        hi2 = lo2 + 1.0
    counts, _, _ = np.histogram2d(a1, a2, bins=bins,
                                  range=((lo1, hi1), (lo2, hi2)))
    return counts.astype(np.int64), (lo1, hi1, lo2, hi2)


def density_image(counts: np.ndarray, log: bool = False) -> Image.Image:
    """Grayscale rendering of a density grid.

    Row 0 of the image is the highest attribute-2 bin (plot orientation);
    columns run with attribute 1. Intensities are max-normalized, after
    log1p when log is set.
    """
    values = counts.astype(np.float64)
    if log:
        values = np.log1p(values)
    peak = values.max()
    if peak > 0.0:
        values = values / peak
    img = (values.T[::-1] * 255.0).round().astype(np.uint8)
    return Image.fromarray(img, mode="L")


def slice_array(vol: ProbabilityVolume, axis: str, index: int) -> np.ndarray:
    """2D slice of a probability volume normal to an axis.

    Rows run with the higher remaining axis, columns with the lower one
    (e.g. a z slice is indexed [y, x]).
    """
    if axis not in _AXES:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    a = _AXES[axis]
    dims = vol.grid.dims
    if not 0 <= index < dims[a]:
        raise IndexError(f"slice index {index} out of range for axis {axis} "
                         f"with {dims[a]} vertices")
    cube = vol.as_array3d()  # [z, y, x]
    if axis == "z":
        return cube[index, :, :]
    if axis == "y":
        return cube[:, index, :]
    return cube[:, :, index]


def slice_image(vol: ProbabilityVolume, axis: str, index: int,
                vmin: float = 0.0, vmax: float = 1.0) -> Image.Image:
    """Grayscale slice with values window-mapped from [vmin, vmax]."""
    if not vmax > vmin:
        raise ValueError("require vmax > vmin")
    data = slice_array(vol, axis, index).astype(np.float64)
    scaled = np.clip((data - vmin) / (vmax - vmin), 0.0, 1.0)
    img = (scaled[::-1] * 255.0).round().astype(np.uint8)
    return Image.fromarray(img, mode="L")


def png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
