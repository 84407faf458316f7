"""Vectorized Sutherland-Hodgman clipping of one polygon against many boxes.

The hot loop of every closed-form probability model: the trait polygon is
clipped against one axis-aligned rectangle per kernel pair or histogram
bin. Outputs use padded (n, slots) arrays where every slot past the vertex
count repeats vertex 0, so that rolling left by one slot yields the closing
edge and exactly-zero contributions from the padding.

Per-row reductions over the padded axis accumulate sequentially, never
pairwise: trailing zero terms then cannot change the result, so a row's
value is independent of how wide its batch happened to be padded.
"""

from __future__ import annotations

import numpy as np


def clip_polygon_to_boxes(verts: np.ndarray, x0, x1, y0, y1):
    """Clip one CCW polygon against n boxes [x0,x1] x [y0,y1].

    Returns (vx, vy, cnt): (n, slots) padded coordinate arrays and the
    per-box vertex count. Boxes that miss the polygon get cnt 0.
    """
    verts = np.asarray(verts, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    v = len(verts)
    vx = np.broadcast_to(verts[:, 0], (n, v)).copy()
    vy = np.broadcast_to(verts[:, 1], (n, v)).copy()
    cnt = np.full(n, v, dtype=np.int64)
    for bound, axis, keep_ge in ((x0, 0, True), (x1, 0, False), (y0, 1, True), (y1, 1, False)):
        vx, vy, cnt = _clip_pass(vx, vy, cnt, np.asarray(bound, float), axis, keep_ge)
    return vx, vy, cnt


def _clip_pass(vx, vy, cnt, bound, axis, keep_ge):
    n, c = vx.shape
    coord = vx if axis == 0 else vy
    b = bound[:, None] if bound.ndim else bound
    inside = coord >= b if keep_ge else coord <= b

    nxt_x = np.roll(vx, -1, axis=1)
    nxt_y = np.roll(vy, -1, axis=1)
    nxt_in = np.roll(inside, -1, axis=1)

    valid = np.arange(c)[None, :] < cnt[:, None]
    both = inside & nxt_in
    mixed = inside ^ nxt_in
    entering = mixed & nxt_in

    n_emit = np.where(valid, both.astype(np.int64) + mixed + entering, 0)
    ends = np.cumsum(n_emit, axis=1)
    new_cnt = ends[:, -1]
    starts = ends - n_emit
    cap = max(int(new_cnt.max(initial=0)), 1)

    # intersection with the clip line; the clipped coordinate is set exactly
    cur_c = vx if axis == 0 else vy
    nxt_c = nxt_x if axis == 0 else nxt_y
    cur_o = vy if axis == 0 else vx
    nxt_o = nxt_y if axis == 0 else nxt_x
    denom = nxt_c - cur_c
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (b - cur_c) / np.where(denom == 0.0, 1.0, denom)
    int_o = cur_o + t * (nxt_o - cur_o)
    if axis == 0:
        int_x = np.broadcast_to(b, int_o.shape)
        int_y = int_o
    else:
        int_x = int_o
        int_y = np.broadcast_to(b, int_o.shape)

    out_x = np.zeros((n, cap))
    out_y = np.zeros((n, cap))
    rows = np.broadcast_to(np.arange(n)[:, None], (n, c))

    m1 = valid & (n_emit >= 1)
    first_x = np.where(mixed, int_x, nxt_x)
    first_y = np.where(mixed, int_y, nxt_y)
    out_x[rows[m1], starts[m1]] = first_x[m1]
    out_y[rows[m1], starts[m1]] = first_y[m1]

    m2 = valid & (n_emit == 2)
    pos2 = starts + 1
    out_x[rows[m2], pos2[m2]] = nxt_x[m2]
    out_y[rows[m2], pos2[m2]] = nxt_y[m2]

    # pad every slot past the count with vertex 0
    pad = np.arange(cap)[None, :] >= new_cnt[:, None]
    out_x = np.where(pad, out_x[:, :1], out_x)
    out_y = np.where(pad, out_y[:, :1], out_y)
    return out_x, out_y, new_cnt


def ring_edges(vx, vy):
    """Start/end coordinates of each boundary edge of padded rings."""
    return vx, vy, np.roll(vx, -1, axis=1), np.roll(vy, -1, axis=1)


def row_sums(values):
    """Sequential per-row sum of a 2D array.

    Accumulates column by column, so trailing exactly-zero padding can
    never change a row's value, whatever width the batch was padded to.
    """
    n, c = values.shape
    acc = np.zeros(n)
    for j in range(c):
        acc += values[:, j]
    return acc


def ring_areas(vx, vy):
    """Signed shoelace area per padded ring (padding contributes zero)."""
    xn = np.roll(vx, -1, axis=1)
    yn = np.roll(vy, -1, axis=1)
    return 0.5 * row_sums(vx * yn - xn * vy)
