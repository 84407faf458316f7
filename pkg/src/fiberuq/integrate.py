"""Line integration of independent kernel products along polygon edges.

The interior probability of a trait polygon under an independent
product density pdf_X * pdf_Y equals the closed line integral of
L dx + M dy along the polygon boundary (counterclockwise), with
L = -1/2 pdf_X(x) F_Y(y) and M = +1/2 F_X(x) pdf_Y(y), F denoting the
kernel CDF.

Evaluation strategy per edge of the (support-clipped) polygon:

* compact kernels: the integrand is a polynomial of degree <= 5 in the
  edge parameter, integrated exactly with 8-node Gauss-Legendre;
* Gaussian, axis-aligned edges: elementary product of an erf difference
  and a CDF factor;
* Gaussian, oblique edges: exact closed form through the bivariate
  normal CDF (Owen's T function), since int phi(u) Phi(a + b u) du is a
  bivariate normal probability. An adaptive Gauss-Legendre fallback to
  absolute tolerance 1e-10 is kept as an independent cross-check and is
  what edge_integral_independent uses for raw segments.
"""

from __future__ import annotations

import numpy as np
from scipy.special import owens_t

from ._clip import clip_polygon_to_boxes, ring_edges, row_sums
from .errors import InternalConsistencyError
from .geometry import Rect2
from .kernels import (
    GAUSSIAN_TRUNCATION,
    KernelKind,
    ScaledKernel,
    effective_support_radius,
    scaled_cdf,
    unit_cdf,
    unit_pdf,
)

# raw Green's sums may exceed [0,1] by at most this much before the
# computation is considered inconsistent
CONSISTENCY_SLACK = 1e-9

#: absolute tolerance of the adaptive quadrature on oblique Gaussian edges
OBLIQUE_TOL = 1e-10

_MAX_DEPTH = 40
_PAIR_CHUNK = 16384
_TWO_PI = 2.0 * np.pi


def _gl01(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


_T8, _W8 = _gl01(8)
_T16, _W16 = _gl01(16)


# ---------------------------------------------------------------------------
# generic integrand and quadrature (reference path, compact-kernel path)


def _integrand(kind_x, kind_y, cx, cy, hx, hy, x, y, dx, dy):
    """(L dx + M dy) evaluated at edge points; all arrays broadcastable."""
    ux = (x - cx) / hx
    uy = (y - cy) / hy
    return (
        -0.5 * dx * unit_pdf(kind_x, ux) / hx * unit_cdf(kind_y, uy)
        + 0.5 * dy * unit_cdf(kind_x, ux) * unit_pdf(kind_y, uy) / hy
    )


def _gl_segment(kind_x, kind_y, cx, cy, hx, hy, ax, ay, dx, dy, t0, t1, nodes, weights):
    """Fixed-order Gauss-Legendre integral over edge parameter [t0, t1]."""
    span = t1 - t0
    t = t0[:, None] + span[:, None] * nodes
    x = ax[:, None] + t * dx[:, None]
    y = ay[:, None] + t * dy[:, None]
    f = _integrand(
        kind_x, kind_y, cx[:, None], cy[:, None], hx[:, None], hy[:, None],
        x, y, dx[:, None], dy[:, None],
    )
    return span * (f * weights).sum(axis=-1)


def _adaptive_oblique(kind_x, kind_y, cx, cy, hx, hy, ax, ay, dx, dy, tol):
    """Adaptive bisection quadrature on t in [0,1] for each oblique edge.

    Refinement decisions depend only on the owning edge, so results are
    independent of how edges are batched together.
    """
    n = len(ax)
    acc = np.zeros(n)
    eid = np.arange(n)
    t0 = np.zeros(n)
    t1 = np.ones(n)
    depth = 0
    while eid.size:
        args = (cx[eid], cy[eid], hx[eid], hy[eid], ax[eid], ay[eid], dx[eid], dy[eid])
        coarse = _gl_segment(kind_x, kind_y, *args, t0, t1, _T8, _W8)
        fine = _gl_segment(kind_x, kind_y, *args, t0, t1, _T16, _W16)
        done = (np.abs(fine - coarse) <= tol * (t1 - t0)) | (depth >= _MAX_DEPTH)
        np.add.at(acc, eid[done], fine[done])
        keep = ~done
        eid_k, t0_k, t1_k = eid[keep], t0[keep], t1[keep]
        mid = 0.5 * (t0_k + t1_k)
        eid = np.concatenate([eid_k, eid_k])
        t0 = np.concatenate([t0_k, mid])
        t1 = np.concatenate([mid, t1_k])
        depth += 1
    return acc


def _compact_ring_sums(kind, cx, cy, hx, hy, vx, vy):
    """Exact edge integrals for compact kernels over pre-clipped rings.

    Rings are clipped to the joint kernel support, so the integrand is a
    polynomial of degree <= 5 on every edge and 8-node quadrature is exact.
    """
    ax, ay, bx, by = ring_edges(vx, vy)
    dx = bx - ax
    dy = by - ay
    x = ax[..., None] + _T8 * dx[..., None]
    y = ay[..., None] + _T8 * dy[..., None]
    f = _integrand(
        kind, kind,
        cx[:, None, None], cy[:, None, None], hx[:, None, None], hy[:, None, None],
        x, y, dx[..., None], dy[..., None],
    )
    per_edge = (f * _W8).sum(axis=-1)
    return row_sums(per_edge)


# ---------------------------------------------------------------------------
# Gaussian closed forms


def _owen_phi2_terms(u, phi_u, alpha, beta, gamma, phi_gamma, rho):
    """Phi_2(u, gamma; rho) with gamma = alpha/sqrt(1+beta^2), rho = -beta/sqrt(1+beta^2).

    This is P(U <= u, V <= alpha + beta U) for independent-standard (U, W)
    rewritten as a correlated pair; the Owen T arguments simplify to
    (alpha + beta u)/u and (u + beta(alpha + beta u))/alpha, which avoids
    cancellation for extreme beta.
    """
    u_zero = u == 0.0
    g_zero = gamma == 0.0
    num_h = alpha + beta * u
    a_h = num_h / np.where(u_zero, 1.0, u)
    if u_zero.any():
        a_h[u_zero] = np.copysign(np.inf, num_h[u_zero])
    a_k = (u + beta * num_h) / np.where(g_zero, 1.0, alpha)
    if g_zero.any():
        a_k[g_zero] = np.copysign(np.inf, u[g_zero])
    prod = u * gamma
    delta = 0.5 * ((prod < 0.0) | ((prod == 0.0) & (u + gamma < 0.0)))
    val = 0.5 * (phi_u + phi_gamma) - owens_t(u, a_h) - owens_t(gamma, a_k) - delta
    # degenerate corner: both coordinates exactly zero
    corner = u_zero & g_zero
    if corner.any():
        val[corner] = 0.25 + np.arcsin(np.clip(rho if np.ndim(rho) == 0
                                                else rho[corner], -1.0, 1.0)) / _TWO_PI
    return val


def _phi2_diff(u1, u2, phi_u1, phi_u2, alpha, beta):
    """Phi_2(u2, gamma; rho) - Phi_2(u1, gamma; rho) for the edge family above."""
    denom = np.hypot(1.0, beta)
    gamma = alpha / denom
    rho = -beta / denom
    phi_gamma = unit_cdf(KernelKind.GAUSSIAN, gamma)
    hi = _owen_phi2_terms(u2, phi_u2, alpha, beta, gamma, phi_gamma, rho)
    lo = _owen_phi2_terms(u1, phi_u1, alpha, beta, gamma, phi_gamma, rho)
    return hi - lo


def _gaussian_ring_sums(cx, cy, hx, hy, vx, vy, oblique="closed", tol=OBLIQUE_TOL):
    """Edge integrals for Gaussian kernels over pre-clipped rings."""
    gauss = KernelKind.GAUSSIAN
    ax, ay, bx, by = ring_edges(vx, vy)
    dx = bx - ax
    dy = by - ay
    ua_x = (ax - cx[:, None]) / hx[:, None]
    ua_y = (ay - cy[:, None]) / hy[:, None]
    fx_a = unit_cdf(gauss, ua_x)
    fy_a = unit_cdf(gauss, ua_y)
    fx_b = np.roll(fx_a, -1, axis=1)
    fy_b = np.roll(fy_a, -1, axis=1)

    horizontal = (dy == 0.0) & (dx != 0.0)
    vertical = (dx == 0.0) & (dy != 0.0)
    edge_vals = np.where(horizontal, -0.5 * fy_a * (fx_b - fx_a), 0.0)
    edge_vals += np.where(vertical, 0.5 * fx_a * (fy_b - fy_a), 0.0)

    # |edge integral| <= 1/2 (|dFx| max Fy + |dFy| max Fx); the CDF factors
    # are monotone along an edge, so endpoint maxima bound the interior.
    # Edges below 1e-12 are skipped; a ring of them stays 1e-11 accurate.
    obl = (dx != 0.0) & (dy != 0.0)
    dfx = fx_b - fx_a
    dfy = fy_b - fy_a
    weight = np.abs(dfx) * np.maximum(fy_a, fy_b) + np.abs(dfy) * np.maximum(fx_a, fx_b)
    obl &= weight > 2e-12
    # when |dFx| |dFy| <= 2e-12 the midpoint product approximates the edge
    # integral to 1e-12 (the residual integrates against a CDF of total
    # variation |dFy|); only edges near the kernel in both axes need the
    # exact bivariate form below
    easy = obl & (np.abs(dfx) * np.abs(dfy) <= 2e-12)
    if easy.any():
        edge_vals += np.where(
            easy,
            -0.5 * dfx * (0.5 * (fy_a + fy_b)) + 0.5 * dfy * (0.5 * (fx_a + fx_b)),
            0.0,
        )
        obl &= ~easy
    if obl.any():
        rows, slots = np.nonzero(obl)
        cxg, cyg = cx[rows], cy[rows]
        hxg, hyg = hx[rows], hy[rows]
        axg, ayg = ax[rows, slots], ay[rows, slots]
        dxg, dyg = dx[rows, slots], dy[rows, slots]
        if oblique == "closed":
            # integration by parts along the edge:
            #   int F_X dF_Y - 1/2 [F_X F_Y]_a^b
            # needs a single bivariate-normal difference per edge (the
            # boundary product telescopes to zero around a closed ring)
            ub_y = np.roll(ua_y, -1, axis=1)
            r = dxg / dyg
            beta2 = r * hyg / hxg
            alpha2 = (axg + (cyg - ayg) * r - cxg) / hxg
            d2 = _phi2_diff(
                ua_y[rows, slots], ub_y[rows, slots],
                fy_a[rows, slots], fy_b[rows, slots], alpha2, beta2,
            )
            fxya = fx_a[rows, slots] * fy_a[rows, slots]
            fxyb = fx_b[rows, slots] * fy_b[rows, slots]
            vals = d2 - 0.5 * (fxyb - fxya)
        else:
            vals = _adaptive_oblique(
                gauss, gauss, cxg, cyg, hxg, hyg, axg, ayg, dxg, dyg, tol)
        edge_vals[rows, slots] = vals
    return row_sums(edge_vals)


# ---------------------------------------------------------------------------
# separable Gaussian pair grids (KDE inner loop)


def gaussian_pair_grid_probs(xs, ys, hx, hy, trait_verts, cull=True):
    """Per-pair probabilities for the m x m kernel grid of each sample row.

    Gaussian kernels need no support clipping: the closed line-integral
    form is exact along the raw trait edges, and the endpoint CDFs then
    depend on a single sample index each, so the m^2 pair grid costs
    O(m V) transcendentals plus the bivariate term on edges that pass
    near the kernel in both axes. Returns (rows, m*m) clamped
    probabilities in i-major pair order.
    """
    verts = np.asarray(trait_verts, float)
    xs = np.atleast_2d(np.asarray(xs, float))
    ys = np.atleast_2d(np.asarray(ys, float))
    hx = np.asarray(hx, float)
    hy = np.asarray(hy, float)
    g, m = xs.shape
    nv = len(verts)
    vx = verts[:, 0]
    vy = verts[:, 1]
    dxk = np.roll(vx, -1) - vx
    dyk = np.roll(vy, -1) - vy
    tx0, tx1 = vx.min(), vx.max()
    ty0, ty1 = vy.min(), vy.max()
    radius = GAUSSIAN_TRUNCATION

    kind = KernelKind.GAUSSIAN
    hxc = hx[:, None, None]
    hyc = hy[:, None, None]
    ux = (vx[None, None, :] - xs[:, :, None]) / hxc      # (g, m, nv)
    uy = (vy[None, None, :] - ys[:, :, None]) / hyc
    fx = unit_cdf(kind, ux)
    fy = unit_cdf(kind, uy)
    fx_b = np.roll(fx, -1, axis=2)
    fy_b = np.roll(fy, -1, axis=2)
    dfx = fx_b - fx
    dfy = fy_b - fy
    adfx = np.abs(dfx)
    adfy = np.abs(dfy)
    maxfx = np.maximum(fx, fx_b)
    maxfy = np.maximum(fy, fy_b)

    p = np.zeros((g, m, m))
    hard_mask = np.zeros((g, m, m, nv), dtype=bool)
    for k in range(nv):
        if dxk[k] == 0.0 and dyk[k] == 0.0:
            continue
        if dyk[k] == 0.0:
            # horizontal edge: -1/2 F_Y(y) dF_X
            p += -0.5 * dfx[:, :, None, k] * fy[:, None, :, k]
            continue
        if dxk[k] == 0.0:
            p += 0.5 * fx[:, :, None, k] * dfy[:, None, :, k]
            continue
        live = (adfx[:, :, None, k] * maxfy[:, None, :, k]
                + maxfx[:, :, None, k] * adfy[:, None, :, k]) > 2e-12
        # midpoint-product error is bounded by |dFx| |dFy| / 2: the CDFs are
        # monotone along the edge, so the residual integrates against a
        # total variation of |dFy|
        easy = live & (adfx[:, :, None, k] * adfy[:, None, :, k] <= 2e-12)
        if easy.any():
            val = (
                -0.5 * dfx[:, :, None, k] * (0.5 * (fy + fy_b))[:, None, :, k]
                + 0.5 * (0.5 * (fx + fx_b))[:, :, None, k] * dfy[:, None, :, k]
            )
            p += np.where(easy, val, 0.0)
        hard_mask[:, :, :, k] = live & ~easy

    if hard_mask.any():
        rr, ii, jj, kk = np.nonzero(hard_mask)
        r = dxk[kk] / dyk[kk]
        beta = r * hy[rr] / hx[rr]
        alpha = (vx[kk] + (ys[rr, jj] - vy[kk]) * r - xs[rr, ii]) / hx[rr]
        uy_b = np.roll(uy, -1, axis=2)
        d2 = _phi2_diff(
            uy[rr, jj, kk], uy_b[rr, jj, kk],
            fy[rr, jj, kk], fy_b[rr, jj, kk], alpha, beta,
        )
        vals = d2 - 0.5 * (fx_b[rr, ii, kk] * fy_b[rr, jj, kk]
                           - fx[rr, ii, kk] * fy[rr, jj, kk])
        contrib = np.zeros((g, m, m, nv))
        contrib[rr, ii, jj, kk] = vals
        p += contrib.sum(axis=3)

    if cull:
        keep = ~(
            ((xs + radius * hx[:, None] < tx0) | (xs - radius * hx[:, None] > tx1))[:, :, None]
            | ((ys + radius * hy[:, None] < ty0) | (ys - radius * hy[:, None] > ty1))[:, None, :]
        )
        p = np.where(keep, p, 0.0)
    worst = max(float(-p.min(initial=0.0)), float(p.max(initial=1.0)) - 1.0)
    if worst > CONSISTENCY_SLACK:
        raise InternalConsistencyError(
            f"edge-integral sum outside [0,1] by {worst:.3e}")
    return np.clip(p, 0.0, 1.0).reshape(g, m * m)


# ---------------------------------------------------------------------------
# pair classification fast paths


def _parity_inside(verts, px, py):
    """Crossing-parity point-in-polygon without boundary handling.

    Only used to pre-classify support boxes; boxes with a corner on the
    trait boundary are routed to the exact path by the edge test below.
    """
    inside = np.zeros(px.shape, dtype=bool)
    vn = np.roll(verts, -1, axis=0)
    for (ax, ay), (bx, by) in zip(verts, vn):
        cond = (ay > py) != (by > py)
        if ay != by:
            xint = ax + (py - ay) * (bx - ax) / (by - ay)
            inside ^= cond & (px < xint)
    return inside


def _boxes_inside_polygon(verts, rx0, rx1, ry0, ry1):
    """True for boxes provably contained in the polygon interior.

    All four corners must pass the parity test and no polygon edge may
    come near the box (separating-axis test); ambiguous contact falls
    back to exact clipping.
    """
    inside = _parity_inside(verts, rx0, ry0)
    inside &= _parity_inside(verts, rx1, ry0)
    inside &= _parity_inside(verts, rx1, ry1)
    inside &= _parity_inside(verts, rx0, ry1)
    if not inside.any():
        return inside
    touches = np.zeros(rx0.shape, dtype=bool)
    vn = np.roll(verts, -1, axis=0)
    for (ax, ay), (bx, by) in zip(verts, vn):
        bb = (
            (max(ax, bx) >= rx0) & (min(ax, bx) <= rx1)
            & (max(ay, by) >= ry0) & (min(ay, by) <= ry1)
        )
        ex, ey = bx - ax, by - ay
        s1 = ex * (ry0 - ay) - ey * (rx0 - ax)
        s2 = ex * (ry0 - ay) - ey * (rx1 - ax)
        s3 = ex * (ry1 - ay) - ey * (rx1 - ax)
        s4 = ex * (ry1 - ay) - ey * (rx0 - ax)
        separated = (np.minimum(np.minimum(s1, s2), np.minimum(s3, s4)) > 0.0) | (
            np.maximum(np.maximum(s1, s2), np.maximum(s3, s4)) < 0.0
        )
        touches |= bb & ~separated
    return inside & ~touches


def _full_box_mass(kind: KernelKind) -> float:
    """Kernel-pair mass of the whole support box (1 for compact kernels)."""
    r = effective_support_radius(kind)
    m = unit_cdf(kind, r) - unit_cdf(kind, -r)
    return float(m * m)


# ---------------------------------------------------------------------------
# public entry points


def greens_prob_batch(kind: KernelKind, cx, cy, hx, hy, trait_verts,
                      gaussian_oblique="closed", tol=OBLIQUE_TOL):
    """Interior probability of one trait for n independent kernel pairs.

    cx, cy, hx, hy are per-pair centers and bandwidths. The trait is
    clipped to each pair's joint support rectangle (exact support for the
    compact kernels, 8 bandwidths for the Gaussian) and the line integrals
    are summed along the clipped boundary. Support boxes that provably
    miss the trait contribute 0 without clipping; boxes provably inside
    it contribute the full box mass. Raw sums outside [0,1] by more than
    CONSISTENCY_SLACK raise InternalConsistencyError; the remainder is
    clamped.
    """
    cx = np.asarray(cx, float)
    cy = np.asarray(cy, float)
    hx = np.asarray(hx, float)
    hy = np.asarray(hy, float)
    verts = np.asarray(trait_verts, float)
    tx0, tx1 = verts[:, 0].min(), verts[:, 0].max()
    ty0, ty1 = verts[:, 1].min(), verts[:, 1].max()
    box_mass = _full_box_mass(kind)
    n = len(cx)
    out = np.zeros(n)
    radius = effective_support_radius(kind)
    for lo in range(0, n, _PAIR_CHUNK):
        sl = slice(lo, min(lo + _PAIR_CHUNK, n))
        rx0 = cx[sl] - radius * hx[sl]
        rx1 = cx[sl] + radius * hx[sl]
        ry0 = cy[sl] - radius * hy[sl]
        ry1 = cy[sl] + radius * hy[sl]
        live = (rx1 >= tx0) & (rx0 <= tx1) & (ry1 >= ty0) & (ry0 <= ty1)
        if not live.any():
            continue
        chunk = np.zeros(rx0.shape)
        contained = _boxes_inside_polygon(verts, rx0, rx1, ry0, ry1)
        chunk[contained] = box_mass
        general = live & ~contained
        if general.any():
            gi = np.nonzero(general)[0]
            vx, vy, cnt = clip_polygon_to_boxes(
                verts, rx0[gi], rx1[gi], ry0[gi], ry1[gi])
            keep = cnt >= 3
            if keep.any():
                ki = gi[keep]
                vxk = vx[keep]
                vyk = vy[keep]
                sx, sy = cx[sl][ki], cy[sl][ki]
                shx, shy = hx[sl][ki], hy[sl][ki]
                if kind == KernelKind.GAUSSIAN:
                    raw = _gaussian_ring_sums(sx, sy, shx, shy, vxk, vyk,
                                              oblique=gaussian_oblique, tol=tol)
                else:
                    raw = _compact_ring_sums(kind, sx, sy, shx, shy, vxk, vyk)
                worst = max(float(-raw.min(initial=0.0)),
                            float(raw.max(initial=1.0)) - 1.0)
                if worst > CONSISTENCY_SLACK:
                    raise InternalConsistencyError(
                        f"edge-integral sum outside [0,1] by {worst:.3e}")
                chunk[ki] = np.clip(raw, 0.0, 1.0)
        out[sl] = chunk
    return out


def interior_prob_rect(px: ScaledKernel, py: ScaledKernel, r: Rect2) -> float:
    """Product-of-CDF-differences probability for a rectangular trait."""
    return float(
        (scaled_cdf(px, r.x1) - scaled_cdf(px, r.x0))
        * (scaled_cdf(py, r.y1) - scaled_cdf(py, r.y0))
    )


def edge_integral_independent(a, b, px: ScaledKernel, py: ScaledKernel) -> float:
    """Integral of L dx + M dy along the oriented segment a -> b.

    y varies linearly in x along the segment. Axis-aligned edges reduce to
    an elementary product; oblique edges are split at the compact-kernel
    support breakpoints crossed by the segment, each piece integrated
    exactly (compact kernels) or by adaptive quadrature to 1e-10 (Gaussian).
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    dx = float(b[0] - a[0])
    dy = float(b[1] - a[1])
    if dx == 0.0 and dy == 0.0:
        return 0.0
    if dx == 0.0:
        return float(0.5 * scaled_cdf(px, a[0]) * (scaled_cdf(py, b[1]) - scaled_cdf(py, a[1])))
    if dy == 0.0:
        return float(-0.5 * scaled_cdf(py, a[1]) * (scaled_cdf(px, b[0]) - scaled_cdf(px, a[0])))

    cuts = {0.0, 1.0}
    for k, start, delta in ((px, a[0], dx), (py, a[1], dy)):
        if k.kind != KernelKind.GAUSSIAN:
            for side in (-1.0, 1.0):
                t = (k.center + side * k.bandwidth - start) / delta
                if 0.0 < t < 1.0:
                    cuts.add(float(t))
    ts = sorted(cuts)

    total = 0.0
    adaptive = KernelKind.GAUSSIAN in (px.kind, py.kind)
    args = (
        np.array([px.center]), np.array([py.center]),
        np.array([px.bandwidth]), np.array([py.bandwidth]),
    )
    for t0, t1 in zip(ts[:-1], ts[1:]):
        seg_a = (a[0] + t0 * dx, a[1] + t0 * dy)
        seg_d = ((t1 - t0) * dx, (t1 - t0) * dy)
        seg_args = (np.array([seg_a[0]]), np.array([seg_a[1]]),
                    np.array([seg_d[0]]), np.array([seg_d[1]]))
        if adaptive:
            piece = _adaptive_oblique(px.kind, py.kind, *args, *seg_args, OBLIQUE_TOL)[0]
        else:
            piece = _gl_segment(px.kind, py.kind, *args, *seg_args,
                                np.zeros(1), np.ones(1), _T8, _W8)[0]
        total += float(piece)
    return total
