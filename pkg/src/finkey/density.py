"""Piecewise-linear densities over a regular grid of cells, with exact integrals.

A :class:`GridDensity` holds a stack of nonnegative cell masses
``mass[s, c1, ..., cd]`` (``d`` = 1 or 2 continuous dimensions, ``s`` indexes
discrete "slices" such as the values of a quantized variable). Each slice is
turned into a density by linear interpolation between cell centres, where the
value at a centre is ``mass / cell_volume``; beyond the outermost centres the
density is extended flat. In two dimensions every rectangle between four
centres is split into four triangles through its midpoint, whose value is the
mean of the corners. Both constructions preserve the mass of every slice
exactly.

Integrals of ``phi(p) = p**beta * log(p)**j`` (``j`` in {0, 1}) over each
linear piece are evaluated in closed form through divided differences of the
first and second antiderivatives of ``phi`` (Hermite-Genocchi), so entropies
and Renyi-type moments carry no sampling noise. Regions where the density is
zero are outside the support and contribute nothing.
"""

from __future__ import annotations

import numpy as np

LN2 = np.log(2.0)

# relative spread below which a piece is treated as nearly constant
_FLAT_TOL = 1e-3

# 7-point degree-5 rule on the reference triangle, barycentric coordinates
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
_TRI_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def _safe_beta(beta):
    # antiderivatives have poles at beta = -1 and -2
    for pole in (-1.0, -2.0):
        if abs(beta - pole) < 1e-7:
            return pole + 1e-7
    return beta


def _phi(p, beta, j, order):
    """``order``-th antiderivative of p**beta * log(p)**j at p > 0."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lp = np.log(p)
        if order == 0:
            return p ** beta * (lp if j else 1.0)
        if order == 1:
            b1 = beta + 1.0
            if j == 0:
                return p ** b1 / b1
            return p ** b1 * (lp / b1 - 1.0 / b1 ** 2)
        b1, b2 = beta + 1.0, beta + 2.0
        if j == 0:
            return p ** b2 / (b1 * b2)
        return p ** b2 * (lp / (b1 * b2) - (2 * beta + 3) / (b1 ** 2 * b2 ** 2))


def _phi_at(p, beta, j, order):
    """Like :func:`_phi` but with the (finite) limit value 0 at p == 0."""
    out = _phi(np.where(p > 0, p, 1.0), beta, j, order)
    return np.where(p > 0, out, 0.0)


def _dphi(p, beta, j, k=1):
    """k-th derivative (k = 1, 2) of p**beta * log(p)**j."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lp = np.log(p)
        if k == 1:
            if j == 0:
                return beta * p ** (beta - 1.0)
            return p ** (beta - 1.0) * (beta * lp + 1.0)
        if j == 0:
            return beta * (beta - 1.0) * p ** (beta - 2.0)
        return p ** (beta - 2.0) * ((beta - 1.0) * (beta * lp + 1.0) + beta)


def _first_dd(a, b, beta, j, order):
    """Divided difference (F(b) - F(a)) / (b - a) of the ``order``-th antiderivative.

    Assumes 0 <= a <= b elementwise and that the value is finite.
    """
    fa = _phi_at(a, beta, j, order)
    fb = _phi_at(b, beta, j, order)
    h = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (fb - fa) / h
    close = h <= _FLAT_TOL * b
    if np.any(close):
        m = 0.5 * (a + b)
        mc = np.where(m > 0, m, 1.0)
        # midpoint expansion, error O(h^4)
        approx = _phi(mc, beta, j, order - 1)
        # third derivative of the order-th antiderivative
        corr = _dphi(mc, beta, j, k=2 if order == 1 else 1)
        with np.errstate(invalid="ignore"):
            approx = approx + np.where(h > 0, h * h / 24.0 * corr, 0.0)
        approx = np.where(m > 0, approx, _phi_at(m, beta, j, order - 1))
        dd = np.where(close, approx, dd)
    return dd


def segment_integral(a, b, beta, j):
    """Mean of phi over a linear piece with end values ``a``, ``b`` (times length 1).

    Returns +inf (j = 0) or -inf (j = 1) where the integral diverges.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    out = _first_dd(lo, hi, beta, j, 1)
    zero = hi <= 0
    diverge = (lo <= 0) & ~zero & (beta <= -1.0)
    out = np.where(zero, 0.0, out)
    return np.where(diverge, -np.inf if j else np.inf, out)


def triangle_integral(a, b, c, beta, j):
    """Integral of phi over a linear triangle, divided by twice its area.

    Equivalently the second divided difference of the second antiderivative,
    ``F2[a, b, c]``; multiply by ``2 * area`` for the actual integral.
    """
    v = np.sort(np.stack([a, b, c]).astype(float), axis=0)
    lo, mid, hi = v
    zero = hi <= 0
    nzero = (lo <= 0).astype(int) + (mid <= 0).astype(int)
    diverge = ~zero & (((nzero == 1) & (beta <= -2.0)) | ((nzero == 2) & (beta <= -1.0)))
    span = hi - lo
    flat = span <= _FLAT_TOL * hi
    with np.errstate(divide="ignore", invalid="ignore"):
        d_hi = _first_dd(mid, hi, beta, j, 2)
        d_lo = _first_dd(lo, mid, beta, j, 2)
        out = (d_hi - d_lo) / span
    if np.any(flat):
        pts = np.tensordot(_TRI_BARY, np.stack([lo, mid, hi]), axes=1)
        q = _phi(np.where(pts > 0, pts, 1.0), beta, j, 0)
        quad = 0.5 * np.tensordot(_TRI_W, q, axes=1)
        out = np.where(flat, quad, out)
    out = np.where(zero, 0.0, out)
    return np.where(diverge, -np.inf if j else np.inf, out)


class GridDensity:
    """Stack of piecewise-linear densities on a shared regular grid.

    Parameters
    ----------
    mass : ndarray, shape (slices, m1[, m2])
        Nonnegative cell masses. For a single density pass a leading axis of 1.
    lo, hi : sequence of float
        Grid bounds per continuous dimension.
    """

    def __init__(self, mass, lo, hi):
        mass = np.asarray(mass, dtype=float)
        self.dims = mass.ndim - 1
        if self.dims not in (1, 2):
            raise ValueError("GridDensity supports 1 or 2 continuous dimensions")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("cell masses must be finite and nonnegative")
        self.mass = mass
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self.shape = mass.shape[1:]
        self.widths = (self.hi - self.lo) / np.asarray(self.shape)
        self.cell_volume = float(np.prod(self.widths))
        self.values = mass / self.cell_volume

    @property
    def total_mass(self):
        return float(self.mass.sum())

    def slice_masses(self):
        return self.mass.reshape(self.mass.shape[0], -1).sum(axis=1)

    def marginal(self):
        """Density of the continuous part with the slice axis summed out."""
        return GridDensity(self.mass.sum(axis=0, keepdims=True), self.lo, self.hi)

    # ------------------------------------------------------------------
    def integrate(self, beta, j=0, scale=None):
        """Sum over slices of the integral of ``p**beta * log(p)**j``.

        ``scale`` rescales the density by ``1/scale`` before integrating to
        keep large powers representable; the caller undoes the scaling.
        Only ``j`` in {0, 1} is supported.
        """
        if j not in (0, 1):
            raise ValueError("j must be 0 or 1")
        beta = _safe_beta(float(beta))
        v = self.values if scale is None else self.values / scale
        if self.dims == 1:
            return self._integrate_1d(v, beta, j)
        return self._integrate_2d(v, beta, j)

    def _integrate_1d(self, v, beta, j):
        w = self.widths[0]
        total = 0.0
        if v.shape[1] > 1:
            total += w * segment_integral(v[:, :-1], v[:, 1:], beta, j).sum()
        ends = np.concatenate([v[:, 0], v[:, -1]])
        total += 0.5 * w * _point(ends, beta, j).sum()
        return float(total)

    def _integrate_2d(self, v, beta, j):
        w1, w2 = self.widths
        m1, m2 = v.shape[1:]
        total = 0.0
        if m1 > 1 and m2 > 1:
            c00, c10 = v[:, :-1, :-1], v[:, 1:, :-1]
            c01, c11 = v[:, :-1, 1:], v[:, 1:, 1:]
            mid = 0.25 * (c00 + c10 + c01 + c11)
            # area of each of the four triangles is w1*w2/4
            f = 2.0 * (w1 * w2 / 4.0)
            for p, q in ((c00, c10), (c10, c11), (c11, c01), (c01, c00)):
                total += f * triangle_integral(p, q, mid, beta, j).sum()
        # edge strips of half-cell thickness, linear along the edge
        if m1 > 1:
            for row in (v[:, :, 0], v[:, :, -1]):
                total += w1 * 0.5 * w2 * segment_integral(row[:, :-1], row[:, 1:], beta, j).sum()
        if m2 > 1:
            for col in (v[:, 0, :], v[:, -1, :]):
                total += w2 * 0.5 * w1 * segment_integral(col[:, :-1], col[:, 1:], beta, j).sum()
        corners = np.concatenate([v[:, 0, 0], v[:, 0, -1], v[:, -1, 0], v[:, -1, -1]])
        total += 0.25 * w1 * w2 * _point(corners, beta, j).sum()
        return float(total)

    # ------------------------------------------------------------------
    def entropy_bits(self):
        """Differential (mixed) entropy ``-sum_s int p log2 p`` in bits."""
        return -self.integrate(1.0, 1) / LN2

    def log_moment(self, t):
        """``ln E[p^t] = ln sum_s int p^(1+t)`` for the (normalized) density."""
        beta = 1.0 + t
        pos = self.values[self.values > 0]
        scale = float(pos.max() if beta >= 0 else pos.min())
        val = self.integrate(beta, 0, scale=scale)
        if not np.isfinite(val):
            return np.inf
        if val <= 0:
            return -np.inf
        return float(np.log(val) + beta * np.log(scale))

    def tilted_neglog2(self, t):
        """``E[p^t (-log2 p)] / E[p^t]``: mean surprisal under the tilted law."""
        beta = 1.0 + t
        pos = self.values[self.values > 0]
        scale = float(pos.max() if beta >= 0 else pos.min())
        m0 = self.integrate(beta, 0, scale=scale)
        m1 = self.integrate(beta, 1, scale=scale)
        if not (np.isfinite(m0) and np.isfinite(m1)) or m0 <= 0:
            return np.nan
        return float(-(m1 / m0 + np.log(scale)) / LN2)

    # ------------------------------------------------------------------
    def evaluate(self, points, slice_index=None):
        """Density value at ``points`` (shape (k, dims) or (k,) in 1-D).

        Returns shape (slices, k), or (k,) when ``slice_index`` is given.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, self.dims)
        v = self.values if slice_index is None else self.values[[slice_index]]
        # continuous index space: centre i sits at coordinate i
        u = (pts - self.lo) / self.widths - 0.5
        u = np.clip(u, 0.0, np.asarray(self.shape) - 1.0)
        if self.dims == 1:
            idx = np.arange(self.shape[0])
            out = np.stack([np.interp(u[:, 0], idx, row) for row in v])
        else:
            out = self._evaluate_2d(v, u)
        return out[0] if slice_index is not None else out

    def _evaluate_2d(self, v, u):
        m1, m2 = self.shape
        i = np.minimum(np.floor(u[:, 0]).astype(int), max(m1 - 2, 0))
        k = np.minimum(np.floor(u[:, 1]).astype(int), max(m2 - 2, 0))
        if m1 == 1 or m2 == 1:
            raise NotImplementedError("2-D evaluation needs at least two centres per axis")
        s = u[:, 0] - i
        t = u[:, 1] - k
        c00, c10 = v[:, i, k], v[:, i + 1, k]
        c01, c11 = v[:, i, k + 1], v[:, i + 1, k + 1]
        mid = 0.25 * (c00 + c10 + c01 + c11)
        # which of the four triangles through the midpoint contains (s, t)
        below = t <= s
        anti = t <= 1.0 - s
        out = np.empty_like(c00)
        # bottom: c00, c10, mid
        sel = below & anti
        out[:, sel] = _bary(c00, c10, mid, (0, 0), (1, 0), s, t, sel)
        sel = below & ~anti  # right: c10, c11
        out[:, sel] = _bary(c10, c11, mid, (1, 0), (1, 1), s, t, sel)
        sel = ~below & ~anti  # top: c11, c01
        out[:, sel] = _bary(c11, c01, mid, (1, 1), (0, 1), s, t, sel)
        sel = ~below & anti  # left: c01, c00
        out[:, sel] = _bary(c01, c00, mid, (0, 1), (0, 0), s, t, sel)
        return out


def _bary(va, vb, vm, pa, pb, s, t, sel):
    (xa, ya), (xb, yb), (xm, ym) = pa, pb, (0.5, 0.5)
    s, t = s[sel], t[sel]
    det = (yb - ym) * (xa - xm) + (xm - xb) * (ya - ym)
    la = ((yb - ym) * (s - xm) + (xm - xb) * (t - ym)) / det
    lb = ((ym - ya) * (s - xm) + (xa - xm) * (t - ym)) / det
    lm = 1.0 - la - lb
    return la * va[:, sel] + lb * vb[:, sel] + lm * vm[:, sel]


def _point(v, beta, j):
    """phi at constant pieces, zero outside the support."""
    out = _phi(np.where(v > 0, v, 1.0), beta, j, 0)
    return np.where(v > 0, out, 0.0)
