"""Chernoff exponents bounding atypicality of the empirical surprisal.

For an i.i.d. sequence with per-letter law ``p`` and entropy ``H`` (bits),

    P[-(1/n) log2 p(X^n) > H + eps] <= exp(n * C1(eps)),
    P[ (1/n) log2 p(X^n) > -H + eps] <= exp(n * C2(eps)),

with

    C1(eps) = min_{s>0} ln E[p(X)^(-s/ln 2)] - s (H + eps),
    C2(eps) = min_{s>0} ln E[p(X)^(+s/ln 2)] - s (-H + eps).

Exponents are in nats. The same formulas hold for densities (differential
entropy) and for mixed discrete/continuous laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .density import LN2, GridDensity
from .errors import ValidationError

NEG_INFINITY = -math.inf
DEFAULT_S_MAX = 50.0

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DiscreteLaw:
    """Finite probability vector exposing the moments the exponents need."""

    def __init__(self, p, atol=1e-9):
        p = np.asarray(p, dtype=float).ravel()
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > atol:
            raise ValidationError(f"distribution is not normalized (sum = {p.sum()!r})")
        self.p = p[p > 0]
        self._lnp = np.log(self.p)

    def entropy_bits(self):
        return float(-(self.p * self._lnp).sum() / LN2)

    def log_moment(self, t):
        """``ln E[p^t]``."""
        return float(logsumexp((1.0 + t) * self._lnp))

    def tilted_neglog2(self, t):
        w = (1.0 + t) * self._lnp
        w = np.exp(w - w.max())
        return float((w * -self._lnp).sum() / w.sum() / LN2)


class DensityLaw:
    """Adapter exposing a normalized :class:`GridDensity` as a law."""

    def __init__(self, density, atol=1e-9):
        if abs(density.total_mass - 1.0) > atol:
            raise ValidationError(f"density is not normalized (mass = {density.total_mass!r})")
        self.density = density
        self._h = density.entropy_bits()

    def entropy_bits(self):
        return self._h

    def log_moment(self, t):
        return self.density.log_moment(t)

    def tilted_neglog2(self, t):
        return self.density.tilted_neglog2(t)


def as_law(dist):
    if isinstance(dist, (DiscreteLaw, DensityLaw)):
        return dist
    if isinstance(dist, GridDensity):
        return DensityLaw(dist)
    return DiscreteLaw(dist)


@dataclass(frozen=True)
class ChernoffExponents:
    """Upper- and lower-deviation exponents (nats) at one ``epsilon``."""

    c1: float
    c2: float
    epsilon: float
    s1_star: float | None = None
    s2_star: float | None = None
    target: str = ""

    def bound(self, n):
        """``exp(n C1) + exp(n C2)``: bound on P[|surprisal - H| > eps]."""
        return _exp_n(n, self.c1) + _exp_n(n, self.c2)

    def to_dict(self):
        return {"c1": _json_float(self.c1), "c2": _json_float(self.c2), "epsilon": self.epsilon,
                "s1_star": self.s1_star, "s2_star": self.s2_star, "target": self.target}


def _exp_n(n, c):
    return 0.0 if c == NEG_INFINITY else math.exp(n * c)


def _json_float(v):
    return "-inf" if v == NEG_INFINITY else v


def _objective(law, sign, offset):
    """f(s) = ln E[p^(sign*s/ln2)] - s*offset and its derivative."""

    def f(s):
        return law.log_moment(sign * s / LN2) - s * offset

    def df(s):
        m = law.tilted_neglog2(sign * s / LN2)
        if not np.isfinite(m):
            return math.inf
        return -sign * m - offset

    return f, df


def _minimize(f, df, eps, s_max, tol=1e-11):
    """Minimize a convex f on (0, s_max] with f(0) = 0.

    Returns ``(value, argmin)``; value is NEG_INFINITY when the slope at
    ``s_max`` is still below ``-eps/2``.
    """
    slope_end = df(s_max)
    if slope_end < -0.5 * eps:
        return NEG_INFINITY, None
    if slope_end < 0:
        return f(s_max), s_max
    # bracket by doubling from a small start
    a, b = 0.0, min(1e-3, s_max)
    while b < s_max and df(b) < 0:
        a, b = b, min(2.0 * b, s_max)
    # golden-section on [a, b]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, b):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    s = 0.5 * (a + b)
    value = f(s)
    if not value < 0:
        # s -> 0 limit of the objective
        return min(value, 0.0), s
    return value, s


def chernoff_upper(dist, eps, s_max=DEFAULT_S_MAX):
    """``C1(eps)`` and its minimizer."""
    if not eps >= 0:
        raise ValidationError("epsilon must be nonnegative")
    law = as_law(dist)
    f, df = _objective(law, -1.0, law.entropy_bits() + eps)
    return _minimize(f, df, eps, s_max)


def chernoff_lower(dist, eps, s_max=DEFAULT_S_MAX):
    """``C2(eps)`` and its minimizer."""
    if not eps >= 0:
        raise ValidationError("epsilon must be nonnegative")
    law = as_law(dist)
    f, df = _objective(law, 1.0, -law.entropy_bits() + eps)
    return _minimize(f, df, eps, s_max)


def chernoff_exponents(dist, eps, s_max=DEFAULT_S_MAX, target=""):
    law = as_law(dist)
    c1, s1 = chernoff_upper(law, eps, s_max)
    c2, s2 = chernoff_lower(law, eps, s_max)
    return ChernoffExponents(c1, c2, float(eps), s1, s2, target)


def stationarity_residual(dist, eps, s):
    """Optimality condition of the upper exponent at ``s``; zero at the minimizer.

    Equals ``E_s[-log2 p] - (H + eps)`` where ``E_s`` is the expectation
    under the law tilted by ``p^(-s/ln 2)``.
    """
    if not s > 0:
        raise ValidationError("s must be positive")
    law = as_law(dist)
    return law.tilted_neglog2(-s / LN2) - (law.entropy_bits() + eps)


def feasibility(c_max, eps, b1, n):
    """Sufficient condition ``n (c_max + b1 eps ln 2) + 2 ln 2 <= 0``."""
    if c_max == NEG_INFINITY:
        return True
    return n * (c_max + b1 * eps * LN2) + 2.0 * LN2 <= 0.0


class ExponentCache:
    """Exponents of Z and of (Z, X_Q) for a fitted model, memoized by epsilon."""

    def __init__(self, z_law, zx_law, s_max=DEFAULT_S_MAX):
        self.z_law = as_law(z_law)
        self.zx_law = as_law(zx_law)
        self.s_max = s_max
        self._z = {}
        self._zx = {}

    @classmethod
    def from_model(cls, model, s_max=DEFAULT_S_MAX):
        joint = model.xz_density()
        return cls(DensityLaw(joint.marginal()), DensityLaw(joint), s_max)

    def z(self, eps):
        key = float(eps)
        if key not in self._z:
            self._z[key] = chernoff_exponents(self.z_law, key, self.s_max, "Z")
        return self._z[key]

    def zx(self, eps):
        key = float(eps)
        if key not in self._zx:
            self._zx[key] = chernoff_exponents(self.zx_law, key, self.s_max, "ZX_Q")
        return self._zx[key]

    def c_max(self, eps_prime):
        """Largest of the four exponents at ``eps_prime``."""
        z, zx = self.z(eps_prime), self.zx(eps_prime)
        return max(z.c1, z.c2, zx.c1, zx.c2)
