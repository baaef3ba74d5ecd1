"""Finite-length secret-key length with a continuous eavesdropper observation.

For a block of ``n`` source symbols, penalty terms ``delta1..delta5`` and the
key length ``k_bar`` are evaluated for a parameter point
``(eps, eps', b0, b1, alpha1, alpha2)`` with ``f(n) = n**alpha1`` and
``g(n) = n**alpha2``; :func:`optimize` searches a grid for the feasible
point with the longest key. See the README for the sign convention of the
alpha exponents.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .typicality import NEG_INFINITY, ExponentCache, feasibility

LN2 = math.log(2.0)


@dataclass(frozen=True)
class BoundParams:
    epsilon: float
    epsilon_prime: float
    b0: float
    b1: float
    alpha1: float
    alpha2: float

    def __post_init__(self):
        for name in ("epsilon", "epsilon_prime"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValidationError(f"{name} must lie in (0, 1], got {v}")
        for name in ("b0", "b1", "alpha1", "alpha2"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")

    def f(self, n):
        return float(n) ** self.alpha1

    def g(self, n):
        return float(n) ** self.alpha2

    def astuple(self):
        return (self.epsilon, self.epsilon_prime, self.b0, self.b1, self.alpha1, self.alpha2)


@dataclass(frozen=True)
class SecrecyTargets:
    eps_l: float = 1e-3
    eps_u: float = 1e-3

    def __post_init__(self):
        if not (self.eps_l > 0 and self.eps_u > 0):
            raise ValidationError("leakage and uniformity targets must be positive")

    @property
    def budget(self):
        return min(self.eps_l, self.eps_u)


@dataclass(frozen=True)
class ReconciliationModel:
    """One-way reconciliation of efficiency ``beta``, leaking ``n (h_x - beta i_xy)`` bits."""

    beta: float
    h_x: float
    i_xy: float

    def __post_init__(self):
        if not 0 <= self.beta <= 1:
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta}")
        if self.i_xy < 0 or self.h_x < 0:
            raise ValidationError("h_x and i_xy must be nonnegative")

    def l_rec(self, n):
        return n * (self.h_x - self.beta * self.i_xy)


@dataclass(frozen=True)
class Deltas:
    d1: float
    d2: float
    d3: float
    d4: float
    d5: float

    def astuple(self):
        return (self.d1, self.d2, self.d3, self.d4, self.d5)


def _exp_n(n, c):
    return 0.0 if c == NEG_INFINITY else math.exp(n * c)


def delta2(params, n):
    return 2.0 ** (-n * params.b0 * params.epsilon)


def deltas(params, n, z_exponents, k_bar):
    """Penalty terms for ``params`` at block length ``n``.

    ``z_exponents`` are the Chernoff exponents of Z at ``params.epsilon``;
    ``k_bar`` is the key length the uniformity/leakage term refers to.
    """
    eps, b0, b1 = params.epsilon, params.b0, params.b1
    d1 = (_exp_n(n, z_exponents.c1) + _exp_n(n, z_exponents.c2)
          + 2.0 ** (-n * b1 * eps) + 2.0 ** (-n * (b1 - b0) * eps))
    d2 = delta2(params, n)
    d3 = 2.0 ** (-params.f(n)) + d1
    d4 = math.log1p(2.0 ** (-params.g(n))) / LN2
    d5 = d3 * (k_bar - d4) + d4
    return Deltas(d1, d2, d3, d4, d5)


def key_length_real(params, n, h_xz, rec):
    """The unfloored length ``n(H(X|Z) - eps - eps') + log2(1 - delta2) - l_rec - 2f - g - 2``."""
    d2 = delta2(params, n)
    if d2 >= 1.0:
        return -math.inf
    return (n * (h_xz - params.epsilon - params.epsilon_prime) + math.log1p(-d2) / LN2
            - rec.l_rec(n) - 2.0 * params.f(n) - params.g(n) - 2.0)


def key_length(params, n, h_xz, rec):
    """``k_bar``: the floored key length, never below zero."""
    k = key_length_real(params, n, h_xz, rec)
    return max(int(math.floor(k)), 0) if math.isfinite(k) else 0


def check_constraints(params, n, targets, z_exponents, c_max, k_bar):
    """Every clause of the constraint set that ``params`` violates at ``n``.

    Returns ``(ok, violations)``. A point that yields no key (``k_bar`` = 0)
    is reported as infeasible.
    """
    violations = []
    if not params.b1 > params.b0:
        violations.append("b1 > b0")
    if not params.alpha1 < 1:
        violations.append("f = o(n)")
    if not params.alpha2 < 1:
        violations.append("g = o(n)")
    if not feasibility(c_max, params.epsilon, params.b1, n):
        violations.append("typicality of eps'")
    d5 = deltas(params, n, z_exponents, k_bar).d5
    if not d5 <= targets.budget:
        violations.append("delta5 <= min(eps_L, eps_U)")
    if k_bar < 1:
        violations.append("k_bar >= 1")
    return not violations, violations


@dataclass
class KeyLengthReport:
    n: int
    params: BoundParams | None
    deltas: Deltas | None
    k_bar: int
    feasible: bool
    eta: float | None
    r_low: float
    l_rec: float
    beta: float
    targets: SecrecyTargets
    violations: list = field(default_factory=list)
    exponents: dict = field(default_factory=dict)
    p_rec: str = "P_rec"

    def to_dict(self):
        return {
            "n": self.n,
            "k_bar": self.k_bar,
            "feasible": self.feasible,
            "eta": self.eta,
            "r_low": self.r_low,
            "l_rec": self.l_rec,
            "beta": self.beta,
            "eps_l": self.targets.eps_l,
            "eps_u": self.targets.eps_u,
            "params": asdict(self.params) if self.params else None,
            "deltas": asdict(self.deltas) if self.deltas else None,
            "violations": list(self.violations),
            "exponents": self.exponents,
            "p_d_bound": self.p_rec,
        }


# ----------------------------------------------------------------------
# parameter search


@dataclass(frozen=True)
class SearchGrid:
    eps: tuple
    eps_prime: tuple
    b0: tuple
    b1_points: int
    b1_max: float
    alpha1: tuple
    alpha2: tuple

    def b1_values(self, b0):
        return np.geomspace(2.0 * b0, self.b1_max, self.b1_points)


def default_grid():
    eps = tuple(np.geomspace(0.001, 0.5, 40).tolist())
    alpha = tuple(np.round(np.arange(0.25, 0.9 + 1e-9, 0.05), 2).tolist())
    return SearchGrid(eps, eps, (0.001, 0.01, 0.05, 0.1), 10, 0.5, alpha, alpha)


def _exp_n_array(n, c):
    c = np.asarray(c, dtype=float)
    with np.errstate(under="ignore"):
        return np.where(np.isneginf(c), 0.0, np.exp(n * np.where(np.isneginf(c), 0.0, c)))


def search(n, targets, h_xz, rec, cache, grid=None):
    """Exhaustive grid search; returns the best ``BoundParams`` or None.

    Ties in ``k_bar`` go to the lexicographically smallest parameter tuple.
    """
    grid = grid or default_grid()
    n = int(n)
    eps_p = np.asarray(grid.eps_prime)
    cmax = np.array([cache.c_max(e) for e in eps_p])
    a1 = np.asarray(grid.alpha1)
    a2 = np.asarray(grid.alpha2)
    f = float(n) ** a1
    g = float(n) ** a2
    pen_f = 2.0 ** (-f)
    d4 = np.log1p(2.0 ** (-g)) / LN2
    b0s = np.asarray(grid.b0)
    b1s = np.stack([grid.b1_values(b) for b in b0s])  # (B0, B1)
    l_rec = rec.l_rec(n)
    budget = targets.budget

    best_k, best = 0, None
    for eps in sorted(grid.eps):
        z = cache.z(eps)
        cz = _exp_n_array(n, z.c1) + _exp_n_array(n, z.c2)
        # axes: eps' (E), b0 (B0), b1 (B1), alpha1 (A1), alpha2 (A2)
        d2 = 2.0 ** (-n * b0s * eps)  # (B0,)
        base = (n * (h_xz - eps - eps_p)[:, None] + (np.log1p(-d2) / LN2)[None, :]
                - l_rec - 2.0)  # (E, B0)
        kt = (base[:, :, None, None, None] - 2.0 * f[None, None, None, :, None]
              - g[None, None, None, None, :])
        kbar = np.maximum(np.floor(kt), 0.0)
        kbar = np.broadcast_to(kbar, (eps_p.size, b0s.size, b1s.shape[1], a1.size, a2.size))
        d1 = cz + 2.0 ** (-n * b1s * eps) + 2.0 ** (-n * (b1s - b0s[:, None]) * eps)  # (B0, B1)
        d3 = pen_f[None, None, :] + d1[:, :, None]  # (B0, B1, A1)
        d5 = d3[None, :, :, :, None] * (kbar - d4) + d4
        typical = (n * (cmax[:, None, None] + b1s[None, :, :] * eps * LN2) + 2.0 * LN2 <= 0.0)
        typical |= np.isneginf(cmax)[:, None, None]
        ok = ((d5 <= budget) & (kbar >= 1)
              & typical[:, :, :, None, None]
              & (b1s > b0s[:, None])[None, :, :, None, None])
        if not ok.any():
            continue
        cand = np.where(ok, kbar, -1.0)
        flat = int(np.argmax(cand))
        k = int(cand.flat[flat])
        if k > best_k:
            ie, ib0, ib1, ia1, ia2 = np.unravel_index(flat, cand.shape)
            best_k = k
            best = BoundParams(float(eps), float(eps_p[ie]), float(b0s[ib0]),
                               float(b1s[ib0, ib1]), float(a1[ia1]), float(a2[ia2]))
    return best


def evaluate(params, n, targets, h_xz, rec, cache):
    """Full report for a fixed parameter point."""
    k_bar = key_length(params, n, h_xz, rec)
    z = cache.z(params.epsilon)
    c_max = cache.c_max(params.epsilon_prime)
    ok, violations = check_constraints(params, n, targets, z, c_max, k_bar)
    return KeyLengthReport(
        n=int(n), params=params, deltas=deltas(params, n, z, k_bar),
        k_bar=k_bar if ok else 0, feasible=ok, eta=None, r_low=float("nan"),
        l_rec=rec.l_rec(n), beta=rec.beta, targets=targets, violations=violations,
        exponents={"z_at_eps": z.to_dict(),
                   "c_max_at_eps_prime": "-inf" if c_max == NEG_INFINITY else c_max},
    )


def optimize(n, targets, summary, rec, cache, grid=None):
    """Longest certified key over the search grid.

    ``summary`` is a :class:`finkey.stats.SourceSummary`; ``cache`` an
    :class:`finkey.typicality.ExponentCache` of the same model.
    """
    if int(n) < 1:
        raise ValidationError("n must be positive")
    best = search(n, targets, summary.h_x_given_z, rec, cache, grid)
    if best is None:
        report = KeyLengthReport(
            n=int(n), params=None, deltas=None, k_bar=0, feasible=False, eta=None,
            r_low=summary.r_low, l_rec=rec.l_rec(n), beta=rec.beta, targets=targets,
            violations=["no feasible grid point"],
        )
    else:
        report = evaluate(best, n, targets, summary.h_x_given_z, rec, cache)
        report.r_low = summary.r_low
    if summary.r_low > 0:
        report.eta = eta(report, summary.r_low)
    return report


def optimize_model(n, targets, model, beta, grid=None, cache=None):
    """Convenience wrapper: derive the summary, reconciliation and exponents from ``model``."""
    from .stats import SourceSummary

    summary = SourceSummary.from_model(model)
    rec = ReconciliationModel(beta, summary.h_x, summary.i_xy)
    cache = cache or ExponentCache.from_model(model)
    return optimize(n, targets, summary, rec, cache, grid)


def eta(report, r_low):
    """Finite-length rate relative to the asymptotic rate ``r_low``."""
    if not r_low > 0:
        raise ValidationError("R_low <= 0: no positive asymptotic key rate")
    return (report.k_bar / report.n) / r_low


def beta_asymptote(summary, beta):
    """Limit of ``eta`` as n grows at reconciliation efficiency ``beta``."""
    return (beta * summary.i_xy - summary.i_xz) / summary.r_low
