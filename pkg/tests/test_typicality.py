import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from finkey.density import GridDensity
from finkey.errors import ValidationError
from finkey.typicality import (
    NEG_INFINITY,
    DiscreteLaw,
    ExponentCache,
    chernoff_exponents,
    chernoff_lower,
    chernoff_upper,
    feasibility,
    stationarity_residual,
)

LN2 = math.log(2.0)
BERN = np.array([0.25, 0.75])
SKEW = np.array([0.5, 0.25, 0.15, 0.1])


def grid_oracle(p, eps, sign, s_max=50.0, points=1_000_000):
    """Brute-force min over a uniform s-grid of the Chernoff objective."""
    p = np.asarray(p, dtype=float)
    h = -(p * np.log2(p)).sum()
    offset = h + eps if sign < 0 else -h + eps
    s = np.linspace(s_max / points, s_max, points)
    best = np.inf
    for chunk in np.array_split(s, 20):
        # ln sum p^(1 + sign*s/ln2) - s*offset
        vals = np.log((p[None, :] ** (1.0 + sign * chunk[:, None] / LN2)).sum(axis=1)) - chunk * offset
        best = min(best, vals.min())
    return best


@pytest.mark.parametrize("p", [BERN, SKEW])
@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
def test_exponents_match_grid_oracle(p, eps):
    c1, s1 = chernoff_upper(p, eps)
    c2, s2 = chernoff_lower(p, eps)
    o1, o2 = grid_oracle(p, eps, -1), grid_oracle(p, eps, +1)
    for c, o in ((c1, o1), (c2, o2)):
        if np.isfinite(o) and o > -1e3:
            assert c == pytest.approx(o, abs=1e-6)
        else:
            assert c == NEG_INFINITY or c <= o + 1e-6


def test_bernoulli_reference_value():
    c1, s1 = chernoff_upper(BERN, 0.1)
    assert c1 == pytest.approx(-0.0100967702, abs=1e-6)
    assert 0 < s1 < 50


def test_uniform_is_unbounded():
    for m in (2, 5, 16):
        p = np.full(m, 1.0 / m)
        assert chernoff_upper(p, 0.1)[0] == NEG_INFINITY
        assert chernoff_lower(p, 0.1)[0] == NEG_INFINITY
        e = chernoff_exponents(p, 0.1)
        assert e.s1_star is None and e.bound(10) == 0.0


def test_eps_zero_limit_nonpositive():
    assert chernoff_lower(SKEW, 0.0)[0] <= 0.0
    assert chernoff_upper(SKEW, 0.0)[0] <= 0.0


def test_nonnormalized_rejected():
    with pytest.raises(ValidationError):
        chernoff_upper([0.3, 0.3], 0.1)
    with pytest.raises(ValidationError):
        chernoff_lower(GridDensity(np.full((1, 4), 0.2), [0.0], [1.0]), 0.1)


def _rand_law(seed, k):
    p = np.random.default_rng(seed).dirichlet(np.ones(k))
    p = np.clip(p, 1e-4, None)
    return p / p.sum()


@given(st.integers(0, 2 ** 31), st.integers(2, 6), st.floats(0.01, 0.4), st.floats(0.01, 0.4))
def test_exponents_nonpositive_and_monotone_in_eps(seed, k, e1, e2):
    p = _rand_law(seed, k)
    lo, hi = sorted((e1, e2))
    a, b = chernoff_exponents(p, lo), chernoff_exponents(p, hi)
    for x in (a.c1, a.c2, b.c1, b.c2):
        assert x <= 0.0
    assert b.c1 <= a.c1 + 1e-9 and b.c2 <= a.c2 + 1e-9


@given(st.integers(0, 2 ** 31), st.integers(2, 6), st.floats(0.01, 0.4))
def test_relabeling_invariance(seed, k, eps):
    p = _rand_law(seed, k)
    q = np.random.default_rng(seed + 1).permutation(p)
    a, b = chernoff_exponents(p, eps), chernoff_exponents(q, eps)
    assert a.c1 == pytest.approx(b.c1, abs=1e-9) and a.c2 == pytest.approx(b.c2, abs=1e-9)


@pytest.mark.parametrize("p", [BERN, SKEW])
@pytest.mark.parametrize("n", [10, 50])
@pytest.mark.parametrize("eps", [0.1, 0.25])
def test_monte_carlo_deviation_below_chernoff_bound(p, n, eps):
    rng = np.random.default_rng(2024 + n)
    h = -(p * np.log2(p)).sum()
    draws = rng.choice(p.size, size=(100_000, n), p=p)
    surprisal = -np.log2(p)[draws].mean(axis=1)
    empirical = np.mean(np.abs(surprisal - h) > eps)
    bound = chernoff_exponents(p, eps).bound(n)
    assert empirical <= bound


def test_stationarity_residual_at_minimizer():
    for p in (BERN, SKEW):
        c1, s = chernoff_upper(p, 0.1)
        assert abs(stationarity_residual(p, 0.1, s)) <= 1e-4


def test_residual_uniform_is_minus_eps():
    for s in (0.01, 0.5, 3.0, 40.0):
        assert stationarity_residual([0.5, 0.5], 0.2, s) == pytest.approx(-0.2, abs=1e-12)


def test_residual_monotone_for_log_concave_law():
    from scipy.stats import binom

    p = binom.pmf(np.arange(9), 8, 0.3)
    p /= p.sum()
    s = np.linspace(0.01, 20, 400)
    r = np.array([stationarity_residual(p, 0.1, x) for x in s])
    assert np.all(np.diff(r) >= -1e-12)


def test_residual_requires_positive_s():
    with pytest.raises(ValidationError):
        stationarity_residual(BERN, 0.1, 0.0)


def _gaussian_c2_closed_form(eps):
    h = 0.5 * math.log2(2 * math.pi * math.e)

    def f(s):
        a = 1.0 + s / LN2
        return -0.5 * math.log(a) + 0.5 * (1 - a) * math.log(2 * math.pi) - s * (-h + eps)

    return minimize_scalar(f, bounds=(1e-9, 50), method="bounded", options={"xatol": 1e-12}).fun


def test_gaussian_piecewise_linear_c2():
    edges = np.linspace(-6, 6, 1001)
    mass = np.diff(norm.cdf(edges))
    mass /= mass.sum()
    g = GridDensity(mass[None, :], [-6.0], [6.0])
    c2, _ = chernoff_lower(g, 0.2)
    assert c2 == pytest.approx(_gaussian_c2_closed_form(0.2), abs=1e-3)


def test_feasibility_examples():
    assert feasibility(NEG_INFINITY, 0.1, 0.1, 1)
    assert feasibility(-0.02, 0.259, 0.1, 1000)
    assert 1000 * (-0.02 + 0.1 * 0.259 * LN2) + 2 * LN2 < 0
    for n in (1, 10, 10 ** 6):
        assert not feasibility(0.0, 0.1, 0.1, n)


def test_exponent_cache_memoizes(ref_cache):
    a = ref_cache.z(0.1)
    assert ref_cache.z(0.1) is a
    assert ref_cache.c_max(0.1) == max(a.c1, a.c2, ref_cache.zx(0.1).c1, ref_cache.zx(0.1).c2)
    assert a.target == "Z" and ref_cache.zx(0.1).target == "ZX_Q"


def test_discrete_law_entropy():
    assert DiscreteLaw(SKEW).entropy_bits() == pytest.approx(-(SKEW * np.log2(SKEW)).sum())
