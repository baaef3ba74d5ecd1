import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from finkey.density import GridDensity, segment_integral, triangle_integral


def _phi(v, beta, j):
    return np.where(v > 0, np.power(np.where(v > 0, v, 1.0), beta) * np.log(np.where(v > 0, v, 1.0)) ** j, 0.0)


@pytest.mark.parametrize("beta", [0.3, 1.0, 1.7, 3.0])
@pytest.mark.parametrize("j", [0, 1])
@pytest.mark.parametrize("ab", [(0.2, 1.5), (1.0, 1.0000001), (0.0, 2.0), (3.0, 0.5)])
def test_segment_integral_vs_quad(beta, j, ab):
    a, b = ab
    ref = quad(lambda u: _phi(np.array(a + (b - a) * u), beta, j), 0, 1, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    assert segment_integral(np.array(a), np.array(b), beta, j) == pytest.approx(ref, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.2])
@pytest.mark.parametrize("j", [0, 1])
@pytest.mark.parametrize("abc", [(0.3, 1.1, 2.0), (1.0, 1.0, 1.0), (0.0, 0.7, 1.3), (1.0, 1.0 + 1e-7, 1.0 - 1e-7)])
def test_triangle_integral_vs_dense_quadrature(beta, j, abc):
    a, b, c = abc
    # mean of p^beta log^j p over the unit triangle, by a fine barycentric midpoint rule
    k = 800
    i, m = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    keep = i + m < k - 1
    s, t = (i[keep] + 1 / 3) / k, (m[keep] + 1 / 3) / k
    s2, t2 = (i[keep] + 2 / 3) / k, (m[keep] + 2 / 3) / k
    up = _phi(a + (b - a) * s + (c - a) * t, beta, j)
    down = _phi(a + (b - a) * s2 + (c - a) * t2, beta, j)
    ii = np.arange(k)
    diag = _phi(a + (b - a) * (ii + 1 / 3) / k + (c - a) * (k - 1 - ii + 1 / 3) / k, beta, j)
    ref = (up.sum() + down.sum() + diag.sum()) / (k * k)
    got = 2.0 * triangle_integral(np.array(a), np.array(b), np.array(c), beta, j)
    assert got == pytest.approx(ref, rel=2e-4, abs=1e-6)


def _brute(g, beta, j, per=400):
    """Midpoint rule on a fine grid using the density's own evaluator."""
    if g.dims == 1:
        x = np.linspace(g.lo[0], g.hi[0], g.shape[0] * per + 1)
        mid = 0.5 * (x[1:] + x[:-1])
        v = g.evaluate(mid)
        return float((_phi(v, beta, j) * np.diff(x)).sum())
    per = 60
    xs = [np.linspace(g.lo[d], g.hi[d], g.shape[d] * per + 1) for d in range(2)]
    mids = [0.5 * (x[1:] + x[:-1]) for x in xs]
    X, Y = np.meshgrid(*mids, indexing="ij")
    v = g.evaluate(np.column_stack([X.ravel(), Y.ravel()]))
    return float(_phi(v, beta, j).sum() * np.diff(xs[0])[0] * np.diff(xs[1])[0])


@given(st.integers(0, 2 ** 31), st.integers(2, 6), st.integers(2, 8))
def test_1d_mass_conserved_per_slice(seed, slices, cells):
    m = np.random.default_rng(seed).uniform(0, 1, (slices, cells))
    m[m < 0.2] = 0.0
    g = GridDensity(m, [-1.0], [2.0])
    for k in range(slices):
        assert GridDensity(m[[k]], [-1.0], [2.0]).integrate(1.0) == pytest.approx(m[k].sum(), abs=1e-12)


@given(st.integers(0, 2 ** 31), st.integers(2, 5), st.integers(2, 5))
def test_2d_mass_conserved(seed, m1, m2):
    m = np.random.default_rng(seed).uniform(0, 1, (1, m1, m2))
    m[m < 0.2] = 0.0
    g = GridDensity(m, [0.0, -1.0], [1.0, 3.0])
    assert g.integrate(1.0) == pytest.approx(m.sum(), rel=1e-12)


@pytest.mark.parametrize("dims", [1, 2])
def test_entropy_and_moments_match_brute_force(dims):
    rng = np.random.default_rng(dims)
    shape = (3, 12) if dims == 1 else (2, 6, 5)
    m = rng.uniform(0.05, 1, shape)
    m[0, 2] = 0.0
    m /= m.sum()
    g = GridDensity(m, [0.0] * dims, [2.0] * dims)
    for beta, j in ((1.0, 1), (1.4, 0), (0.6, 0), (1.2, 1)):
        assert g.integrate(beta, j) == pytest.approx(_brute(g, beta, j), rel=2e-4, abs=1e-6)


def test_uniform_density_entropy():
    g = GridDensity(np.full((1, 10), 0.1), [0.0], [4.0])
    assert g.entropy_bits() == pytest.approx(2.0, abs=1e-12)
    g2 = GridDensity(np.full((1, 4, 4), 1 / 16), [0.0, 0.0], [2.0, 2.0])
    assert g2.entropy_bits() == pytest.approx(2.0, abs=1e-12)


def test_evaluate_interpolates_centres():
    m = np.array([[0.1, 0.3, 0.6]])
    g = GridDensity(m, [0.0], [3.0])
    assert np.allclose(g.evaluate([0.5, 1.5, 2.5]), m)
    assert g.evaluate([1.0])[0, 0] == pytest.approx(0.2)
    assert g.evaluate([0.0])[0, 0] == pytest.approx(0.1)  # flat extension


def test_unsupported_log_power():
    with pytest.raises(ValueError):
        GridDensity(np.full((1, 2), 0.5), [0.0], [1.0]).integrate(1.0, 2)
