from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import spearmanr

from finkey.errors import ValidationError
from finkey.sim import (
    EnvironmentConfig,
    default_grid,
    load_config,
    position_sweep,
    simulate,
    spatial_correlation,
)
from finkey.stats import normalized_secrecy_rate
from finkey.traces import QuantizationScheme

SHORT = EnvironmentConfig(duration=10.0)


def nsr(traces, levels=16):
    tr = traces.calibrated()
    s = QuantizationScheme.from_data(np.concatenate([tr.g_ab, tr.g_ae]), levels)
    return normalized_secrecy_rate(tr.g_ab, tr.g_ae, s)


def test_spatial_correlation_values():
    lam = 299_792_458.0 / 2.484e9
    assert spatial_correlation(0.0, lam) == 1.0
    assert spatial_correlation(lam / 2, lam) == pytest.approx(-0.30424217764409, abs=1e-10)
    assert lam / 2 == pytest.approx(0.0604, abs=5e-4)
    d = np.linspace(0, 5, 101)
    v = spatial_correlation(d, lam)
    assert np.all(np.abs(v) <= 1.0)


def test_spatial_correlation_errors():
    with pytest.raises(ValidationError):
        spatial_correlation(-1.0, 0.1)
    with pytest.raises(ValidationError):
        spatial_correlation(1.0, 0.0)


def test_deterministic():
    a, b = simulate(SHORT), simulate(SHORT)
    for name, col in a.columns().items():
        assert np.array_equal(col, getattr(b, name))
    c = simulate(replace(SHORT, seed=43))
    assert not np.array_equal(a.g_ab, c.g_ab)


def test_zero_speed_is_constant_up_to_noise():
    tr = simulate(replace(SHORT, scatterer_speed=0.0, noise_floor=1e-6))
    for col in tr.columns().values():
        assert col.std() < 1e-2 * col.mean()


def test_gains_finite_nonnegative_and_reciprocal():
    tr = simulate(SHORT)
    for col in tr.columns().values():
        assert np.all(np.isfinite(col)) and np.all(col >= 0)
    assert np.corrcoef(tr.g_ab, tr.g_ba)[0, 1] >= 0.95


def test_colocated_eve_sees_bobs_gain():
    cfg = replace(EnvironmentConfig(duration=100.0), eve=EnvironmentConfig().bob)
    tr = simulate(cfg)
    assert tr.g_ab.size == 100_000
    assert np.corrcoef(tr.g_ab, tr.g_ae)[0, 1] > 0.9


def test_config_validation():
    with pytest.raises(ValidationError):
        EnvironmentConfig(duration=0.0)
    with pytest.raises(ValidationError):
        EnvironmentConfig(eve=(9.0, 1.0))
    with pytest.raises(ValidationError):
        EnvironmentConfig(wavelength=-1.0)
    with pytest.raises(ValidationError):
        EnvironmentConfig(scatterer_speed=-0.1)


def test_load_config(tmp_path):
    p = tmp_path / "env.toml"
    p.write_text("seed = 7\nduration = 2.0\nalice = [1.0, 1.0]\n", encoding="utf-8")
    cfg = load_config(p)
    assert cfg.seed == 7 and cfg.alice == (1.0, 1.0) and cfg.bob == EnvironmentConfig().bob
    p.write_text("speed = 1\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="unknown"):
        load_config(p)


def test_single_position_sweep_equals_simulate():
    [(pos, tr)] = position_sweep(SHORT, [SHORT.eve])
    ref = simulate(SHORT)
    assert pos == SHORT.eve
    for name, col in ref.columns().items():
        assert np.array_equal(col, getattr(tr, name))


def test_sweep_cardinality_and_order():
    grid = default_grid(SHORT)
    assert len(grid) == 60
    out = position_sweep(replace(SHORT, duration=1.0), grid)
    assert [p for p, _ in out] == grid


def test_sweep_entry_matches_simulate_at_that_position():
    grid = [(1.0, 1.0), (6.0, 4.0)]
    out = position_sweep(SHORT, grid)
    ref = simulate(replace(SHORT, eve=grid[1]))
    assert np.array_equal(out[1][1].g_ae, ref.g_ae)


def test_sweep_rejects_outside_position():
    with pytest.raises(ValidationError, match="position 1"):
        position_sweep(SHORT, [(1.0, 1.0), (-1.0, 2.0)])
    with pytest.raises(ValidationError):
        position_sweep(SHORT, [])


def test_symmetric_positions_have_equal_rates():
    # scatterer on the Alice-Bob axis: the geometry is mirror-symmetric about y = 2.5
    cfg = replace(EnvironmentConfig(), scatterer_center=(4.0, 2.5))
    out = position_sweep(cfg, [(3.6, 3.7), (3.6, 1.3)])
    a, b = (nsr(tr) for _, tr in out)
    assert abs(a - b) <= 0.05


def test_no_motion_rates_near_one():
    cfg = replace(EnvironmentConfig(), scatterer_speed=0.0)
    rates = [nsr(tr) for _, tr in position_sweep(cfg, default_grid(cfg))]
    assert min(rates) >= 0.9


def test_leakage_grows_near_motion_source():
    cfg = EnvironmentConfig()
    out = position_sweep(cfg, default_grid(cfg))
    leak = [1 - nsr(tr) for _, tr in out]
    prox = [-np.hypot(p[0] - cfg.scatterer_center[0], p[1] - cfg.scatterer_center[1]) for p, _ in out]
    rho, p = spearmanr(prox, leak)
    assert rho > 0 and p < 0.01


def test_eve_at_bob_is_worst_position():
    cfg = EnvironmentConfig()
    grid = default_grid(cfg) + [cfg.bob]
    rates = [nsr(tr) for _, tr in position_sweep(cfg, grid)]
    assert int(np.argmin(rates)) == len(grid) - 1
