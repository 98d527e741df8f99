import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from fairsmile.core import Regime, compute_moments
from fairsmile.models import (BLOCK_PATHS, GaarchParams, NonlinearLeverageParams, PathEnsemble,
                              export_ensemble_csv, gaarch_burn_in, gaarch_step,
                              import_ensemble_csv, instantaneous_variance, load_ensemble,
                              save_ensemble, simulate_gaarch, simulate_gaussian,
                              simulate_nonlinear_leverage)
from fairsmile.smile import alpha_hat, beta_hat

VOL = 0.01


def test_instantaneous_variance_examples():
    p = NonlinearLeverageParams(0.2, epsilon=0.1, theta=0.0)
    assert instantaneous_variance(p, -0.5) == pytest.approx(0.044)
    assert instantaneous_variance(p, 0.0) == p.base_vol**2
    assert instantaneous_variance(p, 0.3) == p.base_vol**2
    shifted = NonlinearLeverageParams(0.2, epsilon=0.1, theta=0.2)
    assert instantaneous_variance(shifted, -0.7) == pytest.approx(0.044)


def test_gaarch_step_examples():
    assert gaarch_step(0.0, -1.0, 0.9, 0.1) == pytest.approx(0.05)
    assert gaarch_step(0.0, 1.0, 0.9, 0.1) == pytest.approx(-0.05)


@given(st.floats(-0.99, 5), st.floats(-6, 6), st.floats(0, 0.99), st.floats(0.001, 0.5))
def test_gaarch_step_signs(chi, eta, rho, nu):
    innov = float(gaarch_step(chi, eta, rho, nu)) - rho * chi
    if eta > 0:
        assert innov == pytest.approx(-nu * (1 + chi) / 2)
        assert innov < 0
    elif eta * eta > 0.5 + 1e-9:
        assert innov > 0


def test_param_validation():
    with pytest.raises(ValueError):
        NonlinearLeverageParams(0.0)
    with pytest.raises(ValueError):
        NonlinearLeverageParams(0.01, epsilon=-1)
    with pytest.raises(ValueError):
        GaarchParams(0.01, rho=1.0)
    with pytest.raises(ValueError):
        GaarchParams(0.01, nu=-0.1)


def test_unstable_discretization():
    with pytest.raises(ValueError, match="unstable discretization"):
        simulate_nonlinear_leverage(NonlinearLeverageParams(VOL, omega=1.0), 5, 10)


def test_burn_in():
    assert gaarch_burn_in(0.9) == 100
    e = simulate_gaarch(GaarchParams(VOL), 5, 10, seed=1)
    assert e.meta["burn_in"] == 100
    assert e.returns.shape == (10, 5)


@pytest.mark.parametrize("make", [
    lambda s, t: simulate_gaussian(VOL, 5, BLOCK_PATHS + 100, seed=s, threads=t),
    lambda s, t: simulate_nonlinear_leverage(NonlinearLeverageParams(VOL), 5, BLOCK_PATHS + 100,
                                             seed=s, threads=t),
    lambda s, t: simulate_gaarch(GaarchParams(VOL), 5, BLOCK_PATHS + 100, seed=s, history_days=20,
                                 threads=t),
])
def test_thread_independent(make):
    a, b = make(7, 1), make(7, 4)
    assert np.array_equal(a.returns, b.returns)
    assert not np.array_equal(a.returns, make(8, 1).returns)


def test_single_path_reproducible():
    a = simulate_gaussian(VOL, 20, 1, seed=3)
    b = simulate_gaussian(VOL, 20, 1, seed=3)
    assert a.returns.tobytes() == b.returns.tobytes()


def test_gaussian_moments():
    e = simulate_gaussian(0.02, 20, 50_000, seed=11)
    x = e.terminal_returns()
    assert np.std(x) == pytest.approx(0.02 * np.sqrt(20), rel=0.02)
    s = e.sample_set()
    assert alpha_hat(s) == pytest.approx(1.0, abs=0.01)
    assert beta_hat(s) == pytest.approx(0.0, abs=0.02)
    assert stats.normaltest(x).pvalue > 1e-3


@pytest.mark.parametrize("kind", ["nonlinear", "gaarch"])
def test_reduces_to_gaussian(kind):
    n = 10_000
    if kind == "nonlinear":
        e = simulate_nonlinear_leverage(NonlinearLeverageParams(VOL, epsilon=0.0), 10, n, seed=5)
    else:
        e = simulate_gaarch(GaarchParams(VOL, nu=0.0), 10, n, seed=5)
    g = simulate_gaussian(VOL, 10, n, seed=99)
    assert stats.ks_2samp(e.terminal_returns(), g.terminal_returns()).pvalue > 0.01


def test_nonlinear_negative_skew():
    e = simulate_nonlinear_leverage(NonlinearLeverageParams(VOL, epsilon=0.3), 10, 100_000, seed=2)
    m = compute_moments(e.sample_set())
    se = np.sqrt(6 / 100_000)
    assert m.skewness <= 3 * se
    assert m.skewness < 0


def test_gaarch_negative_skew_and_fat_tails():
    e = simulate_gaarch(GaarchParams(VOL), 10, 50_000, seed=4)
    m = compute_moments(e.sample_set())
    assert m.skewness < 0 and m.excess_kurtosis > 0
    assert e.meta["vol_floor_hits"] == 0


def test_regime_selection():
    e = simulate_gaarch(GaarchParams(VOL), 5, 2_001, seed=6, history_days=60)
    hi, lo = e.regime(Regime.HIGH_VOL), e.regime("low_vol")
    assert hi.n_paths + lo.n_paths == e.n_paths
    assert abs(hi.n_paths - lo.n_paths) <= 1
    assert hi.trailing_vol.min() > lo.trailing_vol.max()
    assert e.regime("all") is e
    assert np.std(hi.terminal_returns()) > np.std(lo.terminal_returns())
    with pytest.raises(ValueError):
        simulate_gaussian(VOL, 5, 10).regime("high_vol")


def test_truncate_and_horizon():
    e = simulate_gaussian(VOL, 10, 100, seed=0)
    t = e.truncate(4)
    assert t.horizon_days == 4 and np.array_equal(t.returns, e.returns[:, :4])
    with pytest.raises(ValueError):
        e.truncate(11)
    half = simulate_gaussian(VOL, 2, 10, step_days=0.5)
    assert half.n_steps == 4 and half.horizon_days == 2


def test_ensemble_validation():
    with pytest.raises(ValueError):
        PathEnsemble(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        PathEnsemble(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        PathEnsemble(np.zeros((3, 2)), trailing_vol=np.ones(2))


def test_binary_round_trip(tmp_path):
    e = simulate_gaarch(GaarchParams(VOL), 5, 300, seed=9, history_days=20)
    back = load_ensemble(save_ensemble(e, tmp_path / "e.bin"))
    assert np.array_equal(back.returns, e.returns)
    assert np.array_equal(back.trailing_vol, e.trailing_vol)
    assert (back.model_tag, back.seed, back.step_days) == ("gaarch", 9, 1.0)
    plain = simulate_gaussian(VOL, 3, 10)
    assert load_ensemble(save_ensemble(plain, tmp_path / "p.bin")).trailing_vol is None


def test_binary_corruption(tmp_path):
    f = save_ensemble(simulate_gaussian(VOL, 3, 10), tmp_path / "e.bin")
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(ValueError, match="size mismatch"):
        load_ensemble(f)
    (tmp_path / "x.bin").write_bytes(b"nonsense" * 10)
    with pytest.raises(ValueError):
        load_ensemble(tmp_path / "x.bin")


def test_csv_round_trip(tmp_path):
    e = simulate_gaussian(VOL, 4, 50, seed=1)
    f = export_ensemble_csv(e, tmp_path / "e.csv")
    assert f.read_text().splitlines()[0] == "step_1,step_2,step_3,step_4"
    assert np.array_equal(import_ensemble_csv(f).returns, e.returns)
