import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairsmile.core import Regime
from fairsmile.marketdata import (EMA_WINDOW, OhlcBar, OhlcSeries, build_return_windows,
                                  ema_variance, ema_vol, parse_ohlc_csv, read_sample_set,
                                  regime_split, rogers_satchell, rogers_satchell_array,
                                  synthetic_ohlc, window_returns, write_sample_set)

HEADER = "date,open,high,low,close\n"


def write_csv(path, rows, header=HEADER):
    path.write_text(header + "".join(r + "\n" for r in rows))
    return path


def random_series(n, seed=0, vol=0.01):
    rng = np.random.default_rng(seed)
    # vol clustering so that the regimes differ
    sig = vol * np.exp(0.5 * np.sin(np.arange(n) / 40.0))
    closes = 100 * np.exp(np.cumsum(sig * rng.standard_normal(n)))
    return OhlcSeries(synthetic_ohlc(closes, rng))


def test_parse_three_rows(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["2020-01-02,100,101,99,100.5",
                                       "2020-01-03,100.5,102,100,101",
                                       "2020-01-06,101,101.5,98,99"])
    s = parse_ohlc_csv(f)
    assert len(s) == 3
    assert s.closes.tolist() == [100.5, 101, 99]
    assert s.dates[2] == dt.date(2020, 1, 6)
    assert np.isnan(s.ema_vol).all()


def test_parse_reports_line(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["2020-01-02,100,101,99,100.5",
                                       "2020-01-03,100.5,100,99,99.5"])
    with pytest.raises(ValueError, match="line 3"):
        parse_ohlc_csv(f)


@pytest.mark.parametrize("content,msg", [
    ("", "no data"),
    (HEADER, "no data"),
    ("date,open,high,close\n2020-01-02,1,1,1\n", "missing columns: low"),
    (HEADER + "02/01/2020,1,1,1,1\n", "line 2: unparseable date"),
    (HEADER + "2020-01-02,1,x,1,1\n", "line 2: unparseable price"),
    (HEADER + "2020-01-03,1,1,1,1\n2020-01-02,1,1,1,1\n", "line 3: dates not strictly"),
    (HEADER + "2020-01-03,1,1,1,1\n2020-01-03,1,1,1,1\n", "line 3: dates not strictly"),
    (HEADER + "2020-01-03,-1,1,1,1\n", "line 2"),
])
def test_parse_errors(tmp_path, content, msg):
    f = tmp_path / "bad.csv"
    f.write_text(content)
    with pytest.raises(ValueError, match=msg):
        parse_ohlc_csv(f)


def test_parse_column_order_free(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["100.5,2020-01-02,100,99,101"], "close,date,open,low,high\n")
    assert parse_ohlc_csv(f).bars[0] == OhlcBar(dt.date(2020, 1, 2), 100, 101, 99, 100.5)


def test_rogers_satchell_examples():
    d = dt.date(2020, 1, 2)
    assert rogers_satchell(OhlcBar(d, 100, 100, 100, 100)) == 0.0
    val = rogers_satchell(OhlcBar(d, 100, 110, 95, 105))
    expected = math.log(1.1) * math.log(110 / 105) + math.log(0.95) * math.log(95 / 105)
    assert val == pytest.approx(expected)
    assert val == pytest.approx(0.009567, abs=1e-6)


@given(st.floats(1, 1000), st.floats(1, 1000), st.floats(0, 0.2), st.floats(0, 0.2))
def test_rogers_satchell_nonnegative(o, c, up, down):
    h = max(o, c) * (1 + up)
    l = min(o, c) * (1 - down)
    assert rogers_satchell(OhlcBar(dt.date(2020, 1, 2), o, h, l, c)) >= 0
    assert rogers_satchell_array(o, h, l, c) >= -1e-18


def test_rs_unbiased_for_brownian_bar():
    # finely monitored Brownian bars: mean RS recovers the per-bar variance
    rng = np.random.default_rng(1)
    n_bars, n_sub, chunk = 4000, 20_000, 1000
    sd = 0.01 / math.sqrt(n_sub)
    level = np.zeros(n_bars)
    hi = np.zeros(n_bars)
    lo = np.zeros(n_bars)
    for _ in range(n_sub // chunk):
        path = level[:, None] + np.cumsum(rng.standard_normal((n_bars, chunk)) * sd, axis=1)
        hi = np.maximum(hi, path.max(1))
        lo = np.minimum(lo, path.min(1))
        level = path[:, -1]
    rs = rogers_satchell_array(1.0, np.exp(hi), np.exp(lo), np.exp(level))
    assert rs.mean() == pytest.approx(1e-4, abs=3 * rs.std() / math.sqrt(n_bars) + 2e-6)


def test_ema_constant_and_spike():
    c = np.full(60, 4e-4)
    np.testing.assert_allclose(ema_vol(c)[EMA_WINDOW:], 0.02)
    assert np.isnan(ema_vol(c)[:EMA_WINDOW]).all()
    x = np.zeros(60)
    x[30] = 1.0
    v = ema_variance(x)
    assert v[30] == pytest.approx(1 / 20)
    np.testing.assert_allclose(v[31:] / v[30:-1], 1 - 1 / 20)


def test_ema_seed_is_window_mean():
    x = np.arange(1.0, 31.0)
    assert ema_variance(x)[EMA_WINDOW - 1] == pytest.approx(x[:20].mean())
    with pytest.raises(ValueError, match="too short"):
        ema_vol(np.ones(EMA_WINDOW))


def test_causality():
    s = random_series(300)
    for t in (25, 120, 299):
        bars = list(s.bars)
        b = bars[t]
        bars[t] = OhlcBar(b.date, b.open, b.high * 1.5, b.low * 0.5, b.close)
        mod = OhlcSeries(bars)
        assert mod.ema_vol[t] == s.ema_vol[t]
        np.testing.assert_array_equal(mod.ema_vol[: t + 1], s.ema_vol[: t + 1])
        assert mod.ema_vol[t + 1:].tolist() != s.ema_vol[t + 1:].tolist() or t == 299


def test_regime_split_examples():
    for n in (1, 5, 50):
        high, low = regime_split(np.arange(2.0 * n))
        assert high.sum() == low.sum() == n
        assert high[n:].all()
    high, low = regime_split(np.full(10, 0.3))
    assert not high.any() and low.all()
    high, low = regime_split(np.array([np.nan, np.nan, 1.0, 2.0, 3.0]))
    assert high.tolist() == [False, False, False, False, True]
    assert low.tolist() == [False, False, True, True, False]


@given(st.lists(st.floats(0.001, 1), min_size=2, max_size=200, unique=True), st.randoms())
def test_regime_split_balance_and_shuffle(vols, rnd):
    v = np.array(vols)
    high, low = regime_split(v)
    assert abs(int(high.sum()) - int(low.sum())) <= 1
    perm = list(range(v.size))
    rnd.shuffle(perm)
    h2, _ = regime_split(v[perm])
    assert np.array_equal(h2, high[perm])


def test_window_returns():
    np.testing.assert_allclose(window_returns(np.array([100, 101, 99.0]), 1), [0.01, 99 / 101 - 1])
    np.testing.assert_allclose(window_returns(np.array([100, 101, 99.0]), 1), [0.01, -0.0198], atol=1e-4)
    assert window_returns(np.array([1.0, 2.0]), 2).size == 0


def test_build_windows_metadata_and_errors():
    s = random_series(400)
    w = build_return_windows(s, 5, Regime.HIGH_VOL)
    assert w.regime is Regime.HIGH_VOL and w.horizon_days == 5
    assert w.meta["overlapping"] and w.meta["regime"] == "high_vol"
    assert w.meta["windows"] == len(w)
    assert np.mean(w.samples) == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError, match="insufficient windows"):
        build_return_windows(random_series(60), 5)
    with pytest.raises(ValueError):
        build_return_windows(s, 61)
    s.high_vol[:] = False
    with pytest.raises(ValueError, match="insufficient windows"):
        build_return_windows(s, 5, "high_vol")


def test_high_regime_has_higher_raw_vol():
    s = random_series(3000, seed=4)
    hi = build_return_windows(s, 1, "high_vol").meta["scale"]
    lo = build_return_windows(s, 1, "low_vol").meta["scale"]
    assert hi > lo


def test_pipeline_deterministic(tmp_path):
    s = random_series(300, seed=2)
    f = tmp_path / "x.csv"
    f.write_text(HEADER + "".join(f"{b.date},{b.open!r},{b.high!r},{b.low!r},{b.close!r}\n"
                                  for b in s.bars))
    a = build_return_windows(parse_ohlc_csv(f), 3, "low_vol")
    b = build_return_windows(parse_ohlc_csv(f), 3, "low_vol")
    assert a.samples.tobytes() == b.samples.tobytes()
    np.testing.assert_array_equal(a.samples, build_return_windows(s, 3, "low_vol").samples)


def test_sample_set_io(tmp_path):
    w = build_return_windows(random_series(300), 2)
    f = write_sample_set(w, tmp_path / "s.csv")
    assert (tmp_path / "s.csv.json").exists()
    back = read_sample_set(f)
    assert np.array_equal(back.samples, w.samples)
    assert (back.horizon_days, back.regime, back.source) == (2, Regime.ALL, "ohlc")
    assert back.meta["windows"] == w.meta["windows"]
    (tmp_path / "bad.csv").write_text("x\n1\n")
    with pytest.raises(ValueError):
        read_sample_set(tmp_path / "bad.csv")
