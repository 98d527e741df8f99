"""OHLC ingestion, Rogers-Satchell variance, trailing EMA vol and regime splitting.

Input CSV format: header ``date,open,high,low,close`` with ISO-8601 dates and
decimal prices, one bar per row, dates strictly increasing.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Regime, SampleSet, standardize

EMA_WINDOW = 20
MIN_WINDOWS = 50
REQUIRED_COLUMNS = ("date", "open", "high", "low", "close")


@dataclass(frozen=True)
class OhlcBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise ValueError("prices must be positive and finite")
        if self.high < max(self.open, self.close):
            raise ValueError("high below open/close")
        if self.low > min(self.open, self.close):
            raise ValueError("low above open/close")


@dataclass
class OhlcSeries:
    bars: list[OhlcBar]
    window: int = EMA_WINDOW
    rs_variance: np.ndarray = field(init=False, repr=False)
    ema_vol: np.ndarray = field(init=False, repr=False)
    high_vol: np.ndarray = field(init=False, repr=False)
    low_vol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.bars:
            raise ValueError("no data")
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise ValueError(f"dates not strictly increasing at {cur.date.isoformat()}")
        self.rs_variance = np.array([rogers_satchell(b) for b in self.bars])
        if len(self.bars) > self.window:
            self.ema_vol = ema_vol(self.rs_variance, self.window)
            self.high_vol, self.low_vol = regime_split(self.ema_vol)
        else:
            n = len(self.bars)
            self.ema_vol = np.full(n, np.nan)
            self.high_vol = np.zeros(n, dtype=bool)
            self.low_vol = np.zeros(n, dtype=bool)

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def closes(self) -> np.ndarray:
        return np.array([b.close for b in self.bars])

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    def regime_mask(self, regime: Regime | str) -> np.ndarray:
        regime = Regime(regime)
        if regime is Regime.HIGH_VOL:
            return self.high_vol
        if regime is Regime.LOW_VOL:
            return self.low_vol
        return np.isfinite(self.ema_vol)


def parse_ohlc_csv(path: str | Path, window: int = EMA_WINDOW) -> OhlcSeries:
    """Read and validate an OHLC file. Errors name the offending line."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("no data") from None
        cols = [h.strip().lower() for h in header]
        missing = [c for c in REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise ValueError(f"missing columns: {', '.join(missing)}")
        pos = {c: cols.index(c) for c in REQUIRED_COLUMNS}
        bars = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not x.strip() for x in row):
                continue
            try:
                date = dt.date.fromisoformat(row[pos["date"]].strip())
            except (ValueError, IndexError):
                raise ValueError(f"line {lineno}: unparseable date") from None
            try:
                o, h, l, c = (float(row[pos[k]]) for k in ("open", "high", "low", "close"))
            except (ValueError, IndexError):
                raise ValueError(f"line {lineno}: unparseable price") from None
            try:
                bar = OhlcBar(date, o, h, l, c)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if bars and bar.date <= bars[-1].date:
                raise ValueError(f"line {lineno}: dates not strictly increasing")
            bars.append(bar)
    if not bars:
        raise ValueError("no data")
    return OhlcSeries(bars, window=window)


def rogers_satchell(bar: OhlcBar) -> float:
    """Drift-independent daily variance from one OHLC bar."""
    hi_o = math.log(bar.high / bar.open)
    hi_c = math.log(bar.high / bar.close)
    lo_o = math.log(bar.low / bar.open)
    lo_c = math.log(bar.low / bar.close)
    return hi_o * hi_c + lo_o * lo_c


def rogers_satchell_array(o, h, l, c) -> np.ndarray:
    o, h, l, c = (np.asarray(x, dtype=float) for x in (o, h, l, c))
    return np.log(h / o) * np.log(h / c) + np.log(l / o) * np.log(l / c)


def ema_variance(x: np.ndarray, window: int = EMA_WINDOW) -> np.ndarray:
    """EMA of a daily variance series along the last axis, inclusive of each day.

    ``out[..., t]`` incorporates ``x[..., :t+1]``. The recursion uses
    ``lam = 1/window`` and is seeded at ``t = window-1`` by the plain mean of
    the first ``window`` values; earlier entries are NaN.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < window:
        raise ValueError("series too short")
    lam = 1.0 / window
    out = np.full(x.shape, np.nan)
    v = x[..., :window].mean(axis=-1)
    out[..., window - 1] = v
    for t in range(window, n):
        v = (1.0 - lam) * v + lam * x[..., t]
        out[..., t] = v
    return out


def ema_vol(rs: np.ndarray, window: int = EMA_WINDOW) -> np.ndarray:
    """Trailing vol for each day built strictly from earlier days.

    Day ``t`` receives the square root of the EMA through day ``t-1``, so the
    first labeled day is index ``window``.
    """
    rs = np.asarray(rs, dtype=float)
    if rs.size <= window:
        raise ValueError("series too short")
    inclusive = ema_variance(rs, window)
    out = np.full(rs.shape, np.nan)
    out[1:] = np.sqrt(np.maximum(inclusive[:-1], 0.0))
    return out


def regime_split(vol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """High/low masks from the median of the finite vols; ties at the median go low."""
    vol = np.asarray(vol, dtype=float)
    labeled = np.isfinite(vol)
    if not labeled.any():
        return np.zeros(vol.shape, bool), np.zeros(vol.shape, bool)
    med = np.median(vol[labeled])
    high = labeled & (vol > med)
    low = labeled & ~high
    return high, low


def window_returns(closes: np.ndarray, horizon_days: int) -> np.ndarray:
    """Overlapping close-to-close returns; entry ``t`` starts at day ``t``."""
    closes = np.asarray(closes, dtype=float)
    if closes.size <= horizon_days:
        return np.empty(0)
    return closes[horizon_days:] / closes[:-horizon_days] - 1.0


def build_return_windows(series: OhlcSeries, horizon_days: int,
                         regime: Regime | str = Regime.ALL) -> SampleSet:
    """Standardized overlapping T-day returns starting on days of one regime."""
    if not 1 <= horizon_days <= 60:
        raise ValueError("horizon_days must lie in [1, 60]")
    regime = Regime(regime)
    raw = window_returns(series.closes, horizon_days)
    mask = series.regime_mask(regime)[: raw.size]
    picked = raw[mask]
    if picked.size < MIN_WINDOWS:
        raise ValueError(f"insufficient windows ({picked.size} < {MIN_WINDOWS})")
    s = standardize(picked, horizon_days, regime, source="ohlc")
    s.meta.update({
        "overlapping": horizon_days > 1,
        "windows": int(picked.size),
        "regime": regime.value,
        "first_date": series.bars[0].date.isoformat(),
        "last_date": series.bars[-1].date.isoformat(),
    })
    return s


def write_sample_set(s: SampleSet, path: str | Path) -> Path:
    """One ``u`` per row, plus a JSON sidecar ``<path>.json`` with metadata."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("u\n")
        for v in s.samples:
            fh.write(f"{float(v)!r}\n")
    meta = {"horizon_days": s.horizon_days, "regime": s.regime.value, "source": s.source,
            "count": len(s), **s.meta}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_sample_set(path: str | Path) -> SampleSet:
    path = Path(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    with path.open() as fh:
        header = fh.readline().strip()
        if header != "u":
            raise ValueError(f"{path}: expected header 'u'")
        values = [float(line) for line in fh if line.strip()]
    horizon = int(meta.pop("horizon_days", 1))
    regime = meta.pop("regime", "all")
    source = meta.pop("source", str(path))
    meta.pop("count", None)
    return SampleSet(np.array(values), horizon, Regime(regime), source, meta)


def synthetic_ohlc(closes: np.ndarray, rng: np.random.Generator, start: dt.date | None = None,
                   wick: float = 0.002) -> list[OhlcBar]:
    """Valid OHLC bars around a close path: open at the previous close, random wicks."""
    closes = np.asarray(closes, dtype=float)
    start = start or dt.date(2000, 1, 3)
    opens = np.concatenate([[closes[0]], closes[:-1]])
    top = np.maximum(opens, closes) * (1.0 + wick * np.abs(rng.standard_normal(closes.size)))
    bot = np.minimum(opens, closes) * (1.0 - wick * np.abs(rng.standard_normal(closes.size)))
    return [OhlcBar(start + dt.timedelta(days=i), float(o), float(h), float(l), float(c))
            for i, (o, h, l, c) in enumerate(zip(opens, top, bot, closes))]
