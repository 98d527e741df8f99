"""Daily return path generators: Gaussian, nonlinear leverage, asymmetric GARCH.

Paths are produced in fixed blocks of ``BLOCK_PATHS`` rows. Block ``b`` draws
all its noise from substream ``(seed, b)``, so an ensemble is bit-identical
whatever the number of worker threads.

Ensemble file layout (little-endian)::

    magic      6 bytes  b"FSENS1"
    version    uint16
    n_paths    uint64
    n_steps    uint64
    step_days  float64
    seed       int64
    has_vol    uint8    1 if a trailing-vol column follows the returns
    tag_len    uint16
    tag        tag_len bytes, utf-8
    returns    n_paths * n_steps float64, row-major (rows = paths)
    trailing   n_paths float64 (only when has_vol)
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Regime, SampleSet, standardize, substream
from .marketdata import EMA_WINDOW, ema_variance, regime_split

BLOCK_PATHS = 8192
DEFAULT_HISTORY_DAYS = 3 * EMA_WINDOW

_MAGIC = b"FSENS1"
_VERSION = 1
_HEADER = struct.Struct("<6sHQQdqBH")


@dataclass(frozen=True)
class PathEnsemble:
    """Per-step fractional returns, one row per path.

    ``trailing_vol`` holds, when history was simulated, the EMA vol of each
    path over the days preceding the first recorded step. It drives the
    high/low vol regime split.
    """

    returns: np.ndarray
    step_days: float = 1.0
    model_tag: str = ""
    seed: int = 0
    trailing_vol: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
            raise ValueError("returns must be a non-empty (n_paths, n_steps) matrix")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns must be finite")
        if not self.step_days > 0:
            raise ValueError("step_days must be positive")
        object.__setattr__(self, "returns", r)
        if self.trailing_vol is not None:
            tv = np.asarray(self.trailing_vol, dtype=float)
            if tv.shape != (r.shape[0],):
                raise ValueError("trailing_vol must have one entry per path")
            object.__setattr__(self, "trailing_vol", tv)

    @property
    def n_paths(self) -> int:
        return self.returns.shape[0]

    @property
    def n_steps(self) -> int:
        return self.returns.shape[1]

    @property
    def horizon_days(self) -> float:
        return self.n_steps * self.step_days

    def terminal_returns(self) -> np.ndarray:
        return self.returns.sum(axis=1)

    def truncate(self, n_steps: int) -> "PathEnsemble":
        """Keep only the first ``n_steps`` steps of every path."""
        if not 1 <= n_steps <= self.n_steps:
            raise ValueError("n_steps out of range")
        return PathEnsemble(self.returns[:, :n_steps], self.step_days, self.model_tag,
                            self.seed, self.trailing_vol, dict(self.meta))

    def select(self, mask: np.ndarray, tag: str | None = None) -> "PathEnsemble":
        mask = np.asarray(mask, dtype=bool)
        tv = None if self.trailing_vol is None else self.trailing_vol[mask]
        meta = dict(self.meta)
        if tag:
            meta["subset"] = tag
        return PathEnsemble(self.returns[mask], self.step_days, self.model_tag, self.seed, tv, meta)

    def regime(self, regime: Regime | str) -> "PathEnsemble":
        """Paths whose trailing vol is above (high) or not above (low) the cross-path median."""
        regime = Regime(regime)
        if regime is Regime.ALL:
            return self
        if self.trailing_vol is None:
            raise ValueError("ensemble has no trailing vol; simulate with history_days > 0")
        high, low = regime_split(self.trailing_vol)
        return self.select(high if regime is Regime.HIGH_VOL else low, regime.value)

    def sample_set(self, regime: Regime | str = Regime.ALL) -> SampleSet:
        e = self.regime(regime)
        horizon = int(round(e.horizon_days))
        return standardize(e.terminal_returns(), horizon, regime, source=self.model_tag)


@dataclass(frozen=True)
class NonlinearLeverageParams:
    base_vol: float
    epsilon: float = 0.1
    theta: float = 0.0
    omega: float = 0.1

    def __post_init__(self):
        if not self.base_vol > 0:
            raise ValueError("base_vol must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not self.omega > 0:
            raise ValueError("omega must be positive")


@dataclass(frozen=True)
class GaarchParams:
    base_vol: float
    rho: float = 0.9
    nu: float = 0.1

    def __post_init__(self):
        if not self.base_vol > 0:
            raise ValueError("base_vol must be positive")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.nu < 0:
            raise ValueError("nu must be non-negative")


def instantaneous_variance(p: NonlinearLeverageParams, xi):
    """Variance per day given the return memory ``xi``; grows only when ``xi + theta < 0``."""
    shortfall = np.maximum(-(np.asarray(xi, dtype=float) + p.theta), 0.0)
    return p.base_vol**2 * (1.0 + 2.0 * p.epsilon * shortfall)


def gaarch_step(chi, eta, rho: float, nu: float):
    """One update of the vol deviation; only negative shocks feed it."""
    chi = np.asarray(chi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    down = np.where(eta < 0, eta * eta, 0.0)
    return rho * chi + nu * (1.0 + chi) * (down - 0.5)


def _trailing_vol(history: np.ndarray) -> np.ndarray:
    # squared daily returns stand in for the OHLC variance estimator
    return np.sqrt(ema_variance(history**2, EMA_WINDOW)[:, -1])


def _run_blocks(n_paths: int, seed: int, threads: int,
                block_fn: Callable[[np.random.Generator, int], tuple]) -> list[tuple]:
    sizes = [min(BLOCK_PATHS, n_paths - start) for start in range(0, n_paths, BLOCK_PATHS)]
    jobs = [(b, size) for b, size in enumerate(sizes)]

    def run(job):
        b, size = job
        return block_fn(substream(seed, b), size)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def _assemble(parts: list[tuple], step_days: float, tag: str, seed: int, meta: dict,
              with_history: bool) -> PathEnsemble:
    returns = np.concatenate([p[0] for p in parts], axis=0)
    trailing = np.concatenate([p[1] for p in parts]) if with_history else None
    return PathEnsemble(returns, step_days, tag, seed, trailing, meta)


def _check_common(horizon_days: int, n_paths: int, step_days: float, history_days: int) -> int:
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if horizon_days < 1:
        raise ValueError("horizon_days must be positive")
    if not step_days > 0:
        raise ValueError("step_days must be positive")
    if history_days and history_days < EMA_WINDOW:
        raise ValueError(f"history_days must be 0 or at least {EMA_WINDOW}")
    n_steps = horizon_days / step_days
    if abs(n_steps - round(n_steps)) > 1e-9:
        raise ValueError("horizon_days must be a multiple of step_days")
    return int(round(n_steps))


def simulate_gaussian(vol: float, horizon_days: int, n_paths: int, seed: int = 0,
                      step_days: float = 1.0, history_days: int = 0,
                      threads: int = 1) -> PathEnsemble:
    """I.i.d. normal per-step returns with standard deviation ``vol * sqrt(step_days)``."""
    if not vol > 0:
        raise ValueError("vol must be positive")
    n_steps = _check_common(horizon_days, n_paths, step_days, history_days)
    h = int(round(history_days / step_days)) if history_days else 0
    scale = vol * math.sqrt(step_days)

    def block(rng, size):
        z = rng.standard_normal((size, h + n_steps)) * scale
        trailing = _trailing_vol(z[:, :h]) if h else None
        return z[:, h:], trailing

    parts = _run_blocks(n_paths, seed, threads, block)
    meta = {"model": "gaussian", "vol": vol, "history_days": history_days}
    return _assemble(parts, step_days, "gaussian", seed, meta, bool(h))


def simulate_nonlinear_leverage(p: NonlinearLeverageParams, horizon_days: int, n_paths: int,
                                seed: int = 0, step_days: float = 1.0, history_days: int = 0,
                                threads: int = 1) -> PathEnsemble:
    """Euler scheme where one Gaussian increment drives both the return and the memory.

    The memory starts from its stationary law, so every recorded step is in
    the steady state.
    """
    dt_ = step_days
    if p.omega * dt_ >= 1.0:
        raise ValueError("unstable discretization")
    n_steps = _check_common(horizon_days, n_paths, step_days, history_days)
    h = int(round(history_days / step_days)) if history_days else 0
    decay = 1.0 - p.omega * dt_
    # stationary variance of the discrete recursion
    xi_sd = p.omega * math.sqrt(dt_ / (1.0 - decay**2))
    sqrt_dt = math.sqrt(dt_)

    def block(rng, size):
        noise = rng.standard_normal((size, 1 + h + n_steps))
        xi = noise[:, 0] * xi_sd
        out = np.empty((size, h + n_steps))
        for t in range(h + n_steps):
            dw = noise[:, t + 1] * sqrt_dt
            out[:, t] = np.sqrt(instantaneous_variance(p, xi)) * dw
            xi = decay * xi + p.omega * dw
        trailing = _trailing_vol(out[:, :h]) if h else None
        return out[:, h:], trailing

    parts = _run_blocks(n_paths, seed, threads, block)
    meta = {"model": "nonlinear_leverage", "base_vol": p.base_vol, "epsilon": p.epsilon,
            "theta": p.theta, "omega": p.omega, "history_days": history_days}
    return _assemble(parts, step_days, "nonlinear_leverage", seed, meta, bool(h))


def gaarch_burn_in(rho: float) -> int:
    return int(math.ceil(round(10.0 / (1.0 - rho), 9)))


def simulate_gaarch(p: GaarchParams, horizon_days: int, n_paths: int, seed: int = 0,
                    history_days: int = 0, threads: int = 1) -> PathEnsemble:
    """Asymmetric GARCH at daily steps, started from ``chi = 0`` after a burn-in.

    Vol is floored at zero when ``chi < -1``; ``meta["vol_floor_hits"]``
    counts how often that happened.
    """
    n_steps = _check_common(horizon_days, n_paths, 1.0, history_days)
    burn = gaarch_burn_in(p.rho)
    h = history_days

    def block(rng, size):
        eta = rng.standard_normal((size, burn + h + n_steps))
        chi = np.zeros(size)
        out = np.empty((size, h + n_steps))
        floors = 0
        for t in range(eta.shape[1]):
            level = 1.0 + chi
            floors += int(np.count_nonzero(level < 0))
            e = eta[:, t]
            if t >= burn:
                out[:, t - burn] = p.base_vol * np.maximum(level, 0.0) * e
            chi = gaarch_step(chi, e, p.rho, p.nu)
        trailing = _trailing_vol(out[:, :h]) if h else None
        return out[:, h:], trailing, floors

    parts = _run_blocks(n_paths, seed, threads, block)
    floors = sum(part[2] for part in parts)
    meta = {"model": "gaarch", "base_vol": p.base_vol, "rho": p.rho, "nu": p.nu,
            "burn_in": burn, "history_days": history_days, "vol_floor_hits": floors}
    return _assemble(parts, 1.0, "gaarch", seed, meta, bool(h))


def save_ensemble(e: PathEnsemble, path: str | Path) -> Path:
    path = Path(path)
    tag = e.model_tag.encode("utf-8")
    has_vol = e.trailing_vol is not None
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, e.n_paths, e.n_steps, float(e.step_days),
                              int(e.seed), int(has_vol), len(tag)))
        fh.write(tag)
        fh.write(np.ascontiguousarray(e.returns, dtype="<f8").tobytes())
        if has_vol:
            fh.write(np.ascontiguousarray(e.trailing_vol, dtype="<f8").tobytes())
    return path


def load_ensemble(path: str | Path) -> PathEnsemble:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated ensemble header")
    magic, version, n_paths, n_steps, step_days, seed, has_vol, tag_len = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not an ensemble file")
    off = _HEADER.size
    tag = data[off:off + tag_len].decode("utf-8")
    off += tag_len
    expected = off + 8 * n_paths * n_steps + (8 * n_paths if has_vol else 0)
    if len(data) != expected:
        raise ValueError(f"{path}: size mismatch (expected {expected} bytes, got {len(data)})")
    returns = np.frombuffer(data, dtype="<f8", count=n_paths * n_steps, offset=off)
    off += 8 * n_paths * n_steps
    trailing = np.frombuffer(data, dtype="<f8", count=n_paths, offset=off) if has_vol else None
    return PathEnsemble(returns.reshape(n_paths, n_steps).astype(float), step_days, tag, seed,
                        None if trailing is None else trailing.astype(float))


def export_ensemble_csv(e: PathEnsemble, path: str | Path) -> Path:
    """Plain CSV matrix, header ``step_1..step_n``; rows are paths."""
    path = Path(path)
    header = ",".join(f"step_{i + 1}" for i in range(e.n_steps))
    np.savetxt(path, e.returns, delimiter=",", header=header, comments="", fmt="%.17g")
    return path


def import_ensemble_csv(path: str | Path, step_days: float = 1.0, model_tag: str = "csv",
                        seed: int = 0) -> PathEnsemble:
    r = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PathEnsemble(r, step_days, model_tag, seed)
