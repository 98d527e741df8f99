"""Shared domain types, sample standardization, moments and bootstrap errors.

Variances are normalized by 1/N throughout, so that a standardized sample
satisfies ``mean(u) == 0`` and ``mean(u**2) == 1`` exactly (up to rounding).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


class Regime(str, enum.Enum):
    ALL = "all"
    HIGH_VOL = "high_vol"
    LOW_VOL = "low_vol"


class Method(str, enum.Enum):
    EXOTIC_MC = "exotic_mc"
    EDGEWORTH = "edgeworth"
    IV_FIT = "iv_fit"


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream addressed by ``(seed, *key)``.

    Streams depend only on the key, never on how work is split across
    workers, so results are identical for any thread count.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class SampleSet:
    """Standardized terminal returns ``u = r / (sigma sqrt(T))`` for one horizon.

    Instances built by :func:`standardize` have zero mean and unit (1/N)
    variance. Bootstrap resamples reuse the type without re-standardizing.
    """

    samples: np.ndarray
    horizon_days: int
    regime: Regime = Regime.ALL
    source: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if arr.size < 2:
            raise ValueError("insufficient samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "regime", Regime(self.regime))

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples: np.ndarray) -> "SampleSet":
        return SampleSet(samples, self.horizon_days, self.regime, self.source, dict(self.meta))


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    median: float
    count: int


@dataclass(frozen=True)
class SmileCoefficients:
    """Level, skew and curvature of the implied-vol smile in moneyness units."""

    alpha: float
    beta: float
    gamma: float
    alpha_se: float = float("nan")
    beta_se: float = float("nan")
    gamma_se: float = float("nan")
    horizon_days: int = 0
    method: Method = Method.EXOTIC_MC

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    def ses(self) -> tuple[float, float, float]:
        return (self.alpha_se, self.beta_se, self.gamma_se)


@dataclass(frozen=True)
class GaussianMoneynessCoefficients:
    """Smile coefficients expressed in Gaussian moneyness (strike distance over implied vol)."""

    alpha_p: float
    beta_p: float
    gamma_p: float

    def __post_init__(self):
        if not self.alpha_p > 0:
            raise ValueError("alpha_p must be positive")


def standardize(raw_returns: Sequence[float] | np.ndarray, horizon_days: int = 1,
                regime: Regime | str = Regime.ALL, source: str = "") -> SampleSet:
    """Center and scale returns to zero mean and unit population variance.

    Raises:
        ValueError: "insufficient samples" for N < 2, "degenerate sample"
            when the variance vanishes.
    """
    r = np.asarray(raw_returns, dtype=float).ravel()
    if r.size < 2:
        raise ValueError("insufficient samples")
    if not np.all(np.isfinite(r)):
        raise ValueError("raw returns must be finite")
    mean = r.mean()
    centered = r - mean
    std = math.sqrt(np.mean(centered * centered))
    if std == 0.0 or std <= 1e-14 * max(1.0, abs(mean)):
        raise ValueError("degenerate sample")
    u = centered / std
    meta = {"demean": float(mean), "scale": float(std), "count": int(r.size)}
    return SampleSet(u, int(horizon_days), Regime(regime), source, meta)


def compute_moments(s: SampleSet) -> MomentSummary:
    u = s.samples
    n = u.size
    if n < 4:
        raise ValueError("insufficient samples for kurtosis")
    mean = float(u.mean())
    c = u - mean
    m2 = float(np.mean(c**2))
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    if m2 == 0.0:
        raise ValueError("degenerate sample")
    return MomentSummary(
        mean=mean,
        std=math.sqrt(m2),
        skewness=m3 / m2**1.5,
        excess_kurtosis=m4 / m2**2 - 3.0,
        median=float(np.median(u)),
        count=n,
    )


def _resample_indices(rng: np.random.Generator, n: int, block_length: int | None) -> np.ndarray:
    if not block_length or block_length <= 1:
        return rng.integers(0, n, size=n)
    # moving-block bootstrap: concatenate random contiguous blocks, trim to n
    n_blocks = -(-n // block_length)
    starts = rng.integers(0, n - block_length + 1, size=n_blocks)
    idx = (starts[:, None] + np.arange(block_length)[None, :]).ravel()
    return idx[:n]


def bootstrap_se(estimator: Callable[[SampleSet], float], s: SampleSet, n_boot: int = 200,
                 seed: int = 0, block_length: int | None = None, threads: int = 1) -> float:
    """Bootstrap standard error of ``estimator`` over resamples of ``s``.

    Replicate ``b`` draws from substream ``(seed, b)``, so the result does
    not depend on ``threads``. Resamples are not re-standardized. With
    ``block_length`` > 1 a moving-block bootstrap is used instead of i.i.d.
    resampling, which accounts for overlapping return windows.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    n = len(s)
    u = s.samples

    def one(b: int) -> float:
        idx = _resample_indices(substream(seed, b), n, block_length)
        return float(estimator(s.with_samples(u[idx])))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, range(n_boot)))
    else:
        values = [one(b) for b in range(n_boot)]
    return float(np.std(values, ddof=1))
