"""Exotic option prices on path ensembles with a Gaussian-delta control variate.

Each path is mapped to standardized-return space: increments are centered
per step and divided by the ensemble's terminal standard deviation, so the
terminal value ``u`` has zero mean and unit variance across paths. A payoff
``f(u)`` is then priced as the path average of

    f(u) - sum_t delta(x_t, v_t) (x_{t+1} - x_t)

where ``x_t`` is the running standardized return and ``v_t`` the remaining
variance fraction. ``delta`` is the exact sensitivity of the payoff's price
under a driftless Gaussian model, which keeps the hedge simple and
deliberately sub-optimal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import SQRT_HALF_PI, Method, SmileCoefficients
from .models import PathEnsemble
from .smile import KernelConfig, extrapolate_to_zero, extrapolation_weights, gaussian_window

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class PayoffKind(str, enum.Enum):
    STRADDLE = "straddle"
    BINARY = "binary"
    GAUSSIAN_WINDOW = "gaussian_window"
    CALL = "call"
    CONSTANT = "constant"


@dataclass(frozen=True)
class ExoticPayoff:
    """Payoff on the terminal standardized return.

    ``param`` is the window width for ``gaussian_window``, the strike (in
    standardized units) for ``call`` and the paid amount for ``constant``.
    """

    kind: PayoffKind
    param: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PayoffKind(self.kind))
        if self.kind is PayoffKind.GAUSSIAN_WINDOW and not self.param > 0:
            raise ValueError("gaussian_window requires a positive width")

    @classmethod
    def straddle(cls) -> "ExoticPayoff":
        return cls(PayoffKind.STRADDLE)

    @classmethod
    def binary(cls) -> "ExoticPayoff":
        return cls(PayoffKind.BINARY)

    @classmethod
    def window(cls, delta: float) -> "ExoticPayoff":
        return cls(PayoffKind.GAUSSIAN_WINDOW, delta)

    @classmethod
    def call(cls, strike: float) -> "ExoticPayoff":
        return cls(PayoffKind.CALL, strike)

    @classmethod
    def constant(cls, amount: float) -> "ExoticPayoff":
        return cls(PayoffKind.CONSTANT, amount)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        kind = self.kind
        if kind is PayoffKind.STRADDLE:
            return np.abs(u)
        if kind is PayoffKind.BINARY:
            return np.where(u > 0, 1.0, np.where(u == 0, 0.5, 0.0))
        if kind is PayoffKind.GAUSSIAN_WINDOW:
            return gaussian_window(u, self.param)
        if kind is PayoffKind.CALL:
            return np.maximum(u - self.param, 0.0)
        return np.full(u.shape, float(self.param))


@dataclass(frozen=True)
class HedgeConfig:
    """``hedge_vol`` (per sqrt day) of None uses the ensemble's own terminal std."""

    enabled: bool = True
    hedge_vol: float | None = None
    rebalance_every: int = 1

    def __post_init__(self):
        if self.hedge_vol is not None and not self.hedge_vol > 0:
            raise ValueError("hedge_vol must be positive")
        if self.rebalance_every < 1:
            raise ValueError("rebalance_every must be at least 1")


@dataclass(frozen=True)
class PriceEstimate:
    value: float
    std_error: float
    n_paths: int
    variance_ratio: float


def gaussian_hedge_delta(payoff: ExoticPayoff, x, v):
    """d/dx of E[f(x + sqrt(v) Z)] for standard normal Z."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("remaining variance must be positive")
    x = np.asarray(x, dtype=float)
    kind = payoff.kind
    if kind is PayoffKind.STRADDLE:
        out = 2.0 * ndtr(x / np.sqrt(v)) - 1.0
    elif kind is PayoffKind.BINARY:
        sd = np.sqrt(v)
        z = x / sd
        out = np.exp(-0.5 * z * z) * _INV_SQRT_2PI / sd
    elif kind is PayoffKind.GAUSSIAN_WINDOW:
        w = v + payoff.param**2
        out = -x / w * np.exp(-0.5 * x * x / w) * _INV_SQRT_2PI / np.sqrt(w)
    elif kind is PayoffKind.CALL:
        out = ndtr((x - payoff.param) / np.sqrt(v))
    else:
        out = np.zeros(np.broadcast(x, v).shape)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_price(payoff: ExoticPayoff, x, v):
    """E[f(x + sqrt(v) Z)]; used to check the deltas and as a reference."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    sd = np.sqrt(v)
    kind = payoff.kind
    if kind is PayoffKind.STRADDLE:
        z = x / sd
        out = x * (2.0 * ndtr(z) - 1.0) + 2.0 * sd * np.exp(-0.5 * z * z) * _INV_SQRT_2PI
    elif kind is PayoffKind.BINARY:
        out = ndtr(x / sd)
    elif kind is PayoffKind.GAUSSIAN_WINDOW:
        w = v + payoff.param**2
        out = np.exp(-0.5 * x * x / w) * _INV_SQRT_2PI / np.sqrt(w)
    elif kind is PayoffKind.CALL:
        d = (x - payoff.param) / sd
        out = (x - payoff.param) * ndtr(d) + sd * np.exp(-0.5 * d * d) * _INV_SQRT_2PI
    else:
        out = np.full(np.broadcast(x, v).shape, float(payoff.param))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class StandardizedPaths:
    """Running standardized returns ``x`` (n_paths, n_steps + 1) and remaining variance ``v``."""

    x: np.ndarray
    v: np.ndarray
    terminal_std: float

    @property
    def terminal(self) -> np.ndarray:
        return self.x[:, -1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.x, axis=1)


def standardize_paths(e: PathEnsemble, h: HedgeConfig | None = None) -> StandardizedPaths:
    h = h or HedgeConfig()
    if e.n_paths < 2:
        raise ValueError("need at least two paths")
    inc = e.returns - e.returns.mean(axis=0)
    terminal = inc.sum(axis=1)
    sd = math.sqrt(float(np.mean(terminal * terminal)))
    if sd == 0.0:
        raise ValueError("degenerate ensemble")
    x = np.zeros((e.n_paths, e.n_steps + 1))
    np.cumsum(inc / sd, axis=1, out=x[:, 1:])
    n = e.n_steps
    remaining = (n - np.arange(n)) / n
    if h.hedge_vol is not None:
        remaining = remaining * (h.hedge_vol**2 * e.horizon_days) / sd**2
    return StandardizedPaths(x, remaining, sd)


def hedge_pnl(paths: StandardizedPaths, payoff: ExoticPayoff, rebalance_every: int = 1
              ) -> tuple[np.ndarray, np.ndarray]:
    """Per-path gain of the delta hedge, and the cross-path mean delta held at each step."""
    n = paths.v.size
    dx = paths.increments
    pnl = np.zeros(paths.x.shape[0])
    mean_delta = np.empty(n)
    delta = None
    for t in range(n):
        if t % rebalance_every == 0:
            delta = gaussian_hedge_delta(payoff, paths.x[:, t], paths.v[t])
        pnl += delta * dx[:, t]
        mean_delta[t] = np.mean(delta)
    return pnl, mean_delta


@dataclass(frozen=True)
class HedgedPayoffs:
    """Per-path payoffs on one ensemble, before and after the hedge (columns = payoffs)."""

    payoffs: list[ExoticPayoff]
    paths: StandardizedPaths
    raw: np.ndarray
    hedged: np.ndarray
    mean_delta: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.raw.shape[0]

    def influence(self, density_at_zero: float | None = None) -> np.ndarray:
        """Per-path influence values whose covariance / n estimates the price covariance.

        Adds to the hedged payoff the first-order effect of estimating the
        ensemble center (per step) and scale used for standardization.
        Hedging removes path noise but not normalization noise, so the plain
        sample variance of the hedged payoff understates the error.
        """
        u = self.paths.terminal
        d_scale, d_center = _standardization_sensitivities(self.payoffs, u, density_at_zero)
        out = self.hedged + np.outer(0.5 * (u * u - 1.0), d_scale) + np.outer(u, d_center)
        return out + self.paths.increments @ self.mean_delta.T


def price_payoffs(e: PathEnsemble, payoffs: list[ExoticPayoff], h: HedgeConfig | None = None
                  ) -> HedgedPayoffs:
    h = h or HedgeConfig()
    paths = standardize_paths(e, h)
    u = paths.terminal
    raw = np.column_stack([f(u) for f in payoffs])
    if not h.enabled:
        return HedgedPayoffs(payoffs, paths, raw, raw, np.zeros((len(payoffs), e.n_steps)))
    hedged = np.empty_like(raw)
    mean_delta = np.empty((len(payoffs), e.n_steps))
    for j, f in enumerate(payoffs):
        pnl, mean_delta[j] = hedge_pnl(paths, f, h.rebalance_every)
        hedged[:, j] = raw[:, j] - pnl
    return HedgedPayoffs(payoffs, paths, raw, hedged, mean_delta)


def _estimate(raw: np.ndarray, hedged: np.ndarray) -> PriceEstimate:
    n = hedged.size
    var_h = float(np.var(hedged, ddof=1))
    var_r = float(np.var(raw, ddof=1))
    ratio = var_h / var_r if var_r > 0 else float("nan")
    return PriceEstimate(float(np.mean(hedged)), math.sqrt(var_h / n), n, ratio)


def hedged_price(e: PathEnsemble, payoff: ExoticPayoff, h: HedgeConfig | None = None,
                 horizon_days: float | None = None) -> PriceEstimate:
    """Mean hedged payoff; ``std_error`` is the plain sample std over sqrt(n)."""
    if horizon_days is not None and abs(horizon_days - e.horizon_days) > 1e-9:
        raise ValueError("mismatched horizon")
    res = price_payoffs(e, [payoff], h)
    return _estimate(res.raw[:, 0], res.hedged[:, 0])


def _kde_at(u: np.ndarray, x: float) -> float:
    bw = 1.06 * u.size ** -0.2
    return float(np.mean(gaussian_window(u - x, bw)))


def _standardization_sensitivities(payoffs: list[ExoticPayoff], u: np.ndarray,
                                   density_at_zero: float | None) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of each unhedged price w.r.t. log scale and terminal center."""
    d_scale, d_center = [], []
    for f in payoffs:
        kind = f.kind
        if kind is PayoffKind.STRADDLE:
            d_scale.append(-np.mean(np.abs(u)))
            d_center.append(-np.mean(np.sign(u)))
        elif kind is PayoffKind.BINARY:
            p0 = _kde_at(u, 0.0) if density_at_zero is None else density_at_zero
            d_scale.append(0.0)
            d_center.append(-p0)
        elif kind is PayoffKind.GAUSSIAN_WINDOW:
            kern = gaussian_window(u, f.param) / f.param**2
            d_scale.append(np.mean(u * u * kern))
            d_center.append(np.mean(u * kern))
        elif kind is PayoffKind.CALL:
            itm = u > f.param
            d_scale.append(-np.mean(np.where(itm, u, 0.0)))
            d_center.append(-np.mean(itm))
        else:
            d_scale.append(0.0)
            d_center.append(0.0)
    return np.array(d_scale), np.array(d_center)


def smile_via_exotics(e: PathEnsemble, k: KernelConfig | None = None,
                      h: HedgeConfig | None = None) -> SmileCoefficients:
    """Level from the straddle, skew from the binary, curvature from the window prices.

    Standard errors follow by the delta method from the covariance of the
    per-path influence values (see :meth:`HedgedPayoffs.influence`).
    """
    h = h or HedgeConfig()
    k = k or KernelConfig.default(e.n_paths)
    payoffs = [ExoticPayoff.straddle(), ExoticPayoff.binary()]
    payoffs += [ExoticPayoff.window(d) for d in k.delta_grid]
    res = price_payoffs(e, payoffs, h)
    cols = res.hedged
    n = res.n_paths
    means = cols.mean(axis=0)

    w = extrapolation_weights(k.delta_grid, k.extrapolation_order)
    p0 = extrapolate_to_zero(k.delta_grid, means[2:], k.extrapolation_order)
    alpha = SQRT_HALF_PI * means[0]
    beta = SQRT_HALF_PI * (1.0 - 2.0 * means[1])
    gamma = SQRT_HALF_PI * p0 - 1.0 / (2.0 * alpha)

    cov = np.cov(res.influence(p0), rowvar=False) / n

    grad = np.zeros(cols.shape[1])
    grad[0] = SQRT_HALF_PI / (2.0 * alpha**2) * SQRT_HALF_PI
    grad[2:] = SQRT_HALF_PI * w
    return SmileCoefficients(
        float(alpha), float(beta), float(gamma),
        SQRT_HALF_PI * math.sqrt(cov[0, 0]),
        2.0 * SQRT_HALF_PI * math.sqrt(cov[1, 1]),
        math.sqrt(float(grad @ cov @ grad)),
        int(round(e.horizon_days)), Method.EXOTIC_MC,
    )
