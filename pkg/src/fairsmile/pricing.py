"""Vanilla prices, implied-vol inversion and quadratic smile fits.

This is the independent route to the smile coefficients: price calls on a
strike grid, invert each price to a Bachelier implied vol, and fit a
quadratic in moneyness ``M = (K - S0) / (S0 sigma sqrt(T))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import norm

from .core import Method, SmileCoefficients
from .hedge import ExoticPayoff, HedgeConfig, price_payoffs
from .models import PathEnsemble

DEFAULT_MONEYNESS_GRID = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)
_PRICE_TOL = 1e-12


@dataclass(frozen=True)
class SmilePoint:
    moneyness: float
    implied_vol: float
    price: float
    price_se: float = float("nan")
    implied_vol_se: float = float("nan")


def bachelier_call(s0, strike, vol_abs, T=1.0):
    """Call on an arithmetic Brownian motion; ``vol_abs`` in price units per sqrt time."""
    s0, strike, vol_abs = (np.asarray(a, dtype=float) for a in (s0, strike, vol_abs))
    sd = vol_abs * math.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (s0 - strike) / sd
        out = (s0 - strike) * ndtr(d) + sd * norm.pdf(d)
    out = np.where(sd > 0, out, np.maximum(s0 - strike, 0.0))
    return float(out) if out.ndim == 0 else out


def black_scholes_call(s0, strike, vol_rel, T=1.0):
    """Lognormal call with zero rates; ``vol_rel`` per sqrt time."""
    s0, strike, vol_rel = (np.asarray(a, dtype=float) for a in (s0, strike, vol_rel))
    sd = vol_rel * math.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.log(s0 / strike) / sd + 0.5 * sd
        out = s0 * ndtr(d1) - strike * ndtr(d1 - sd)
    out = np.where(sd > 0, out, np.maximum(s0 - strike, 0.0))
    return float(out) if out.ndim == 0 else out


def _invert(pricer, price: float, lower_bound: float, upper_bound: float, guess: float) -> float:
    if not math.isfinite(price) or price <= lower_bound * (1 + 1e-15) or price >= upper_bound:
        raise ValueError("no-arbitrage violation")
    lo = 0.0
    hi = max(guess, 1e-12)
    while pricer(hi) < price:
        lo = hi
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("no-arbitrage violation")
    vol = brentq(lambda s: pricer(s) - price, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                 maxiter=500)
    if abs(pricer(vol) - price) > max(1e-10, _PRICE_TOL * price):
        raise ValueError("implied vol did not converge")
    return vol


def bachelier_implied_vol(price: float, s0: float, strike: float, T: float = 1.0) -> float:
    intrinsic = max(s0 - strike, 0.0)
    # time value peaks at the money, where it equals vol sqrt(T) / sqrt(2 pi)
    guess = (price - intrinsic) * math.sqrt(2.0 * math.pi / T)
    return _invert(lambda s: bachelier_call(s0, strike, s, T), price, intrinsic, math.inf, guess)


def black_scholes_implied_vol(price: float, s0: float, strike: float, T: float = 1.0) -> float:
    intrinsic = max(s0 - strike, 0.0)
    guess = (price - intrinsic) / s0 * math.sqrt(2.0 * math.pi / T)
    return _invert(lambda s: black_scholes_call(s0, strike, s, T), price, intrinsic, s0, guess)


def _call_payoffs(grid: Sequence[float]) -> list[ExoticPayoff]:
    return [ExoticPayoff.call(m) for m in grid]


@dataclass(frozen=True)
class PathSmile:
    """Implied-vol points on one ensemble with their joint covariance."""

    points: list[SmilePoint]
    base_vol: float
    iv_cov: np.ndarray
    horizon_days: int


def path_smile(e: PathEnsemble, moneyness_grid: Sequence[float] = DEFAULT_MONEYNESS_GRID,
               h: HedgeConfig | None = None) -> PathSmile:
    """Hedged call prices on a moneyness grid, inverted to Bachelier implied vols.

    Spot is 1 and prices are in spot units, so implied vols are relative
    vols per sqrt(horizon). ``base_vol`` is the ensemble's terminal std.
    """
    grid = [float(m) for m in moneyness_grid]
    if any(abs(m) > 1.5 for m in grid):
        raise ValueError("moneyness grid must lie within |M| <= 1.5")
    res = price_payoffs(e, _call_payoffs(grid), h)
    sd = res.paths.terminal_std
    n = res.n_paths
    prices = res.hedged.mean(axis=0) * sd
    price_cov = np.atleast_2d(np.cov(res.influence(), rowvar=False)) * (sd * sd / n)
    points, vegas = [], []
    for j, m in enumerate(grid):
        strike = 1.0 + m * sd
        iv = bachelier_implied_vol(float(prices[j]), 1.0, strike)
        vega = float(norm.pdf((1.0 - strike) / iv))
        vegas.append(vega)
        price_se = math.sqrt(price_cov[j, j])
        points.append(SmilePoint(m, iv, float(prices[j]), price_se, price_se / vega))
    jac = np.diag(1.0 / np.array(vegas))
    return PathSmile(points, sd, jac @ price_cov @ jac, int(round(e.horizon_days)))


def smile_from_paths(e: PathEnsemble, moneyness_grid: Sequence[float] = DEFAULT_MONEYNESS_GRID,
                     h: HedgeConfig | None = None) -> list[SmilePoint]:
    return path_smile(e, moneyness_grid, h).points


def fit_smile_quadratic(points: Sequence[SmilePoint], base_vol: float,
                        iv_cov: np.ndarray | None = None, horizon_days: int = 0,
                        weighted: bool = True, cubic_term: bool = True) -> SmileCoefficients:
    """Weighted least squares of ``implied_vol / base_vol`` on ``(1, M, M^2)``.

    Weights are ``1/se^2`` when every point carries a finite standard error,
    otherwise uniform. With ``iv_cov`` the coefficient errors account for
    correlation between points (all priced on the same paths).

    ``cubic_term`` adds an ``M^3`` regressor that is fitted but not
    reported. It soaks up the third-order part of the smile, which would
    otherwise leak into the skew (by about 0.8 times the cubic coefficient
    on the default grid).
    """
    if len(points) < 4:
        raise ValueError("need at least 4 smile points")
    m = np.array([p.moneyness for p in points])
    if m.min() > 0 or m.max() < 0:
        raise ValueError("moneyness grid must span M = 0")
    y = np.array([p.implied_vol for p in points]) / base_vol
    se = np.array([p.implied_vol_se for p in points]) / base_vol
    X = np.vander(m, 4 if cubic_term else 3, increasing=True)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("rank-deficient moneyness grid")
    use_w = weighted and np.all(np.isfinite(se)) and np.all(se > 0)
    W = np.diag(1.0 / se**2) if use_w else np.eye(len(points))
    A = np.linalg.solve(X.T @ W @ X, X.T @ W)
    coef = A @ y
    if iv_cov is not None:
        cov = A @ (np.asarray(iv_cov) / base_vol**2) @ A.T
    elif use_w:
        cov = np.linalg.inv(X.T @ W @ X)
    else:
        resid = y - X @ coef
        dof = max(len(points) - 3, 1)
        cov = np.linalg.inv(X.T @ X) * float(resid @ resid) / dof
    ses = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return SmileCoefficients(float(coef[0]), float(coef[1]), float(coef[2]),
                             float(ses[0]), float(ses[1]), float(ses[2]), horizon_days,
                             Method.IV_FIT)


def fit_smile_from_paths(e: PathEnsemble, moneyness_grid: Sequence[float] = DEFAULT_MONEYNESS_GRID,
                         h: HedgeConfig | None = None) -> SmileCoefficients:
    ps = path_smile(e, moneyness_grid, h)
    return fit_smile_quadratic(ps.points, ps.base_vol, ps.iv_cov, ps.horizon_days)
