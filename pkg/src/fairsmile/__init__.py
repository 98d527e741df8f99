"""Fair smile coefficients from return distributions via exotic option prices."""

from .core import (GaussianMoneynessCoefficients, Method, MomentSummary, Regime, SampleSet,
                   SmileCoefficients, bootstrap_se, compute_moments, standardize)
from .hedge import ExoticPayoff, HedgeConfig, PriceEstimate, hedged_price, smile_via_exotics
from .models import (GaarchParams, NonlinearLeverageParams, PathEnsemble, simulate_gaarch,
                     simulate_gaussian, simulate_nonlinear_leverage)
from .pricing import fit_smile_from_paths, fit_smile_quadratic, smile_from_paths
from .smile import (KernelConfig, alpha_hat, beta_hat, density_at_zero, edgeworth_coefficients,
                    edgeworth_smile, gamma_hat)

__version__ = "0.1.0"

__all__ = [
    "ExoticPayoff", "GaarchParams", "GaussianMoneynessCoefficients", "HedgeConfig",
    "KernelConfig", "Method", "MomentSummary", "NonlinearLeverageParams", "PathEnsemble",
    "PriceEstimate", "Regime", "SampleSet", "SmileCoefficients", "alpha_hat", "beta_hat",
    "bootstrap_se", "compute_moments", "density_at_zero", "edgeworth_coefficients",
    "edgeworth_smile", "fit_smile_from_paths", "fit_smile_quadratic", "gamma_hat",
    "hedged_price", "simulate_gaarch", "simulate_gaussian", "simulate_nonlinear_leverage",
    "smile_from_paths", "smile_via_exotics", "standardize",
]
