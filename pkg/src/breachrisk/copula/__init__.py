"""Bivariate copulas: evaluation, simulation, fitting and selection."""
from .core import (INDEPENDENCE, CopulaSpec, cdf, density, h_function, h_inverse,
                   logpdf, sample, simulated_tau)
from .empirical import empirical_quantile, kendall_tau, pseudo_observations
from .families import Family
from .fitting import ALL_FAMILIES, fit_mle, select_family

__all__ = [
    "ALL_FAMILIES", "INDEPENDENCE", "CopulaSpec", "Family", "cdf", "density",
    "empirical_quantile", "fit_mle", "h_function", "h_inverse", "kendall_tau",
    "logpdf", "pseudo_observations", "sample", "select_family", "simulated_tau",
]
