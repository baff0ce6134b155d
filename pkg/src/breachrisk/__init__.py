"""Copula-based modeling of data-breach time-to-identification and
time-to-notification series.

Submodules
----------
breach_data   record parsing, day-count derivation, summaries, synthetic data
copula        bivariate copula families, sampling, fitting and selection
marginal      ARMA(p,q)+GARCH(1,1) fitting, forecasting and diagnostics
imputation    copula imputation of missing TTN/TTI values
rolling       rolling-window predictive distributions
risk_eval     CRPS, MAE, VaR and violation backtests
cli           command-line entry point
"""

__version__ = "0.1.0"
