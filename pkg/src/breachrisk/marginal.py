"""Univariate ARMA(p,q)+GARCH(1,1) models with normal innovations.

The conditional mean follows

    X_t = mu + sum_k phi_k X_{t-k} + sum_l theta_l eps_{t-l} + eps_t

and the innovation variance follows the GARCH(1,1) recursion

    sigma_t^2 = w + alpha1 eps_{t-1}^2 + beta1 sigma_{t-1}^2.

Conditioning conventions: pre-sample observations are set to the sample
mean of the series, pre-sample innovations to zero, and the variance
recursion starts from the sample variance of the ARMA residuals.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, signal, stats

from .errors import DomainError, FitError, ValidationError

logger = logging.getLogger(__name__)

MAX_PERSISTENCE = 0.999
LOG_2PI = math.log(2 * math.pi)


# ---------------------------------------------------------------------------
# variance-stabilising transforms
# ---------------------------------------------------------------------------

class TransformKind(str, enum.Enum):
    LOG_WITH_ZERO_JITTER = "LogWithZeroJitter"
    SQUARE_ROOT = "SquareRoot"


@dataclasses.dataclass(frozen=True)
class TransformSpec:
    kind: TransformKind
    jitter_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", TransformKind(self.kind))


def zero_jitter(jitter_seed: int, index: int) -> float:
    """Uniform(0, 1) replacement for a zero at absolute position ``index``.

    Keyed on (seed, index) so the same zero always receives the same draw,
    whichever slice of the series it is transformed in.
    """
    u = np.random.default_rng([int(jitter_seed), int(index)]).random()
    return float(u) if u > 0 else float(np.finfo(float).tiny)


def transform(series, spec: TransformSpec, offset: int = 0) -> np.ndarray:
    """Apply a variance-stabilising transform to nonnegative day counts.

    ``offset`` is the absolute index of ``series[0]``; it keys the zero
    jitter for :attr:`TransformKind.LOG_WITH_ZERO_JITTER`.
    """
    x = np.asarray(series, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("transform input must be nonnegative")
    if spec.kind is TransformKind.SQUARE_ROOT:
        return np.sqrt(x)
    x = x.copy()
    for j in np.flatnonzero(x == 0):
        x[j] = zero_jitter(spec.jitter_seed, offset + int(j))
    return np.log(x)


def inverse_transform(series, spec: TransformSpec) -> np.ndarray:
    """Map transformed values back to days; square-root scale clamps at 0."""
    x = np.asarray(series, dtype=float)
    if spec.kind is TransformKind.SQUARE_ROOT:
        return np.square(np.maximum(x, 0.0))
    return np.exp(x)


# ---------------------------------------------------------------------------
# model containers
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ArmaGarchParams:
    mu: float
    phi: tuple = ()
    theta_ma: tuple = ()
    w: float = 1.0
    alpha1: float = 0.0
    beta1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(c) for c in self.phi))
        object.__setattr__(self, "theta_ma", tuple(float(c) for c in self.theta_ma))

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.theta_ma)


@dataclasses.dataclass(frozen=True, eq=False)
class MarginalFit:
    """Fitted ARMA(p,q)+GARCH(1,1) model and its in-sample filter output."""

    p: int
    q: int
    mu: float
    phi: tuple
    theta_ma: tuple
    w: float
    alpha1: float
    beta1: float
    sigma: np.ndarray
    residuals: np.ndarray
    loglik: float
    aic: float
    converged: bool = True
    raw: Optional[np.ndarray] = dataclasses.field(default=None, repr=False)

    @property
    def params(self) -> ArmaGarchParams:
        return ArmaGarchParams(self.mu, self.phi, self.theta_ma, self.w, self.alpha1, self.beta1)

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q, "mu": self.mu,
            "phi": list(self.phi), "theta_ma": list(self.theta_ma),
            "w": self.w, "alpha1": self.alpha1, "beta1": self.beta1,
            "loglik": self.loglik, "aic": self.aic,
        }


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------

def filter_arma_garch(series, params: ArmaGarchParams):
    """Run the ARMA and GARCH recursions over ``series``.

    Returns
    -------
    eps : ndarray
        ARMA innovations.
    sigma2 : ndarray
        Conditional variances, same length as ``series``.
    """
    x = np.asarray(series, dtype=float)
    return _filter(x, params.mu, np.asarray(params.phi), np.asarray(params.theta_ma),
                   params.w, params.alpha1, params.beta1)


def _filter(x, mu, phi, theta, w, alpha, beta):
    n = x.shape[0]
    p, q = phi.shape[0], theta.shape[0]
    y = x - mu
    if p:
        padded = np.concatenate([np.full(p, x.mean()), x])
        for k in range(1, p + 1):
            y = y - phi[k - 1] * padded[p - k:p - k + n]
    eps = signal.lfilter([1.0], np.concatenate([[1.0], theta]), y) if q else y
    s0 = eps.var()
    sig2 = np.empty(n)
    sig2[0] = s0
    if n > 1:
        sig2[1:] = signal.lfilter([1.0], [1.0, -beta], w + alpha * eps[:-1] ** 2,
                                  zi=[beta * s0])[0]
    return eps, sig2


def _gaussian_loglik(eps, sig2) -> float:
    return -0.5 * float(np.sum(LOG_2PI + np.log(sig2) + eps * eps / sig2))


def one_step_moments(params: ArmaGarchParams, x_recent, eps_recent, eps_last, sigma2_last):
    """Conditional mean and standard deviation of the next observation.

    ``x_recent`` and ``eps_recent`` list the most recent values first
    (X_t, X_{t-1}, ...; eps_t, eps_{t-1}, ...) and must cover the AR and MA
    orders respectively.
    """
    x_recent = np.asarray(x_recent, dtype=float)
    eps_recent = np.asarray(eps_recent, dtype=float)
    if x_recent.size < params.p or eps_recent.size < params.q:
        raise ValidationError("not enough history for the model orders")
    mean = params.mu
    mean += float(np.dot(params.phi, x_recent[:params.p])) if params.p else 0.0
    mean += float(np.dot(params.theta_ma, eps_recent[:params.q])) if params.q else 0.0
    var = params.w + params.alpha1 * eps_last ** 2 + params.beta1 * sigma2_last
    return mean, math.sqrt(var)


def forecast_one_step(fit, history):
    """One-step-ahead conditional (mean, sigma) given an observed history.

    A predictive draw is ``mean + sigma * z`` for a standardized innovation z.
    """
    params = fit.params if isinstance(fit, MarginalFit) else fit
    x = np.asarray(history, dtype=float)
    if x.size < max(params.p, params.q) + 1:
        raise ValidationError(
            f"history of length {x.size} is shorter than max(p, q) + 1 = {max(params.p, params.q) + 1}")
    eps, sig2 = filter_arma_garch(x, params)
    return one_step_moments(params, x[::-1], eps[::-1], eps[-1], sig2[-1])


def simulate_arma_garch(params: ArmaGarchParams, n: int, seed=None, z=None, burn: int = 500):
    """Simulate a path of length ``n`` after discarding ``burn`` values.

    ``z`` optionally supplies the ``n + burn`` standardized innovations.
    """
    rng = np.random.default_rng(seed)
    total = n + burn
    z = rng.standard_normal(total) if z is None else np.asarray(z, dtype=float)
    if z.shape[0] != total:
        raise ValidationError(f"need {total} innovations, got {z.shape[0]}")
    p, q = params.p, params.q
    phi, th = np.asarray(params.phi), np.asarray(params.theta_ma)
    persistence = params.alpha1 + params.beta1
    sig2 = params.w / (1 - persistence) if persistence < 1 else params.w
    x = np.zeros(total)
    eps = np.zeros(total)
    ar_sum = float(phi.sum()) if p else 0.0
    xbar = params.mu / (1 - ar_sum) if ar_sum != 1 else params.mu
    e_prev = 0.0
    for t in range(total):
        if t > 0:
            sig2 = params.w + params.alpha1 * e_prev ** 2 + params.beta1 * sig2
        e = math.sqrt(sig2) * z[t]
        m = params.mu
        for k in range(1, p + 1):
            m += phi[k - 1] * (x[t - k] if t - k >= 0 else xbar)
        for l in range(1, q + 1):
            if t - l >= 0:
                m += th[l - 1] * eps[t - l]
        x[t] = m + e
        eps[t] = e
        e_prev = e
    return x[burn:]


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

def _pacf_to_coef(r):
    """Durbin-Levinson map from partial autocorrelations in (-1, 1) to a
    stationary AR polynomial."""
    coef = np.zeros(0)
    for k, rk in enumerate(r):
        coef = np.concatenate([coef - rk * coef[::-1], [rk]]) if k else np.array([rk])
    return coef


def _coef_to_pacf(coef):
    coef = np.asarray(coef, dtype=float).copy()
    p = coef.shape[0]
    r = np.zeros(p)
    for k in range(p, 0, -1):
        rk = float(np.clip(coef[k - 1], -0.99, 0.99))
        r[k - 1] = rk
        prev = coef[:k - 1]
        coef = (prev + rk * prev[::-1]) / (1 - rk * rk)
    return r


class _Layout:
    """Unconstrained parameter vector: [mu, ar_raw(p), ma_raw(q), log w, a, b].

    With ``constant_variance`` the GARCH terms are fixed at zero and the
    vector ends at ``log w``.
    """

    def __init__(self, p, q, constant_variance=False):
        self.p, self.q = p, q
        self.constant_variance = constant_variance
        self.size = 1 + p + q + (1 if constant_variance else 3)

    def unpack(self, z):
        p, q = self.p, self.q
        mu = z[0]
        phi = _pacf_to_coef(np.tanh(z[1:1 + p])) if p else np.zeros(0)
        theta = -_pacf_to_coef(np.tanh(z[1 + p:1 + p + q])) if q else np.zeros(0)
        if self.constant_variance:
            return mu, phi, theta, math.exp(min(z[1 + p + q], 700.0)), 0.0, 0.0
        lw, a, b = z[1 + p + q:]
        w = math.exp(min(lw, 700.0))
        m = max(a, b, 0.0)
        ea, eb, e0 = math.exp(a - m), math.exp(b - m), math.exp(-m)
        tot = e0 + ea + eb
        return mu, phi, theta, w, ea / tot, eb / tot

    def pack(self, mu, phi, theta, w, alpha, beta):
        alpha = min(max(alpha, 1e-6), 0.98)
        beta = min(max(beta, 1e-6), 0.98)
        if alpha + beta > 0.995:
            scale = 0.995 / (alpha + beta)
            alpha, beta = alpha * scale, beta * scale
        rest = 1.0 - alpha - beta
        z = [mu]
        if self.p:
            z.extend(np.arctanh(_coef_to_pacf(phi)))
        if self.q:
            z.extend(np.arctanh(_coef_to_pacf(-np.asarray(theta))))
        if self.constant_variance:
            z.append(math.log(max(w, 1e-12)))
            return np.asarray(z, dtype=float)
        z.extend([math.log(max(w, 1e-12)), math.log(alpha / rest), math.log(beta / rest)])
        return np.asarray(z, dtype=float)


def _objective(layout, x):
    def f(z):
        mu, phi, theta, w, a, b = layout.unpack(z)
        with np.errstate(all="ignore"):
            eps, sig2 = _filter(x, mu, phi, theta, w, a, b)
            ll = _gaussian_loglik(eps, sig2)
        return -ll if np.isfinite(ll) else 1e10

    return f


def _default_starts(p, q, garch_starts):
    for alpha, beta in garch_starts:
        yield (0.0, np.zeros(p), np.zeros(q), 1.0 - alpha - beta, alpha, beta)


def _standardize_start(start, p, q, loc, scale):
    """Express a raw-scale parameter set in the standardized fitting scale,
    padding or truncating ARMA coefficients to (p, q)."""
    phi = np.zeros(p)
    theta = np.zeros(q)
    sp, st = np.asarray(start.phi, float), np.asarray(start.theta_ma, float)
    phi[:min(p, sp.size)] = sp[:p]
    theta[:min(q, st.size)] = st[:q]
    mu = (start.mu - loc * (1 - phi.sum())) / scale
    return (mu, phi, theta, start.w / scale ** 2, start.alpha1, start.beta1)


GARCH_STARTS = ((0.05, 0.85), (0.05, 0.10))
# Half the 95% chi-square(1) quantile: the largest log-likelihood loss for
# which a pinned GARCH fit is replaced by the constant-variance model.
CONSTANT_VARIANCE_LR = 0.5 * float(stats.chi2.ppf(0.95, 1))


def fit_arma_garch(series, p: int = 1, q: int = 1, *, start=None,
                   garch_starts=GARCH_STARTS, min_length: Optional[int] = None) -> MarginalFit:
    """Gaussian conditional maximum-likelihood fit of ARMA(p,q)+GARCH(1,1).

    Parameters
    ----------
    series : array_like
        Finite observations, length at least ``50 + 10 (p + q)``.
    p, q : int
        ARMA orders in 0..5.
    start : ArmaGarchParams or MarginalFit, optional
        Extra starting point (e.g. the previous rolling window's estimate).
    garch_starts : sequence of (alpha1, beta1)
        Default starting points, each combined with a zero ARMA part.

    Raises
    ------
    FitError
        If the likelihood is not finite at the optimum or the estimate sits on
        the stationarity boundary (alpha1 + beta1 > 0.999) while fitting
        clearly better than the constant-variance model (alpha1 = beta1 = 0).
        The error's ``estimate`` holds the rejected parameters.
    """
    x = np.asarray(series, dtype=float)
    if not (0 <= p <= 5 and 0 <= q <= 5):
        raise ValidationError("ARMA orders must lie in 0..5")
    need = 50 + 10 * (p + q) if min_length is None else min_length
    if x.size < need:
        raise ValidationError(f"series of length {x.size} too short; need >= {need}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite values")
    loc, scale = float(x.mean()), float(x.std())
    if scale == 0:
        raise FitError("constant series")
    xs = (x - loc) / scale

    layout = _Layout(p, q)
    starts = []
    if start is not None:
        starts.append(_standardize_start(start, p, q, loc, scale))
    starts.extend(_default_starts(p, q, garch_starts))
    best, trace = _optimize(layout, xs, starts)
    if best is None:
        raise FitError("ARMA-GARCH likelihood diverged from every start", trace)
    params = _raw_params(layout, best.x, loc, scale)

    if params.alpha1 + params.beta1 > MAX_PERSISTENCE:
        # With alpha1 ~ 0 the persistence is unidentified and drifts to the
        # boundary. Accept the constant-variance model when the data cannot
        # tell it apart from the pinned fit.
        flat = _Layout(p, q, constant_variance=True)
        mu_s, phi, theta = layout.unpack(best.x)[:3]
        alt, alt_trace = _optimize(flat, xs, [(mu_s, phi, theta, 1.0, 0.0, 0.0)])
        trace.extend(alt_trace)
        if alt is None or alt.fun - best.fun > CONSTANT_VARIANCE_LR:
            raise FitError(
                f"alpha1 + beta1 = {params.alpha1 + params.beta1:.6f} pinned at the "
                "stationarity boundary", trace, estimate=params)
        logger.info("persistence pinned at the boundary; using the constant-variance fit")
        layout, best = flat, alt
        params = _raw_params(layout, best.x, loc, scale)

    eps, sig2 = filter_arma_garch(x, params)
    if not np.all(np.isfinite(sig2)) or np.any(sig2 <= 0):
        raise FitError("non-positive conditional variance at the optimum", trace)
    loglik = _gaussian_loglik(eps, sig2)
    k = 1 + p + q + 3
    return MarginalFit(p, q, params.mu, params.phi, params.theta_ma, params.w, params.alpha1,
                       params.beta1, np.sqrt(sig2), eps / np.sqrt(sig2), loglik,
                       2 * k - 2 * loglik, bool(best.success), best.x.copy())


def _optimize(layout, xs, starts):
    objective = _objective(layout, xs)
    best, trace = None, []
    for s in starts:
        z0 = layout.pack(*s)
        res = optimize.minimize(objective, z0, method="L-BFGS-B",
                                options={"maxiter": 500, "ftol": 1e-11, "gtol": 1e-7})
        trace.append({"x0": z0.tolist(), "fun": float(res.fun), "message": str(res.message)})
        if np.isfinite(res.fun) and res.fun < 1e10 and (best is None or res.fun < best.fun):
            best = res
    return best, trace


def _raw_params(layout, z, loc, scale) -> ArmaGarchParams:
    mu_s, phi, theta, w_s, alpha, beta = layout.unpack(z)
    mu = loc * (1 - phi.sum()) + scale * mu_s
    return ArmaGarchParams(float(mu), tuple(phi), tuple(theta), float(w_s * scale ** 2),
                           float(alpha), float(beta))


def refilter(params: ArmaGarchParams, series) -> MarginalFit:
    """Build a :class:`MarginalFit` for ``series`` under fixed parameters."""
    x = np.asarray(series, dtype=float)
    eps, sig2 = filter_arma_garch(x, params)
    loglik = _gaussian_loglik(eps, sig2)
    k = 1 + params.p + params.q + 3
    return MarginalFit(params.p, params.q, params.mu, params.phi, params.theta_ma, params.w,
                       params.alpha1, params.beta1, np.sqrt(sig2), eps / np.sqrt(sig2),
                       loglik, 2 * k - 2 * loglik, converged=False)


def select_orders(series, p_max: int = 5, q_max: int = 5, band: float = 2.0):
    """Choose ARMA orders for ARMA(p,q)+GARCH(1,1) by AIC.

    Among fits within ``band`` AIC units of the minimum the simplest wins:
    smallest p + q, then smallest p. Each (p, q) fit is warm-started from the
    neighbouring nested fits so that larger models never lose likelihood.

    Returns
    -------
    (p, q), dict
        The chosen orders and the AIC of every successful fit.
    """
    x = np.asarray(series, dtype=float)
    fits = {}
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            nested = [fits[k] for k in ((p - 1, q), (p, q - 1)) if k in fits]
            best = None
            for start in nested or [None]:
                try:
                    f = fit_arma_garch(x, p, q, start=start.params if start else None,
                                       min_length=50)
                except FitError as exc:
                    logger.info("ARMA(%d,%d) fit failed: %s", p, q, exc)
                    continue
                if best is None or f.loglik > best.loglik:
                    best = f
            if best is not None:
                fits[(p, q)] = best
    if not fits:
        raise FitError("every ARMA order fit failed")
    aic = {k: f.aic for k, f in fits.items()}
    lowest = min(aic.values())
    close = [k for k, a in aic.items() if a <= lowest + band]
    chosen = min(close, key=lambda k: (k[0] + k[1], k[0]))
    return chosen, aic


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def ljung_box(series, lags: int = 20, fitted_params: int = 0):
    """Ljung-Box portmanteau statistic and p-value.

    The reference distribution is chi-square with ``lags - fitted_params``
    degrees of freedom; pass the number of estimated ARMA coefficients when
    testing model residuals.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if not 1 <= lags < n:
        raise ValidationError(f"need 1 <= lags < n, got lags={lags}, n={n}")
    if not 0 <= fitted_params < lags:
        raise ValidationError(f"need 0 <= fitted_params < lags, got {fitted_params}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0:
        raise ValidationError("zero-variance series")
    ks = np.arange(1, lags + 1)
    rho = np.array([np.dot(d[k:], d[:-k]) for k in ks]) / denom
    q = n * (n + 2) * float(np.sum(rho ** 2 / (n - ks)))
    return q, float(stats.chi2.sf(q, lags - fitted_params))


def residual_diagnostics(fit: MarginalFit, lags: int = 20) -> dict:
    """Ljung-Box p-values for standardized and squared standardized residuals.

    The level test discounts the p + q estimated ARMA coefficients.
    """
    z = fit.residuals
    return {"lb_resid_p": ljung_box(z, lags, fit.p + fit.q)[1],
            "lb_sq_resid_p": ljung_box(z ** 2, lags)[1]}


__all__: Sequence[str] = [
    "ArmaGarchParams", "MarginalFit", "TransformKind", "TransformSpec", "filter_arma_garch",
    "fit_arma_garch", "forecast_one_step", "inverse_transform", "ljung_box", "one_step_moments",
    "refilter", "residual_diagnostics", "select_orders", "simulate_arma_garch", "transform",
    "zero_jitter",
]
