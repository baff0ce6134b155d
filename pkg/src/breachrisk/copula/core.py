"""Evaluation and simulation for fitted bivariate copulas."""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..errors import DomainError, NumericalError
from .families import Family, impl

HINV_TOL = 1e-9
HINV_MAXITER = 200


@dataclasses.dataclass(frozen=True)
class CopulaSpec:
    """A bivariate copula with its parameters and fit summary.

    ``theta`` is the (first) dependence parameter and ``delta`` the second
    parameter of the two-parameter families; one-parameter families ignore
    ``delta``. ``tau`` is Kendall's tau implied by the copula, estimated by
    simulation when the spec comes out of a fit.
    """

    family: Family
    theta: float = 0.0
    delta: float = 1.0
    tau: float = float("nan")
    loglik: float = float("nan")
    aic: float = float("nan")

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "delta", float(self.delta))
        impl(fam).check(self.theta, self.delta)

    @property
    def n_params(self) -> int:
        return impl(self.family).n_params

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

        return {
            "family": self.family.value,
            "theta": self.theta,
            "delta": self.delta,
            "tau": clean(self.tau),
            "loglik": clean(self.loglik),
            "aic": clean(self.aic),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CopulaSpec":
        nan = float("nan")
        return cls(
            family=Family.parse(d["family"]),
            theta=d.get("theta", 0.0),
            delta=d.get("delta", 1.0),
            tau=nan if d.get("tau") is None else d["tau"],
            loglik=nan if d.get("loglik") is None else d["loglik"],
            aic=nan if d.get("aic") is None else d["aic"],
        )


INDEPENDENCE = CopulaSpec(Family.INDEPENDENCE, tau=0.0, loglik=0.0, aic=0.0)


def _as_unit(x, name, closed=True):
    x = np.asarray(x, dtype=float)
    if closed:
        bad = ~((x >= 0) & (x <= 1))
    else:
        bad = ~((x > 0) & (x < 1))
    if np.any(bad):
        where = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"{name} must lie in {where}")
    return x


def cdf(spec: CopulaSpec, u, v):
    """Copula distribution function C(u, v) on the closed unit square."""
    u, v = np.broadcast_arrays(_as_unit(u, "u"), _as_unit(v, "v"))
    out = np.empty(u.shape)
    edge = (u == 0) | (v == 0) | (u == 1) | (v == 1)
    out[edge] = np.where((u[edge] == 0) | (v[edge] == 0), 0.0,
                         np.where(u[edge] == 1, v[edge], u[edge]))
    inner = ~edge
    if np.any(inner):
        fam = impl(spec.family)
        with np.errstate(all="ignore"):
            out[inner] = fam.cdf(u[inner], v[inner], spec.theta, spec.delta)
    return out if out.ndim else float(out)


def logpdf(spec: CopulaSpec, u, v):
    """Log copula density on the open unit square."""
    u, v = np.broadcast_arrays(_as_unit(u, "u", closed=False), _as_unit(v, "v", closed=False))
    with np.errstate(all="ignore"):
        out = np.asarray(impl(spec.family).logpdf(u, v, spec.theta, spec.delta), dtype=float)
    return out if out.ndim else float(out)


def density(spec: CopulaSpec, u, v):
    """Copula density c(u, v) = d^2 C / du dv; undefined on the boundary."""
    out = np.exp(logpdf(spec, u, v))
    return out if np.ndim(out) else float(out)


def _h_raw(fam, u, v, theta, delta):
    with np.errstate(all="ignore"):
        h = fam.hfunc(u, v, theta, delta)
    return np.clip(np.nan_to_num(h, nan=0.0), 0.0, 1.0)


def h_function(spec: CopulaSpec, v, given_u):
    """Conditional distribution P(V <= v | U = given_u) = dC/du."""
    v, u = np.broadcast_arrays(_as_unit(v, "v"), _as_unit(given_u, "given_u", closed=False))
    out = np.empty(v.shape)
    lo, hi = v == 0, v == 1
    out[lo], out[hi] = 0.0, 1.0
    inner = ~(lo | hi)
    if np.any(inner):
        out[inner] = _h_raw(impl(spec.family), u[inner], v[inner], spec.theta, spec.delta)
    return out if out.ndim else float(out)


def _solve_h(fam, u, p, theta, delta, v0=None, tol=HINV_TOL, maxiter=HINV_MAXITER):
    """Safeguarded Newton iteration for h(v|u) = p, vectorised.

    The bracket [lo, hi] always contains the root because h is a CDF in v.
    Newton steps that leave the bracket are replaced by bisection.
    """
    n = p.shape[0]
    lo = np.zeros(n)
    hi = np.ones(n)
    v = np.clip(p.copy() if v0 is None else np.nan_to_num(v0, nan=0.5), 1e-12, 1 - 1e-12)
    v = np.where((v > 0) & (v < 1), v, 0.5)
    resid = np.full(n, np.inf)
    active = np.arange(n)
    for it in range(maxiter):
        ua, va, pa = u[active], v[active], p[active]
        f = _h_raw(fam, ua, va, theta, delta) - pa
        resid[active] = f
        below = f < 0
        lo_a = np.where(below, va, lo[active])
        hi_a = np.where(below, hi[active], va)
        lo[active], hi[active] = lo_a, hi_a
        done = (np.abs(f) <= 4 * np.spacing(pa)) | (hi_a - lo_a <= 4 * np.spacing(np.maximum(va, 1e-300)))
        mid = 0.5 * (lo_a + hi_a)
        if it < 50:
            with np.errstate(all="ignore"):
                step = va - f / np.exp(fam.logpdf(ua, va, theta, delta))
            new = np.where(np.isfinite(step) & (step > lo_a) & (step < hi_a), step, mid)
        else:
            new = mid
        v[active] = np.where(done, va, new)
        active = active[~done]
        if active.size == 0:
            break
    bad = (np.abs(resid) > tol) & (hi - lo > 4 * np.spacing(np.maximum(v, 1e-300)))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NumericalError(
            f"h-inverse did not converge after {maxiter} iterations "
            f"(p={p[i]:.6g}, u={u[i]:.6g}, bracket=[{lo[i]:.6g}, {hi[i]:.6g}])")
    return v


def h_inverse(spec: CopulaSpec, p, given_u):
    """Solve h(v | given_u) = p for v, with |h - p| <= 1e-9."""
    p, u = np.broadcast_arrays(_as_unit(p, "p", closed=False), _as_unit(given_u, "given_u", closed=False))
    shape = p.shape
    p, u = p.ravel().astype(float), u.ravel().astype(float)
    fam = impl(spec.family)
    if spec.family in (Family.INDEPENDENCE, Family.GAUSSIAN):
        out = fam.hinv(u, p, spec.theta, spec.delta)
    else:
        v0 = None
        guess = getattr(fam, "hinv", None) or getattr(fam, "hinv_guess", None)
        if guess is not None:
            with np.errstate(all="ignore"):
                v0 = guess(u, p, spec.theta, spec.delta)
        out = _solve_h(fam, u, p, spec.theta, spec.delta, v0=v0)
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(spec: CopulaSpec, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. pairs by conditional inversion.

    Returns an ``(n, 2)`` array of pseudo-observations strictly inside the
    unit square. ``seed`` may be anything accepted by
    :func:`numpy.random.default_rng` or a Generator instance.
    """
    if n < 1:
        raise DomainError("sample size must be >= 1")
    rng = _rng(seed)
    draws = rng.random((n, 2))
    # random() is on [0, 1); keep both coordinates strictly interior.
    tiny = np.finfo(float).tiny
    draws = np.clip(draws, tiny, 1 - np.finfo(float).epsneg)
    u1 = draws[:, 0]
    u2 = h_inverse(spec, draws[:, 1], u1)
    return np.column_stack([u1, u2])


def simulated_tau(spec: CopulaSpec, n: int = 100_000, seed=0) -> float:
    """Kendall's tau of a seeded simulation from ``spec``."""
    from .empirical import kendall_tau

    if spec.family is Family.INDEPENDENCE:
        return 0.0
    draws = sample(spec, n, seed)
    return kendall_tau(draws)


def with_tau(spec: CopulaSpec, tau: float) -> CopulaSpec:
    return dataclasses.replace(spec, tau=float(tau))


__all__ = [
    "CopulaSpec", "INDEPENDENCE", "cdf", "density", "logpdf", "h_function",
    "h_inverse", "sample", "simulated_tau", "with_tau",
]
