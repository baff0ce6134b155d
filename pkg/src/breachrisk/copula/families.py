"""Closed-form building blocks for the supported bivariate copula families.

Every family exposes vectorised ``cdf``, ``hfunc`` and ``logpdf`` evaluated on
the open unit square. ``hfunc(u, v)`` is the conditional distribution of V
given U=u, i.e. the partial derivative of C(u, v) with respect to u.
Boundary handling (u or v equal to 0 or 1) lives in the public wrappers in
:mod:`breachrisk.copula.core`; the functions here assume interior inputs.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from scipy import special

from ..errors import DomainError


class Family(str, enum.Enum):
    """Supported families, in the fixed order used for tie-breaking."""

    INDEPENDENCE = "Independence"
    GAUSSIAN = "Gaussian"
    CLAYTON = "Clayton"
    GUMBEL = "Gumbel"
    FRANK = "Frank"
    JOE = "Joe"
    TAWN2 = "TawnType2"
    BB8 = "BB8"

    @property
    def order(self) -> int:
        return list(Family).index(self)

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        for fam in cls:
            if fam.value.lower() == key or fam.name.lower().replace("_", "") == key:
                return fam
        aliases = {"indep": cls.INDEPENDENCE, "normal": cls.GAUSSIAN,
                   "tawn": cls.TAWN2, "tawn2": cls.TAWN2, "tawntypeii": cls.TAWN2}
        if key in aliases:
            return aliases[key]
        raise DomainError(f"unknown copula family {name!r}")


def _log(x):
    return np.log(x)


class _Independence:
    n_params = 0
    bounds: tuple = ()

    @staticmethod
    def check(theta, delta):
        pass

    @staticmethod
    def cdf(u, v, theta, delta):
        return u * v

    @staticmethod
    def hfunc(u, v, theta, delta):
        return v * np.ones_like(u)

    @staticmethod
    def logpdf(u, v, theta, delta):
        return np.zeros(np.broadcast(u, v).shape)

    @staticmethod
    def hinv(u, p, theta, delta):
        return p * np.ones_like(u)


def _bvn_cdf(x, y, rho):
    # Owen's T representation; accurate to double precision away from |rho|=1.
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    out = np.empty(x.shape)
    both0 = (x == 0) & (y == 0)
    out[both0] = 0.25 + math.asin(rho) / (2 * math.pi)
    m = ~both0
    xm, ym = x[m], y[m]
    with np.errstate(divide="ignore", invalid="ignore"):
        ax = (ym - rho * xm) / (xm * s)
        ay = (xm - rho * ym) / (ym * s)
    # T(0, +-inf) = +-1/4; sign follows the numerator.
    ax = np.where(xm == 0, np.copysign(np.inf, ym - rho * xm), ax)
    ay = np.where(ym == 0, np.copysign(np.inf, xm - rho * ym), ay)
    tx = np.where(xm == 0, np.arctan(ax) / (2 * np.pi), special.owens_t(xm, ax))
    ty = np.where(ym == 0, np.arctan(ay) / (2 * np.pi), special.owens_t(ym, ay))
    prod = xm * ym
    beta = np.where((prod > 0) | ((prod == 0) & (xm + ym >= 0)), 0.0, 0.5)
    out[m] = 0.5 * (special.ndtr(xm) + special.ndtr(ym)) - tx - ty - beta
    return np.clip(out, 0.0, 1.0)


class _Gaussian:
    n_params = 1
    bounds = ((-0.99, 0.99),)

    @staticmethod
    def check(theta, delta):
        if not -1.0 < theta < 1.0:
            raise DomainError(f"Gaussian correlation must lie in (-1, 1), got {theta}")

    @staticmethod
    def cdf(u, v, theta, delta):
        return _bvn_cdf(special.ndtri(u), special.ndtri(v), theta)

    @staticmethod
    def hfunc(u, v, theta, delta):
        x, y = special.ndtri(u), special.ndtri(v)
        return special.ndtr((y - theta * x) / math.sqrt(1.0 - theta * theta))

    @staticmethod
    def logpdf(u, v, theta, delta):
        x, y = special.ndtri(u), special.ndtri(v)
        r2 = 1.0 - theta * theta
        return -0.5 * math.log(r2) - (theta * theta * (x * x + y * y) - 2 * theta * x * y) / (2 * r2)

    @staticmethod
    def hinv(u, p, theta, delta):
        x = special.ndtri(u)
        return special.ndtr(special.ndtri(p) * math.sqrt(1.0 - theta * theta) + theta * x)


class _Clayton:
    n_params = 1
    bounds = ((1e-4, 28.0),)

    @staticmethod
    def check(theta, delta):
        if not theta > 0:
            raise DomainError(f"Clayton theta must be > 0, got {theta}")

    @staticmethod
    def _logt(u, v, theta):
        # log(u^-theta + v^-theta - 1)
        return np.log1p(np.expm1(-theta * np.log(u)) + np.expm1(-theta * np.log(v)))

    @classmethod
    def cdf(cls, u, v, theta, delta):
        return np.exp(-cls._logt(u, v, theta) / theta)

    @staticmethod
    def hfunc(u, v, theta, delta):
        # (1 + u^theta (v^-theta - 1))^-(1 + 1/theta), kept accurate near 1
        x = -theta * np.log(v)
        a = theta * np.log(u) + x + np.log(-np.expm1(-x))
        return np.exp(-(1 / theta + 1) * np.logaddexp(0.0, a))

    @classmethod
    def logpdf(cls, u, v, theta, delta):
        return (math.log1p(theta) - (theta + 1) * (np.log(u) + np.log(v))
                - (1 / theta + 2) * cls._logt(u, v, theta))

    @staticmethod
    def hinv_guess(u, p, theta, delta):
        lu = np.log(u)
        # v^-theta = (p u^(theta+1))^(-theta/(theta+1)) + 1 - u^-theta
        t = np.exp(-theta / (theta + 1) * (np.log(p) + (theta + 1) * lu)) - np.expm1(-theta * lu)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.exp(-np.log(t) / theta)
        return v


class _Gumbel:
    n_params = 1
    bounds = ((1.0, 28.0),)

    @staticmethod
    def check(theta, delta):
        if not theta >= 1:
            raise DomainError(f"Gumbel theta must be >= 1, got {theta}")

    @staticmethod
    def _parts(u, v, theta):
        x, y = -np.log(u), -np.log(v)
        r = (x ** theta + y ** theta) ** (1.0 / theta)
        return x, y, r

    @classmethod
    def cdf(cls, u, v, theta, delta):
        _, _, r = cls._parts(u, v, theta)
        return np.exp(-r)

    @classmethod
    def hfunc(cls, u, v, theta, delta):
        x, _, r = cls._parts(u, v, theta)
        return np.exp(-r) / u * (x / r) ** (theta - 1)

    @classmethod
    def logpdf(cls, u, v, theta, delta):
        x, y, r = cls._parts(u, v, theta)
        return (-r + x + y + (theta - 1) * (np.log(x) + np.log(y))
                + (1 - 2 * theta) * np.log(r) + np.log(r + theta - 1))


class _Frank:
    n_params = 1
    bounds = ((-35.0, 35.0),)

    @staticmethod
    def check(theta, delta):
        if not np.isfinite(theta):
            raise DomainError(f"Frank theta must be finite, got {theta}")

    @staticmethod
    def cdf(u, v, theta, delta):
        if theta == 0:
            return u * v
        a, b, e = np.expm1(-theta * u), np.expm1(-theta * v), math.expm1(-theta)
        return -np.log1p(a * b / e) / theta

    @staticmethod
    def hfunc(u, v, theta, delta):
        if theta == 0:
            return v * np.ones_like(u)
        a, b, e = np.expm1(-theta * u), np.expm1(-theta * v), math.expm1(-theta)
        return np.exp(-theta * u) * b / (e + a * b)

    @staticmethod
    def logpdf(u, v, theta, delta):
        if theta == 0:
            return np.zeros(np.broadcast(u, v).shape)
        a, b, e = np.expm1(-theta * u), np.expm1(-theta * v), math.expm1(-theta)
        return math.log(-theta * e) - theta * (u + v) - 2 * np.log(np.abs(e + a * b))

    @staticmethod
    def hinv(u, p, theta, delta):
        if theta == 0:
            return p * np.ones_like(u)
        a, e = np.expm1(-theta * u), math.expm1(-theta)
        b = p * e / (np.exp(-theta * u) - p * a)
        return -np.log1p(b) / theta


class _Joe:
    n_params = 1
    bounds = ((1.0, 28.0),)

    @staticmethod
    def check(theta, delta):
        if not theta >= 1:
            raise DomainError(f"Joe theta must be >= 1, got {theta}")

    @staticmethod
    def _parts(u, v, theta):
        lu, lv = np.log1p(-u), np.log1p(-v)
        a, b = np.exp(theta * lu), np.exp(theta * lv)
        s = a + b - a * b
        return lu, lv, a, b, s

    @classmethod
    def cdf(cls, u, v, theta, delta):
        *_, s = cls._parts(u, v, theta)
        return -np.expm1(np.log(s) / theta)

    @classmethod
    def hfunc(cls, u, v, theta, delta):
        lu, _, _, b, s = cls._parts(u, v, theta)
        return np.exp((theta - 1) * lu + (1 / theta - 1) * np.log(s)) * (1 - b)

    @classmethod
    def logpdf(cls, u, v, theta, delta):
        lu, lv, _, _, s = cls._parts(u, v, theta)
        return (1 / theta - 2) * np.log(s) + (theta - 1) * (lu + lv) + np.log(theta - 1 + s)


class _Tawn2:
    """Asymmetric extreme-value copula
    C(u,v) = u^(1-delta) exp(-[(-delta log u)^theta + (-log v)^theta]^(1/theta)).
    """

    n_params = 2
    bounds = ((1.0, 20.0), (1e-4, 1.0))

    @staticmethod
    def check(theta, delta):
        if not theta >= 1:
            raise DomainError(f"TawnType2 theta must be >= 1, got {theta}")
        if not 0 <= delta <= 1:
            raise DomainError(f"TawnType2 delta must lie in [0, 1], got {delta}")

    @staticmethod
    def _parts(u, v, theta, delta):
        x, y = -np.log(u), -np.log(v)
        a = delta * x
        r = (a ** theta + y ** theta) ** (1.0 / theta)
        logc = -(1 - delta) * x - r
        return x, y, a, r, logc

    @classmethod
    def cdf(cls, u, v, theta, delta):
        *_, logc = cls._parts(u, v, theta, delta)
        return np.exp(logc)

    @classmethod
    def hfunc(cls, u, v, theta, delta):
        _, _, a, r, logc = cls._parts(u, v, theta, delta)
        g = (1 - delta) + delta * (a / r) ** (theta - 1)
        return np.exp(logc) / u * g

    @classmethod
    def logpdf(cls, u, v, theta, delta):
        x, y, a, r, logc = cls._parts(u, v, theta, delta)
        ar = (a / r) ** (theta - 1)
        g = (1 - delta) + delta * ar
        return (logc + x + y + (theta - 1) * np.log(y / r)
                + np.log(g + delta * (theta - 1) * ar / r))


class _BB8:
    """C(u,v) = (1/delta) (1 - [1 - A B / eta]^(1/theta)) with
    A = 1-(1-delta u)^theta, B = 1-(1-delta v)^theta, eta = 1-(1-delta)^theta.
    """

    n_params = 2
    bounds = ((1.0, 8.0), (1e-4, 1.0))

    @staticmethod
    def check(theta, delta):
        if not theta >= 1:
            raise DomainError(f"BB8 theta must be >= 1, got {theta}")
        if not 0 < delta <= 1:
            raise DomainError(f"BB8 delta must lie in (0, 1], got {delta}")

    @staticmethod
    def _parts(u, v, theta, delta):
        lu, lv = np.log1p(-delta * u), np.log1p(-delta * v)
        a, b = -np.expm1(theta * lu), -np.expm1(theta * lv)
        eta = 1.0 if delta == 1 else -math.expm1(theta * math.log1p(-delta))
        w = 1 - a * b / eta
        return lu, lv, a, b, eta, w

    @classmethod
    def cdf(cls, u, v, theta, delta):
        *_, w = cls._parts(u, v, theta, delta)
        return -np.expm1(np.log(w) / theta) / delta

    @classmethod
    def hfunc(cls, u, v, theta, delta):
        lu, _, _, b, eta, w = cls._parts(u, v, theta, delta)
        return np.exp((1 / theta - 1) * np.log(w) + (theta - 1) * lu) * b / eta

    @classmethod
    def logpdf(cls, u, v, theta, delta):
        lu, lv, _, _, eta, w = cls._parts(u, v, theta, delta)
        return (math.log(delta) - math.log(eta) + (theta - 1) * (lu + lv)
                + (1 / theta - 2) * np.log(w) + np.log(theta - 1 + w))


FAMILIES = {
    Family.INDEPENDENCE: _Independence,
    Family.GAUSSIAN: _Gaussian,
    Family.CLAYTON: _Clayton,
    Family.GUMBEL: _Gumbel,
    Family.FRANK: _Frank,
    Family.JOE: _Joe,
    Family.TAWN2: _Tawn2,
    Family.BB8: _BB8,
}


def impl(family: Family):
    return FAMILIES[Family.parse(family)]


def n_params(family) -> int:
    return impl(family).n_params
