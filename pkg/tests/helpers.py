"""Shared oracles and generators for the test-suite."""
import numpy as np

from breachrisk.copula import CopulaSpec, Family, cdf

# Parameter ranges for randomized checks: the full valid domain minus the
# extreme corners where double precision cannot resolve the density.
RANGES = {
    Family.INDEPENDENCE: None,
    Family.GAUSSIAN: ((-0.8, 0.8),),
    Family.CLAYTON: ((0.05, 6.0),),
    Family.GUMBEL: ((1.0, 5.0),),
    Family.FRANK: ((-12.0, 12.0),),
    Family.JOE: ((1.0, 5.0),),
    Family.TAWN2: ((1.0, 5.0), (0.05, 1.0)),
    Family.BB8: ((1.0, 5.0), (0.05, 1.0)),
}


def random_specs(family, n, seed=0):
    rng = np.random.default_rng([seed, Family(family).order])
    box = RANGES[Family(family)]
    if box is None:
        return [CopulaSpec(family)] * n
    out = []
    for _ in range(n):
        vals = [rng.uniform(lo, hi) for lo, hi in box]
        if len(vals) == 1:
            out.append(CopulaSpec(family, vals[0]))
        else:
            out.append(CopulaSpec(family, vals[0], vals[1]))
    return out


def mixed_fd(spec, u, v, h=1e-3):
    """Central mixed difference of C with one Richardson step (O(h^4))."""
    def d(hh):
        return (cdf(spec, u + hh, v + hh) - cdf(spec, u + hh, v - hh)
                - cdf(spec, u - hh, v + hh) + cdf(spec, u - hh, v - hh)) / (4 * hh * hh)
    return (4 * d(h / 2) - d(h)) / 3


def du_fd(spec, u, v, h=1e-5):
    return (cdf(spec, u + h, v) - cdf(spec, u - h, v)) / (2 * h)


def brute_kendall(pairs):
    """O(n^2) Kendall tau-a for tie-free data."""
    x = np.asarray(pairs, float)
    n = len(x)
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            s += np.sign(x[i, 0] - x[j, 0]) * np.sign(x[i, 1] - x[j, 1])
    return s / (n * (n - 1) / 2)


def type7(sample, p):
    """Hand-coded type-7 quantile: h = (n-1)p + 1 on the sorted sample."""
    x = sorted(sample)
    n = len(x)
    h = (n - 1) * p + 1
    lo = int(np.floor(h))
    if lo >= n:
        return x[-1]
    return x[lo - 1] + (h - lo) * (x[lo] - x[lo - 1])
