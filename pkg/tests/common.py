"""Reference computations shared by tests."""
# This file is released in the public domain.
#
import numpy as np
import scipy.optimize as _opt


def bisection_ratio(rows):
    """Return EL ratio at zero of scalar `rows`.

    Solves `sum_i g_i / (1 + a g_i) = 0` over the
    interval where every `1 + a g_i` is positive.
    """
    g = np.asarray(rows, dtype=np.float64).ravel()
    lo = -1 / g.max()
    hi = -1 / g.min()
    width = hi - lo
    lo += 1e-15 * width
    hi -= 1e-15 * width

    def score(a):
        return np.sum(g / (1 + a * g))
    a = _opt.brentq(score, lo, hi, xtol=1e-15, maxiter=500)
    return float(2 * np.sum(np.log1p(a * g)))


def augmented_ratio(rows, level=None):
    """Return ratio of scalar `rows` with the adjusting pseudo-row.

    The pseudo-row is `-level * mean(rows)`,
    by default `level = max(1, log(n) / 2)`.
    """
    g = np.asarray(rows, dtype=np.float64).ravel()
    if level is None:
        level = max(1.0, np.log(g.size) / 2)
    mean = g.mean()
    if mean == 0:
        return 0.0
    return bisection_ratio(np.append(g, -level * mean))
