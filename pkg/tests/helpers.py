"""Independent oracles shared by the test modules.

Everything here recomputes quantities by the most literal route available
(per-observation loops, exhaustive grids, quadrature) and never calls into
the solver code paths it is used to check.
"""

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from censlasso.data import SurvivalDataset
from censlasso.kaplan_meier import IpcwWeights


def naive_censoring_km(y, delta, t):
    """Product-limit value at t recomputed observation by observation.

    Ranks are assigned by time with events before censorings at ties; each
    censored observation of rank r with time <= t contributes
    (n - r) / (n - r + 1).
    """
    n = len(y)
    order = sorted(range(n), key=lambda i: (y[i], -delta[i]))
    prod = 1.0
    for rank, i in enumerate(order, start=1):
        if y[i] <= t and delta[i] == 0:
            prod *= (n - rank) / (n - rank + 1)
    return prod


def textbook_censoring_km(y, delta, t):
    """Classic d_j / n_j product over distinct censoring times (no-ties data)."""
    n = len(y)
    value = 1.0
    for tj in sorted({y[i] for i in range(n) if delta[i] == 0}):
        if tj > t:
            continue
        at_risk = sum(1 for i in range(n) if y[i] >= tj)
        d = sum(1 for i in range(n) if y[i] == tj and delta[i] == 0)
        value *= (at_risk - d) / at_risk
    return value


def naive_objective(dataset, weights, loss, lam, omega, beta, intercepts=()):
    """Penalized objective by plain Python loops."""
    import math

    total = 0.0
    intercepts = list(intercepts)
    for i in range(dataset.n):
        z = math.log(dataset.y[i])
        xb = sum(dataset.x[i, j] * beta[j] for j in range(dataset.p))
        w = weights.w[i]
        if loss.family == "composite_quantile":
            for tau, b in zip(loss.taus, intercepts):
                u = z - b - xb
                total += w * (u * (tau - (1 if u <= 0 else 0)))
        else:
            b = intercepts[0] if intercepts else 0.0
            u = z - b - xb
            if loss.family == "median":
                total += w * abs(u)
            elif loss.family == "quantile":
                total += w * (u * (loss.tau - (1 if u <= 0 else 0)))
            else:
                a = loss.tau if u >= 0 else 1.0 - loss.tau
                total += w * a * u * u
    penalty = lam * sum(omega[j] * abs(beta[j]) for j in range(len(beta)))
    return total + penalty


def check_objective_on_grid(x, z, w, tau, lam_w, lo=-4.0, hi=4.0,
                            coarse=0.1, fine=0.01, scale=1.0):
    """Exhaustive minimum of the penalized check-loss objective on a grid.

    Coarse scan over [lo, hi]^p, then a fine scan around the coarse argmin.
    Returns the smallest objective value seen.
    """
    p = x.shape[1]

    def batch_objective(grid_points):
        resid = z[None, :] - grid_points @ x.T
        loss = scale * (resid * (tau - (resid <= 0.0)))
        return loss @ w + np.abs(grid_points) @ lam_w

    def scan(axes):
        best_val = np.inf
        best_pt = None
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        for start in range(0, len(pts), 20000):
            chunk = pts[start:start + 20000]
            vals = batch_objective(chunk)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val = float(vals[k])
                best_pt = chunk[k]
        return best_val, best_pt

    axes = [np.arange(lo, hi + coarse / 2, coarse)] * p
    val_c, pt_c = scan(axes)
    axes = [np.arange(c - coarse, c + coarse + fine / 2, fine) for c in pt_c]
    val_f, _ = scan(axes)
    return min(val_c, val_f)


def weighted_median_interval(values, weights):
    """All minimizers of sum w_i |v_i - b|, as a closed interval."""
    order = np.argsort(values)
    v = np.asarray(values, float)[order]
    w = np.asarray(weights, float)[order]
    half = w.sum() / 2.0
    cum = np.cumsum(w)
    k = int(np.searchsorted(cum, half))  # first cumulative weight >= half
    if np.isclose(cum[k], half) and k + 1 < len(v):
        return v[k], v[k + 1]
    return v[k], v[k]


def gumbel_density(x):
    return np.exp(-x - np.exp(-x))


def gumbel_expectile_index():
    """tau* with E[g_tau*(eps)] = 0 for the standard max-Gumbel, by quadrature."""
    neg, _ = quad(lambda x: x * gumbel_density(x), -40, 0)
    pos, _ = quad(lambda x: x * gumbel_density(x), 0, 60)
    return neg / (neg - pos)


def gumbel_censoring_rate(c1):
    """P(C < T) for T = exp(eps), C ~ U[0, c1], by quadrature."""
    lo = np.log(c1)
    tail, _ = quad(gumbel_density, lo, 60)
    body, _ = quad(lambda x: np.exp(x) * gumbel_density(x), -40, lo)
    return tail + body / c1


def gumbel_censoring_bound(target):
    """The c1 solving gumbel_censoring_rate(c1) = target."""
    return brentq(lambda c: gumbel_censoring_rate(c) - target, 1e-3, 1e4, xtol=1e-10)


def make_weights(w):
    w = np.asarray(w, dtype=float)
    return IpcwWeights(w=w, floor_used=1.0 / len(w))


def small_dataset(y, delta, x):
    return SurvivalDataset(np.asarray(y, float), np.asarray(delta, int),
                           np.asarray(x, float))
