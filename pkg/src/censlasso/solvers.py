"""Weighted unpenalized and adaptive-LASSO estimation for all loss families.

Responses are always log follow-up times; each observation's loss term is
multiplied by its IPCW weight.  Two solver routes:

* median / quantile / composite quantile: linear programming.  The primal
  splits residuals and penalized coefficients into nonnegative parts; what is
  actually handed to HiGHS is the LP dual (n variables, ~2p rows), which is
  dramatically faster at large n, and the coefficients are read back off the
  constraint marginals.  Strong duality is checked on every solve.

* expectile / least squares: cyclic coordinate descent with exact
  minimization of the piecewise-quadratic coordinate objective plus
  soft-thresholding.  Exact zeros come out of the thresholding itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .data import SurvivalDataset
from .errors import DegenerateWeights, DimensionMismatch, SolverError
from .kaplan_meier import IpcwWeights
from .losses import LossKind, expectile_grad, pointwise_loss, check_loss

LP_ZERO_THRESHOLD = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Solver settings shared by the unpenalized and penalized fits."""

    loss: LossKind
    lam: float = 0.0
    gamma: float = 1.0
    max_iter: int = 10_000
    tol: float = 1e-8
    weight_floor: float | None = None
    beta_floor: float = 1e-10
    fit_intercept: bool = False

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be > 0")
        if self.tol <= 0.0:
            raise ValueError("tol must be > 0")
        if self.beta_floor <= 0.0:
            raise ValueError("beta_floor must be > 0")

    def replace(self, **kwargs) -> "FitConfig":
        from dataclasses import replace

        return replace(self, **kwargs)


@dataclass(frozen=True, eq=False)
class EstimatorResult:
    """Fitted coefficients with their support and solve diagnostics."""

    beta: np.ndarray
    intercepts: np.ndarray
    objective: float
    iterations: int
    converged: bool
    duality_gap: float | None = None

    def __post_init__(self):
        self.beta.setflags(write=False)
        self.intercepts.setflags(write=False)
        if not np.isfinite(self.objective):
            raise SolverError("non-finite objective in fit result")

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.beta))

    def to_dict(self) -> dict:
        return {
            "beta": [float(b) for b in self.beta],
            "intercepts": [float(b) for b in self.intercepts],
            "support": sorted(self.support),
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


def adaptive_weights(beta_tilde, gamma: float = 1.0, beta_floor: float = 1e-10) -> np.ndarray:
    """Per-coordinate penalty weights 1 / max(|beta_tilde_j|, floor)^gamma."""
    bt = np.abs(np.asarray(beta_tilde, dtype=float))
    return np.maximum(bt, beta_floor) ** (-gamma)


def _active_rows(dataset: SurvivalDataset, weights: IpcwWeights):
    w = np.asarray(weights.w, dtype=float)
    if len(w) != dataset.n:
        raise DimensionMismatch("weights and dataset disagree on n")
    keep = w > 0.0
    if not np.any(keep):
        raise DegenerateWeights("no observation carries positive weight")
    z = np.log(dataset.y[keep])
    return dataset.x[keep], z, w[keep]


def _lp_levels(loss: LossKind):
    """(taus, loss scale, number of intercepts fitted by the LP itself)."""
    if loss.family == LossKind.MEDIAN:
        return np.array([0.5]), 2.0, 0
    if loss.family == LossKind.QUANTILE:
        return np.array([loss.tau]), 1.0, 0
    if loss.family == LossKind.COMPOSITE_QUANTILE:
        return loss.taus, 1.0, loss.n_levels
    raise ValueError(f"{loss.family} is not an LP-family loss")


def _solve_lp_family(x, z, w, loss: LossKind, lam_w, fit_intercept: bool):
    """Fit an LP-family loss through the dual linear program.

    Dual variables a_{ij} (one per observation and quantile level) maximize
    sum z_i a_{ij} subject to box constraints from the check-loss slopes, one
    zero-sum row per intercept, and |X' sum_j a_{.j}| <= lam_w coefficientwise
    (equalities when the penalty vanishes).  The coefficient vector is the
    (negated) marginal vector of those rows.
    """
    taus, scale, n_lp_intercepts = _lp_levels(loss)
    if fit_intercept and n_lp_intercepts == 0:
        n_lp_intercepts = 1
    n, p = x.shape
    n_levels = len(taus)
    lam_w = np.asarray(lam_w, dtype=float)
    penalized = bool(np.any(lam_w > 0.0))

    lo = np.concatenate([-scale * w * (1.0 - t) for t in taus])
    hi = np.concatenate([scale * w * t for t in taus])
    bounds = np.column_stack([lo, hi])
    c = -np.tile(z, n_levels)

    xt_sum = sp.hstack([sp.csr_matrix(x.T)] * n_levels, format="csr")
    eq_rows = []
    if n_lp_intercepts:
        ones = sp.kron(sp.identity(n_levels, format="csr"), np.ones((1, n)), format="csr")
        eq_rows.append(ones)

    if penalized:
        a_ub = sp.vstack([xt_sum, -xt_sum], format="csr")
        b_ub = np.concatenate([lam_w, lam_w])
        a_eq = sp.vstack(eq_rows, format="csr") if eq_rows else None
        b_eq = np.zeros(n_lp_intercepts) if eq_rows else None
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
    else:
        a_eq = sp.vstack(eq_rows + [xt_sum], format="csr")
        b_eq = np.zeros(n_lp_intercepts + p)
        res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")

    if res.x is None:
        raise SolverError(f"LP solve failed: {res.message}")
    if penalized:
        marg = res.ineqlin.marginals
        beta = -(marg[:p] - marg[p:2 * p])
        intercepts = -res.eqlin.marginals[:n_lp_intercepts] if n_lp_intercepts else np.zeros(0)
    else:
        marg = res.eqlin.marginals
        intercepts = -marg[:n_lp_intercepts]
        beta = -marg[n_lp_intercepts:n_lp_intercepts + p]
    beta = np.where(np.abs(beta) <= LP_ZERO_THRESHOLD, 0.0, beta)
    dual_objective = -res.fun
    return beta, np.asarray(intercepts, dtype=float), int(res.nit), res.status == 0, dual_objective


def _lp_loss_value(x, z, w, loss: LossKind, beta, intercepts):
    taus, scale, _ = _lp_levels(loss)
    fitted = x @ beta
    total = 0.0
    if loss.family == LossKind.COMPOSITE_QUANTILE:
        for t, b in zip(taus, intercepts):
            total += float(w @ check_loss(t, z - b - fitted))
    else:
        b = intercepts[0] if len(intercepts) else 0.0
        total = float(w @ (scale * check_loss(taus[0], z - b - fitted)))
    return total


# --- expectile / least-squares coordinate descent -------------------------

def _exact_coordinate_min(t, slope0, dslope, target):
    """Root of the increasing piecewise-linear loss derivative at `target`.

    t are the residual sign-flip breakpoints, slope0/dslope the per-term slope
    left of the flip and its change at the flip.
    """
    order = np.argsort(t)
    ts = t[order]
    ds = dslope[order]
    s1 = np.concatenate(([slope0.sum()], slope0.sum() + np.cumsum(ds)))
    s2_init = float(slope0 @ t)
    s2 = np.concatenate(([s2_init], s2_init + np.cumsum(ds * ts)))
    # psi value at each breakpoint (continuous across the flip)
    vals = s1[:-1] * ts - s2[:-1]
    k = int(np.searchsorted(vals, target))
    slope = s1[k]
    inter = s2[k]
    if slope <= 0.0:
        # flat piece: any point works; land on the nearest breakpoint
        return ts[min(k, len(ts) - 1)] if len(ts) else 0.0
    return (target + inter) / slope


def _cd_coordinate_update(xj, r0, w, tau, lw):
    """Exact minimizer of sum_i w_i rho_tau(r0_i - xj_i*b) + lw*|b| over b.

    A frozen-sign quadratic solve handles the common case; if the candidate
    crosses a residual sign flip, the exact piecewise-linear subgradient scan
    takes over.
    """
    a = np.where(r0 >= 0.0, tau, 1.0 - tau)
    wax = 2.0 * w * a * xj
    s = float(wax @ xj)
    g = float(wax @ r0)
    # derivative of the loss part at b = 0 is exactly -g
    if abs(g) <= lw:
        return 0.0
    shrink = lw if g > 0 else -lw
    cand = (g - shrink) / s if s > 0.0 else 0.0
    if not np.any(((r0 - xj * cand) >= 0.0) != (r0 >= 0.0)):
        return cand
    nz = xj != 0.0
    xnz = xj[nz]
    c2 = 2.0 * w[nz] * xnz * xnz
    slope0 = c2 * np.where(xnz > 0.0, tau, 1.0 - tau)
    dslope = c2 * np.where(xnz > 0.0, 1.0 - 2.0 * tau, 2.0 * tau - 1.0)
    target = -lw if -g < -lw else lw
    return _exact_coordinate_min(r0[nz] / xnz, slope0, dslope, target)


def _expectile_cd(x, z, w, tau, lam_w, fit_intercept, tol, max_iter,
                  beta_start=None, intercept_start=0.0):
    """Cyclic coordinate descent for the weighted expectile lasso.

    The objective is checked to be non-increasing across sweeps; convergence
    is declared when the largest coordinate move falls below tol.
    """
    n, p = x.shape
    beta = np.zeros(p) if beta_start is None else np.array(beta_start, dtype=float)
    b0 = float(intercept_start)
    ones = np.ones(n)
    r = z - x @ beta - (b0 if fit_intercept else 0.0)

    def objective():
        asym = np.where(r >= 0.0, tau, 1.0 - tau)
        return float(w @ (asym * r * r) + lam_w @ np.abs(beta))

    prev_obj = objective()
    iterations = 0
    converged = False
    for sweep in range(int(max_iter)):
        iterations = sweep + 1
        max_delta = 0.0

        if fit_intercept:
            b_new = _cd_coordinate_update(ones, r + b0, w, tau, 0.0)
            max_delta = abs(b_new - b0)
            r += b0 - b_new
            b0 = b_new

        for j in range(p):
            xj = x[:, j]
            old = beta[j]
            new = _cd_coordinate_update(xj, r + xj * old, w, tau, lam_w[j])
            if new != old:
                r += xj * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))

        obj = objective()
        if obj > prev_obj + 1e-9 * (1.0 + abs(prev_obj)):
            raise SolverError(
                f"coordinate descent objective increased: {prev_obj} -> {obj}"
            )
        prev_obj = obj
        if max_delta < tol:
            converged = True
            break

    return beta, b0, iterations, converged


def _ls_start(x, z, w):
    sw = np.sqrt(w)
    sol, *_ = np.linalg.lstsq(x * sw[:, None], z * sw, rcond=None)
    return sol


def _irls_expectile(x, z, w, tau, max_iter=100, tol=1e-12):
    """Unpenalized expectile fit by iteratively reweighted least squares.

    The loss is piecewise quadratic, so refitting the normal equations with
    the residual-sign weights is exact Newton: once the sign pattern repeats,
    the iterate is the exact minimizer.  Cyclic coordinate descent is far too
    slow here when covariates share a common mean component.
    """
    beta = _ls_start(x, z, w)
    for it in range(1, max_iter + 1):
        r = z - x @ beta
        wa = w * np.where(r >= 0.0, tau, 1.0 - tau)
        xwa = x * wa[:, None]
        try:
            beta_new = np.linalg.solve(x.T @ xwa, xwa.T @ z)
        except np.linalg.LinAlgError:
            beta_new, *_ = np.linalg.lstsq(x.T @ xwa, xwa.T @ z, rcond=None)
        delta = float(np.max(np.abs(beta_new - beta)))
        beta = beta_new
        if delta < tol:
            return beta, it
    return beta, max_iter


# --- public fitting API ----------------------------------------------------

def fit_unpenalized(
    dataset: SurvivalDataset,
    weights: IpcwWeights,
    loss: LossKind | None = None,
    config: FitConfig | None = None,
) -> EstimatorResult:
    """Minimize the IPCW-weighted empirical loss over the coefficient vector.

    Composite quantile jointly fits its level intercepts and the shared
    slope; other families fit an intercept only when config.fit_intercept.
    """
    if config is None:
        config = FitConfig(loss=loss if loss is not None else LossKind(LossKind.MEDIAN))
    if loss is None:
        loss = config.loss
    x, z, w = _active_rows(dataset, weights)
    p = x.shape[1]
    return _fit(x, z, w, loss, np.zeros(p), config)


def fit_adaptive_lasso(
    dataset: SurvivalDataset,
    weights: IpcwWeights,
    config: FitConfig,
    beta_tilde,
) -> EstimatorResult:
    """Adaptive-LASSO fit: empirical loss plus lam * sum_j |beta_j| / |beta_tilde_j|^gamma.

    beta_tilde is the pilot (unpenalized) estimate on the same data; pilot
    coordinates at zero are floored so the penalty stays defined (and in
    effect pins those coordinates to zero).  Intercepts are never penalized.
    """
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    x, z, w = _active_rows(dataset, weights)
    if len(beta_tilde) != x.shape[1]:
        raise DimensionMismatch("beta_tilde length must equal p")
    omega = adaptive_weights(beta_tilde, config.gamma, config.beta_floor)
    lam_w = config.lam * omega
    return _fit(x, z, w, config.loss, lam_w, config, beta_start=beta_tilde)


def _fit(x, z, w, loss, lam_w, config, beta_start=None) -> EstimatorResult:
    if loss.is_lp_family:
        beta, intercepts, nit, ok, dual_obj = _solve_lp_family(
            x, z, w, loss, lam_w, config.fit_intercept
        )
        primal = _lp_loss_value(x, z, w, loss, beta, intercepts)
        objective = primal + float(lam_w @ np.abs(beta))
        gap = abs(objective - dual_obj)
        if ok and gap > 1e-6 * max(1.0, abs(objective)):
            raise SolverError(f"primal-dual objective mismatch: gap={gap}")
        return EstimatorResult(
            beta=beta,
            intercepts=intercepts,
            objective=objective,
            iterations=nit,
            converged=ok,
            duality_gap=gap,
        )

    tau = loss.tau
    irls_iters = 0
    b_start = 0.0
    if not np.any(lam_w > 0.0):
        # unpenalized: IRLS gets (essentially) to the optimum, coordinate
        # descent polishes and certifies monotone descent from there
        cols = np.column_stack([np.ones(len(z)), x]) if config.fit_intercept else x
        start, irls_iters = _irls_expectile(cols, z, w, tau)
        if config.fit_intercept:
            b_start, beta_start = float(start[0]), start[1:]
        else:
            beta_start = start
    elif beta_start is None:
        beta_start = _ls_start(x, z, w)
    beta, b0, iters, converged = _expectile_cd(
        x, z, w, tau, lam_w, config.fit_intercept, config.tol, config.max_iter,
        beta_start=beta_start, intercept_start=b_start,
    )
    iters += irls_iters
    intercepts = np.array([b0]) if config.fit_intercept else np.zeros(0)
    fitted = x @ beta + (b0 if config.fit_intercept else 0.0)
    objective = float(w @ pointwise_loss(loss, z - fitted) + lam_w @ np.abs(beta))
    return EstimatorResult(
        beta=beta,
        intercepts=intercepts,
        objective=objective,
        iterations=iters,
        converged=converged,
    )


def objective_value(
    dataset: SurvivalDataset,
    weights: IpcwWeights,
    loss: LossKind,
    lam: float,
    adaptive_weights_vec,
    beta,
    intercepts=(),
) -> float:
    """Exact penalized objective at the given coefficients (naive summation)."""
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(adaptive_weights_vec, dtype=float)
    if len(beta) != dataset.p or len(omega) != dataset.p:
        raise DimensionMismatch("beta and adaptive weights must have length p")
    w = np.asarray(weights.w, dtype=float)
    if len(w) != dataset.n:
        raise DimensionMismatch("weights and dataset disagree on n")
    intercepts = np.asarray(intercepts, dtype=float)
    z = np.log(dataset.y)
    fitted = dataset.x @ beta
    if loss.family == LossKind.COMPOSITE_QUANTILE:
        if len(intercepts) != loss.n_levels:
            raise DimensionMismatch("composite quantile needs one intercept per level")
        total = 0.0
        for t, b in zip(loss.taus, intercepts):
            total += float(w @ check_loss(t, z - b - fitted))
    else:
        b = float(intercepts[0]) if len(intercepts) else 0.0
        total = float(w @ pointwise_loss(loss, z - b - fitted))
    return total + float(lam * (omega @ np.abs(beta)))


def kkt_residual(
    dataset: SurvivalDataset,
    weights: IpcwWeights,
    loss: LossKind,
    lam: float,
    adaptive_weights_vec,
    result: EstimatorResult,
    zero_tol: float = 1e-7,
) -> float:
    """Max over coordinates of the distance of 0 from the subdifferential.

    For expectile losses the loss gradient is single-valued; for the check
    losses residuals within zero_tol of 0 contribute their full subgradient
    interval.  Intercept coordinates are included without penalty.
    """
    x, z, w = _active_rows(dataset, weights)
    beta = result.beta
    omega = np.asarray(adaptive_weights_vec, dtype=float)
    fitted = x @ beta

    def interval_for(tau, resid, col):
        point = np.where(np.abs(resid) > zero_tol, tau - (resid < 0.0), 0.0)
        base = float(-(w * col) @ point)
        at_zero = np.abs(resid) <= zero_tol
        lo_c = -(w * col)[at_zero]
        contrib_lo = np.minimum(lo_c * tau, lo_c * (tau - 1.0)).sum()
        contrib_hi = np.maximum(lo_c * tau, lo_c * (tau - 1.0)).sum()
        return base + contrib_lo, base + contrib_hi

    worst = 0.0
    if loss.family == LossKind.EXPECTILE:
        resid = z - fitted - (result.intercepts[0] if len(result.intercepts) else 0.0)
        g = expectile_grad(loss.tau, resid)
        for j in range(x.shape[1]):
            gj = float((w * x[:, j]) @ g)
            lw = lam * omega[j]
            if beta[j] == 0.0:
                viol = max(0.0, abs(gj) - lw)
            else:
                viol = abs(gj + lw * np.sign(beta[j]))
            worst = max(worst, viol)
        if len(result.intercepts):
            worst = max(worst, abs(float(w @ g)))
        return worst

    taus, scale, _ = _lp_levels(loss)
    n_int = len(result.intercepts)
    residuals = []
    for lvl, tau in enumerate(taus):
        b = result.intercepts[lvl] if n_int else 0.0
        residuals.append(z - b - fitted)
    for j in range(x.shape[1]):
        lo = hi = 0.0
        for tau, resid in zip(taus, residuals):
            l, h = interval_for(tau, resid, x[:, j])
            lo += scale * l
            hi += scale * h
        lw = lam * omega[j]
        if beta[j] == 0.0:
            lo -= lw
            hi += lw
        else:
            lo += lw * np.sign(beta[j])
            hi += lw * np.sign(beta[j])
        if lo > 0.0:
            worst = max(worst, lo)
        elif hi < 0.0:
            worst = max(worst, -hi)
    for lvl, (tau, resid) in enumerate(zip(taus, residuals)):
        if lvl < n_int:
            l, h = interval_for(tau, resid, np.ones(len(resid)))
            if scale * l > 0.0:
                worst = max(worst, scale * l)
            elif scale * h < 0.0:
                worst = max(worst, -scale * h)
    return worst
