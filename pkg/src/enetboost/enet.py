"""Elastic-net penalized linear and logistic regression by coordinate descent.

The solvers assume standardized predictors; fit_glmnet standardizes a
Dataset internally and reports coefficients back on the original scale.
Lambda grids, cross-validated lambda selection, and non-zero-coefficient
feature selection live here as well.

Exact-zero guarantee: lambda_path and the solvers compute the first-sweep
correlations with the same float operations (per-column dot on Fortran
columns, identical null-model residual), so a fit at the top of the grid
returns coefficients that are exactly zero, not merely small.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FoldAssignment, standardize
from .errors import ConfigError, DataError, EmptySelectionError, SchemaError
from .metrics import auc

CLIP = 1e-5  # probability clamp inside IRLS weights
COEF_CAP = 100.0  # separation guard for binomial fits


@dataclass(frozen=True)
class PenaltySpec:
    """Mixing parameter alpha in [0,1] and penalty strength lam >= 0.

    alpha = 0 is ridge, alpha = 1 is lasso, anything between is elastic net.
    """

    alpha: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0.0:
            raise ConfigError(f"lambda must be non-negative, got {self.lam}")


@dataclass(frozen=True)
class RegularizedFit:
    """A fitted penalized model.

    beta holds coefficients on the original feature scale; beta_std holds
    the standardized-scale coefficients used for magnitude ranking. For the
    low-level solvers (which require pre-standardized input) the two
    coincide. The intercept is never penalized.
    """

    family: str
    penalty: PenaltySpec
    feature_names: tuple[str, ...]
    intercept: float
    beta: np.ndarray
    beta_std: np.ndarray
    n_iterations: int
    converged: bool

    def __post_init__(self):
        for field in ("beta", "beta_std"):
            arr = np.array(getattr(self, field), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, field, arr)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def coefficients(self) -> dict:
        return {name: float(b) for name, b in zip(self.feature_names, self.beta)}

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "alpha": self.penalty.alpha,
            "lambda": self.penalty.lam,
            "intercept": self.intercept,
            "coefficients": self.coefficients(),
            "n_iterations": self.n_iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class CvResult:
    """Cross-validation curve over a lambda grid and the selected lambda."""

    lambda_grid: np.ndarray
    mean_metric: np.ndarray
    se_metric: np.ndarray
    per_fold_metrics: np.ndarray
    best_lambda: float
    measure: str
    alpha: float

    def to_json(self) -> dict:
        return {
            "measure": self.measure,
            "alpha": self.alpha,
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "mean_metric": [float(v) for v in self.mean_metric],
            "se_metric": [float(v) for v in self.se_metric],
            "best_lambda": float(self.best_lambda),
        }


@dataclass(frozen=True)
class FeatureSelection:
    """Ordered selection of features with their ranking magnitudes."""

    method: str
    selected: tuple

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.selected)

    def to_json(self) -> dict:
        return {"method": self.method, "selected": [[n, float(m)] for n, m in self.selected]}


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def _as_columns(X) -> np.ndarray:
    """Fortran-ordered float64 copy so column slices are contiguous.

    Both lambda_path and the solvers go through this, keeping their
    per-column dot products bit-identical.
    """
    return np.asfortranarray(X, dtype=np.float64)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _working_parts(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """IRLS weights with clipped probabilities, and the residual-side p.

    Weights use p clipped to [CLIP, 1-CLIP]; saturated probabilities are
    snapped to exactly 0 or 1 on the residual side so that a saturated
    intercept-only fit is an exact fixed point instead of drifting.
    """
    pc = np.clip(p, CLIP, 1.0 - CLIP)
    w = pc * (1.0 - pc)
    pr = p.copy()
    pr[p <= CLIP] = 0.0
    pr[p >= 1.0 - CLIP] = 1.0
    return pr, w


def _deviance(y: np.ndarray, p: np.ndarray) -> float:
    pc = np.clip(p, CLIP, 1.0 - CLIP)
    return float(-2.0 * np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def _null_residual(y: np.ndarray, family: str) -> tuple[float, np.ndarray]:
    """Intercept and residual of the null model, shared by path and solvers."""
    if family == "gaussian":
        b0 = float(np.mean(y))
        return b0, y - b0
    ybar = min(max(float(np.mean(y)), CLIP), 1.0 - CLIP)
    b0 = _logit(ybar)
    pr, _ = _working_parts(_sigmoid(np.full(y.shape, b0)))
    return b0, y - pr


def lambda_path(X, y, alpha: float, n_lambda: int = 100, ratio: float | None = None,
                family: str = "gaussian") -> np.ndarray:
    """Geometric lambda grid from lambda_max down to lambda_max * ratio.

    lambda_max = max_j |<x_j, r0>| / (n * alpha) with r0 the null-model
    residual, nudged up by ulps until lambda_max * alpha covers the top
    correlation exactly, so a fit at the head of the grid zeroes every
    penalized coefficient. For alpha = 0 the formula substitutes 0.001
    (the grid is still meant for true ridge fits). The default ratio is
    1e-4 when n > p, else 1e-2.
    """
    X = _as_columns(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n_lambda < 1:
        raise ConfigError(f"n_lambda must be positive, got {n_lambda}")
    if ratio is None:
        ratio = 1e-4 if n > p else 1e-2
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"ratio must be in (0, 1), got {ratio}")
    _, r0 = _null_residual(y, family)
    c_max = 0.0
    for j in range(p):
        c_max = max(c_max, abs(float(np.dot(X[:, j], r0)) / n))
    if c_max == 0.0:
        raise DataError("degenerate response: all null-model correlations are zero")
    a = alpha if alpha > 0.0 else 0.001
    lam_max = c_max / a
    if alpha > 0.0:
        # guard against the division rounding lambda_max * alpha below c_max
        while lam_max * alpha < c_max:
            lam_max = np.nextafter(lam_max, np.inf)
    return np.geomspace(lam_max, lam_max * ratio, n_lambda)


def _make_fit(family, p, names, nf, b0, beta, iters, converged) -> RegularizedFit:
    if names is None:
        names = tuple(f"x{j}" for j in range(nf))
    return RegularizedFit(family, p, tuple(names), float(b0), beta, beta, iters, converged)


def fit_enet_gaussian(X, y, p: PenaltySpec, tol: float = 1e-7, max_iter: int = 100_000,
                      feature_names=None, beta_init=None, intercept_init=None) -> RegularizedFit:
    """Cyclic coordinate descent on (1/2n)||y - X b - b0||^2 + lam * P(b).

    P(b) = alpha*||b||_1 + (1-alpha)/2*||b||_2^2. Coordinates update as
    soft_threshold(<x_j, r_j>/n, lam*alpha) / (<x_j, x_j>/n + lam*(1-alpha));
    the intercept closes each sweep. Converged when the largest parameter
    change in a sweep is below tol and the stationarity conditions hold
    within tol.
    """
    X = _as_columns(X)
    y = np.asarray(y, dtype=np.float64)
    n, nf = X.shape
    lam, alpha = p.lam, p.alpha
    la = lam * alpha
    ridge = lam * (1.0 - alpha)
    beta = np.zeros(nf) if beta_init is None else np.array(beta_init, dtype=np.float64)
    b0 = float(np.mean(y)) if intercept_init is None else float(intercept_init)
    r = y - b0 - X @ beta
    d = np.array([float(np.dot(X[:, j], X[:, j])) / n for j in range(nf)])

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(nf):
            xj = X[:, j]
            den = d[j] + ridge
            if den <= 0.0:
                continue
            z = float(np.dot(xj, r)) / n + d[j] * beta[j]
            bj = soft_threshold(z, la) / den
            delta = bj - beta[j]
            if delta != 0.0:
                r -= delta * xj
                beta[j] = bj
                max_delta = max(max_delta, abs(delta))
        d0 = float(np.mean(r))
        if d0 != 0.0:
            b0 += d0
            r -= d0
        max_delta = max(max_delta, abs(d0))
        if max_delta < tol and _kkt_gaussian(X, r, beta, la, ridge, n) <= tol:
            converged = True
            break
    return _make_fit("gaussian", p, feature_names, nf, b0, beta, it, converged)


def _kkt_gaussian(X, r, beta, la, ridge, n) -> float:
    """Largest stationarity violation of the current gaussian iterate."""
    g = (r @ X) / n
    zero = beta == 0.0
    viol = abs(float(np.mean(r)))
    if zero.any():
        viol = max(viol, float(np.max(np.abs(g[zero]))) - la)
    if (~zero).any():
        nz = ~zero
        resid = g[nz] - la * np.sign(beta[nz]) - ridge * beta[nz]
        viol = max(viol, float(np.max(np.abs(resid))))
    return viol


def fit_enet_binomial(X, y, p: PenaltySpec, tol: float = 1e-8, max_iter: int = 100_000,
                      feature_names=None, beta_init=None, intercept_init=None,
                      outer_cap: int = 100) -> RegularizedFit:
    """Penalized logistic regression: IRLS around weighted coordinate descent.

    Each outer step builds the quadratic approximation at the current
    linear predictor (weights w = p(1-p) with p clipped) and solves it by
    coordinate descent to coefficient-change tolerance 1e-7. Outer
    iterations stop when the relative deviance change drops below tol and
    the logistic stationarity conditions hold; coefficients larger than
    100 in magnitude are capped and the fit flagged non-converged, which
    is how perfect separation surfaces.
    """
    X = _as_columns(X)
    y = np.asarray(y, dtype=np.float64)
    n, nf = X.shape
    lam, alpha = p.lam, p.alpha
    la = lam * alpha
    ridge = lam * (1.0 - alpha)
    inner_tol = 1e-7
    kkt_tol = 1e-7
    beta = np.zeros(nf) if beta_init is None else np.array(beta_init, dtype=np.float64)
    if intercept_init is None:
        ybar = min(max(float(np.mean(y)), CLIP), 1.0 - CLIP)
        b0 = _logit(ybar)
    else:
        b0 = float(intercept_init)
    X2 = X * X

    total_sweeps = 0
    converged = False
    dev_prev = None
    viol_prev = math.inf
    for _ in range(outer_cap):
        eta = b0 + X @ beta
        p_raw = _sigmoid(eta)
        pr, w = _working_parts(p_raw)
        dev = _deviance(y, p_raw)
        if dev_prev is not None and abs(dev_prev - dev) <= tol * (abs(dev_prev) + 1e-12):
            viol = _kkt_binomial(X, y, p_raw, pr, beta, la, ridge, n)
            if viol <= kkt_tol:
                converged = True
                break
            if viol >= 0.99 * viol_prev:
                # saturated probabilities leave a floor on the exact
                # gradient that more iterations cannot remove; stop here
                # and report the fit as not converged
                break
            viol_prev = viol
            # deviance has stalled short of stationarity: solve the
            # quadratic subproblems harder before the next check
            inner_tol = max(inner_tol * 0.1, 1e-13)
        dev_prev = dev
        u = y - pr  # weighted working residual, kept in response space
        sw = float(np.sum(w))
        d = (w @ X2) / n
        wX = np.asfortranarray(X * w[:, None])
        while total_sweeps < max_iter:
            total_sweeps += 1
            max_delta = 0.0
            for j in range(nf):
                den = d[j] + ridge
                if den <= 0.0:
                    continue
                z = float(np.dot(X[:, j], u)) / n + d[j] * beta[j]
                bj = soft_threshold(z, la) / den
                delta = bj - beta[j]
                if delta != 0.0:
                    u -= delta * wX[:, j]
                    beta[j] = bj
                    max_delta = max(max_delta, abs(delta))
            d0 = float(np.sum(u)) / sw
            if d0 != 0.0:
                b0 += d0
                u -= d0 * w
            max_delta = max(max_delta, abs(d0))
            if max_delta < inner_tol:
                break
        if float(np.max(np.abs(beta), initial=0.0)) > COEF_CAP:
            beta = np.clip(beta, -COEF_CAP, COEF_CAP)
            converged = False
            break
        if total_sweeps >= max_iter:
            break
    return _make_fit("binomial", p, feature_names, nf, b0, beta, total_sweeps, converged)


def _kkt_binomial(X, y, p_raw, pr, beta, la, ridge, n) -> float:
    """Stationarity violation; coefficients use the exact gradient, the
    intercept the saturation-snapped one (a saturated intercept has no
    finite optimum and is deliberately allowed to rest at the clamp)."""
    g = ((y - p_raw) @ X) / n
    zero = beta == 0.0
    viol = abs(float(np.mean(y - pr)))
    if zero.any():
        viol = max(viol, float(np.max(np.abs(g[zero]))) - la)
    if (~zero).any():
        nz = ~zero
        resid = g[nz] - la * np.sign(beta[nz]) - ridge * beta[nz]
        viol = max(viol, float(np.max(np.abs(resid))))
    return viol


def _fit_std(X, y, family: str, p: PenaltySpec, tol=None, max_iter=100_000,
             feature_names=None, beta_init=None, intercept_init=None) -> RegularizedFit:
    if family == "gaussian":
        return fit_enet_gaussian(X, y, p, tol=1e-7 if tol is None else tol,
                                 max_iter=max_iter, feature_names=feature_names,
                                 beta_init=beta_init, intercept_init=intercept_init)
    return fit_enet_binomial(X, y, p, tol=1e-8 if tol is None else tol,
                             max_iter=max_iter, feature_names=feature_names,
                             beta_init=beta_init, intercept_init=intercept_init)


def _path_fits(X, y, family: str, alpha: float, grid, max_iter=100_000):
    """Warm-started fits along a descending lambda grid (standardized X)."""
    out = []
    beta, b0 = None, None
    for lam in grid:
        fit = _fit_std(X, y, family, PenaltySpec(alpha, float(lam)),
                       beta_init=beta, intercept_init=b0, max_iter=max_iter)
        beta, b0 = fit.beta, fit.intercept
        out.append(fit)
    return out


def _infer_family(d: Dataset, family: str) -> str:
    if family != "auto":
        if family not in ("gaussian", "binomial"):
            raise ConfigError(f"unknown family {family!r}")
        return family
    if d.y is None:
        raise DataError("dataset has no target column")
    return "binomial" if np.isin(d.y, (0.0, 1.0)).all() else "gaussian"


def fit_glmnet(d: Dataset, p: PenaltySpec, family: str = "auto",
               tol=None, max_iter: int = 100_000) -> RegularizedFit:
    """Fit on a Dataset: standardize internally, report on the original scale."""
    family = _infer_family(d, family)
    if d.y is None:
        raise DataError("dataset has no target column")
    ds, params = standardize(d, d.feature_names)
    base = _fit_std(_as_columns(ds.X), d.y, family, p, tol=tol, max_iter=max_iter,
                    feature_names=d.feature_names)
    beta_std = base.beta
    beta = beta_std / params.stds
    b0 = base.intercept - float(np.sum(beta_std * params.means / params.stds))
    return RegularizedFit(family, p, d.feature_names, b0, beta, beta_std,
                          base.n_iterations, base.converged)


def cv_glmnet(d: Dataset, alpha: float, folds: FoldAssignment, measure: str,
              n_lambda: int = 100, ratio: float | None = None,
              max_iter: int = 100_000) -> CvResult:
    """Cross-validated lambda selection over a shared path.

    The grid comes from lambda_path on the full data; each fold refits the
    whole path (internally standardized on its own training part, warm
    starts down the grid) and scores the held-out rows. measure "auc"
    selects the maximizing lambda for a binomial model, "mse" the
    minimizing one for a gaussian model; ties go to the larger lambda. A
    validation fold containing a single class is excluded from the mean
    with a warning.
    """
    if measure not in ("auc", "mse"):
        raise ConfigError(f"measure must be 'auc' or 'mse', got {measure!r}")
    family = "binomial" if measure == "auc" else "gaussian"
    if d.y is None:
        raise DataError("dataset has no target column")
    if family == "binomial":
        d.require_binary_target()
    if folds.fold_of_row.shape[0] != d.n_rows:
        raise ConfigError("fold assignment does not match the dataset")

    ds_full, _ = standardize(d, d.feature_names)
    grid = lambda_path(ds_full.X, d.y, alpha, n_lambda, ratio, family)

    per_fold = np.full((folds.k, len(grid)), np.nan)
    for f in range(folds.k):
        tr_rows = folds.train_rows(f)
        va_rows = folds.val_rows(f)
        dtr = d.take(tr_rows)
        y_va = d.y[va_rows]
        if family == "binomial" and (y_va.min() == y_va.max()):
            warnings.warn(f"fold {f}: single-class validation fold excluded from CV mean")
            continue
        ds_tr, params = standardize(dtr, d.feature_names)
        fits = _path_fits(_as_columns(ds_tr.X), dtr.y, family, alpha, grid, max_iter)
        X_va = (d.X[va_rows] - params.means) / params.stds
        for i, fit in enumerate(fits):
            eta = fit.intercept + X_va @ fit.beta
            if family == "binomial":
                per_fold[f, i] = auc(y_va, eta)
            else:
                per_fold[f, i] = float(np.mean((y_va - eta) ** 2))

    included = ~np.isnan(per_fold).all(axis=1)
    if not included.any():
        raise DataError("every CV fold was excluded; cannot select lambda")
    rows = per_fold[included]
    mean_metric = rows.mean(axis=0)
    if rows.shape[0] > 1:
        se_metric = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    else:
        se_metric = np.zeros(len(grid))
    # grid is descending, so the first extremum index is the largest lambda
    best_idx = int(np.argmax(mean_metric)) if measure == "auc" else int(np.argmin(mean_metric))
    return CvResult(grid, mean_metric, se_metric, per_fold, float(grid[best_idx]),
                    measure, alpha)


def select_features(fit: RegularizedFit, top_m: int | None = None) -> FeatureSelection:
    """Feature subset from a penalized fit.

    Lasso and elastic net keep the non-zero-coefficient features; ridge
    (which zeroes nothing) keeps the top_m (default 10) by standardized
    coefficient magnitude. Ordered by descending magnitude, names break
    ties. An empty selection raises, pointing at a smaller lambda.
    """
    alpha = fit.penalty.alpha
    method = "ridge" if alpha == 0.0 else ("lasso" if alpha == 1.0 else "elasticnet")
    mags = np.abs(fit.beta_std)
    order = sorted(range(len(mags)), key=lambda j: (-mags[j], fit.feature_names[j]))
    if method == "ridge":
        m = 10 if top_m is None else int(top_m)
        if m < 0:
            raise ConfigError(f"top_m must be non-negative, got {top_m}")
        keep = order[: min(m, len(order))]
    else:
        keep = [j for j in order if mags[j] != 0.0]
        if top_m is not None:
            keep = keep[:top_m]
    if not keep:
        raise EmptySelectionError(
            f"{method} fit at lambda = {fit.penalty.lam:g} selected no features; "
            "refit with a smaller lambda"
        )
    selected = tuple((fit.feature_names[j], float(mags[j])) for j in keep)
    return FeatureSelection(method, selected)


def predict_glm(fit: RegularizedFit, X) -> np.ndarray:
    """Linear predictor (gaussian) or probability (binomial) for new rows."""
    if isinstance(X, Dataset):
        Xm = X.select_features(fit.feature_names).X
    else:
        Xm = np.asarray(X, dtype=np.float64)
        if Xm.ndim != 2 or Xm.shape[1] != len(fit.feature_names):
            raise SchemaError(
                f"expected {len(fit.feature_names)} feature columns, got shape {Xm.shape}"
            )
    eta = fit.intercept + Xm @ fit.beta
    if fit.family == "binomial":
        return _sigmoid(eta)
    return eta
