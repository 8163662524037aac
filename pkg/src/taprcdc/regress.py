"""Rate-reactivity regression: design matrices, OLS, LASSO and SCAD by coordinate descent, k-fold CV."""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .features import RCDSeries, TransientFeatures

log = logging.getLogger(__name__)

ZERO_TOL = 1e-8


class RegressionError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


class TermKind(enum.Enum):
    C = "C"
    U = "U"
    CU = "CU"
    CU2 = "CU2"
    U2 = "U2"
    INTERCEPT = "Intercept"
    CUSTOM = "Custom"


_UNITS = {
    TermKind.C: "m/s",
    TermKind.U: "mol/s",
    TermKind.CU: "mol/s",
    TermKind.CU2: "mol/s",
    TermKind.U2: "mol/s",
    TermKind.INTERCEPT: "mol/s",
    TermKind.CUSTOM: "",
}


@dataclass(frozen=True)
class TermDescriptor:
    """One column of the rate-reactivity model.

    ``gas`` names the gas whose concentration enters, ``surface`` the gas
    whose uptake enters (defaults to ``gas``). Custom terms carry their own
    ``values``.
    """

    kind: TermKind
    gas: str | None = None
    surface: str | None = None
    name: str | None = None
    values: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", TermKind(self.kind))
        if self.kind is TermKind.CUSTOM and (self.values is None or not self.name):
            raise ValueError("custom terms need a name and values")

    @property
    def label(self) -> str:
        if self.kind is TermKind.CUSTOM:
            return str(self.name)
        if self.kind is TermKind.INTERCEPT or self.gas is None:
            return self.kind.value
        surf = self.surface or self.gas
        if self.kind is TermKind.C:
            return f"C[{self.gas}]"
        if self.kind in (TermKind.U, TermKind.U2):
            return f"{self.kind.value}[{surf}]"
        return f"{self.kind.value}[{self.gas},{surf}]" if surf != self.gas else f"{self.kind.value}[{self.gas}]"

    @property
    def unit(self) -> str:
        return _UNITS[self.kind]

    def evaluate(self, features: Mapping[str, TransientFeatures], n: int) -> np.ndarray:
        k = self.kind
        if k is TermKind.CUSTOM:
            return np.asarray(self.values, dtype=float)
        if k is TermKind.INTERCEPT:
            return np.ones(n)
        gas = self.gas if self.gas is not None else _only_gas(features)
        surf = self.surface or gas
        c = features[gas].concentration
        u = features[surf].uptake
        if k is TermKind.C:
            return np.asarray(c, dtype=float)
        if k is TermKind.U:
            return np.asarray(u, dtype=float)
        if k is TermKind.CU:
            return c * u
        if k is TermKind.CU2:
            return c * u * u
        return u * u


FULL_TERMS = tuple(TermDescriptor(k) for k in (TermKind.C, TermKind.U, TermKind.CU, TermKind.CU2, TermKind.U2))


def _only_gas(features: Mapping[str, TransientFeatures]) -> str:
    if len(features) != 1:
        raise RegressionError(f"term without a gas label is ambiguous over gases {sorted(features)}")
    return next(iter(features))


def parse_terms(spec: str, gas: str | None = None) -> tuple[TermDescriptor, ...]:
    """``"full"`` or ``"custom:C,CU,U"`` into term descriptors."""
    if spec == "full":
        kinds = [t.kind for t in FULL_TERMS]
    elif spec.startswith("custom:"):
        names = [s.strip() for s in spec[len("custom:"):].split(",") if s.strip()]
        try:
            kinds = [TermKind(n) for n in names]
        except ValueError as err:
            raise RegressionError(f"unknown term in {spec!r}: {err}") from None
        if not kinds:
            raise RegressionError("custom term list is empty")
    else:
        raise RegressionError(f"terms must be 'full' or 'custom:<list>', got {spec!r}")
    return tuple(TermDescriptor(k, gas=gas) for k in kinds)


@dataclass
class DesignMatrix:
    columns: tuple[TermDescriptor, ...]
    X: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    y_mean: float
    centered: bool = True

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.columns]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def build_design_matrix(
    features: Mapping[str, TransientFeatures] | TransientFeatures,
    terms: Sequence[TermDescriptor],
    response: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> DesignMatrix:
    """Evaluate the terms pointwise and mean-center columns and response.

    With an explicit intercept term the matrix is left uncentered so the
    intercept can be penalized like any other coefficient. ``response``
    defaults to the rate of the only gas.
    """
    if isinstance(features, TransientFeatures):
        features = {features.gas_id: features}
    if not terms:
        raise RegressionError("no terms given")
    if response is None:
        response = features[_only_gas(features)].rate
    y = np.asarray(response, dtype=float)
    n = y.size
    grids = [f.t for f in features.values()]
    for g in grids[1:]:
        if g.shape != grids[0].shape or not np.allclose(g, grids[0], rtol=0, atol=1e-12):
            raise RegressionError("features do not share one time grid")
    cols = []
    for term in terms:
        col = term.evaluate(features, n)
        if col.shape != (n,):
            raise RegressionError(f"term {term.label} has {col.size} points, response has {n}")
        cols.append(col)
    X = np.column_stack(cols)
    if mask is not None:
        X, y = X[mask], y[mask]
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise RegressionError("design matrix or response contains NaN/Inf")
    for j, term in enumerate(terms):
        if term.kind is not TermKind.INTERCEPT and not np.any(X[:, j]):
            raise RegressionError(f"term {term.label} is identically zero")
    centered = not any(t.kind is TermKind.INTERCEPT for t in terms)
    if centered:
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        X = X - x_mean
        y = y - y_mean
    else:
        x_mean = np.zeros(X.shape[1])
        y_mean = 0.0
    return DesignMatrix(columns=tuple(terms), X=X, y=y, x_mean=x_mean, y_mean=y_mean, centered=centered)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty and tuning setup. ``lam=None`` means choose lambda by k-fold CV."""

    method: str = "scad"
    lam: float | None = None
    a: float = 3.7
    cv_folds: int = 10
    lambda_grid: tuple[float, ...] | None = None
    n_lambda: int = 50
    lambda_min_ratio: float = 1e-4
    seed: int = 0
    random_folds: bool = False
    standardize: bool = False
    zero_tol: float = ZERO_TOL
    max_iter: int = 100_000
    tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "method", self.method.lower())
        if self.method not in ("ols", "lasso", "scad"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not self.a > 2:
            raise ValueError("SCAD needs a > 2")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, dtype=float)
            if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
                raise ValueError("lambda_grid must be positive and strictly descending")
            object.__setattr__(self, "lambda_grid", tuple(float(v) for v in grid))


@dataclass
class RegressionFit:
    labels: list[str]
    beta: np.ndarray
    intercept: float
    selected: np.ndarray
    method: str
    lambda_chosen: float
    lambda_grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    cv_curve: np.ndarray = field(default_factory=lambda: np.empty(0))
    residual_rmse: float = float("nan")
    objective: float = float("nan")
    n_iter: int = 0
    converged: bool = True
    zero_tol: float = ZERO_TOL

    def coef(self, label: str) -> float:
        return float(self.beta[self.labels.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {lab: float(b) for lab, b in zip(self.labels, self.beta)}


@dataclass(frozen=True)
class SelectionMetrics:
    """``npv`` is None when the fit predicts no zero coefficients."""

    npv: float | None
    coef_rmse: float
    true_negatives: int
    predicted_negatives: int


# --- penalties -------------------------------------------------------------

def soft_threshold(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def scad_penalty(beta, lam: float, a: float = 3.7):
    """Elementwise SCAD penalty (continuous Fan-Li form)."""
    b = np.abs(np.asarray(beta, dtype=float))
    mid = -(b**2 - 2 * a * lam * b + lam**2) / (2 * (a - 1))
    out = np.where(b <= lam, lam * b, np.where(b <= a * lam, mid, 0.5 * (a + 1) * lam**2))
    return out if out.ndim else float(out)


def _scad_scalar(b: float, lam: float, a: float) -> float:
    if b <= lam:
        return lam * b
    if b <= a * lam:
        return -(b * b - 2 * a * lam * b + lam * lam) / (2 * (a - 1))
    return 0.5 * (a + 1) * lam * lam


def scad_threshold(z: float, lam: float, a: float = 3.7, scale: float = 1.0) -> float:
    """Minimizer of ``scale/2 * (b - z)**2 + scad_penalty(b)``.

    For ``scale == 1`` this is the usual rule: soft-threshold up to 2*lam,
    linear interpolation up to a*lam, identity beyond. Badly scaled
    (``scale*(a-1) <= 1``) coordinates are nonconvex and are settled by
    comparing the candidate minimizers of each branch.
    """
    if lam == 0:
        return float(z)
    az = abs(z)
    sg = 1.0 if z >= 0 else -1.0
    k = scale * (a - 1)
    if k > 1:
        if az <= lam * (1 + 1 / scale):
            return sg * max(az - lam / scale, 0.0)
        if az <= a * lam:
            return sg * (k * az - a * lam) / (k - 1)
        return float(z)
    cands = [0.0, min(max(az - lam / scale, 0.0), lam), lam, a * lam]
    if az > a * lam:
        cands.append(az)
    best, best_val = 0.0, 0.5 * scale * az * az
    for b in cands:
        val = 0.5 * scale * (b - az) ** 2 + _scad_scalar(b, lam, a)
        if val < best_val - 1e-300:
            best, best_val = b, val
    return sg * best


def _penalty_sum(beta: np.ndarray, lam: float, method: str, a: float, weights: np.ndarray) -> float:
    if method == "lasso":
        return float(lam * np.sum(weights * np.abs(beta)))
    if method == "scad":
        return float(np.sum(weights * scad_penalty(beta, lam, a)))
    return 0.0


# --- coordinate descent on the Gram matrix -----------------------------------

@dataclass
class _Problem:
    G: np.ndarray
    c: np.ndarray
    yy: float
    weights: np.ndarray  # 1 for penalized coefficients, 0 for free ones

    def objective(self, beta, lam, method, a) -> float:
        quad = 0.5 * self.yy - self.c @ beta + 0.5 * beta @ self.G @ beta
        return float(quad + _penalty_sum(beta, lam, method, a, self.weights))


def _problem(X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> _Problem:
    n = X.shape[0]
    w = np.ones(X.shape[1]) if weights is None else weights
    return _Problem(G=X.T @ X / n, c=X.T @ y / n, yy=float(y @ y) / n, weights=w)


@dataclass
class _CDResult:
    beta: np.ndarray
    objective: float
    n_iter: int
    converged: bool
    history: list[float]


def _coordinate_descent(
    prob: _Problem,
    lam: float,
    method: str,
    a: float,
    beta0: np.ndarray | None = None,
    max_iter: int = 100_000,
    tol: float = 1e-9,
    polish_every: int = 25,
) -> _CDResult:
    p = prob.c.size
    G = prob.G.tolist()
    c = prob.c.tolist()
    w = prob.weights.tolist()
    beta = [0.0] * p if beta0 is None else [float(b) for b in beta0]
    diag = [G[j][j] for j in range(p)]
    grad = [sum(G[j][k] * beta[k] for k in range(p)) for j in range(p)]  # (G beta)_j
    obj = prob.objective(np.array(beta), lam, method, a)
    history = [obj]
    best = (obj, list(beta))
    increases = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(p):
            s = diag[j]
            if s <= 0:
                continue
            bj = beta[j]
            z = (c[j] - grad[j] + s * bj) / s
            lam_j = lam * w[j]
            if method == "lasso":
                new = soft_threshold(z, lam_j / s)
            elif method == "scad":
                new = scad_threshold(z, lam_j, a, s)
            else:
                new = z
            d = new - bj
            if d != 0.0:
                beta[j] = new
                Gj = G[j]
                for k in range(p):
                    grad[k] += Gj[k] * d
                scale = max(abs(new), abs(bj), 1.0)
                max_change = max(max_change, abs(d) / scale)
        b_arr = np.array(beta)
        obj = prob.objective(b_arr, lam, method, a)
        if obj > history[-1] + 1e-9 * max(1.0, abs(history[-1])):
            increases += 1
        history.append(obj)
        if obj < best[0]:
            best = (obj, list(beta))
        if method == "scad" and increases >= 2:
            warnings.warn("SCAD coordinate descent oscillating; returning best iterate", ConvergenceWarning)
            beta = best[1]
            break
        if max_change < tol:
            converged = True
            break
        if polish_every and it % polish_every == 0:
            polished = _polish(prob, b_arr, lam, method, a)
            if polished is not None:
                p_obj = prob.objective(polished, lam, method, a)
                if p_obj <= obj + 1e-15 * max(1.0, abs(obj)):
                    beta = polished.tolist()
                    grad = (prob.G @ polished).tolist()
                    history.append(p_obj)
                    if p_obj < best[0]:
                        best = (p_obj, list(beta))
    beta_arr = np.array(beta)
    if not converged and not (method == "scad" and increases >= 2):
        warnings.warn(f"coordinate descent did not converge in {max_iter} sweeps", ConvergenceWarning)
    return _CDResult(beta_arr, prob.objective(beta_arr, lam, method, a), it, converged, history)


def _polish(prob: _Problem, beta: np.ndarray, lam: float, method: str, a: float) -> np.ndarray | None:
    """Active-set jump to the stationary point of the current support and penalty branches.

    Coordinate descent crawls along nearly collinear columns; this solves the
    branch-wise linear stationarity equations directly. A step that would
    flip a sign stops at the first zero crossing and drops that coordinate.
    The caller keeps the result only if the objective does not go up.
    """
    cur = beta.astype(float).copy()
    moved = False
    for _ in range(2 * beta.size + 2):
        act = np.flatnonzero(cur)
        if act.size == 0:
            break
        w = prob.weights[act]
        b = cur[act]
        sg = np.sign(b)
        branch = _branches(np.abs(b), lam, method, a, w)
        G = prob.G[np.ix_(act, act)].copy()
        rhs = prob.c[act].copy()
        for i, br in enumerate(branch):
            if br == 1:
                rhs[i] -= lam * w[i] * sg[i]
            elif br == 2:
                G[i, i] -= 1.0 / (a - 1)
                rhs[i] -= a * lam * sg[i] / (a - 1)
        try:
            sol = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(sol)):
            break
        flip = (branch > 0) & (np.sign(sol) != sg)
        if flip.any():
            # stop where the first penalized coefficient reaches zero
            steps = b[flip] / (b[flip] - sol[flip])
            t = float(steps.min())
            b = b + t * (sol - b)
            b[np.flatnonzero(flip)[np.argmin(steps)]] = 0.0
            cur[act] = b
            moved = True
            continue
        cur[act] = sol
        moved = True
        if np.array_equal(_branches(np.abs(sol), lam, method, a, w), branch):
            break
    return cur if moved else None


def _branches(absb: np.ndarray, lam: float, method: str, a: float, w: np.ndarray) -> np.ndarray:
    """0: unpenalized, 1: constant-slope branch, 2: SCAD's concave middle branch."""
    out = np.zeros(absb.size, dtype=int)
    if method == "ols" or lam == 0:
        return out
    for i, v in enumerate(absb):
        if w[i] == 0:
            continue
        if method == "lasso" or v <= lam:
            out[i] = 1
        elif v <= a * lam:
            out[i] = 2
    return out


# --- public solvers ----------------------------------------------------------

def _equilibrated_cond(X: np.ndarray) -> float:
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    s = np.linalg.svd(X / norms, compute_uv=False)
    return float(s[0] / s[-1]) ** 2 if s[-1] > 0 else math.inf


def _collinear_terms(X: np.ndarray, labels: Sequence[str]) -> list[str]:
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    _, _, vt = np.linalg.svd(X / norms, full_matrices=False)
    v = vt[-1]
    return [lab for lab, coef in zip(labels, v) if abs(coef) > 0.1]


def _finish(dm: DesignMatrix, beta: np.ndarray, method: str, lam: float, zero_tol: float, **kw) -> RegressionFit:
    resid = dm.y - dm.X @ beta
    intercept = dm.y_mean - float(dm.x_mean @ beta) if dm.centered else 0.0
    return RegressionFit(
        labels=dm.labels,
        beta=beta,
        intercept=intercept,
        selected=np.abs(beta) > zero_tol,
        method=method,
        lambda_chosen=lam,
        residual_rmse=float(np.sqrt(np.mean(resid**2))),
        zero_tol=zero_tol,
        **kw,
    )


def fit_ols(dm: DesignMatrix, zero_tol: float = ZERO_TOL) -> RegressionFit:
    """Least squares by orthogonal factorization."""
    n, p = dm.X.shape
    if p > n:
        raise RegressionError(f"{p} terms but only {n} points")
    cond = _equilibrated_cond(dm.X)
    if not cond < 1e12:
        raise RegressionError(f"rank-deficient design (condition {cond:.2e}); collinear terms: {_collinear_terms(dm.X, dm.labels)}")
    beta, *_ = np.linalg.lstsq(dm.X, dm.y, rcond=None)
    prob = _problem(dm.X, dm.y)
    return _finish(dm, beta, "ols", 0.0, zero_tol, objective=prob.objective(beta, 0.0, "ols", 3.7))


def lambda_max(dm: DesignMatrix) -> float:
    """Smallest lambda at which every penalized coefficient is zero."""
    c = np.abs(dm.X.T @ dm.y) / dm.n
    return float(c.max())


def default_lambda_grid(dm: DesignMatrix, pen: PenaltySpec) -> np.ndarray:
    if pen.lambda_grid is not None:
        return np.asarray(pen.lambda_grid)
    top = lambda_max(dm)
    if top <= 0:
        top = 1.0
    return np.geomspace(top, top * pen.lambda_min_ratio, pen.n_lambda)


def _path(
    X: np.ndarray,
    y: np.ndarray,
    grid: np.ndarray,
    pen: PenaltySpec,
    method: str,
    weights: np.ndarray | None = None,
) -> list[_CDResult]:
    """Warm-started solutions along a descending lambda grid.

    SCAD at each lambda starts from both the LASSO solution at that lambda and
    the previous SCAD solution; the lower objective wins.
    """
    prob = _problem(X, y, weights)
    out = []
    lasso_prev = None
    scad_prev = None
    for lam in grid:
        lasso = _coordinate_descent(prob, lam, "lasso", pen.a, lasso_prev, pen.max_iter, pen.tol)
        lasso_prev = lasso.beta
        if method == "lasso":
            out.append(lasso)
            continue
        best = _coordinate_descent(prob, lam, "scad", pen.a, lasso.beta, pen.max_iter, pen.tol)
        if scad_prev is not None:
            alt = _coordinate_descent(prob, lam, "scad", pen.a, scad_prev, pen.max_iter, pen.tol)
            if alt.objective < best.objective:
                best = alt
        scad_prev = best.beta
        out.append(best)
    return out


def make_folds(n: int, k: int, seed: int = 0, random: bool = False) -> list[np.ndarray]:
    """Validation index sets: contiguous time blocks, or a seeded permutation split."""
    if n < 2 * k:
        raise RegressionError(f"{n} points is too few for {k}-fold cross-validation")
    idx = np.arange(n)
    if random:
        idx = np.random.default_rng(seed).permutation(n)
        return [np.sort(part) for part in np.array_split(idx, k)]
    return np.array_split(idx, k)


def cross_validate(
    dm: DesignMatrix,
    pen: PenaltySpec,
    fitter: str | Callable | None = None,
) -> tuple[float, np.ndarray]:
    """Mean validation MSE per lambda; returns (lambda_chosen, cv_curve).

    Ties (within numerical noise of the best error) go to the larger lambda.
    """
    method = _method_name(fitter, pen)
    grid = default_lambda_grid(dm, pen)
    folds = make_folds(dm.n, pen.cv_folds, pen.seed, pen.random_folds)
    weights = _weights(dm)
    errs = np.zeros((0, grid.size))
    for fold in folds:
        train = np.ones(dm.n, dtype=bool)
        train[fold] = False
        Xt, yt = dm.X[train], dm.y[train]
        Xv, yv = dm.X[fold], dm.y[fold]
        if dm.centered:
            if np.ptp(yt) == 0:
                warnings.warn("skipping CV fold with zero response variance", RuntimeWarning)
                continue
            xm, ym = Xt.mean(axis=0), yt.mean()
            Xt, yt, Xv, yv = Xt - xm, yt - ym, Xv - xm, yv - ym
        Xs, scale = _maybe_standardize(Xt, pen.standardize)
        path = _path(Xs, yt, grid, pen, method, weights)
        row = [np.mean((yv - Xv @ (res.beta / scale)) ** 2) for res in path]
        errs = np.vstack([errs, row])
    if errs.shape[0] == 0:
        raise RegressionError("every CV fold was skipped")
    curve = errs.mean(axis=0)
    best = float(curve.min())
    tie = best * (1 + 1e-9) + 1e-14 * float(np.mean(dm.y**2))
    chosen = int(np.flatnonzero(curve <= tie)[0])
    return float(grid[chosen]), curve


def _method_name(fitter, pen: PenaltySpec) -> str:
    if fitter is None:
        return pen.method
    if isinstance(fitter, str):
        return fitter.lower()
    return {fit_lasso: "lasso", fit_scad: "scad"}.get(fitter, pen.method)


def _weights(dm: DesignMatrix) -> np.ndarray:
    return np.ones(dm.p)


def _maybe_standardize(X: np.ndarray, on: bool) -> tuple[np.ndarray, np.ndarray]:
    if not on:
        return X, np.ones(X.shape[1])
    sd = np.sqrt(np.mean(X**2, axis=0))
    sd[sd == 0] = 1.0
    return X / sd, sd


def _fit_penalized(dm: DesignMatrix, pen: PenaltySpec, method: str) -> RegressionFit:
    weights = _weights(dm)
    X, scale = _maybe_standardize(dm.X, pen.standardize)
    if pen.lam is not None:
        lam, curve = float(pen.lam), np.empty(0)
        prefix = default_lambda_grid(dm, pen)
        grid = np.append(prefix[prefix > lam], lam)
    else:
        lam, curve = cross_validate(dm, pen, method)
        full = default_lambda_grid(dm, pen)
        grid = full[full >= lam]
    path = _path(X, dm.y, grid, pen, method, weights)
    res = path[-1]
    beta = res.beta / scale
    return _finish(
        dm,
        beta,
        method,
        lam,
        pen.zero_tol,
        lambda_grid=default_lambda_grid(dm, pen) if pen.lam is None else grid,
        cv_curve=curve,
        objective=res.objective,
        n_iter=res.n_iter,
        converged=res.converged,
    )


def fit_lasso(dm: DesignMatrix, pen: PenaltySpec | None = None) -> RegressionFit:
    """LASSO by cyclic coordinate descent with soft-thresholding.

    Objective: ||y - X b||^2 / (2n) + lam * |b|_1, warm-started along the
    lambda grid; lambda from k-fold CV unless ``pen.lam`` is set.
    """
    return _fit_penalized(dm, pen or PenaltySpec(method="lasso"), "lasso")


def fit_scad(dm: DesignMatrix, pen: PenaltySpec | None = None) -> RegressionFit:
    """SCAD by cyclic coordinate descent with the exact univariate SCAD rule."""
    return _fit_penalized(dm, pen or PenaltySpec(method="scad"), "scad")


def fit(dm: DesignMatrix, pen: PenaltySpec) -> RegressionFit:
    if pen.method == "ols":
        return fit_ols(dm, pen.zero_tol)
    return _fit_penalized(dm, pen, pen.method)


def compute_selection_metrics(fit: RegressionFit, truth: Mapping[str, float]) -> SelectionMetrics:
    missing = [lab for lab in fit.labels if lab not in truth]
    if missing:
        raise KeyError(f"truth lacks terms {missing}")
    true = np.array([truth[lab] for lab in fit.labels], dtype=float)
    pred_zero = np.abs(fit.beta) <= fit.zero_tol
    true_zero = np.abs(true) <= fit.zero_tol
    n_pred = int(pred_zero.sum())
    tn = int((pred_zero & true_zero).sum())
    npv = tn / n_pred if n_pred else None
    rmse = float(np.sqrt(np.mean((fit.beta - true) ** 2)))
    return SelectionMetrics(npv=npv, coef_rmse=rmse, true_negatives=tn, predicted_negatives=n_pred)


def fit_mechanism_line(
    rcd_co: RCDSeries,
    rcd_o2_sqrt: RCDSeries,
    pen: PenaltySpec | None = None,
    min_points: int = 50,
) -> RegressionFit:
    """Regress r_CO/C_CO on sqrt(r_O2/C_O2) with a penalized intercept.

    Under Eley-Rideal the intercept estimates N*k_CO and the slope
    -k_CO/sqrt(k_O); under Langmuir-Hinshelwood the intercept is zero.
    """
    pen = pen or PenaltySpec(method="scad")
    if rcd_co.values.shape != rcd_o2_sqrt.values.shape:
        raise RegressionError("RCD series are on different grids")
    mask = rcd_co.mask & rcd_o2_sqrt.mask
    n = int(mask.sum())
    if n < min_points:
        raise RegressionError(f"only {n} aligned points (need {min_points})")
    x = rcd_o2_sqrt.values[mask]
    y = rcd_co.values[mask]
    terms = (
        TermDescriptor(TermKind.INTERCEPT),
        TermDescriptor(TermKind.CUSTOM, name=f"sqrt_rcd_{rcd_o2_sqrt.gas_id}", values=x),
    )
    dm = build_design_matrix({}, terms, response=y)
    return fit(dm, pen)
