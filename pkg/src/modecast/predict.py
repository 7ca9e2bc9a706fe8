"""Prediction engines: random-projection least squares and kernel regression.

Two engines share one surface: an extreme learning machine (random sigmoid
hidden layer, minimum-norm least-squares readout) and epsilon-insensitive
support vector regression with an RBF kernel solved by sequential minimal
optimization. Hyperparameters are picked by grid search over contiguous
time-ordered cross-validation folds.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import expit

from .exceptions import ConvergenceError, DegenerateInputError, InputError
from .features import FeatureMatrix

logger = logging.getLogger(__name__)

ENGINES = ("ELM", "SVR")

ELM_HIDDEN_GRID = (10, 25, 50, 100, 200)
SVR_C_GRID = (0.1, 1.0, 10.0, 100.0)
SVR_GAMMA_GRID = (0.01, 0.1, 1.0, 10.0)

#: KKT tolerance is taken relative to the target scale once std exceeds 1,
#: so MW-scale targets do not demand microwatt-accurate duals.
KKT_TOL = 1e-3


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature training mean/std; zero-variance features keep std 1."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.mean) / self.std


def _fit_scaling(rows: np.ndarray) -> FeatureScaling:
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return FeatureScaling(mean=mean, std=std)


@dataclass(frozen=True)
class ElmModel:
    input_weights: np.ndarray
    biases: np.ndarray
    output_weights: np.ndarray
    hidden_count: int
    seed: int
    scaling: FeatureScaling

    @property
    def feature_count(self) -> int:
        return self.input_weights.shape[1]


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    gamma: float
    C: float
    epsilon_tube: float
    scaling: FeatureScaling
    iterations: int = 0

    @property
    def feature_count(self) -> int:
        return self.scaling.mean.size


def elm_train(fm: FeatureMatrix, hidden_count: int, seed: int) -> ElmModel:
    """Random uniform [-1, 1] hidden layer; readout by min-norm least squares."""
    if hidden_count < 1:
        raise InputError("hidden_count must be at least 1")
    rows = fm.rows
    y = fm.targets
    if rows.shape[0] < 1:
        raise InputError("need at least one training row")
    if np.all(rows.std(axis=0) == 0) and np.std(y) > 0:
        raise DegenerateInputError("every feature is constant but the target varies")
    scaling = _fit_scaling(rows)
    x = scaling.apply(rows)
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=(hidden_count, rows.shape[1]))
    biases = rng.uniform(-1.0, 1.0, size=hidden_count)
    hidden = expit(x @ weights.T + biases)
    beta, *_ = np.linalg.lstsq(hidden, y, rcond=1e-10)
    return ElmModel(
        input_weights=weights,
        biases=biases,
        output_weights=beta,
        hidden_count=hidden_count,
        seed=seed,
        scaling=scaling,
    )


def _elm_predict_rows(model: ElmModel, rows: np.ndarray) -> np.ndarray:
    x = model.scaling.apply(rows)
    return expit(x @ model.input_weights.T + model.biases) @ model.output_weights


def elm_predict(model: ElmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_count,):
        raise InputError(f"expected {model.feature_count} features, got shape {x.shape}")
    return float(_elm_predict_rows(model, x[None, :])[0])


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = a @ b.T
    sq *= -2.0
    sq += np.einsum("ij,ij->i", a, a)[:, None]
    sq += np.einsum("ij,ij->i", b, b)[None, :]
    np.maximum(sq, 0.0, out=sq)
    return sq


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = _sq_dists(a, b)
    sq *= -gamma
    return np.exp(sq, out=sq)


@njit(cache=True)
def _smo_solve(K, y, C, eps, tol, max_iter):
    """SMO on the doubled-variable epsilon-SVR dual.

    Variables 0..n-1 are the upper-tube multipliers (+1 constraint sign),
    n..2n-1 the lower-tube ones (-1). The first index of each working pair is
    the maximal violator; its partner is picked by the second-order gain rule.
    Returns (beta, bias, iterations, gap); the maximal-violating-pair gap
    doubles as the worst KKT violation.
    """
    n = y.size
    a = np.zeros(2 * n)
    grad = np.empty(2 * n)
    diag = np.empty(n)
    for i in range(n):
        grad[i] = eps - y[i]
        grad[n + i] = eps + y[i]
        diag[i] = K[i, i]
    iterations = 0
    m_val = 0.0
    big_m_val = 0.0
    while True:
        m_val = -1e308
        big_m_val = 1e308
        m_idx = -1
        for p in range(n):
            val = -grad[p]
            if a[p] < C and val > m_val:
                m_val = val
                m_idx = p
            if a[p] > 0.0 and val < big_m_val:
                big_m_val = val
        for p in range(n):
            q = n + p
            val = grad[q]
            if a[q] > 0.0 and val > m_val:
                m_val = val
                m_idx = q
            if a[q] < C and val < big_m_val:
                big_m_val = val
        gap = m_val - big_m_val
        if gap <= tol or iterations >= max_iter:
            break
        i = m_idx
        ii = i if i < n else i - n
        row_i = K[ii]
        # Partner: largest second-order objective decrease among violators
        # (kernel rows equal columns by symmetry, so access stays contiguous).
        j = -1
        best_gain = 0.0
        for pn in range(n):
            k_ip = row_i[pn]
            eta = diag[ii] + diag[pn] - 2.0 * k_ip
            if eta < 1e-12:
                eta = 1e-12
            if a[pn] > 0.0:
                diff = m_val + grad[pn]  # m_val - (-grad)
                if diff > 0.0:
                    gain = diff * diff / eta
                    if gain > best_gain:
                        best_gain = gain
                        j = pn
            q = n + pn
            if a[q] < C:
                diff = m_val - grad[q]
                if diff > 0.0:
                    gain = diff * diff / eta
                    if gain > best_gain:
                        best_gain = gain
                        j = q
        if j < 0:
            break
        jj = j if j < n else j - n
        si = 1.0 if i < n else -1.0
        sj = 1.0 if j < n else -1.0
        eta = diag[ii] + diag[jj] - 2.0 * row_i[jj]
        if eta < 1e-12:
            eta = 1e-12
        val_j = -grad[j] if j < n else grad[j]
        step = (m_val - val_j) / eta
        room_i = (C - a[i]) if si > 0 else a[i]
        room_j = a[j] if sj > 0 else (C - a[j])
        if step > room_i:
            step = room_i
        if step > room_j:
            step = room_j
        a[i] += si * step
        a[j] -= sj * step
        row_j = K[jj]
        for p in range(n):
            delta = step * (row_i[p] - row_j[p])
            grad[p] += delta
            grad[n + p] -= delta
        iterations += 1

    beta = a[:n] - a[n:]
    lo = 1e-10 * C
    hi = C - lo
    free_total = 0.0
    free_count = 0
    for p in range(2 * n):
        if lo < a[p] < hi:
            val = -grad[p] if p < n else grad[p]
            free_total += val
            free_count += 1
    if free_count > 0:
        bias = free_total / free_count
    else:
        bias = 0.5 * (m_val + big_m_val)
    return beta, bias, iterations, m_val - big_m_val


def _svr_solve_model(x, y, scaling, C, gamma, epsilon_tube, max_iterations, kernel) -> SvrModel:
    n = y.size
    cap = max_iterations if max_iterations is not None else 100 * n
    tol = KKT_TOL * max(1.0, float(np.std(y)))
    beta, bias, iterations, gap = _smo_solve(
        kernel, np.ascontiguousarray(y), float(C), float(epsilon_tube), tol, cap
    )
    if gap > tol:
        raise ConvergenceError(
            f"SMO stalled on {n} rows (C={C}, gamma={gamma})", iterations, gap
        )
    support = np.flatnonzero(beta != 0.0)
    logger.debug("SVR: %d/%d support vectors in %d iterations", support.size, n, iterations)
    return SvrModel(
        support_vectors=x[support],
        dual_coefficients=beta[support],
        bias=float(bias),
        gamma=float(gamma),
        C=float(C),
        epsilon_tube=float(epsilon_tube),
        scaling=scaling,
        iterations=int(iterations),
    )


def svr_train(
    fm: FeatureMatrix,
    C: float,
    gamma: float,
    epsilon_tube: float,
    max_iterations: int | None = None,
) -> SvrModel:
    """Solve the epsilon-insensitive dual with an RBF kernel by SMO."""
    if C <= 0:
        raise InputError("C must be positive")
    if gamma <= 0:
        raise InputError("gamma must be positive")
    if epsilon_tube < 0:
        raise InputError("epsilon_tube must be non-negative")
    rows = fm.rows
    if rows.shape[0] < 1:
        raise InputError("need at least one training row")
    scaling = _fit_scaling(rows)
    x = scaling.apply(rows)
    kernel = _rbf_kernel(x, x, gamma)
    return _svr_solve_model(x, fm.targets, scaling, C, gamma, epsilon_tube, max_iterations, kernel)


def _svr_predict_rows(model: SvrModel, rows: np.ndarray) -> np.ndarray:
    x = model.scaling.apply(rows)
    if model.support_vectors.shape[0] == 0:
        return np.full(x.shape[0], model.bias)
    kernel = _rbf_kernel(x, model.support_vectors, model.gamma)
    return kernel @ model.dual_coefficients + model.bias


def svr_predict(model: SvrModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_count,):
        raise InputError(f"expected {model.feature_count} features, got shape {x.shape}")
    return float(_svr_predict_rows(model, x[None, :])[0])


def train_engine(engine: str, fm: FeatureMatrix, params: dict, seed: int):
    """Uniform entry point used by grid search and the forecasting pipeline."""
    if engine == "ELM":
        return elm_train(fm, params["hidden_count"], seed)
    if engine == "SVR":
        return svr_train(fm, params["C"], params["gamma"], params["epsilon_tube"])
    raise InputError(f"unknown engine {engine!r}; expected one of {ENGINES}")


def predict_rows(engine: str, model, rows: np.ndarray) -> np.ndarray:
    if engine == "ELM":
        return _elm_predict_rows(model, rows)
    return _svr_predict_rows(model, rows)


def default_grid(engine: str, target_std: float) -> list[dict]:
    """The stock hyperparameter candidates for one engine."""
    if engine == "ELM":
        return [{"hidden_count": h} for h in ELM_HIDDEN_GRID]
    if engine == "SVR":
        eps = 0.01 * target_std if target_std > 0 else 1e-3
        return [
            {"C": c, "gamma": g, "epsilon_tube": eps}
            for c in SVR_C_GRID
            for g in SVR_GAMMA_GRID
        ]
    raise InputError(f"unknown engine {engine!r}; expected one of {ENGINES}")


@dataclass(frozen=True)
class GridSearchResult:
    best_params: dict
    cv_scores: tuple
    folds: int
    candidates: tuple


def grid_search_cv(
    fm: FeatureMatrix, engine: str, grid, folds: int = 5, seed: int = 0
) -> GridSearchResult:
    """Mean validation RMSE over contiguous time-ordered folds, argmin wins.

    Candidates whose solver fails to converge score infinity rather than
    aborting the search; ties keep the earliest candidate in grid order.
    """
    candidates = list(grid)
    if not candidates:
        raise InputError("grid must be non-empty")
    n = len(fm)
    if folds < 2:
        raise InputError("folds must be at least 2")
    if folds > n:
        raise InputError(f"{folds} folds need at least {folds} rows, got {n}")
    bounds = [n * f // folds for f in range(folds + 1)]
    fold_sets = []
    for f in range(folds):
        lo, hi = bounds[f], bounds[f + 1]
        train_rows = np.concatenate([fm.rows[:lo], fm.rows[hi:]])
        train_targets = np.concatenate([fm.targets[:lo], fm.targets[hi:]])
        sub = FeatureMatrix(train_rows, train_targets, fm.lag_labels, fm.source)
        fold_sets.append((sub, fm.rows[lo:hi], fm.targets[lo:hi]))

    # Candidates sharing a kernel width see the same per-fold matrix; the
    # pairwise squared distances are shared across widths, so build them once
    # per fold and each kernel once per (fold, width).
    scaled: dict[int, tuple] = {}
    kernels: dict[tuple, np.ndarray] = {}

    def fit(params, f, sub):
        if engine != "SVR":
            return train_engine(engine, sub, params, seed)
        if f not in scaled:
            scaling = _fit_scaling(sub.rows)
            x = scaling.apply(sub.rows)
            scaled[f] = (scaling, x, _sq_dists(x, x))
        scaling, x, sq = scaled[f]
        key = (f, params["gamma"])
        if key not in kernels:
            kernel = sq * (-params["gamma"])
            kernels[key] = np.exp(kernel, out=kernel)
        return _svr_solve_model(
            x, sub.targets, scaling,
            params["C"], params["gamma"], params["epsilon_tube"],
            None, kernels[key],
        )

    scores = []
    for params in candidates:
        total = 0.0
        failed = False
        for f, (sub, val_rows, val_targets) in enumerate(fold_sets):
            try:
                model = fit(params, f, sub)
            except (ConvergenceError, DegenerateInputError) as exc:
                logger.warning("candidate %s failed fold %d: %s", params, f, exc)
                failed = True
                break
            errors = predict_rows(engine, model, val_rows) - val_targets
            total += math.sqrt(float(np.mean(errors * errors)))
        scores.append(math.inf if failed else total / folds)
    best = 0
    for idx in range(1, len(scores)):
        if scores[idx] < scores[best]:
            best = idx
    return GridSearchResult(
        best_params=candidates[best],
        cv_scores=tuple(scores),
        folds=folds,
        candidates=tuple(candidates),
    )


def model_to_dict(engine: str, model) -> dict:
    """JSON-ready snapshot sufficient for bit-exact prediction reload."""
    scaling = {
        "mean": model.scaling.mean.tolist(),
        "std": model.scaling.std.tolist(),
    }
    if engine == "ELM":
        return {
            "engine": "ELM",
            "hidden_count": model.hidden_count,
            "seed": model.seed,
            "input_weights": model.input_weights.ravel().tolist(),
            "biases": model.biases.tolist(),
            "output_weights": model.output_weights.tolist(),
            "feature_count": model.feature_count,
            "scaling": scaling,
        }
    return {
        "engine": "SVR",
        "C": model.C,
        "gamma": model.gamma,
        "epsilon_tube": model.epsilon_tube,
        "bias": model.bias,
        "support_vectors": model.support_vectors.ravel().tolist(),
        "dual_coefficients": model.dual_coefficients.tolist(),
        "feature_count": model.feature_count,
        "scaling": scaling,
    }


def model_from_dict(payload: dict):
    scaling = FeatureScaling(
        mean=np.array(payload["scaling"]["mean"], dtype=np.float64),
        std=np.array(payload["scaling"]["std"], dtype=np.float64),
    )
    width = payload["feature_count"]
    if payload["engine"] == "ELM":
        hidden = payload["hidden_count"]
        return ElmModel(
            input_weights=np.array(payload["input_weights"]).reshape(hidden, width),
            biases=np.array(payload["biases"], dtype=np.float64),
            output_weights=np.array(payload["output_weights"], dtype=np.float64),
            hidden_count=hidden,
            seed=payload["seed"],
            scaling=scaling,
        )
    if payload["engine"] == "SVR":
        coefs = np.array(payload["dual_coefficients"], dtype=np.float64)
        return SvrModel(
            support_vectors=np.array(payload["support_vectors"]).reshape(coefs.size, width),
            dual_coefficients=coefs,
            bias=payload["bias"],
            gamma=payload["gamma"],
            C=payload["C"],
            epsilon_tube=payload["epsilon_tube"],
            scaling=scaling,
        )
    raise InputError(f"unknown engine {payload.get('engine')!r} in model payload")


def save_model(path, engine: str, model) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(engine, model), fh)
        fh.write("\n")


def load_model(path):
    with Path(path).open("r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return payload["engine"], model_from_dict(payload)
