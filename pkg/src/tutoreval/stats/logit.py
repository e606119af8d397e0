"""Binary logistic regression fitted by Newton's method (IRLS)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

MAX_ITER = 100
STEP_TOL = 1e-8
SEPARATION_BOUND = 15.0
RIDGE = 1e-8


class SeparationError(ValueError):
    """The outcome is (quasi-)perfectly predicted; the MLE does not exist."""

    def __init__(self, covariates: Sequence[str]):
        self.covariates = list(covariates)
        super().__init__(
            "complete or quasi-complete separation detected; diverging covariates: "
            + ", ".join(self.covariates)
        )


class RankDeficiencyError(ValueError):
    """The information matrix is singular."""


@dataclass
class RegressionFit:
    names: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    null_log_likelihood: float
    pseudo_r2: float
    n_iterations: int
    converged: bool
    n_obs: int
    warnings: list[str] = field(default_factory=list)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        return float(self.standard_errors[self.names.index(name)])

    def p(self, name: str) -> float:
        return float(self.p_values[self.names.index(name)])

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(np.asarray(X, dtype=float) @ self.coefficients)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coefficients": [float(v) for v in self.coefficients],
            "standard_errors": [float(v) for v in self.standard_errors],
            "z_values": [float(v) for v in self.z_values],
            "p_values": [float(v) for v in self.p_values],
            "log_likelihood": float(self.log_likelihood),
            "null_log_likelihood": float(self.null_log_likelihood),
            "pseudo_r2": float(self.pseudo_r2),
            "n_iterations": self.n_iterations,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "warnings": list(self.warnings),
        }


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    """Bernoulli log-likelihood using log-sigmoid(t) = -log(1 + exp(-t))."""
    eta = X @ beta
    return float(-np.sum(y * np.logaddexp(0.0, -eta) + (1.0 - y) * np.logaddexp(0.0, eta)))


def score_vector(X, y, beta) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return X.T @ (y - _sigmoid(X @ np.asarray(beta, dtype=float)))


def mcfadden_r2(ll_model: float, ll_null: float) -> float:
    if ll_null == 0:
        raise ValueError("null log-likelihood is zero; McFadden R^2 undefined")
    return 1.0 - ll_model / ll_null


def _null_log_likelihood(y: np.ndarray) -> float:
    n = len(y)
    k = float(y.sum())
    ll = 0.0
    if k > 0:
        ll += k * math.log(k / n)
    if k < n:
        ll += (n - k) * math.log((n - k) / n)
    return ll


def _solve(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(H)
    return np.linalg.solve(L.T, np.linalg.solve(L, g))


def logit_fit(X, y, names: Sequence[str] | None = None) -> RegressionFit:
    """Maximum-likelihood logistic regression.

    ``X`` must contain an intercept column of ones. Raises SeparationError
    when the likelihood has no finite maximiser and RankDeficiencyError when
    the information matrix stays singular after one ridge retry.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be two-dimensional")
    n, k = X.shape
    if len(y) != n:
        raise ValueError(f"X has {n} rows but y has {len(y)} entries")
    if n < k:
        raise ValueError(f"need at least as many rows ({n}) as columns ({k})")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise ValueError("names must match the number of columns")
    intercepts = [j for j in range(k) if np.all(X[:, j] == 1.0)]
    if not intercepts:
        raise ValueError("design matrix needs an intercept column of ones")
    if y.min() == y.max():
        raise SeparationError([names[intercepts[0]]])
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficiencyError("design matrix is rank deficient: " + ", ".join(names))

    warnings: list[str] = []
    ridge = 0.0
    beta = np.zeros(k)
    ll = log_likelihood(X, y, beta)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        p = _sigmoid(X @ beta)
        w = p * (1.0 - p)
        H = X.T @ (w[:, None] * X)
        g = X.T @ (y - p)
        try:
            delta = _solve(H + ridge * np.eye(k), g)
        except np.linalg.LinAlgError:
            if np.any(np.abs(beta) > SEPARATION_BOUND):
                raise SeparationError([nm for nm, b in zip(names, beta) if abs(b) > SEPARATION_BOUND])
            if ridge:
                raise RankDeficiencyError("information matrix is singular even with ridge")
            ridge = RIDGE
            msg = f"information matrix numerically singular at iteration {it}; added {RIDGE:g} ridge"
            logger.warning(msg)
            warnings.append(msg)
            try:
                delta = _solve(H + ridge * np.eye(k), g)
            except np.linalg.LinAlgError:
                raise RankDeficiencyError("information matrix is singular even with ridge") from None
        # step halving keeps the likelihood monotone
        step = 1.0
        while True:
            cand = beta + step * delta
            ll_cand = log_likelihood(X, y, cand)
            if ll_cand >= ll - 1e-12 * abs(ll) or step < 1e-10:
                break
            step /= 2.0
        beta, ll = cand, ll_cand
        if np.max(np.abs(step * delta)) < STEP_TOL:
            converged = True
            break

    p = _sigmoid(X @ beta)
    H = X.T @ ((p * (1.0 - p))[:, None] * X) + ridge * np.eye(k)
    try:
        np.linalg.cholesky(H)
        singular = False
    except np.linalg.LinAlgError:
        singular = True
    # a vanishing gradient with saturated probabilities is not a real optimum
    if (singular or not converged) and np.any(np.abs(beta) > SEPARATION_BOUND):
        raise SeparationError([nm for nm, b in zip(names, beta) if abs(b) > SEPARATION_BOUND])
    if singular:
        raise RankDeficiencyError("information matrix is singular at the optimum")
    if not converged:
        msg = f"logistic fit did not converge in {MAX_ITER} iterations"
        logger.warning(msg)
        warnings.append(msg)

    cov = np.linalg.inv(H)
    se = np.sqrt(np.diag(cov))
    z = beta / se
    pvals = np.array([math.erfc(abs(v) / math.sqrt(2.0)) for v in z])
    ll_null = _null_log_likelihood(y)
    return RegressionFit(
        names=names,
        coefficients=beta,
        standard_errors=se,
        z_values=z,
        p_values=pvals,
        log_likelihood=ll,
        null_log_likelihood=ll_null,
        pseudo_r2=mcfadden_r2(ll, ll_null),
        n_iterations=it,
        converged=converged,
        n_obs=n,
        warnings=warnings,
    )
