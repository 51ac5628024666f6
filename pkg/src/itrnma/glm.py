"""Weighted maximum-likelihood logistic and multinomial-logit fitting.

Used to estimate the treatment-assignment and outcome-missingness models
whose predicted probabilities enter the balancing weights.  Fitting is
Newton/IRLS with step-halving; near-separation is clamped rather than fatal
because Dirichlet-weighted resamples occasionally induce it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SingularDesignError

GRAD_TOL = 1e-8
COEF_CAP = 30.0
MAX_ITER = 200
PROB_FLOOR = 1e-6


class SeparationWarning(UserWarning):
    pass


@dataclass
class WeightedGlmFit:
    coefficients: np.ndarray  # (p,) logistic; (K-1, p) multinomial
    converged: bool
    iterations: int
    grad_norm: float
    n_categories: int = 2
    separation: bool = False


def _check_rank(x: np.ndarray, w: np.ndarray) -> None:
    active = w > 0
    if not np.any(active):
        raise SingularDesignError("all observation weights are zero")
    xs = x[active] * np.sqrt(w[active])[:, None]
    if np.linalg.matrix_rank(xs) < x.shape[1]:
        raise SingularDesignError("design is rank deficient on the weighted support")


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _binary_loglik(x, y, w, beta):
    eta = x @ beta
    # log(p) and log(1-p) computed stably from eta
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def fit_weighted_logistic(
    x: np.ndarray,
    y: np.ndarray,
    obs_weights: np.ndarray,
    start: np.ndarray | None = None,
) -> WeightedGlmFit:
    """Maximize sum_j w_j [y_j log p_j + (1-y_j) log(1-p_j)] with logit link."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(obs_weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("negative observation weights")
    _check_rank(x, w)
    beta = np.zeros(x.shape[1]) if start is None else np.array(start, dtype=float)
    ll = _binary_loglik(x, y, w, beta)
    grad = x.T @ (w * (y - _sigmoid(x @ beta)))
    it = 0
    separation = False
    for it in range(1, MAX_ITER + 1):
        p = _sigmoid(x @ beta)
        grad = x.T @ (w * (y - p))
        if np.max(np.abs(grad)) <= GRAD_TOL:
            break
        s = w * np.clip(p * (1 - p), 1e-12, None)
        h = x.T @ (x * s[:, None])
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularDesignError("singular IRLS Hessian") from exc
        # step-halving on the weighted log likelihood
        scale = 1.0
        for _ in range(40):
            cand = beta + scale * step
            ll_new = _binary_loglik(x, y, w, cand)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
        ll = _binary_loglik(x, y, w, beta)
        if np.max(np.abs(beta)) > COEF_CAP:
            separation = True
            beta = np.clip(beta, -COEF_CAP, COEF_CAP)
            grad = x.T @ (w * (y - _sigmoid(x @ beta)))
            warnings.warn(
                "near-separation detected; coefficients clamped", SeparationWarning
            )
            break
    gnorm = float(np.max(np.abs(grad)))
    return WeightedGlmFit(
        coefficients=beta,
        converged=gnorm <= GRAD_TOL or separation,
        iterations=it,
        grad_norm=gnorm,
        n_categories=2,
        separation=separation,
    )


def _softmax_probs(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row probabilities over K categories; category 1 is the reference."""
    eta = np.column_stack([np.zeros(x.shape[0]), x @ b.T])
    eta -= eta.max(axis=1, keepdims=True)
    e = np.exp(eta)
    return e / e.sum(axis=1, keepdims=True)


def _multi_loglik(x, onehot, w, b):
    eta = np.column_stack([np.zeros(x.shape[0]), x @ b.T])
    lse = np.log(np.sum(np.exp(eta - eta.max(axis=1, keepdims=True)), axis=1)) + eta.max(axis=1)
    return float(np.sum(w * (np.sum(onehot * eta, axis=1) - lse)))


def fit_weighted_multinomial(
    x: np.ndarray,
    arm: np.ndarray,
    obs_weights: np.ndarray,
    n_categories: int | None = None,
    start: np.ndarray | None = None,
) -> WeightedGlmFit:
    """Weighted multinomial-logit MLE; category 1 (arm == 1) is the reference.

    For two categories this reduces exactly to ``fit_weighted_logistic``.
    """
    x = np.asarray(x, dtype=float)
    arm = np.asarray(arm, dtype=int)
    w = np.asarray(obs_weights, dtype=float)
    k = n_categories or int(arm.max())
    if k == 2:
        fit = fit_weighted_logistic(
            x, (arm == 2).astype(float), w, start=None if start is None else start[0]
        )
        fit.coefficients = fit.coefficients[None, :]
        return fit
    _check_rank(x, w)
    n, p = x.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), arm - 1] = 1.0
    b = np.zeros((k - 1, p)) if start is None else np.array(start, dtype=float)
    ll = _multi_loglik(x, onehot, w, b)
    it = 0
    separation = False
    grad = np.zeros((k - 1) * p)
    for it in range(1, MAX_ITER + 1):
        probs = _softmax_probs(x, b)
        resid = onehot[:, 1:] - probs[:, 1:]
        grad = (x.T @ (w[:, None] * resid)).T.reshape(-1)  # (K-1, p) row-major
        if np.max(np.abs(grad)) <= GRAD_TOL:
            break
        # block Hessian: H[(a,·),(c,·)] = X' diag(w p_a (1{a=c} - p_c)) X
        h = np.zeros(((k - 1) * p, (k - 1) * p))
        for a in range(k - 1):
            for c in range(a, k - 1):
                pa, pc = probs[:, a + 1], probs[:, c + 1]
                s = w * (pa * ((a == c) - pc))
                block = x.T @ (x * s[:, None])
                h[a * p : (a + 1) * p, c * p : (c + 1) * p] = block
                if a != c:
                    h[c * p : (c + 1) * p, a * p : (a + 1) * p] = block
        try:
            step = np.linalg.solve(h, grad).reshape(k - 1, p)
        except np.linalg.LinAlgError as exc:
            raise SingularDesignError("singular multinomial Hessian") from exc
        scale = 1.0
        for _ in range(40):
            cand = b + scale * step
            ll_new = _multi_loglik(x, onehot, w, cand)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        b = b + scale * step
        ll = _multi_loglik(x, onehot, w, b)
        if np.max(np.abs(b)) > COEF_CAP:
            separation = True
            b = np.clip(b, -COEF_CAP, COEF_CAP)
            probs = _softmax_probs(x, b)
            grad = (x.T @ (w[:, None] * (onehot[:, 1:] - probs[:, 1:]))).T.reshape(-1)
            warnings.warn(
                "near-separation detected; coefficients clamped", SeparationWarning
            )
            break
    gnorm = float(np.max(np.abs(grad)))
    return WeightedGlmFit(
        coefficients=b,
        converged=gnorm <= GRAD_TOL or separation,
        iterations=it,
        grad_norm=gnorm,
        n_categories=k,
        separation=separation,
    )


def predict_prob(fit: WeightedGlmFit, x: np.ndarray, target=None) -> np.ndarray:
    """Predicted probabilities, floored away from 0 and 1.

    ``target=None`` returns the full n x K matrix.  An integer or integer
    vector of 1-based categories returns the probability of those categories
    per row (e.g. the probability of the arm actually received, or target=1
    for Pr(M=0) from a missingness fit coded as category 2 = missing).
    """
    x = np.asarray(x, dtype=float)
    if fit.n_categories == 2 and fit.coefficients.ndim == 1:
        b = fit.coefficients[None, :]
    else:
        b = fit.coefficients
    probs = _softmax_probs(x, b)
    probs = np.clip(probs, PROB_FLOOR, 1 - PROB_FLOOR)
    if target is None:
        return probs
    t = np.asarray(target, dtype=int)
    if t.ndim == 0:
        return probs[:, int(t) - 1]
    return probs[np.arange(x.shape[0]), t - 1]
