"""Soft-margin RBF support vector machine trained with SMO.

Working-set selection uses second-order information (maximal violating
pair for ``i``, largest objective decrease for ``j``). Training stops when
the maximal KKT violation drops below ``tol``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import ConvergenceError, ModelError
from .base import ModelSpec, fit, register

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def scale_gamma(X: np.ndarray) -> float:
    """1 / (n_features * variance of all training cells); 1.0 for constant data."""
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


@njit(cache=True, nogil=True)
def _smo(K, y, C, tol, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    n_iter = 0
    while True:
        g_max = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -G[t] >= g_max:
                    g_max = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] >= g_max:
                    g_max = G[t]
                    i = t
        g_max2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    if G[t] >= g_max2:
                        g_max2 = G[t]
                    grad_diff = g_max + G[t]
                    if grad_diff > 0 and i >= 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        obj = -(grad_diff * grad_diff) / (quad if quad > 0 else TAU)
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
            else:
                if alpha[t] < C:
                    if -G[t] >= g_max2:
                        g_max2 = -G[t]
                    grad_diff = g_max - G[t]
                    if grad_diff > 0 and i >= 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        obj = -(grad_diff * grad_diff) / (quad if quad > 0 else TAU)
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
        if g_max + g_max2 < tol or j < 0:
            return alpha, G, n_iter, True
        if n_iter >= max_iter:
            return alpha, G, n_iter, False
        n_iter += 1

        qij = y[i] * y[j] * K[i, j]
        ai_old = alpha[i]
        aj_old = alpha[j]
        ai = ai_old
        aj = aj_old
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
                if ai < 0:
                    ai = 0.0
                    aj = total
        alpha[i] = ai
        alpha[j] = aj
        dai = ai - ai_old
        daj = aj - aj_old
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)


def _intercept(alpha, G, y, C):
    """Offset from free vectors, else the midpoint of the feasible interval."""
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def _fit(X, y, hp, seed):
    C = float(hp["C"])
    tol = float(hp["tol"])
    if C <= 0 or tol <= 0:
        raise ModelError("SVM needs C > 0 and tol > 0")
    gamma = scale_gamma(X) if hp["gamma"] == "scale" else float(hp["gamma"])
    ys = np.where(y == 1, 1.0, -1.0)
    K = rbf_kernel(X, X, gamma)
    n = len(y)
    max_iter = int(hp["max_passes"]) * n * n
    alpha, G, n_iter, converged = _smo(K, ys, C, tol, max_iter)
    if not converged:
        raise ConvergenceError(f"SMO did not converge within {max_iter} iterations")
    rho = _intercept(alpha, G, ys, C)
    sv = np.flatnonzero(alpha > 0)
    return {
        "support_vectors": X[sv].copy(),
        "dual_coef": (alpha[sv] * ys[sv]).copy(),
        "alpha": alpha.copy(),
        "rho": rho,
        "gamma": gamma,
        "n_iter": int(n_iter),
    }


def _score(state, X):
    K = rbf_kernel(X, state["support_vectors"], state["gamma"])
    return K @ state["dual_coef"] - state["rho"]


register("SVM", _fit, _score)


def fit_svm(train, C: float = 1.0, tol: float = 1e-3, seed: int = 0, **extra):
    return fit(ModelSpec.create("SVM", seed=seed, C=C, tol=tol, **extra), train)
