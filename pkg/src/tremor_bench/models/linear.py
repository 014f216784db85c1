"""L2-regularised logistic regression fitted with a hand-written L-BFGS."""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import ModelError
from .base import ModelSpec, fit, register


class ConvergenceWarning(UserWarning):
    pass


def logistic_objective(theta: np.ndarray, X: np.ndarray, y_pm: np.ndarray, C: float):
    """Penalised negative log-likelihood and its gradient.

    ``theta`` is ``[w..., b]``; ``y_pm`` holds labels in {-1, +1}. The
    intercept is not penalised.
    """
    w, b = theta[:-1], theta[-1]
    margin = y_pm * (X @ w + b)
    loss = np.logaddexp(0.0, -margin).sum() + (w @ w) / (2.0 * C)
    # d/dm log(1 + e^-m) = -sigmoid(-m)
    coef = -y_pm * np.exp(-np.logaddexp(0.0, margin))
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ coef + w / C
    grad[-1] = coef.sum()
    return loss, grad


def lbfgs(fun, x0: np.ndarray, tol: float, max_iter: int, memory: int = 10):
    """Minimise ``fun`` (returning value and gradient) with L-BFGS.

    Converged when the gradient's max-norm falls below ``tol``. Uses the
    two-loop recursion and a backtracking Armijo line search.

    Returns ``(x, f, grad, n_iter, converged)``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    s_hist, y_hist, rho_hist = [], [], []
    for it in range(max_iter):
        if np.max(np.abs(g)) < tol:
            return x, f, g, it, True
        q = g.copy()
        alphas = []
        for s, yv, rho in reversed(list(zip(s_hist, y_hist, rho_hist))):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * yv
        if s_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
        else:
            gamma = 1.0 / max(np.linalg.norm(g), 1.0)
        r = gamma * q
        for (s, yv, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            beta = rho * (yv @ r)
            r += (a - beta) * s
        direction = -r
        slope = g @ direction
        if slope >= 0:
            # not a descent direction; restart from steepest descent
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            direction = -g
            slope = -(g @ g)

        step = 1.0
        for _ in range(60):
            x_new = x + step * direction
            f_new, g_new = fun(x_new)
            if f_new <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            return x, f, g, it, False

        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-12:
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0), y_hist.pop(0), rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
    return x, f, g, max_iter, bool(np.max(np.abs(g)) < tol)


def _fit(X, y, hp, seed):
    C = float(hp["C"])
    if C <= 0:
        raise ModelError("LR needs C > 0")
    y_pm = np.where(y == 1, 1.0, -1.0)
    theta0 = np.zeros(X.shape[1] + 1)
    theta, f, g, n_iter, converged = lbfgs(
        lambda t: logistic_objective(t, X, y_pm, C),
        theta0, float(hp["tol"]), int(hp["max_iter"]), int(hp["memory"]),
    )
    grad_norm = float(np.max(np.abs(g)))
    if not converged:
        warnings.warn(
            f"L-BFGS stopped after {n_iter} iterations with gradient max-norm {grad_norm:.3g}",
            ConvergenceWarning,
            stacklevel=3,
        )
    return {
        "coef": theta[:-1].copy(),
        "intercept": float(theta[-1]),
        "n_iter": int(n_iter),
        "grad_norm": grad_norm,
        "converged": bool(converged),
    }


def _score(state, X):
    return X @ state["coef"] + state["intercept"]


register("LR", _fit, _score)


def fit_logistic_regression(train, C: float = 1.0, tol: float = 1e-4, max_iter: int = 1000, seed: int = 0):
    return fit(ModelSpec.create("LR", seed=seed, C=C, tol=tol, max_iter=max_iter), train)
