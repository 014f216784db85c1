"""Stage-wise boosters on logistic loss: gradient boosting, SAMME.R AdaBoost and
a second-order (XGBoost-style) variant."""
from __future__ import annotations

import numpy as np

from ..errors import ModelError
from ._tree import GINI, Forest, boost, grow, presort
from .base import ModelSpec, fit, register

PROBA_FLOOR = 1e-10


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss(y: np.ndarray, F: np.ndarray) -> float:
    """Mean negative log-likelihood of labels ``y`` under margins ``F``."""
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


def newton_split_gain(g_left, h_left, g_right, h_right, lam):
    """Second-order split gain (no complexity penalty)."""
    g, h = g_left + g_right, h_left + h_right
    return 0.5 * (g_left ** 2 / (h_left + lam) + g_right ** 2 / (h_right + lam) - g ** 2 / (h + lam))


def _boosted_forest(X, y, newton, n_stages, rate, f0, max_depth, min_samples_leaf=1,
                    min_child_a=0.0, lam=0.0, min_gain=1e-12):
    order, sorted_x = presort(X)
    depth = -1 if max_depth is None else int(max_depth)
    f, t, l, r, v, _, roots, losses = boost(
        np.ascontiguousarray(X, dtype=float), order, sorted_x, y.astype(float), newton, n_stages,
        rate, f0, depth, int(min_samples_leaf), float(min_child_a), float(lam), float(min_gain))
    return Forest(f, t, l, r, v, roots), losses


def _fit_gb(X, y, hp, seed):
    n_stages = int(hp["n_stages"])
    lr = float(hp["learning_rate"])
    if n_stages < 0:
        raise ModelError("GBOOST needs n_stages >= 0")
    prior = y.mean()
    f0 = float(np.log(prior / (1.0 - prior)))
    forest, losses = _boosted_forest(X, y, False, n_stages, lr, f0, hp["max_depth"],
                                     hp["min_samples_leaf"])
    return {"init": f0, "forest": forest, "train_loss": losses}


def _score_additive(state, X):
    forest = state["forest"]
    if len(forest.roots) == 0:
        return np.full(X.shape[0], state["init"])
    return state["init"] + forest.leaf_values(X).sum(axis=1)


def _fit_ada(X, y, hp, seed):
    n_est = int(hp["n_estimators"])
    lr = float(hp["learning_rate"])
    if n_est < 1:
        raise ModelError("ADABOOST needs n_estimators >= 1")
    yf = y.astype(float)
    y_pm = 2.0 * yf - 1.0
    w = np.full(len(y), 1.0 / len(y))
    sorted_cols = presort(X)
    stumps, errors = [], []
    for r in range(n_est):
        stump, leaf = grow(X, w, w * yf, GINI, max_depth=1, presorted=sorted_cols)
        proba = np.clip(stump.value, PROBA_FLOOR, 1.0 - PROBA_FLOOR)
        p_train = proba[leaf]
        err = float(w[(p_train >= 0.5) != (y == 1)].sum())
        if err >= 0.5 and stumps:
            break
        half_logit = 0.5 * np.log(proba / (1.0 - proba))
        stumps.append(stump.with_values(half_logit))
        errors.append(err)
        if err <= 0.0:
            break
        w = w * np.exp(-lr * y_pm * half_logit[leaf])
        w = w / w.sum()
    return {"init": 0.0, "forest": Forest.from_trees(stumps), "stump_error": np.array(errors)}


def _fit_xgb(X, y, hp, seed):
    n_rounds = int(hp["n_rounds"])
    eta = float(hp["eta"])
    lam = float(hp["lambda"])
    if n_rounds < 1:
        raise ModelError("XGBOOST needs n_rounds >= 1")
    if lam < 0:
        raise ModelError("XGBOOST needs lambda >= 0")
    forest, losses = _boosted_forest(X, y, True, n_rounds, eta, 0.0, hp["max_depth"],
                                     min_child_a=float(hp["min_child_weight"]), lam=lam,
                                     min_gain=float(hp["min_split_gain"]))
    return {"init": 0.0, "forest": forest, "train_loss": losses}


register("GBOOST", _fit_gb, _score_additive)
register("ADABOOST", _fit_ada, _score_additive)
register("XGBOOST", _fit_xgb, _score_additive)


def fit_gradient_boosting(train, learning_rate=0.01, n_stages=1000, max_depth=3, seed=0):
    spec = ModelSpec.create("GBOOST", seed=seed, learning_rate=learning_rate,
                            n_stages=n_stages, max_depth=max_depth)
    return fit(spec, train)


def fit_adaboost(train, learning_rate=1.0, n_estimators=50, seed=0):
    spec = ModelSpec.create("ADABOOST", seed=seed, learning_rate=learning_rate,
                            n_estimators=n_estimators)
    return fit(spec, train)


def fit_xgboost_style(train, eta=0.3, n_rounds=1000, lam=1.0, max_depth=6, seed=0, **extra):
    spec = ModelSpec.create("XGBOOST", seed=seed, eta=eta, n_rounds=n_rounds, max_depth=max_depth,
                            **{"lambda": lam}, **extra)
    return fit(spec, train)
