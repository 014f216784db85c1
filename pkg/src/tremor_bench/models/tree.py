"""CART decision tree and random forest (Gini splits)."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ModelError
from ._tree import GINI, Forest, forest_buffers, forest_member, grow, presort
from .base import ModelSpec, fit, register


def _check_criterion(hp):
    if hp["criterion"] != "gini":
        raise ModelError(f"unsupported split criterion {hp['criterion']!r}; only 'gini'")


def _fit_dt(X, y, hp, seed):
    _check_criterion(hp)
    tree, _ = grow(
        X, np.ones(len(y)), y.astype(float), GINI,
        max_depth=hp["max_depth"],
        min_samples_split=hp["min_samples_split"],
        min_samples_leaf=hp["min_samples_leaf"],
    )
    return {"tree": tree}


def _score_dt(state, X):
    return state["tree"].predict(X)


def resolve_max_features(setting, p: int) -> int:
    if setting is None:
        return p
    if setting == "sqrt":
        return max(1, math.ceil(math.sqrt(p)))
    if isinstance(setting, float) and 0 < setting <= 1:
        return max(1, math.ceil(setting * p))
    value = int(setting)
    if not 1 <= value <= p:
        raise ModelError(f"max_features={setting} out of range for {p} features")
    return value


def _fit_rf(X, y, hp, seed):
    _check_criterion(hp)
    n_trees = int(hp["n_trees"])
    if n_trees < 1:
        raise ModelError("RF needs n_trees >= 1")
    p = X.shape[1]
    mf = resolve_max_features(hp["max_features"], p)
    order, sorted_x = presort(X)
    depth = -1 if hp["max_depth"] is None else int(hp["max_depth"])
    X = np.ascontiguousarray(X, dtype=float)
    yf = y.astype(float)
    n = X.shape[0]
    buffers = forest_buffers(n_trees * (2 * n - 1))
    roots = np.empty(n_trees, dtype=np.int64)
    pos = 0
    for t in range(n_trees):
        # each tree draws from its own (seed, tree index) stream
        roots[t] = pos
        pos = forest_member(X, order, sorted_x, yf, bool(hp["bootstrap"]), depth, 2, 1, mf,
                            np.random.default_rng([seed, t]), buffers, pos)
    f, thr, l, r, v, _ = (b[:pos].copy() for b in buffers)
    return {"forest": Forest(f, thr, l, r, v, roots), "n_trees": n_trees}


def _score_rf(state, X):
    return state["forest"].leaf_values(X).mean(axis=1)


register("DT", _fit_dt, _score_dt)
register("RF", _fit_rf, _score_rf)


def fit_decision_tree(train, criterion: str = "gini", seed: int = 0, **extra):
    return fit(ModelSpec.create("DT", seed=seed, criterion=criterion, **extra), train)


def fit_random_forest(train, n_trees: int = 1000, seed: int = 0, **extra):
    return fit(ModelSpec.create("RF", seed=seed, n_trees=n_trees, **extra), train)
