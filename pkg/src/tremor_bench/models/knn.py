"""k-nearest-neighbour vote with every point tied at the k-th distance included."""
from __future__ import annotations

import numpy as np

from ..errors import ModelError
from .base import ModelSpec, fit, register


def _fit(X, y, hp, seed):
    k = int(hp["k"])
    if k < 1 or k > len(y):
        raise ModelError(f"KNN k={k} must lie in [1, {len(y)}]")
    return {"X": X.copy(), "y": y.copy(), "k": k}


def _score(state, X):
    train_X, train_y, k = state["X"], state["y"], state["k"]
    diff = X[:, None, :] - train_X[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    kth = np.partition(D, k - 1, axis=1)[:, k - 1]
    nbr = D <= kth[:, None]
    return (nbr @ train_y) / nbr.sum(axis=1)


register("KNN", _fit, _score)


def fit_knn(train, k: int = 5, seed: int = 0):
    return fit(ModelSpec.create("KNN", seed=seed, k=k), train)
