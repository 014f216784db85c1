"""Exact greedy binary tree builder shared by every tree-based learner.

Each sample carries two additive statistics ``a`` and ``b``; a split is
scored from their left/right sums only:

* ``GINI``     a = weight, b = weight * label; Gini impurity decrease (times weight)
* ``FRIEDMAN`` a = weight, b = weight * residual; Friedman's MSE improvement
* ``NEWTON``   a = hessian, b = gradient; second-order gain with L2 penalty

Candidate thresholds are midpoints between consecutive distinct values.
Ties go to the lowest feature index, then the lowest threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GINI, FRIEDMAN, NEWTON = 0, 1, 2


@njit(cache=True, nogil=True)
def _gini_term(a, b):
    if a <= 0.0:
        return 0.0
    return 2.0 * b * (a - b) / a


@njit(cache=True, nogil=True)
def _gain(criterion, a_tot, b_tot, al, bl, ar, br, lam):
    if criterion == GINI:
        return _gini_term(a_tot, b_tot) - _gini_term(al, bl) - _gini_term(ar, br)
    if criterion == FRIEDMAN:
        diff = ar * bl - al * br
        return diff * diff / (al * ar * (al + ar))
    return 0.5 * (bl * bl / (al + lam) + br * br / (ar + lam) - b_tot * b_tot / (a_tot + lam))


@njit(cache=True, nogil=True)
def _leaf_value(criterion, a_tot, b_tot, lam):
    if criterion == NEWTON:
        return -b_tot / (a_tot + lam)
    if a_tot <= 0.0:
        return 0.0
    return b_tot / a_tot


@njit(cache=True, nogil=True)
def build_tree(X, order, sorted_x, members, a, b, criterion, max_depth, min_samples_split,
               min_samples_leaf, min_child_a, lam, min_gain, feature_keys, max_features):
    """Grow one tree depth-first.

    ``order[f]`` is the stable ascending row order of column ``f`` and
    ``sorted_x[f]`` the matching values; each node scans them and keeps
    only its own rows, so no sorting happens while growing.
    ``members`` lists the sample rows that take part (each once).
    ``max_depth < 0`` means unlimited. When ``max_features < p`` the
    candidate features at node ``t`` are the ``max_features`` smallest
    entries of ``feature_keys[t]``.

    Returns node arrays (split gain is 0 at leaves), the node count and, per
    sample, the leaf it ended in (-1 for non-members).
    """
    n, p = X.shape
    m_root = members.shape[0]
    cap = max(2 * m_root - 1, 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    gain = np.zeros(cap)
    leaf_of = np.full(n, -1, dtype=np.int64)

    idx = members.copy()
    tmp = np.empty(m_root, dtype=np.int64)
    go_left = np.zeros(n, dtype=np.bool_)
    node_of = np.full(n, -1, dtype=np.int64)
    for i in range(m_root):
        node_of[members[i]] = 0

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m_root
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    use_subset = max_features < p

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start

        a_tot = 0.0
        b_tot = 0.0
        for i in range(start, end):
            a_tot += a[idx[i]]
            b_tot += b[idx[i]]
        value[node] = _leaf_value(criterion, a_tot, b_tot, lam)

        splittable = m >= min_samples_split and m >= 2 * min_samples_leaf
        if max_depth >= 0 and depth >= max_depth:
            splittable = False
        if criterion == GINI and (b_tot == 0.0 or b_tot == a_tot):
            splittable = False

        best_gain = -np.inf
        best_feat = -1
        best_thr = 0.0
        if splittable:
            if use_subset:
                cand = np.sort(np.argsort(feature_keys[node])[:max_features])
            else:
                cand = np.arange(p)
            for f in cand:
                al = 0.0
                bl = 0.0
                seen = 0
                v0 = 0.0
                for r in range(n):
                    s = order[f, r]
                    if node_of[s] != node:
                        continue
                    v1 = sorted_x[f, r]
                    # boundary between the ``seen`` rows so far and the rest
                    if seen > 0 and v0 != v1 and seen >= min_samples_leaf and m - seen >= min_samples_leaf:
                        ar = a_tot - al
                        br = b_tot - bl
                        ok = True
                        if criterion == NEWTON:
                            if al < min_child_a or ar < min_child_a:
                                ok = False
                        elif al <= 0.0 or ar <= 0.0:
                            ok = False
                        if ok:
                            g = _gain(criterion, a_tot, b_tot, al, bl, ar, br, lam)
                            if g > best_gain:
                                best_gain = g
                                best_feat = f
                                thr = 0.5 * (v0 + v1)
                                if thr == v1:
                                    thr = v0
                                best_thr = thr
                    al += a[s]
                    bl += b[s]
                    v0 = v1
                    seen += 1
                    if seen == m:
                        break

        if best_feat < 0 or not best_gain > min_gain:
            for i in range(start, end):
                leaf_of[idx[i]] = node
            continue

        # stable partition of the node's rows
        n_left = 0
        for i in range(start, end):
            s = idx[i]
            go_left[s] = X[s, best_feat] <= best_thr
            if go_left[s]:
                n_left += 1
        li = 0
        ri = n_left
        for i in range(start, end):
            s = idx[i]
            if go_left[s]:
                tmp[li] = s
                li += 1
            else:
                tmp[ri] = s
                ri += 1
        for i in range(m):
            idx[start + i] = tmp[i]

        lid = n_nodes
        rid = n_nodes + 1
        for i in range(start, end):
            s = idx[i]
            node_of[s] = lid if go_left[s] else rid
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        gain[node] = best_gain
        left[node] = lid
        right[node] = rid

        st_node[top] = rid
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lid
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        top += 1

    return feature, threshold, left, right, value, gain, n_nodes, leaf_of


@njit(cache=True, nogil=True)
def _sigmoid1(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _mean_logistic_loss(y, F):
    total = 0.0
    for i in range(y.shape[0]):
        f = F[i]
        total += max(f, 0.0) + np.log1p(np.exp(-abs(f))) - y[i] * f
    return total / y.shape[0]


@njit(cache=True, nogil=True)
def _store(buf_f, buf_t, buf_l, buf_r, buf_v, buf_g, pos, feature, threshold, left, right, value, gain,
           n_nodes):
    """Copy one tree into the flat forest buffers at ``pos``; children are re-based."""
    for i in range(n_nodes):
        buf_f[pos + i] = feature[i]
        buf_t[pos + i] = threshold[i]
        buf_l[pos + i] = left[i] + pos if left[i] >= 0 else -1
        buf_r[pos + i] = right[i] + pos if right[i] >= 0 else -1
        buf_v[pos + i] = value[i]
        buf_g[pos + i] = gain[i]
    return pos + n_nodes


@njit(cache=True, nogil=True)
def forest_member(X, order, sorted_x, yf, bootstrap, max_depth, min_samples_split,
                  min_samples_leaf, max_features, rng, buffers, pos):
    """Grow one random-forest tree into the flat ``buffers`` at ``pos``.

    ``rng`` first draws the bootstrap sample (if any), then the per-node
    feature keys. Leaves hold hard 0/1 votes. Returns the next free offset.
    """
    n, p = X.shape
    counts = np.ones(n)
    if bootstrap:
        counts = np.zeros(n)
        draws = rng.integers(0, n, n)
        for i in range(n):
            counts[draws[i]] += 1.0
    members = np.flatnonzero(counts)
    if max_features < p:
        keys = rng.random((max(2 * members.shape[0] - 1, 1), p))
    else:
        keys = np.zeros((0, 0))
    feature, threshold, left, right, value, gain, n_nodes, _ = build_tree(
        X, order, sorted_x, members, counts, counts * yf, GINI, max_depth, min_samples_split,
        min_samples_leaf, 0.0, 0.0, 1e-12, keys, max_features)
    for i in range(n_nodes):
        value[i] = 1.0 if value[i] >= 0.5 else 0.0
    buf_f, buf_t, buf_l, buf_r, buf_v, buf_g = buffers
    return _store(buf_f, buf_t, buf_l, buf_r, buf_v, buf_g, pos, feature, threshold, left, right,
                  value, gain, n_nodes)


def forest_buffers(capacity: int):
    return (np.empty(capacity, dtype=np.int64), np.empty(capacity), np.empty(capacity, dtype=np.int64),
            np.empty(capacity, dtype=np.int64), np.empty(capacity), np.empty(capacity))


@njit(cache=True, nogil=True)
def boost(X, order, sorted_x, y, newton, n_stages, rate, f0, max_depth, min_samples_leaf,
          min_child_a, lam, min_gain):
    """Stage-wise logistic boosting with one regression tree per stage.

    ``newton=False``: trees fit residuals y - p with the Friedman criterion,
    then every leaf takes one Newton step sum(r) / sum(p (1 - p)).
    ``newton=True``: trees use the second-order gain on g = p - y,
    h = p (1 - p) and leaf weight -G / (H + lam).
    Leaf values are scaled by ``rate``. Returns forest arrays, roots and the
    training loss before the first and after every stage.
    """
    n, p = X.shape
    cap = max(n_stages * (2 * n - 1), 1)
    buf_f = np.empty(cap, dtype=np.int64)
    buf_t = np.empty(cap)
    buf_l = np.empty(cap, dtype=np.int64)
    buf_r = np.empty(cap, dtype=np.int64)
    buf_v = np.empty(cap)
    buf_g = np.empty(cap)
    roots = np.empty(n_stages, dtype=np.int64)
    losses = np.empty(n_stages + 1)
    members = np.arange(n)
    ones = np.ones(n)
    empty_keys = np.zeros((0, 0))
    F = np.full(n, f0)
    prob = np.empty(n)
    a = np.empty(n)
    b = np.empty(n)
    losses[0] = _mean_logistic_loss(y, F)
    pos = 0
    for stage in range(n_stages):
        for i in range(n):
            prob[i] = _sigmoid1(F[i])
        if newton:
            for i in range(n):
                a[i] = prob[i] * (1.0 - prob[i])
                b[i] = prob[i] - y[i]
            feature, threshold, left, right, value, gain, n_nodes, leaf_of = build_tree(
                X, order, sorted_x, members, a, b, NEWTON, max_depth, 2, min_samples_leaf,
                min_child_a, lam, min_gain, empty_keys, p)
            for j in range(n_nodes):
                value[j] = rate * value[j]
        else:
            for i in range(n):
                b[i] = y[i] - prob[i]
            feature, threshold, left, right, value, gain, n_nodes, leaf_of = build_tree(
                X, order, sorted_x, members, ones, b, FRIEDMAN, max_depth, 2, min_samples_leaf,
                0.0, 0.0, 1e-12, empty_keys, p)
            num = np.zeros(n_nodes)
            den = np.zeros(n_nodes)
            for i in range(n):
                num[leaf_of[i]] += b[i]
                den[leaf_of[i]] += prob[i] * (1.0 - prob[i])
            for j in range(n_nodes):
                value[j] = rate * num[j] / den[j] if abs(den[j]) >= 1e-150 else 0.0
        for i in range(n):
            F[i] += value[leaf_of[i]]
        losses[stage + 1] = _mean_logistic_loss(y, F)
        roots[stage] = pos
        pos = _store(buf_f, buf_t, buf_l, buf_r, buf_v, buf_g, pos, feature, threshold, left, right,
                     value, gain, n_nodes)
    return buf_f[:pos].copy(), buf_t[:pos].copy(), buf_l[:pos].copy(), buf_r[:pos].copy(), \
        buf_v[:pos].copy(), buf_g[:pos].copy(), roots, losses


@njit(cache=True, nogil=True)
def apply_forest(X, feature, threshold, left, right, value, roots):
    """Leaf value of every row under every tree; shape (n_rows, n_trees)."""
    m = X.shape[0]
    n_trees = roots.shape[0]
    out = np.empty((m, n_trees))
    for t in range(n_trees):
        root = roots[t]
        for i in range(m):
            node = root
            while left[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, t] = value[node]
    return out


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded binary tree; ``left[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def with_values(self, value: np.ndarray) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right,
                    np.asarray(value, dtype=float), self.gain)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return Forest.from_trees([self]).leaf_values(X)[:, 0]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": None if self.gain is None else self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
            None if d.get("gain") is None else np.asarray(d["gain"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class Forest:
    """Several trees packed into flat arrays for fast batch traversal."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @classmethod
    def from_trees(cls, trees) -> "Forest":
        offsets = np.cumsum([0] + [t.n_nodes for t in trees])
        if not trees:
            empty_i = np.zeros(0, dtype=np.int64)
            return cls(empty_i, np.zeros(0), empty_i, empty_i, np.zeros(0), empty_i)

        def shift(arr, off):
            return np.where(arr >= 0, arr + off, -1)

        return cls(
            np.concatenate([t.feature for t in trees]),
            np.concatenate([t.threshold for t in trees]),
            np.concatenate([shift(t.left, o) for t, o in zip(trees, offsets)]),
            np.concatenate([shift(t.right, o) for t, o in zip(trees, offsets)]),
            np.concatenate([t.value for t in trees]),
            offsets[:-1].astype(np.int64),
        )

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return apply_forest(X, self.feature, self.threshold, self.left, self.right, self.value, self.roots)


_NO_KEYS = np.zeros((0, 0))


def presort(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column stable ascending row order and the sorted values, both (p, n)."""
    X = np.asarray(X, dtype=float)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    sorted_x = np.ascontiguousarray(np.take_along_axis(X, order.T, axis=0).T)
    return order, sorted_x


def grow(
    X: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    criterion: int,
    *,
    members: np.ndarray = None,
    max_depth: int = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    min_child_a: float = 0.0,
    lam: float = 0.0,
    min_gain: float = 1e-12,
    max_features: int = None,
    rng: np.random.Generator = None,
    presorted: tuple[np.ndarray, np.ndarray] = None,
) -> tuple[Tree, np.ndarray]:
    """Fit one tree and return it with the leaf index of each training row.

    ``presorted`` is the output of :func:`presort` for ``X``; pass it when
    growing many trees on the same matrix.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, p = X.shape
    order, sorted_x = presort(X) if presorted is None else presorted
    members = np.arange(n, dtype=np.int64) if members is None else np.asarray(members, dtype=np.int64)
    mf = p if max_features is None else int(max_features)
    if mf < p:
        if rng is None:
            raise ValueError("feature subsampling requires an rng")
        keys = rng.random((max(2 * len(members) - 1, 1), p))
    else:
        keys = _NO_KEYS
    feature, thr, left, right, value, gain, n_nodes, leaf_of = build_tree(
        X, order, sorted_x, members, np.ascontiguousarray(a, dtype=float), np.ascontiguousarray(b, dtype=float),
        criterion, -1 if max_depth is None else int(max_depth), int(min_samples_split),
        int(min_samples_leaf), float(min_child_a), float(lam), float(min_gain), keys, mf,
    )
    tree = Tree(feature[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
                right[:n_nodes].copy(), value[:n_nodes].copy(), gain[:n_nodes].copy())
    return tree, leaf_of
