"""Slow, independent reference implementations used as test oracles.

Everything here is written straight from the textbook definitions with
plain loops, sharing no code with the package.
"""
from __future__ import annotations

import math
from fractions import Fraction


def confusion_counts(y_true, y_pred):
    tp = fp = tn = fn = 0
    for t, p in zip(y_true, y_pred):
        t, p = int(t), int(p)
        if t == 1 and p == 1:
            tp += 1
        elif t == 0 and p == 1:
            fp += 1
        elif t == 0 and p == 0:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def basic_metrics_exact(tp, fp, tn, fn):
    """Accuracy, TPR, PPV, F1 as exact fractions, zero on empty denominators."""
    acc = Fraction(tp + tn, tp + fp + tn + fn)
    tpr = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    ppv = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    f1 = 2 * ppv * tpr / (ppv + tpr) if ppv + tpr else Fraction(0)
    return acc, tpr, ppv, f1


def auc_double_sum(y, f):
    neg = [s for s, t in zip(f, y) if t == 0]
    pos = [s for s, t in zip(f, y) if t == 1]
    hits = 0
    for f0 in neg:
        for f1 in pos:
            if f0 < f1:
                hits += 1
    return hits / (len(neg) * len(pos))


def _dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def lof_by_definition(X, k, floor=1e-12):
    """LOF with the k-distance neighbourhood N_k(a) = {b != a : d(a, b) <= k-distance(a)}."""
    X = [list(map(float, row)) for row in X]
    n = len(X)
    d = [[_dist(X[i], X[j]) for j in range(n)] for i in range(n)]
    kdist, hood = [], []
    for i in range(n):
        others = sorted(d[i][j] for j in range(n) if j != i)
        kd = others[k - 1]
        kdist.append(kd)
        hood.append([j for j in range(n) if j != i and d[i][j] <= kd])
    lrd = []
    for i in range(n):
        total = sum(max(kdist[j], d[i][j]) for j in hood[i])
        lrd.append(len(hood[i]) / max(total, floor))
    return [sum(lrd[j] for j in hood[i]) / len(hood[i]) / lrd[i] for i in range(n)]


def gini_best_split(x, y):
    """Best single threshold on one feature by exhaustive Gini search: (threshold, decrease)."""
    n = len(y)

    def impurity(labels):
        if not labels:
            return 0.0
        p = sum(labels) / len(labels)
        return 1.0 - p * p - (1 - p) * (1 - p)

    values = sorted(set(x))
    best = (None, -1.0)
    for lo, hi in zip(values, values[1:]):
        thr = (lo + hi) / 2
        left = [t for v, t in zip(x, y) if v <= thr]
        right = [t for v, t in zip(x, y) if v > thr]
        dec = impurity(list(y)) - len(left) / n * impurity(left) - len(right) / n * impurity(right)
        if dec > best[1] + 1e-15:
            best = (thr, dec)
    return best


def logistic_loss_and_grad(theta, X, y_pm, C):
    """Penalised logistic loss with unpenalised intercept theta[-1], by loops."""
    w, b = theta[:-1], theta[-1]
    loss = 0.0
    grad = [0.0] * len(theta)
    for xi, yi in zip(X, y_pm):
        z = yi * (sum(wj * xj for wj, xj in zip(w, xi)) + b)
        loss += math.log1p(math.exp(-z)) if z > -30 else -z
        s = -yi / (1.0 + math.exp(z))
        for j, xj in enumerate(xi):
            grad[j] += s * xj
        grad[-1] += s
    loss += sum(wj * wj for wj in w) / (2 * C)
    for j, wj in enumerate(w):
        grad[j] += wj / C
    return loss, grad


def largest_remainder(sizes, fraction):
    """Test counts per class; ties in the remainder go to the earlier class."""
    exact = [Fraction(fraction).limit_denominator(10**9) * s for s in sizes]
    floors = [math.floor(e) for e in exact]
    target = round(sum(exact))
    rema = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - floors[i]), i))
    out = list(floors)
    for i in rema[: target - sum(floors)]:
        out[i] += 1
    return out
