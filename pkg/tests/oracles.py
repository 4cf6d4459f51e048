"""Independent brute-force references used by the tests.

Nothing here imports the fast paths under test.
"""

import math

import numpy as np


def binary_entropy(p):
    return -sum(q * math.log(q) for q in (p, 1 - p) if q > 0)


def confusion_f1(pred_super, true_super, n):
    out = {}
    for label, pred, true in (
        ("super", set(pred_super), set(true_super)),
        ("sub", set(range(n)) - set(pred_super), set(range(n)) - set(true_super)),
    ):
        tp = sum(1 for i in range(n) if i in pred and i in true)
        fp = sum(1 for i in range(n) if i in pred and i not in true)
        fn = sum(1 for i in range(n) if i not in pred and i in true)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        out[label] = 2 * p * r / (p + r) if p + r else 0.0
    return out["super"], out["sub"]


def substituted_q(passes, l):
    """q[j][x] by literally building the substituted field for every (x, j)."""
    passes = np.asarray(passes, dtype=float)
    m, n = passes.shape
    mu = passes.mean(axis=0)
    q = np.zeros((m, n), dtype=np.int64)
    tau = np.zeros((m, n))
    for x in range(n):
        for j in range(m):
            f = [mu[i] if i != x else passes[j, x] for i in range(n)]
            t = l * max(f)
            tau[j, x] = t
            q[j, x] = sum(1 for v in f if v > t)
    return q, tau


def implicit_mi_bruteforce(passes, l):
    """Marginal entropy, expected conditional entropy and tie cardinality per point.

    Per-pass distributions are point masses on q_j; both entropy terms are
    evaluated by explicit summation over the observed support.
    """
    passes = np.asarray(passes, dtype=float)
    m, n = passes.shape
    mu = passes.mean(axis=0)
    q, tau = substituted_q(passes, l)
    marg = np.zeros(n)
    cond = np.zeros(n)
    tie = np.zeros(n, dtype=np.int64)
    for x in range(n):
        support = sorted(set(q[:, x].tolist()))
        per_pass = [{s: (1.0 if q[j, x] == s else 0.0) for s in support} for j in range(m)]
        h = 0.0
        for s in support:
            p = sum(pp[s] for pp in per_pass) / m
            if p > 0:
                h -= p * math.log(p)
        marg[x] = h
        c = 0.0
        for pp in per_pass:
            for s in support:
                if pp[s] > 0:
                    c -= pp[s] * math.log(pp[s])
        cond[x] = c / m
        # intersection of all substituted super-level sets
        members = None
        for j in range(m):
            f = [mu[i] if i != x else passes[j, x] for i in range(n)]
            hs = {i for i, v in enumerate(f) if v > tau[j, x]}
            members = hs if members is None else members & hs
        tie[x] = len(members)
    return marg, cond, tie


def implicit_substitution_np(passes, l):
    """Same quantities as :func:`implicit_mi_bruteforce`, one substituted matrix per point.

    For each x the (M, n) field with column x replaced by the passes is
    materialized and thresholded directly, so the cost is O(M n^2) but there
    is no sorting or searching shared with the fast path.
    """
    passes = np.asarray(passes, dtype=float)
    m, n = passes.shape
    mu = passes.mean(axis=0)
    q = np.zeros((m, n), dtype=np.int64)
    marg = np.zeros(n)
    tie = np.zeros(n, dtype=np.int64)
    for x in range(n):
        f = np.tile(mu, (m, 1))
        f[:, x] = passes[:, x]
        tau = l * f.max(axis=1)
        above = f > tau[:, None]
        q[:, x] = above.sum(axis=1)
        _, counts = np.unique(q[:, x], return_counts=True)
        p = counts / m
        marg[x] = -np.sum(p * np.log(p))
        tie[x] = np.all(above, axis=0).sum()
    return q, marg, tie
