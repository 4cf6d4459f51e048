"""Pure numpy implementation of the scoring kernels.

Mirrors the compiled ``_kernels`` module function by function; used when the
extension is unavailable or ``HDLSE_PURE_PYTHON`` is set.
"""

import numpy as np


def explicit_counts(passes, h):
    """Number of passes strictly above ``h`` at every pool point."""
    passes = np.asarray(passes, dtype=np.float64)
    return np.count_nonzero(passes > h, axis=0).astype(np.int64)


def top_two(mu):
    """Largest value, its (first) index, and the largest over the other points."""
    mu = np.asarray(mu, dtype=np.float64)
    i1 = int(np.argmax(mu))
    if mu.size == 1:
        return float(mu[0]), i1, -np.inf
    rest = np.delete(mu, i1)
    return float(mu[i1]), i1, float(rest.max())


def implicit_q(passes, mu, l):
    """Substituted super-level-set cardinalities for all passes and points.

    Returns ``(q, tau)``, both shaped like ``passes``: ``tau[j, x]`` is the
    threshold obtained when the mean field is kept everywhere except at
    ``x``, which takes the pass value, and ``q[j, x]`` counts points above it.
    """
    passes = np.asarray(passes, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    m, n = passes.shape
    best, arg, second = top_two(mu)
    others_max = np.full(n, best)
    others_max[arg] = second
    tau = l * np.maximum(passes, others_max[None, :])
    s = np.sort(mu)
    # thresholds set by the mean field take one of two values; search only the rest
    # with n == 1 the runner-up is -inf (0 * -inf is nan) but every pass exceeds it
    with np.errstate(invalid="ignore"):
        base = n - np.searchsorted(s, l * np.array([best, second]), side="right")
    above_all = np.broadcast_to(np.where(np.arange(n) == arg, base[1], base[0]), (m, n)).copy()
    raised = passes > others_max[None, :]
    above_all[raised] = n - np.searchsorted(s, tau[raised], side="right")
    q = above_all - (mu[None, :] > tau) + (passes > tau)
    return q.astype(np.int64), tau


def _column_entropy(q):
    m, n = q.shape
    qs = np.sort(q, axis=0)
    start = np.ones_like(qs, dtype=bool)
    start[1:] = qs[1:] != qs[:-1]
    run_id = np.cumsum(start, axis=0) - 1
    flat = run_id + (np.arange(n) * m)[None, :]
    # row x of occ holds the run lengths of column x, zero-padded to m slots
    occ = np.bincount(flat.T.ravel(), minlength=m * n).reshape(n, m)
    p = occ / m
    with np.errstate(divide="ignore", invalid="ignore"):
        pl = np.where(occ > 0, p * np.log(p), 0.0)
    return -pl.sum(axis=1)


def implicit_scores(passes, mu, l):
    """Plug-in entropy of the cardinality samples and the tie-break cardinality.

    Returns ``(entropy, tie_cards)``, both of length ``n``.
    """
    passes = np.asarray(passes, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    n = mu.size
    q, tau = implicit_q(passes, mu, l)
    entropy = _column_entropy(q)
    tmax = tau.max(axis=0)
    s = np.sort(mu)
    tie = n - np.searchsorted(s, tmax, side="right") - (mu > tmax)
    tie = tie + (np.min(passes - tau, axis=0) > 0)
    return entropy, tie.astype(np.int64)
