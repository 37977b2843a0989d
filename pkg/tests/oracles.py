"""Independent reference implementations used as test oracles."""

import numpy as np


def fista_elastic_net(X, y, alpha, l1_ratio, tol=1e-12, max_iter=200_000):
    """Proximal gradient with momentum and adaptive restart.

    Minimizes ||y - Xw||^2 + alpha ((1 - l1) ||w||^2 + l1 ||w||_1).
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    l2 = alpha * (1 - l1_ratio)
    l1 = alpha * l1_ratio
    L = 2 * np.linalg.norm(X, 2) ** 2 + 2 * l2
    w = np.zeros(X.shape[1])
    v = w.copy()
    t = 1.0

    def obj(b):
        r = y - X @ b
        return r @ r + l2 * b @ b + l1 * np.abs(b).sum()

    f_prev = obj(w)
    restarted = False
    stalled = 0
    for _ in range(max_iter):
        g = -2 * X.T @ (y - X @ v) + 2 * l2 * v
        s = v - g / L
        w_new = np.sign(s) * np.maximum(np.abs(s) - l1 / L, 0)
        f_new = obj(w_new)
        if f_new > f_prev:
            if restarted:
                break  # a plain proximal step no longer descends
            t = 1.0
            v = w.copy()
            restarted = True
            continue
        restarted = False
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        v = w_new + (t - 1) / t_new * (w_new - w)
        step = np.linalg.norm(w_new - w)
        stalled = stalled + 1 if f_new >= f_prev else 0
        w, t, f_prev = w_new, t_new, f_new
        if step < tol * (1 + np.linalg.norm(w)) or stalled > 20:
            break
    return w


def bh_bruteforce(p, q):
    """Largest k with p_(k) <= k q / m; reject the k smallest."""
    p = np.asarray(p, float)
    m = p.size
    order = np.argsort(p, kind="stable")
    k = 0
    for i in range(1, m + 1):
        if p[order[i - 1]] <= i * q / m:
            k = i
    out = np.zeros(m, bool)
    out[order[:k]] = True
    return out


def wilcoxon_enumerate(d):
    """Exact two-sided p of the signed-rank W+ by listing all 2^n sign vectors."""
    import itertools

    from scipy.stats import rankdata

    d = np.asarray(d, float)
    d = d[d != 0]
    n = d.size
    ranks = rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    total = ranks.sum()
    stats = np.array([sum(r for r, s in zip(ranks, signs) if s)
                      for signs in itertools.product((0, 1), repeat=n)])
    dev = abs(w_obs - total / 2)
    return min(1.0, float(np.mean(np.abs(stats - total / 2) >= dev - 1e-9)))
