"""Independent dense reference implementations used by the tests.

Nothing here calls into the package, so agreement with it is evidence
rather than tautology.
"""
import numpy as np


def naive_dft2(g):
    """O(n^2) forward DFT by direct summation over the two leading axes."""
    g = np.asarray(g, dtype=complex)
    m, n = g.shape[:2]
    out = np.zeros_like(g)
    rows = np.arange(m)
    cols = np.arange(n)
    for u in range(m):
        for v in range(n):
            phase = np.exp(-2j * np.pi * (u * rows[:, None] / m + v * cols[None, :] / n))
            out[u, v] = np.tensordot(phase, g, axes=([0, 1], [0, 1]))
    return out


def shift(g, dm, dn):
    """shift(g)[p] = g[p - s], written with explicit index arithmetic."""
    m, n = g.shape[:2]
    ii = (np.arange(m) - dm) % m
    jj = (np.arange(n) - dn) % n
    return g[ii][:, jj]


def data_matrix(x):
    """Rows are all cyclic shifts of ``x`` (raveled over every channel)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    m, n = x.shape[:2]
    return np.stack([shift(x, a, b).ravel() for a in range(m) for b in range(n)])


def gram(x):
    X = data_matrix(x)
    return X @ X.T


def dense_alpha_update(K, q, b, alpha_r, alpha_prev, omega, C, delta, beta, sign):
    """Dense solve of the part coefficient update with E = identity.

    ``sign = -1`` subtracts the coupling terms:
    ``(K/2 + (1/(2C) - d w - beta) I)^-1 (q - b e - d w a_r - beta a_prev)``.
    All vectors are spatial and raveled.
    """
    n = K.shape[0]
    A = 0.5 * K + (0.5 / C + sign * delta * omega + sign * beta) * np.eye(n)
    rhs = (q - b) + sign * delta * omega * alpha_r + sign * beta * alpha_prev
    return np.linalg.solve(A, rhs)


def dense_admm(xs, y, alpha_prevs, omegas, C, delta, beta, sign, n_iter):
    """Spatial-domain sweep of the joint solver for the linear kernel.

    Returns the list of per-iteration ``[(alpha_l, b_l)]`` states.
    """
    y = np.asarray(y, dtype=float).ravel()
    Ks = [gram(x) for x in xs]
    alphas, bs = [], []
    for x, K in zip(xs, Ks):
        x3 = x if x.ndim == 3 else x[:, :, None]
        n = K.shape[0]
        if x3.shape[2] == 1:
            rhs = data_matrix(x).T @ y  # X^T y; the pixel and shift spaces coincide for one channel
        else:
            rhs = y
        alphas.append(np.linalg.solve(K + np.eye(n) / C, rhs))
        bs.append(float(y.mean()))
    states = []
    w = np.asarray(omegas, dtype=float)
    for _ in range(n_iter):
        alpha_r = sum(wi * a for wi, a in zip(w, alphas)) / w.sum()
        new_alphas, new_bs = [], []
        for K, a, b, ap, om in zip(Ks, alphas, bs, alpha_prevs, omegas):
            v = np.maximum(y * (0.5 * K @ a + b) - 1.0, 0.0)
            q = y + y * v
            b_new = q.mean()
            new_alphas.append(dense_alpha_update(K, q, b_new, alpha_r, ap, om, C, delta, beta, sign))
            new_bs.append(b_new)
        alphas, bs = new_alphas, new_bs
        states.append(list(zip(alphas, bs)))
    return states

