"""Hot inner loops, each in a numba and a pure-numpy flavour.

The numba versions are used when numba imports and ``SACCADE_NUMBA`` is not
set to ``0``.  Distance kernels accumulate over dimensions in the same
sequential order in both flavours, so their outputs are bitwise identical.
The t-SNE kernels agree only to rounding.
"""
import os

import numpy as np

MACHINE_EPSILON = np.finfo(np.double).eps


# ---------------------------------------------------------------------------
# numpy flavour
# ---------------------------------------------------------------------------

def pairwise_sqdist_np(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, m = X.shape
    D = np.zeros((n, n))
    for j in range(m):
        col = X[:, j]
        diff = col[:, None] - col[None, :]
        D += diff * diff
    return D


def window_sqdist_np(x, template, starts):
    """Squared distance between ``template`` and ``x[s:s+W]`` for each start."""
    x = np.asarray(x, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    d = np.zeros(starts.shape[0])
    for i in range(template.shape[0]):
        diff = x[starts + i] - template[i]
        d += diff * diff
    return d


def row_sqdist_np(X, v):
    X = np.asarray(X, dtype=np.float64)
    d = np.zeros(X.shape[0])
    for j in range(X.shape[1]):
        diff = X[:, j] - v[j]
        d += diff * diff
    return d


def conditional_affinities_np(D, perplexity, tol=1e-5, max_steps=200):
    """Row-wise Gaussian affinities whose entropy matches log(perplexity).

    All rows are bisected in lockstep; converged rows stop moving.
    Returns (P, achieved_entropy).
    """
    n = D.shape[0]
    target = np.log(perplexity)
    Dm = D.astype(np.float64, copy=True)
    np.fill_diagonal(Dm, np.inf)
    Dm -= Dm.min(axis=1, keepdims=True)
    np.fill_diagonal(Dm, 0.0)
    off = ~np.eye(n, dtype=bool)

    beta = np.ones(n)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    P = np.zeros_like(Dm)
    H = np.zeros(n)
    for _ in range(max_steps):
        E = np.exp(-Dm * beta[:, None]) * off
        s = E.sum(axis=1)
        s = np.where(s == 0.0, 1e-8, s)
        Pn = E / s[:, None]
        Hn = np.log(s) + beta * (Dm * Pn).sum(axis=1)
        active = ~done
        P[active] = Pn[active]
        H[active] = Hn[active]
        diff = Hn - target
        done |= np.abs(diff) <= tol
        if done.all():
            break
        up = active & ~done & (diff > 0)
        down = active & ~done & (diff <= 0)
        lo[up] = beta[up]
        beta[up] = np.where(np.isinf(hi[up]), beta[up] * 2.0, (beta[up] + hi[up]) / 2.0)
        hi[down] = beta[down]
        beta[down] = np.where(np.isinf(lo[down]), beta[down] / 2.0, (beta[down] + lo[down]) / 2.0)
    return P, H


def tsne_gradient_np(P, Y, exaggeration, compute_kl=True):
    """Gradient of KL(P||Q) for the Student-t kernel, and the KL itself.

    The KL is always computed against the unexaggerated P (NaN when skipped).
    """
    diff = Y[:, None, :] - Y[None, :, :]
    num = 1.0 / (1.0 + (diff ** 2).sum(axis=2))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), MACHINE_EPSILON)
    W = (exaggeration * P - Q) * num
    grad = 4.0 * (W[:, :, None] * diff).sum(axis=1)
    if not compute_kl:
        return grad, np.nan
    off = ~np.eye(P.shape[0], dtype=bool)
    Pm = np.maximum(P, MACHINE_EPSILON)
    kl = float((P * np.log(Pm / Q))[off].sum())
    return grad, kl


# ---------------------------------------------------------------------------
# numba flavour
# ---------------------------------------------------------------------------

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

if HAS_NUMBA:

    @njit(cache=True)
    def pairwise_sqdist_nb(X):
        n, m = X.shape
        D = np.zeros((n, n))
        for i in range(n):
            for l in range(i + 1, n):
                s = 0.0
                for j in range(m):
                    diff = X[i, j] - X[l, j]
                    s += diff * diff
                D[i, l] = s
                D[l, i] = s
        return D

    @njit(cache=True)
    def window_sqdist_nb(x, template, starts):
        w = template.shape[0]
        d = np.zeros(starts.shape[0])
        for k in range(starts.shape[0]):
            s0 = starts[k]
            s = 0.0
            for i in range(w):
                diff = x[s0 + i] - template[i]
                s += diff * diff
            d[k] = s
        return d

    @njit(cache=True)
    def row_sqdist_nb(X, v):
        n, m = X.shape
        d = np.zeros(n)
        for i in range(n):
            s = 0.0
            for j in range(m):
                diff = X[i, j] - v[j]
                s += diff * diff
            d[i] = s
        return d

    @njit(cache=True)
    def conditional_affinities_nb(D, perplexity, tol=1e-5, max_steps=200):
        n = D.shape[0]
        target = np.log(perplexity)
        P = np.zeros((n, n))
        H = np.zeros(n)
        row = np.empty(n)
        for i in range(n):
            dmin = np.inf
            for j in range(n):
                if j != i and D[i, j] < dmin:
                    dmin = D[i, j]
            for j in range(n):
                row[j] = D[i, j] - dmin
            beta = 1.0
            lo = -np.inf
            hi = np.inf
            for _ in range(max_steps):
                s = 0.0
                for j in range(n):
                    if j != i:
                        P[i, j] = np.exp(-row[j] * beta)
                        s += P[i, j]
                if s == 0.0:
                    s = 1e-8
                sd = 0.0
                for j in range(n):
                    P[i, j] /= s
                    sd += row[j] * P[i, j]
                h = np.log(s) + beta * sd
                H[i] = h
                diff = h - target
                if abs(diff) <= tol:
                    break
                if diff > 0.0:
                    lo = beta
                    beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
                else:
                    hi = beta
                    beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
        return P, H

    @njit(cache=True)
    def tsne_gradient_nb(P, Y, exaggeration, compute_kl=True):
        n = Y.shape[0]
        num = np.zeros((n, n))
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                d0 = Y[i, 0] - Y[j, 0]
                d1 = Y[i, 1] - Y[j, 1]
                q = 1.0 / (1.0 + d0 * d0 + d1 * d1)
                num[i, j] = q
                num[j, i] = q
                total += 2.0 * q
        eps = 2.220446049250313e-16
        grad = np.zeros((n, 2))
        kl = 0.0
        for i in range(n):
            g0 = 0.0
            g1 = 0.0
            for j in range(n):
                if j == i:
                    continue
                q = max(num[i, j] / total, eps)
                m = (exaggeration * P[i, j] - q) * num[i, j]
                g0 += m * (Y[i, 0] - Y[j, 0])
                g1 += m * (Y[i, 1] - Y[j, 1])
                if compute_kl:
                    kl += P[i, j] * np.log(max(P[i, j], eps) / q)
            grad[i, 0] = 4.0 * g0
            grad[i, 1] = 4.0 * g1
        if not compute_kl:
            kl = np.nan
        return grad, kl


def _use_numba():
    return HAS_NUMBA and os.environ.get("SACCADE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = _use_numba()

if USE_NUMBA:
    _pairwise_sqdist = pairwise_sqdist_nb
    _window_sqdist = window_sqdist_nb
    _row_sqdist = row_sqdist_nb
    conditional_affinities = conditional_affinities_nb
    tsne_gradient = tsne_gradient_nb
else:
    _pairwise_sqdist = pairwise_sqdist_np
    _window_sqdist = window_sqdist_np
    _row_sqdist = row_sqdist_np
    conditional_affinities = conditional_affinities_np
    tsne_gradient = tsne_gradient_np


def pairwise_sqdist(X):
    return _pairwise_sqdist(np.ascontiguousarray(X, dtype=np.float64))


def window_sqdist(x, template, starts):
    return _window_sqdist(np.ascontiguousarray(x, dtype=np.float64),
                          np.ascontiguousarray(template, dtype=np.float64),
                          np.ascontiguousarray(starts, dtype=np.int64))


def row_sqdist(X, v):
    return _row_sqdist(np.ascontiguousarray(X, dtype=np.float64),
                       np.ascontiguousarray(v, dtype=np.float64))


def backend():
    return "numba" if USE_NUMBA else "numpy"
