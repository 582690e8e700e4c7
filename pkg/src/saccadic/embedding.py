"""PCA, exact t-SNE, k-NN entropy and nearest-neighbour separability.

Everything that drives a decision (purity, entropy) works in raw fragment
space.  Embeddings exist only to be drawn.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import digamma, gammaln

from . import _kernels
from .errors import ValidationError
from .fragments import FragmentCloud


def _as_points(x):
    if isinstance(x, FragmentCloud):
        return x.values
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return a


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def project(self, x) -> np.ndarray:
        return pca_project(self, x)

    def reconstruct(self, z) -> np.ndarray:
        return np.asarray(z) @ self.components + self.mean


def pca_fit(cloud, d: int) -> PcaModel:
    X = _as_points(cloud)
    n, w = X.shape
    if not (1 <= d <= w) or n < d:
        raise ValidationError(f"need cloud size ≥ d ≥ 1 and d ≤ width (n={n}, d={d}, width={w})")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:d]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T.copy()
    for row in comps:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return PcaModel(mean, comps, evals)


def pca_project(model: PcaModel, cloud) -> np.ndarray:
    X = _as_points(cloud)
    if X.shape[1] != model.mean.shape[0]:
        raise ValidationError(f"width mismatch: model {model.mean.shape[0]}, data {X.shape[1]}")
    return (X - model.mean) @ model.components.T


# ---------------------------------------------------------------------------
# t-SNE (exact)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Embedding2D:
    points: np.ndarray
    final_kl: float
    seed: int
    initial_kl: float = float("nan")

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "final_kl": float(self.final_kl),
                "points": self.points.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)

    @classmethod
    def from_json(cls, doc) -> "Embedding2D":
        from .signals import parse_json
        d = parse_json(doc)
        pts = np.asarray(d["points"], dtype=np.float64).reshape(-1, 2)
        return cls(pts, float(d["final_kl"]), int(d["seed"]))


def joint_affinities(X, perplexity: float):
    """Symmetric t-SNE input affinities; also returns the conditional rows."""
    D = _kernels.pairwise_sqdist(X)
    cond, _ = _kernels.conditional_affinities(D, float(perplexity))
    n = D.shape[0]
    P = (cond + cond.T) / (2.0 * n)
    return P, cond


def tsne_embed(cloud, perplexity: float = 30.0, iters: int = 1000, seed: int = 0, *,
               learning_rate: float = 200.0, exaggeration: float = 12.0,
               exaggeration_iters: int = 250, momentum_switch: int = 250,
               init_std: float = 1e-4) -> Embedding2D:
    X = _as_points(cloud)
    n = X.shape[0]
    if n < 3 * perplexity:
        raise ValidationError(f"t-SNE needs at least 3·perplexity = {3 * perplexity:g} points, got {n}")
    P, _ = joint_affinities(X, perplexity)
    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, init_std, (n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    _, kl0 = _kernels.tsne_gradient(P, Y, 1.0)
    for it in range(iters):
        ex = exaggeration if it < exaggeration_iters else 1.0
        mom = 0.5 if it < momentum_switch else 0.8
        grad, _ = _kernels.tsne_gradient(P, Y, ex, False)
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.clip(gains, 0.01, None, out=gains)
        update = mom * update - learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    _, kl = _kernels.tsne_gradient(P, Y, 1.0)
    return Embedding2D(Y, float(kl), int(seed), float(kl0))


# ---------------------------------------------------------------------------
# Entropy and separability
# ---------------------------------------------------------------------------

DISTANCE_FLOOR = 1e-12


def log_unit_ball_volume(m: int) -> float:
    return (m / 2.0) * np.log(np.pi) - gammaln(m / 2.0 + 1.0)


def knn_entropy(points, k: int = 3, full_output: bool = False):
    """Kozachenko-Leonenko differential entropy estimate in nats.

    With ``full_output`` returns ``(entropy, degenerate)`` where ``degenerate``
    says some k-th neighbour distance was zero and got floored.
    """
    X = _as_points(points)
    n, m = X.shape
    if not (1 <= k < n):
        raise ValidationError(f"need n > k ≥ 1 (n={n}, k={k})")
    D = _kernels.pairwise_sqdist(X)
    np.fill_diagonal(D, np.inf)
    eps = np.sqrt(np.partition(D, k - 1, axis=1)[:, k - 1])
    degenerate = bool(np.any(eps < DISTANCE_FLOOR))
    eps = np.maximum(eps, DISTANCE_FLOOR)
    h = float(digamma(n) - digamma(k) + log_unit_ball_volume(m) + m * np.mean(np.log(eps)))
    return (h, degenerate) if full_output else h


def _equalize(a, b, seed):
    """Subsample the larger set (seeded) so both have the same size."""
    na, nb = len(a), len(b)
    if na == nb:
        return a, b
    rng = np.random.default_rng(seed)
    if na > nb:
        return a[np.sort(rng.choice(na, nb, replace=False))], b
    return a, b[np.sort(rng.choice(nb, na, replace=False))]


def nn_purity(cloud_a, cloud_b, seed: int = 0) -> float:
    """Fraction of pooled points whose nearest other point carries the same label."""
    A, B = _as_points(cloud_a), _as_points(cloud_b)
    if len(A) == 0 or len(B) == 0:
        raise ValidationError("both clouds must be non-empty")
    A, B = _equalize(A, B, seed)
    X = np.concatenate([A, B])
    labels = np.r_[np.zeros(len(A), dtype=np.int8), np.ones(len(B), dtype=np.int8)]
    D = _kernels.pairwise_sqdist(X)
    np.fill_diagonal(D, np.inf)
    nn = np.argmin(D, axis=1)  # first minimum, i.e. lowest index on ties
    return float(np.mean(labels[nn] == labels))


@dataclass(frozen=True)
class SeparabilityReport:
    nn_purity: float
    entropy_nats: float
    entropy_background_nats: float
    entropy_drop: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def separability(control_cloud: FragmentCloud, background_cloud: FragmentCloud, k: int = 3,
                 seed: int = 0) -> SeparabilityReport:
    if control_cloud.width != background_cloud.width:
        raise ValidationError("control and background clouds must share one width")
    A, B = _equalize(control_cloud.values, background_cloud.values, seed)
    purity = nn_purity(A, B)
    h, deg_a = knn_entropy(A, k, full_output=True)
    hb, deg_b = knn_entropy(B, k, full_output=True)
    return SeparabilityReport(purity, h, hb, hb - h, deg_a or deg_b)
