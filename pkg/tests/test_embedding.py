import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree
from scipy.special import digamma, gamma

from saccadic import _kernels
from saccadic.embedding import (Embedding2D, joint_affinities, knn_entropy, nn_purity, pca_fit,
                                pca_project, separability, tsne_embed)
from saccadic.errors import ValidationError
from saccadic.fragments import FragmentCloud, collect_control_results, sample_background


def kl_oracle(X, k):
    """Kozachenko-Leonenko via a KD tree and the closed-form ball volume."""
    n, m = X.shape
    eps = cKDTree(X).query(X, k + 1)[0][:, k]
    vm = np.pi ** (m / 2) / gamma(m / 2 + 1)
    return digamma(n) - digamma(k) + np.log(vm) + m * np.mean(np.log(eps))


# -- PCA ----------------------------------------------------------------

def test_pca_line():
    t = np.linspace(-3, 3, 50)
    m = pca_fit(np.c_[t, 2 * t], 1)
    assert np.allclose(m.components[0], np.array([1, 2]) / np.sqrt(5), atol=1e-12)
    assert m.explained_variance.shape == (1,)
    z = pca_project(m, np.c_[t, 2 * t])[:, 0]
    assert np.all(np.diff(z) > 0)
    assert np.allclose(pca_project(m, m.mean[None, :]), 0)


def test_pca_isotropic():
    X = np.random.default_rng(0).normal(size=(10_000, 2))
    v = pca_fit(X, 2).explained_variance
    assert abs(v[0] / v[1] - 1) < 0.05


def test_pca_projection_idempotent_and_isometric():
    X = np.random.default_rng(1).normal(size=(200, 6)) @ np.diag([5, 3, 2, 1, .5, .1])
    m = pca_fit(X, 3)
    z = m.project(X)
    assert np.max(np.abs(m.project(m.reconstruct(z)) - z)) < 1e-9
    full = pca_fit(X, 6)
    zf = full.project(X)
    assert abs(np.linalg.norm(zf[3] - zf[8]) - np.linalg.norm(X[3] - X[8])) < 1e-9
    G = full.components @ full.components.T
    assert np.max(np.abs(G - np.eye(6))) < 1e-8
    assert np.all(np.diff(full.explained_variance) <= 0)
    assert full.explained_variance.sum() <= np.var(X, axis=0, ddof=1).sum() + 1e-9


def test_pca_degenerate_and_errors():
    m = pca_fit(np.ones((10, 4)), 2)
    assert np.all(m.explained_variance == 0)
    with pytest.raises(ValidationError):
        pca_fit(np.ones((10, 4)), 5)
    with pytest.raises(ValidationError):
        pca_project(m, np.ones((3, 5)))


# -- t-SNE --------------------------------------------------------------

def test_affinity_rows_and_perplexity():
    X = np.random.default_rng(2).normal(size=(150, 10))
    _, cond = joint_affinities(X, 30.0)
    assert np.max(np.abs(cond.sum(axis=1) - 1)) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        H = -np.nansum(np.where(cond > 0, cond * np.log(cond), 0), axis=1)
    assert np.max(np.abs(np.exp(H) - 30.0)) < 1e-3 * 30 or np.max(np.abs(H - np.log(30))) < 1e-3


@pytest.mark.slow
def test_tsne_two_blobs():
    rng = np.random.default_rng(3)
    X = np.r_[rng.normal(size=(100, 5)), rng.normal(size=(100, 5)) + 100]
    e = tsne_embed(X, perplexity=30, iters=500, seed=4)
    idx = cKDTree(e.points).query(e.points, 6)[1][:, 1:]
    lab = np.r_[np.zeros(100), np.ones(100)]
    assert np.all(lab[idx] == lab[:, None])
    assert e.final_kl <= e.initial_kl


def test_tsne_deterministic_and_bound():
    X = np.random.default_rng(5).normal(size=(40, 3))
    a = tsne_embed(X, perplexity=10, iters=60, seed=1)
    b = tsne_embed(X, perplexity=10, iters=60, seed=1)
    assert np.array_equal(a.points, b.points) and a.points.shape == (40, 2)
    back = Embedding2D.from_json(a.to_json())
    assert np.array_equal(back.points, a.points) and back.seed == 1
    with pytest.raises(ValidationError):
        tsne_embed(X, perplexity=30)


# -- entropy ------------------------------------------------------------

def test_entropy_matches_independent_route():
    X = np.random.default_rng(6).normal(size=(400, 3))
    assert knn_entropy(X, 3) == pytest.approx(kl_oracle(X, 3), abs=1e-10)


def test_entropy_uniform():
    vals = [knn_entropy(np.random.default_rng(s).uniform(size=2000), 3) for s in range(5)]
    assert abs(np.mean(vals)) < 0.1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.floats(0.01, 100), m=st.integers(1, 6))
def test_entropy_scaling_and_translation(seed, s, m):
    X = np.random.default_rng(seed).normal(size=(60, m))
    h = knn_entropy(X, 3)
    assert knn_entropy(s * X, 3) == pytest.approx(h + m * np.log(s), abs=1e-9)
    assert abs(knn_entropy(X + 3.0, 3) - h) < 1e-9


def test_entropy_degenerate_flag():
    X = np.zeros((20, 4))
    X[10:] = 1.0
    h, deg = knn_entropy(X, 3, full_output=True)
    assert deg and np.isfinite(h)
    with pytest.raises(ValidationError):
        knn_entropy(X[:3], 3)


# -- purity -------------------------------------------------------------

def test_purity_far_shift_is_one():
    a = np.random.default_rng(7).normal(size=(100, 4))
    assert nn_purity(a, a + 1000.0) == 1.0


def test_purity_matches_kdtree_oracle():
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=(300, 5)), rng.normal(size=(300, 5)) + 0.5
    X = np.r_[a, b]
    lab = np.r_[np.zeros(300), np.ones(300)]
    nn = cKDTree(X).query(X, 2)[1][:, 1]
    assert nn_purity(a, b) == pytest.approx(np.mean(lab[nn] == lab), abs=1e-15)


def test_purity_tie_lowest_index():
    # point 0 of b is equidistant from a[0] (index 0) and b[1] (index 3)
    a = np.array([[0.0], [10.0]])
    b = np.array([[1.0], [2.0]])
    # pooled 0, 10, 1, 2: the point at 1 is 1 away from index 0 and index 3, takes index 0
    # so only the point at 2 agrees with its neighbour
    assert nn_purity(a, b) == 0.25


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), n=st.integers(2, 60))
def test_purity_bounded_symmetric(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    p = nn_purity(a, b)
    assert 0.0 <= p <= 1.0 and p == nn_purity(b, a) == nn_purity(a, b)


def test_purity_same_distribution():
    ps = [nn_purity(*np.random.default_rng(s).normal(size=(2, 500, 40))) for s in range(5)]
    assert abs(np.mean(ps) - 0.4995) < 0.05


def test_purity_unequal_sizes_subsampled():
    rng = np.random.default_rng(9)
    p1 = nn_purity(rng.normal(size=(50, 3)), rng.normal(size=(80, 3)) + 100, seed=3)
    assert p1 == 1.0
    with pytest.raises(ValidationError):
        nn_purity(np.zeros((0, 3)), np.zeros((4, 3)))


# -- separability -------------------------------------------------------

def test_separability_identical_cloud(clean_ecg):
    sig, ann = clean_ecg
    pos = collect_control_results([sig], [ann.r_peaks], 0)
    bg = FragmentCloud(5 + 0.1 * np.random.default_rng(1).normal(size=(len(pos), 40)), np.arange(len(pos)), 40)
    r = separability(pos, bg)
    assert r.nn_purity == 1.0 and r.degenerate
    assert r.entropy_drop == r.entropy_background_nats - r.entropy_nats


def test_separability_self_comparison():
    rng = np.random.default_rng(10)
    c = FragmentCloud(rng.normal(size=(600, 8)), np.arange(600), 8)
    a, b = c.subset(np.arange(300)), c.subset(np.arange(300, 600))
    r = separability(a, b)
    assert abs(r.nn_purity - 0.5) < 0.06 and abs(r.entropy_drop) < 0.5


def test_separability_t_wave_cloud(noisy_ecg):
    sig, ann = noisy_ecg
    c = collect_control_results([sig], [ann.r_peaks], 120)
    bg = sample_background([sig], 500, seed=2)
    assert separability(c, bg).nn_purity >= 0.95


def test_backend_is_known():
    assert _kernels.backend() in ("numba", "numpy")
