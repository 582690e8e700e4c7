import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from saccadic.errors import BoundaryError
from saccadic.fragments import (Control, FragmentCloud, collect_control_results, execute_control,
                                extract_fragment, jitter_centers, sample_background)
from saccadic.signals import Signal

RAMP = Signal(np.arange(100, dtype=float), 500)


def test_extract_ramp():
    f = extract_fragment(RAMP, 50, 40)
    assert f.values.tolist() == list(range(30, 70))
    assert f.values[20] == 50


def test_extract_out_of_bounds():
    with pytest.raises(BoundaryError):
        extract_fragment(RAMP, 10, 40)
    with pytest.raises(BoundaryError):
        extract_fragment(RAMP, 81, 40)
    extract_fragment(RAMP, 80, 40)
    extract_fragment(RAMP, 20, 40)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(50, 300), half=st.integers(1, 20), data=st.data())
def test_extract_is_a_slice(n, half, data):
    x = np.random.default_rng(n).normal(size=n)
    c = data.draw(st.integers(half, n - half))
    f = extract_fragment(Signal(x, 1), c, 2 * half)
    assert all(f.values[i] == x[c - half + i] for i in range(2 * half))


@settings(max_examples=40, deadline=None)
@given(s=st.integers(0, 50), c=st.integers(20, 180))
def test_translation_equivariance(s, c):
    x = np.random.default_rng(9).normal(size=200)
    sig = Signal(x, 1)
    assert np.array_equal(extract_fragment(sig.shifted(s), c + s).values, extract_fragment(sig, c).values)


@settings(max_examples=40, deadline=None)
@given(o=st.integers(150, 300), u1=st.integers(-60, 60), u2=st.integers(-60, 60))
def test_control_additivity(o, u1, u2):
    sig = Signal(np.random.default_rng(0).normal(size=500), 1)
    assert execute_control(sig, o, Control(u1 + u2)) == execute_control(sig, o + u1, Control(u2))
    assert execute_control(sig, o, Control(0)) == extract_fragment(sig, o)


def test_control_120_lands_on_t(clean_ecg):
    sig, ann = clean_ecg
    for r in ann.r_peaks[1:-1]:
        f = execute_control(sig, int(r), Control(120))
        assert abs(f.values[20] - 0.30) < 1e-6


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_jitter_zero_is_identity(seed):
    c = np.arange(0, 1000, 37)
    assert np.array_equal(jitter_centers(c, 0.0, seed), c)


def test_jitter_reproducible_and_scaled():
    c = np.full(10_000, 5000)
    a, b = jitter_centers(c, 4, 11), jitter_centers(c, 4, 11)
    assert np.array_equal(a, b)
    d = jitter_centers(c, 8, 3) - c
    # rounding adds variance 1/12
    assert abs(d.std() - 8) < 0.3


def test_background_bounds_and_determinism():
    sig = Signal(np.random.default_rng(0).normal(size=5000), 500)
    a = sample_background([sig], 500, 40, seed=5)
    assert len(a) == 500 and a.centers.min() >= 20 and a.centers.max() < 4980
    assert np.array_equal(a.values, sample_background([sig], 500, 40, seed=5).values)
    for i in (0, 17, 499):
        c = a.centers[i]
        assert np.array_equal(a.values[i], sig.samples[c - 20:c + 20])


def test_background_uniform():
    sig = Signal(np.zeros(5000), 500)
    c = sample_background([sig], 100_000, 40, seed=2).centers
    counts, _ = np.histogram(c, bins=10, range=(20, 4980))
    assert stats.chisquare(counts).pvalue > 0.001


def test_collect_zero_noise_identical(clean_ecg):
    sig, ann = clean_ecg
    c0 = collect_control_results([sig], [ann.r_peaks], Control(0))
    c120 = collect_control_results([sig], [ann.r_peaks], Control(120))
    for c in (c0, c120):
        assert np.max(np.abs(c.values - c.values[0])) < 1e-9
    assert np.linalg.norm(c0.values[0] - c120.values[0]) > 1.0


def test_collect_skips_out_of_bounds():
    sig = Signal(np.zeros(1000), 500)
    c = collect_control_results([sig], [[5, 300, 600]], Control(-100))
    assert len(c) == 2 and c.skipped == 1


def test_cloud_json_roundtrip(clean_ecg):
    sig, ann = clean_ecg
    c = collect_control_results([sig], [ann.r_peaks], 20)
    back = FragmentCloud.from_json(c.to_json())
    assert np.array_equal(back.values, c.values) and np.array_equal(back.centers, c.centers)
    assert back.provenance == "control:u=20" and back.width == 40
