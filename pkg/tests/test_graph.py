import dataclasses

import numpy as np
import pytest

from conftest import t_bump_window
from saccadic import graph as gm
from saccadic.embedding import SeparabilityReport
from saccadic.errors import ExperimentError, ValidationError
from saccadic.fragments import collect_control_results, extract_fragment, sample_background
from saccadic.graph import (ControlProfile, IndicatorGraph, ProfileEntry, evaluate_composite,
                            find_characteristic_controls, grow_indicator, one_shot_learn,
                            scan_controls, seed_indicator, trigger_sites)
from saccadic.indicator import Indicator, microsaccade_search
from saccadic.signals import (DEFAULT_WAVES, AnnotationSet, Signal, SynthEcgParams, render_beats,
                              synth_ecg)


def setup(sig, ann, n_bg=300, seed=1):
    bg = sample_background([sig], n_bg, seed=seed)
    g = IndicatorGraph()
    seed_indicator(g, [sig], [ann], bg, 40)
    return g, bg


def profile(purities):
    rep = lambda p: SeparabilityReport(p, 0.0, 0.0, 0.0)
    return ControlProfile(tuple(ProfileEntry(u, rep(p), 100, 0) for u, p in sorted(purities.items())))


def test_characteristic_example():
    c = find_characteristic_controls(profile({5: 1.0, 20: 0.9, 120: 0.92, 170: 0.6, 400: 0.55}))
    assert c.all == (20, 120) and c.maximal_right == 120 and c.maximal_left is None


def test_characteristic_empty_and_theta_zero():
    p = profile({-30: 0.5, 20: 0.4, 60: 0.7})
    c = find_characteristic_controls(p, 0.8)
    assert c.all == () and c.maximal_right is None
    c = find_characteristic_controls(p, 0.0)
    assert c.maximal_right == 60 and c.maximal_left == -30


def test_characteristic_pure_function_of_saved_profile():
    p = profile({-40: 0.85, 20: 0.9, 120: 0.92, 170: 0.6})
    again = ControlProfile.from_json(p.to_json())
    assert find_characteristic_controls(again) == find_characteristic_controls(p)


def test_profile_requires_increasing():
    rep = SeparabilityReport(1, 0, 0, 0)
    with pytest.raises(ValidationError):
        ControlProfile((ProfileEntry(5, rep, 1, 0), ProfileEntry(5, rep, 1, 0)))


def test_scan_grid_contract(noisy_ecg):
    sig, ann = noisy_ecg
    g, bg = setup(sig, ann)
    p = scan_controls(g, "A", [sig], [ann], 118, 120, 1, bg)
    assert p.us == [118, 119, 120]
    with pytest.raises(ValidationError):
        scan_controls(g, "nope", [sig], [ann], 0, 1, 1, bg)


def test_scan_synthetic_t_and_far_offset(noisy_ecg):
    sig, ann = noisy_ecg
    g, bg = setup(sig, ann, 500)
    assert scan_controls(g, "A", [sig], [ann], 120, 120, 1, bg).purity(120) >= 0.95
    sj, aj = synth_ecg(SynthEcgParams(beats=200, cycle_jitter_sigma=30, seed=5))
    gj, bgj = setup(sj, aj, 500)
    assert scan_controls(gj, "A", [sj], [aj], 250, 250, 1, bgj).purity(250) < 0.8


def test_locality():
    sig, ann = synth_ecg(SynthEcgParams(beats=250, cycle_jitter_sigma=20, seed=6))
    g, bg = setup(sig, ann, 500)
    p = scan_controls(g, "A", [sig], [ann], -440, 440, 20, bg)
    near = min(e.report.nn_purity for e in p.entries if abs(e.u) <= 20)
    far = max(e.report.nn_purity for e in p.entries if abs(e.u) >= 400)
    assert near >= far


def test_grow_structure_and_determinism(clean_ecg):
    sig, ann = clean_ecg
    graphs = []
    for _ in range(2):
        g, bg = setup(sig, ann)
        n0, e0 = len(g.nodes) + len(g.composites), len(g.edges)
        gr = grow_indicator(g, "A", 120, [sig], [ann], bg, seed=3)
        assert len(g.nodes) + len(g.composites) == n0 + 2 and len(g.edges) == e0 + 1
        assert g.composites[gr.composite_id].edge == gr.edge
        assert g.log[-1]["seed"] == 3 and g.log[-1]["chosen_index"] == gr.chosen_index
        graphs.append(g)
    assert graphs[0] == graphs[1]
    b = graphs[0].nodes[gr.b_id]
    assert np.corrcoef(b.template, t_bump_window())[0, 1] >= 0.99


def test_grow_needs_fragments(clean_ecg):
    sig, ann = clean_ecg
    g, bg = setup(sig, ann)
    with pytest.raises(ExperimentError):
        grow_indicator(g, "A", 100_000, [sig], [ann], bg)


def test_graph_json_roundtrip(clean_ecg):
    sig, ann = clean_ecg
    g, bg = setup(sig, ann)
    grow_indicator(g, "A", 120, [sig], [ann], bg, seed=0)
    back = IndicatorGraph.from_json(g.to_json())
    assert back == g and back.to_json() == g.to_json()
    d = g.to_dict()
    kinds = {n["kind"] for n in d["nodes"]}
    assert "composite" in kinds and set(d["edges"][0]) == {"from", "to", "u", "radius"}


def test_graph_rejects_dangling_edge():
    doc = '{"nodes":[],"edges":[{"from":"A","to":"B","u":1,"radius":0}],"log":[]}'
    with pytest.raises(ValidationError):
        IndicatorGraph.from_json(doc)


def test_graph_append_only(clean_ecg):
    sig, ann = clean_ecg
    g, bg = setup(sig, ann)
    a = g.nodes["A"]
    with pytest.raises(ValidationError):
        g.add_indicator(Indicator("A", a.template, 1.0, 40))
    with pytest.raises(dataclasses.FrozenInstanceError):
        a.threshold = 2.0


def grown(sig, ann, radius=10):
    g, bg = setup(sig, ann)
    gr = grow_indicator(g, "A", 120, [sig], [ann], bg, seed=0, microsaccade_radius=radius)
    return g, gr, bg


def test_composite_true_everywhere_at_zero_noise(clean_ecg):
    sig, ann = clean_ecg
    g, gr, _ = grown(sig, ann)
    ev, skipped = evaluate_composite(g, gr.composite_id, sig, ann.r_peaks)
    assert skipped == [] and len(ev) == len(ann.r_peaks) and all(e.value for e in ev)


def variant(keep_t, t_offset=120, beats=10):
    """Zero-noise ECG; beats where ``keep_t`` is false have no T wave."""
    L = 500
    centers = np.arange(beats) * L + L // 2
    waves = tuple(dataclasses.replace(w, offset=t_offset) if w.name == "T" else w for w in DEFAULT_WAVES)
    no_t = tuple(w for w in waves if w.name != "T")
    keep = np.asarray(keep_t)
    x = render_beats(beats * L, centers[keep], waves, L) + render_beats(beats * L, centers[~keep], no_t, L)
    return Signal(x, 500), AnnotationSet(centers)


def test_composite_t_deleted_in_half(clean_ecg):
    sig, ann = clean_ecg
    g, gr, _ = grown(sig, ann)
    keep = np.arange(10) % 2 == 0
    s2, a2 = variant(keep)
    ev, _ = evaluate_composite(g, gr.composite_id, s2, a2.r_peaks)
    assert [e.value for e in ev] == keep.tolist()


def test_composite_microsaccade_rescues_shift(clean_ecg):
    sig, ann = clean_ecg
    s2, a2 = variant(np.ones(10, bool), t_offset=127)
    g0, gr0, _ = grown(sig, ann, radius=0)
    assert not any(e.value for e in evaluate_composite(g0, gr0.composite_id, s2, a2.r_peaks)[0])
    g10, gr10, _ = grown(sig, ann, radius=10)
    ev = evaluate_composite(g10, gr10.composite_id, s2, a2.r_peaks)[0]
    assert all(e.value for e in ev) and all(e.corrected_center == e.site + 127 for e in ev)


def test_composite_radius_zero_is_plain_trigger(noisy_ecg):
    sig, ann = noisy_ecg
    g, gr, _ = grown(sig, ann, radius=0)
    b = g.nodes[gr.b_id]
    from saccadic.indicator import trigger
    for e in evaluate_composite(g, gr.composite_id, sig, ann.r_peaks)[0][:20]:
        t = trigger(b, extract_fragment(sig, e.site + 120))
        assert (t.fired, t.distance) == (e.value, e.distance)


def test_composite_skips_boundary_sites(clean_ecg):
    sig, ann = clean_ecg
    g, gr, _ = grown(sig, ann)
    _, skipped = evaluate_composite(g, gr.composite_id, sig, [len(sig) + 500])
    assert skipped == [len(sig) + 500]


def test_trigger_sites_recurse(clean_ecg):
    sig, ann = clean_ecg
    g, gr, _ = grown(sig, ann)
    sites = trigger_sites(g, gr.b_id, [sig], [ann])[0]
    assert np.array_equal(sites, ann.r_peaks + 120)
    assert np.array_equal(trigger_sites(g, gr.composite_id, [sig], [ann])[0], sites)


def test_one_shot_zero_noise(clean_ecg):
    sig, ann = clean_ecg
    g, gr, bg = grown(sig, ann)
    b = gr.cloud[0]
    res = one_shot_learn(g, "A", 120, b, [sig], [ann], bg)
    assert len(res.cloud) == len(ann.r_peaks)
    assert np.max(np.abs(res.center_template - b.values)) < 1e-12
    assert np.max(np.abs(res.center_template - t_bump_window())) < 1e-6
    assert res.refined.kind == "refined" and res.refined.id in g.nodes


def test_one_shot_mean_beats_single_exemplar(noisy_ecg):
    sig, ann = noisy_ecg
    g, gr, bg = grown(sig, ann)
    b = gr.cloud[gr.chosen_index]
    res = one_shot_learn(g, "A", 120, b, [sig], [ann], bg)
    t = t_bump_window()
    assert len(res.cloud) > 1
    assert np.corrcoef(res.center_template, t)[0, 1] > np.corrcoef(b.values, t)[0, 1] + 0.1


def test_one_shot_nothing_fires(clean_ecg, monkeypatch):
    sig, ann = clean_ecg
    g, gr, bg = grown(sig, ann)
    far = Indicator("x", np.full(40, 9.0), 1e-9, 40)
    monkeypatch.setattr(gm, "make_point_indicator", lambda *a, **k: far)
    with pytest.raises(ExperimentError) as ei:
        one_shot_learn(g, "A", 120, gr.cloud[0], [sig], [ann], bg)
    assert sum(ei.value.details["histogram"]) == len(ann.r_peaks)
