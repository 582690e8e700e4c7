"""End-to-end runs of the three ECG experiments, writing reproducible output trees."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .embedding import separability, tsne_embed
from .errors import ExperimentError, ValidationError
from .fragments import FragmentCloud, collect_control_results, jitter_centers, sample_background
from .graph import (IndicatorGraph, find_characteristic_controls, grow_indicator, one_shot_learn,
                    scan_controls, seed_indicator, trigger_sites)
from .signals import (ANNOTATION_SUFFIX, SIGNAL_SUFFIX, SynthEcgParams, load_dataset, save_annotations,
                     save_signal, synth_ecg)
from .svg import emit_line_svg, emit_scatter_svg

log = logging.getLogger(__name__)

# offsets that derive independent streams from the one experiment seed
BACKGROUND_STREAM = 1
JITTER_STREAM = 100
GROW_STREAM = 7


def _default_synth():
    return {"beats": 500, "cycle_jitter_sigma": 20.0, "noise_sigma": 0.02, "seed": 0}


@dataclass
class ExperimentConfig:
    width: int = 40
    u_min: int = -400
    u_max: int = 400
    u_step: int = 5
    plot_us: tuple = (20, 40, 120, 170, 400)
    sigmas: tuple = (0, 2, 4, 8, 16)
    theta: float = 0.8
    exclusion: int = 10
    radius: int = 10
    search_radius: int = 10
    seed: int = 0
    n_fragments: int = 500
    n_background: int = 500
    k: int = 3
    k_neighbors: int = 5
    perplexity: float = 30.0
    tsne_iters: int = 1000
    plots: bool = True
    znorm: bool = False
    u: int | None = None
    depth: int = 1
    data_dir: str | None = None
    synth: dict = field(default_factory=_default_synth)
    out: str = "out"

    def __post_init__(self):
        self.plot_us = tuple(int(u) for u in self.plot_us)
        self.sigmas = tuple(float(s) for s in self.sigmas)
        if self.width <= 0 or self.width % 2:
            raise ValidationError("width must be a positive even integer")
        if self.u_step < 1 or self.u_max < self.u_min:
            raise ValidationError("need u_step ≥ 1 and u_min ≤ u_max")
        if self.n_fragments < 2 or self.n_background < 2:
            raise ValidationError("n_fragments and n_background must be ≥ 2")
        if self.radius < 0 or self.search_radius < 0:
            raise ValidationError("radius must be ≥ 0")
        if any(s < 0 for s in self.sigmas):
            raise ValidationError("jitter sigmas must be ≥ 0")
        if self.depth < 1:
            raise ValidationError("depth must be ≥ 1")
        SynthEcgParams.from_dict(self.synth)

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config field(s): {sorted(unknown)}")
        if "synth" in d:
            d["synth"] = {**_default_synth(), **d["synth"]}
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        from .signals import parse_json
        return cls.from_dict(parse_json(Path(path).read_text(encoding="utf-8")))

    def updated(self, **overrides) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["plot_us"] = list(self.plot_us)
        d["sigmas"] = list(self.sigmas)
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class OutputTree:
    """Collects written files so the manifest can list them."""

    def __init__(self, root, command, config: ExperimentConfig):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.outputs: list[Path] = []
        self.inputs: list[Path] = []

    def path(self, name) -> Path:
        p = self.root / name
        self.outputs.append(p)
        return p

    def write_json(self, name, obj):
        p = self.path(name)
        p.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
        return p

    def write_text(self, name, text):
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        return p

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "version": __version__,
            "backend": _kernels.backend(),
            "config": self.config.to_dict() | {"out": None},
            "config_sha256": self.config.digest(),
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs],
            "outputs": [{"path": p.relative_to(self.root).as_posix(), "sha256": _sha256(p)}
                        for p in self.outputs],
        }
        p = self.root / "manifest.json"
        p.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return p


def load_data(config: ExperimentConfig, tree: OutputTree | None = None):
    """(signals, annotations) from ``data_dir`` or, failing that, the synthetic generator."""
    if config.data_dir:
        data = load_dataset(config.data_dir)
        if tree is not None:
            d = Path(config.data_dir)
            for stem, _, _ in data:
                tree.inputs += [d / (stem + SIGNAL_SUFFIX), d / (stem + ANNOTATION_SUFFIX)]
        return [s for _, s, _ in data], [a for _, _, a in data]
    sig, ann = synth_ecg(SynthEcgParams.from_dict(config.synth))
    return [sig], [ann]


def _prep(cloud: FragmentCloud, config):
    return cloud.znormalized() if config.znorm else cloud


def _subsample(cloud: FragmentCloud, n, seed) -> FragmentCloud:
    if len(cloud) <= n:
        return cloud
    rng = np.random.default_rng(seed)
    return cloud.subset(np.sort(rng.choice(len(cloud), n, replace=False)))


def background_cloud(signals, config) -> FragmentCloud:
    return sample_background(signals, config.n_background, config.width,
                             seed=config.seed + BACKGROUND_STREAM)


def _scatter(tree, name, control: FragmentCloud, background: FragmentCloud, config, title):
    """t-SNE of an equal-size pooled sample, written as SVG plus its embedding JSON."""
    n = min(len(control), len(background), config.n_fragments)
    c = _subsample(control, n, config.seed)
    b = _subsample(background, n, config.seed)
    pooled = np.concatenate([c.values, b.values])
    perp = min(config.perplexity, len(pooled) / 3.0)
    emb = tsne_embed(pooled, perp, config.tsne_iters, config.seed)
    labels = ["control"] * len(c) + ["background"] * len(b)
    emit_scatter_svg(emb, labels, tree.path(name + ".svg"), title)
    tree.write_text(name + ".embedding.json", emb.to_json() + "\n")
    return emb


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_synth(config: ExperimentConfig, out=None):
    tree = OutputTree(out or config.out, "synth", config)
    sig, ann = synth_ecg(SynthEcgParams.from_dict(config.synth))
    tree.write_text("synth" + SIGNAL_SUFFIX, save_signal(sig) + "\n")
    tree.write_text("synth" + ANNOTATION_SUFFIX, save_annotations(ann) + "\n")
    tree.finish()
    return tree


def run_fig4(config: ExperimentConfig, out=None, data=None):
    """Separability of R-peak fragments as their centers are jittered."""
    if not config.sigmas:
        raise ValidationError("jitter sigma list must not be empty")
    tree = OutputTree(out or config.out, "fig4", config)
    signals, anns = data if data is not None else load_data(config, tree)
    bg = _prep(background_cloud(signals, config), config)
    rows = []
    for i, sigma in enumerate(config.sigmas):
        sites = [jitter_centers(a.r_peaks, sigma, config.seed + JITTER_STREAM + 1000 * i + j)
                 for j, a in enumerate(anns)]
        pos = collect_control_results(signals, sites, 0, config.width)
        pos = _prep(_subsample(pos, config.n_fragments, config.seed), config)
        if len(pos) <= config.k:
            raise ExperimentError(f"only {len(pos)} positive fragments at sigma={sigma:g}")
        rep = separability(pos, bg, config.k, config.seed)
        rows.append({"sigma": sigma, "n_positive": len(pos), "skipped": pos.skipped, **rep.to_dict()})
        log.info("fig4 sigma=%g purity=%.3f entropy_drop=%.2f", sigma, rep.nn_purity, rep.entropy_drop)
        if config.plots:
            _scatter(tree, f"fig4_sigma{sigma:g}", pos, bg, config, f"R-peak fragments, jitter sigma={sigma:g}")
    tree.write_json("fig4_table.json", {"rows": rows})
    tree.finish()
    return rows


def _scan(config, signals, anns, bg, graph=None):
    graph = graph or IndicatorGraph()
    a = graph.nodes.get("A") or seed_indicator(graph, signals, anns, bg, config.width)
    prof = scan_controls(graph, a.id, signals, anns, config.u_min, config.u_max, config.u_step,
                         bg, config.k, config.seed, config.width)
    char = find_characteristic_controls(prof, config.theta, config.exclusion)
    return graph, prof, char


def run_scan(config: ExperimentConfig, out=None, data=None, command="scan"):
    tree = OutputTree(out or config.out, command, config)
    signals, anns = data if data is not None else load_data(config, tree)
    bg = background_cloud(signals, config)
    graph, prof, char = _scan(config, signals, anns, bg)
    tree.write_text("profile.json", prof.to_json(indent=1) + "\n")
    tree.write_json("characteristic.json", {"theta": config.theta, "exclusion": config.exclusion,
                                            **char.to_dict()})
    if command == "scan":
        tree.finish()
    return tree, graph, prof, char, signals, anns, bg


def run_fig5(config: ExperimentConfig, out=None, data=None):
    """Control scan from the R-peak indicator; plots for the configured u values."""
    tree, graph, prof, char, signals, anns, bg = run_scan(config, out, data, "fig5")
    log.info("fig5 characteristic=%s maximal_right=%s", char.all, char.maximal_right)
    if config.plots:
        sites = trigger_sites(graph, "A", signals, anns)
        for u in config.plot_us:
            cloud = collect_control_results(signals, sites, u, config.width)
            _scatter(tree, f"fig5_u{u}", cloud, bg, config, f"control u={u}")
    tree.finish()
    return prof, char


def _choose_u(config, signals, anns, bg, graph):
    if config.u is not None:
        return int(config.u)
    _, prof, char = _scan(config, signals, anns, bg, graph)
    if char.maximal_right is None:
        raise ExperimentError("no characteristic control to the right of A; set u explicitly")
    return char.maximal_right


def run_grow(config: ExperimentConfig, out=None, data=None):
    """Seed A, then grow ``depth`` levels, each along the maximal right characteristic control."""
    tree = OutputTree(out or config.out, "grow", config)
    signals, anns = data if data is not None else load_data(config, tree)
    bg = background_cloud(signals, config)
    graph = IndicatorGraph()
    seed_indicator(graph, signals, anns, bg, config.width)
    src, steps = "A", []
    for level in range(config.depth):
        if level == 0:
            u = _choose_u(config, signals, anns, bg, graph)
        else:
            prof = scan_controls(graph, src, signals, anns, config.u_min, config.u_max,
                                 config.u_step, bg, config.k, config.seed, config.width)
            u = find_characteristic_controls(prof, config.theta, config.exclusion).maximal_right
            if u is None:
                log.info("grow: no characteristic control from %s, stopping at depth %d", src, level)
                break
        g = grow_indicator(graph, src, u, signals, anns, bg, config.seed + GROW_STREAM + level,
                           config.k_neighbors, config.radius, config.width)
        steps.append({"from": src, "u": u, "node": g.b_id, "composite": g.composite_id})
        src = g.b_id
    tree.write_text("graph.json", graph.to_json(indent=1) + "\n")
    tree.write_json("grow_steps.json", {"steps": steps})
    tree.finish()
    return graph


def run_fig6(config: ExperimentConfig, out=None, data=None):
    """Grow B at the maximal characteristic control, then one-shot refine it."""
    tree = OutputTree(out or config.out, "fig6", config)
    signals, anns = data if data is not None else load_data(config, tree)
    bg = background_cloud(signals, config)
    graph = IndicatorGraph()
    seed_indicator(graph, signals, anns, bg, config.width)
    u = _choose_u(config, signals, anns, bg, graph)
    g = grow_indicator(graph, "A", u, signals, anns, bg, config.seed + GROW_STREAM,
                       config.k_neighbors, config.radius, config.width)
    b_fragment = g.cloud[g.chosen_index]
    res = one_shot_learn(graph, "A", u, b_fragment, signals, anns, bg, config.search_radius,
                         config.k_neighbors)
    tree.write_text("graph.json", graph.to_json(indent=1) + "\n")
    tree.write_json("template.json", {"u": u, "b": b_fragment.values.tolist(),
                                      "center_template": res.center_template.tolist(),
                                      "collected": len(res.cloud)})
    emit_line_svg(res.center_template, tree.path("fig6_template.svg"),
                  f"center of one-shot cloud, u={u}", reference=b_fragment.values)
    if config.plots:
        _scatter(tree, "fig6_u_cloud", g.cloud, bg, config, f"control u={u}")
        _scatter(tree, "fig6_one_shot", res.cloud, bg, config, "one-shot cloud")
    tree.finish()
    return graph, res, u


def run_plot(control_path, background_path, config: ExperimentConfig, out=None):
    tree = OutputTree(out or config.out, "plot", config)
    control = FragmentCloud.from_json(Path(control_path).read_text(encoding="utf-8"))
    background = FragmentCloud.from_json(Path(background_path).read_text(encoding="utf-8"))
    tree.inputs += [Path(control_path), Path(background_path)]
    if control.width != background.width:
        raise ValidationError("control and background clouds must share one width")
    _scatter(tree, "scatter", control, background, config, control.provenance)
    tree.finish()
    return tree
