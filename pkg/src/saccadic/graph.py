"""Indicator-graph memory: control scans, growth of new indicators, one-shot refinement.

Nodes are indicators, edges are controls.  An edge ``A -u-> B`` together
with its composite node ``AuB`` asserts that B fires near ``site + u`` for
every site where A fired.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embedding import SeparabilityReport, separability
from .errors import BoundaryError, ExperimentError, ValidationError
from .fragments import Control, FragmentCloud, collect_control_results, _check_width
from .indicator import (DEFAULT_RADIUS, Indicator, fit_initial_indicator,
                        make_point_indicator, microsaccade_scan, microsaccade_search)
from .signals import Signal, parse_json

log = logging.getLogger(__name__)

DEFAULT_THETA = 0.8
DEFAULT_EXCLUSION = 10


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    u: int
    radius: int

    def to_dict(self):
        return {"from": self.src, "to": self.dst, "u": self.u, "radius": self.radius}


@dataclass(frozen=True)
class CompositeIndicator:
    id: str
    edge: int

    def to_dict(self):
        return {"id": self.id, "kind": "composite", "edge": self.edge}


class IndicatorGraph:
    """Append-only store of indicators (nodes), controls (edges) and composites."""

    def __init__(self):
        self.nodes: dict[str, Indicator] = {}
        self.composites: dict[str, CompositeIndicator] = {}
        self.edges: list[Edge] = []
        self.log: list[dict] = []

    def __contains__(self, node_id):
        return node_id in self.nodes or node_id in self.composites

    def __eq__(self, other):
        if not isinstance(other, IndicatorGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def _fresh_id(self, base):
        if base not in self:
            return base
        i = 2
        while f"{base}#{i}" in self:
            i += 1
        return f"{base}#{i}"

    def add_indicator(self, ind: Indicator, op: str = "add", **params) -> Indicator:
        if ind.id in self:
            raise ValidationError(f"duplicate node id {ind.id!r}")
        self.nodes[ind.id] = ind
        self.log.append({"op": op, "node": ind.id, **params})
        return ind

    def add_edge(self, src: str, dst: str, u: int, radius: int) -> int:
        for nid in (src, dst):
            if nid not in self:
                raise ValidationError(f"unknown node {nid!r}")
        self.edges.append(Edge(src, dst, int(u), int(radius)))
        return len(self.edges) - 1

    def add_composite(self, edge_index: int, id: str | None = None) -> CompositeIndicator:
        e = self.edges[edge_index]
        cid = self._fresh_id(id or f"{e.src}{e.u:+d}{e.dst}")
        c = CompositeIndicator(cid, edge_index)
        self.composites[cid] = c
        return c

    def indicator(self, node_id: str) -> Indicator:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise ValidationError(f"unknown indicator {node_id!r}") from None

    def incoming(self, node_id: str) -> list[int]:
        return [i for i, e in enumerate(self.edges) if e.dst == node_id]

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        nodes = [n.to_dict() for n in self.nodes.values()] + \
            [c.to_dict() for c in self.composites.values()]
        return {"nodes": nodes, "edges": [e.to_dict() for e in self.edges], "log": self.log}

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False, sort_keys=True)

    @classmethod
    def from_json(cls, doc) -> "IndicatorGraph":
        d = parse_json(doc)
        g = cls()
        try:
            for e in d["edges"]:
                g.edges.append(Edge(e["from"], e["to"], int(e["u"]), int(e["radius"])))
            for n in d["nodes"]:
                if n.get("kind") == "composite":
                    g.composites[n["id"]] = CompositeIndicator(n["id"], int(n["edge"]))
                else:
                    g.nodes[n["id"]] = Indicator.from_dict(n)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed graph document: {exc}") from None
        g.log = list(d.get("log", []))
        for e in g.edges:
            if e.src not in g or e.dst not in g:
                raise ValidationError(f"edge {e} references a missing node")
        for c in g.composites.values():
            if not 0 <= c.edge < len(g.edges):
                raise ValidationError(f"composite {c.id!r} references missing edge {c.edge}")
        return g


# ---------------------------------------------------------------------------
# Trigger sites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompositeEvaluation:
    site: int
    value: bool
    corrected_center: int
    distance: float


def evaluate_composite(graph: IndicatorGraph, composite_id: str, signal: Signal,
                       a_trigger_sites) -> tuple[list[CompositeEvaluation], list[int]]:
    """Test ``AuB`` at each A-site: microsaccade search for B around ``site + u``.

    Returns the evaluations and the sites skipped because no window fits.
    """
    try:
        comp = graph.composites[composite_id]
    except KeyError:
        raise ValidationError(f"unknown composite {composite_id!r}") from None
    e = graph.edges[comp.edge]
    b = graph.indicator(e.dst)
    out, skipped = [], []
    for site in np.asarray(a_trigger_sites, dtype=np.int64):
        try:
            r = microsaccade_search(b, signal, int(site) + e.u, e.radius)
        except BoundaryError:
            skipped.append(int(site))
            continue
        out.append(CompositeEvaluation(int(site), r.fired, r.corrected_center, r.distance))
    return out, skipped


def trigger_sites(graph: IndicatorGraph, node_id: str, signals: Sequence[Signal], annotations):
    """Per-signal coordinates where a node fired.

    The teacher-seeded indicator fires at the annotated R-peaks.  Any other node
    fires at the corrected B centers of its incoming edge, evaluated from the
    source's own sites.
    """
    if node_id in graph.nodes and graph.nodes[node_id].kind == "seeded-from-teacher":
        return [np.asarray(a.r_peaks if hasattr(a, "r_peaks") else a, dtype=np.int64)
                for a in annotations]
    if node_id in graph.composites:
        edge_index = graph.composites[node_id].edge
    else:
        incoming = graph.incoming(node_id)
        if not incoming:
            raise ValidationError(f"node {node_id!r} has no incoming edge to locate its triggers")
        edge_index = incoming[0]
    e = graph.edges[edge_index]
    src_sites = trigger_sites(graph, e.src, signals, annotations)
    b = graph.indicator(e.dst)
    out = []
    for sig, sites in zip(signals, src_sites):
        fired = []
        for s in sites:
            try:
                r = microsaccade_search(b, sig, int(s) + e.u, e.radius)
            except BoundaryError:
                continue
            if r.fired:
                fired.append(r.corrected_center)
        out.append(np.asarray(fired, dtype=np.int64))
    return out


# ---------------------------------------------------------------------------
# Control scanning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileEntry:
    u: int
    report: SeparabilityReport
    cloud_size: int
    skipped: int

    def to_dict(self):
        return {"u": self.u, "report": self.report.to_dict(), "cloud_size": self.cloud_size,
                "skipped": self.skipped}


@dataclass(frozen=True)
class ControlProfile:
    entries: tuple[ProfileEntry, ...]
    indicator_id: str = ""

    def __post_init__(self):
        us = [e.u for e in self.entries]
        if any(b <= a for a, b in zip(us, us[1:])):
            raise ValidationError("profile u values must be strictly increasing")

    @property
    def us(self):
        return [e.u for e in self.entries]

    def purity(self, u):
        for e in self.entries:
            if e.u == u:
                return e.report.nn_purity
        raise KeyError(u)

    def to_dict(self):
        return {"indicator": self.indicator_id, "entries": [e.to_dict() for e in self.entries]}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_json(cls, doc):
        d = parse_json(doc)
        return cls(tuple(ProfileEntry(int(e["u"]), SeparabilityReport(**e["report"]),
                                      int(e["cloud_size"]), int(e["skipped"]))
                         for e in d["entries"]), d.get("indicator", ""))


def scan_controls(graph: IndicatorGraph, indicator_id: str, signals: Sequence[Signal], annotations,
                  u_min: int, u_max: int, step: int, background: FragmentCloud, k: int = 3,
                  seed: int = 0, width: int | None = None) -> ControlProfile:
    if step < 1 or u_max < u_min:
        raise ValidationError("need step ≥ 1 and u_min ≤ u_max")
    width = _check_width(width or background.width)
    if indicator_id not in graph:
        raise ValidationError(f"unknown indicator {indicator_id!r}")
    sites = trigger_sites(graph, indicator_id, signals, annotations)
    entries = []
    for u in range(int(u_min), int(u_max) + 1, int(step)):
        cloud = collect_control_results(signals, sites, u, width)
        if len(cloud) <= k:
            raise ExperimentError(f"control u={u} produced only {len(cloud)} fragments", u=u)
        rep = separability(cloud, background, k, seed)
        entries.append(ProfileEntry(u, rep, len(cloud), cloud.skipped))
        log.debug("u=%d purity=%.3f drop=%.2f n=%d", u, rep.nn_purity, rep.entropy_drop, len(cloud))
    return ControlProfile(tuple(entries), indicator_id)


@dataclass(frozen=True)
class CharacteristicControls:
    all: tuple[int, ...]
    maximal_right: int | None
    maximal_left: int | None

    def to_dict(self):
        return {"all": list(self.all), "maximal_right": self.maximal_right,
                "maximal_left": self.maximal_left}


def find_characteristic_controls(profile: ControlProfile, theta: float = DEFAULT_THETA,
                                 exclusion_radius: int = DEFAULT_EXCLUSION) -> CharacteristicControls:
    chosen = tuple(e.u for e in profile.entries
                   if e.report.nn_purity >= theta and abs(e.u) > exclusion_radius)
    right = [u for u in chosen if u > 0]
    left = [u for u in chosen if u < 0]
    return CharacteristicControls(chosen, max(right) if right else None, min(left) if left else None)


# ---------------------------------------------------------------------------
# Growth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Growth:
    b_id: str
    edge: int
    composite_id: str
    chosen_index: int
    cloud: FragmentCloud = field(repr=False)


def grow_indicator(graph: IndicatorGraph, a_id: str, u: int, signals: Sequence[Signal], annotations,
                   background: FragmentCloud | None = None, seed: int = 0, k_neighbors: int = 5,
                   microsaccade_radius: int = DEFAULT_RADIUS, width: int | None = None) -> Growth:
    """Turn a characteristic control of A into a point-born indicator B plus edge and composite."""
    a = graph.indicator(a_id)
    width = width or a.width
    u = Control(u).u
    sites = trigger_sites(graph, a_id, signals, annotations)
    cloud = collect_control_results(signals, sites, u, width)
    if len(cloud) == 0:
        raise ExperimentError(f"control u={u} from {a_id!r} produced no fragments", u=u)
    observed = None
    if background is not None:
        observed = separability(cloud, background, 3, seed).nn_purity
    rng = np.random.default_rng(seed)
    idx = int(rng.integers(0, len(cloud)))
    b = make_point_indicator(cloud[idx], cloud, k_neighbors, id=graph._fresh_id(f"{a_id}{u:+d}"))
    graph.add_indicator(b, "grow", source=a_id, u=u, seed=int(seed), chosen_index=idx,
                        chosen_center=int(cloud.centers[idx]), chosen_signal=int(cloud.sources[idx]),
                        k_neighbors=int(k_neighbors), observed_purity=observed)
    ei = graph.add_edge(a_id, b.id, u, microsaccade_radius)
    comp = graph.add_composite(ei)
    return Growth(b.id, ei, comp.id, idx, cloud)


@dataclass
class OneShotResult:
    refined: Indicator
    cloud: FragmentCloud
    center_template: np.ndarray
    point_indicator: Indicator


def one_shot_learn(graph: IndicatorGraph, a_id: str, u: int, b_fragment, signals: Sequence[Signal],
                   annotations, background: FragmentCloud, search_radius: int = DEFAULT_RADIUS,
                   k_neighbors: int = 5) -> OneShotResult:
    """Collect everything a one-example indicator fires on near ``A + u``; refine on its mean."""
    a = graph.indicator(a_id)
    u = Control(u).u
    if b_fragment.width != a.width:
        raise ValidationError("b fragment width does not match the graph's indicators")
    sites = trigger_sites(graph, a_id, signals, annotations)
    neighbors = collect_control_results(signals, sites, u, a.width)
    b = make_point_indicator(b_fragment, neighbors, k_neighbors, id=f"{a_id}{u:+d}/b")
    h = a.width // 2
    rows, centers, sources, best = [], [], [], []
    for si, (sig, ss) in enumerate(zip(signals, sites)):
        for s in ss:
            try:
                cs, d = microsaccade_scan(b, sig, int(s) + u, search_radius)
            except BoundaryError:
                continue
            j = int(np.lexsort((cs, np.abs(cs - (int(s) + u)), d))[0])
            best.append(d[j])
            if d[j] <= b.threshold:
                c = int(cs[j])
                rows.append(sig.samples[c - h:c + h])
                centers.append(c)
                sources.append(si)
    if not rows:
        hist, edges = np.histogram(best, bins=10) if best else (np.array([]), np.array([]))
        raise ExperimentError(f"one-shot indicator fired nowhere (threshold {b.threshold:.4g})",
                              threshold=b.threshold, histogram=hist.tolist(), bin_edges=edges.tolist())
    cloud = FragmentCloud(np.stack(rows), centers, a.width, f"one-shot:u={u}", sources)
    center = cloud.mean()
    refined = fit_initial_indicator(cloud, background, id=graph._fresh_id(f"{a_id}{u:+d}*"),
                                    kind="refined")
    graph.add_indicator(refined, "one_shot", source=a_id, u=u, search_radius=int(search_radius),
                        k_neighbors=int(k_neighbors), collected=len(cloud),
                        point_threshold=b.threshold)
    graph.add_edge(a_id, refined.id, u, search_radius)
    return OneShotResult(refined, cloud, center, b)


def seed_indicator(graph: IndicatorGraph, signals: Sequence[Signal], annotations,
                   background: FragmentCloud, width: int, id: str = "A") -> Indicator:
    """Teacher-seeded indicator from fragments centred on annotated R-peaks."""
    sites = [a.r_peaks for a in annotations]
    pos = collect_control_results(signals, sites, 0, width)
    ind = fit_initial_indicator(pos, background, id=id)
    return graph.add_indicator(ind, "seed", positives=len(pos), background=len(background))
