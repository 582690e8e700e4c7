"""Fixed-width fragments cut relative to trigger coordinates.

A fragment of width ``W`` centred at ``c`` is ``samples[c - W//2 : c + W//2]``,
so ``values[W//2]`` is the sample at ``c``.  Windows are never padded.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BoundaryError, ValidationError
from .signals import Signal, parse_json

DEFAULT_WIDTH = 40


def _check_width(width):
    if int(width) != width or width <= 0 or width % 2:
        raise ValidationError(f"width must be a positive even integer, got {width}")
    return int(width)


@dataclass(frozen=True, eq=False)
class Fragment:
    values: np.ndarray
    source_center: int
    width: int = DEFAULT_WIDTH

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.width,):
            raise ValidationError(f"fragment has {v.size} values, expected width {self.width}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, Fragment):
            return NotImplemented
        return (self.source_center == other.source_center and self.width == other.width
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class Control:
    u: int

    def __post_init__(self):
        if int(self.u) != self.u:
            raise ValidationError("control offset must be an integer")
        object.__setattr__(self, "u", int(self.u))


class FragmentCloud:
    """A set of same-width fragments stored as an ``(n, W)`` array."""

    def __init__(self, values, centers, width, provenance="", sources=None, skipped=0):
        self.width = _check_width(width)
        values = np.array(values, dtype=np.float64).reshape(-1, self.width)
        centers = np.array(centers, dtype=np.int64).reshape(-1)
        if centers.shape[0] != values.shape[0]:
            raise ValidationError("one source_center per fragment is required")
        sources = np.zeros(len(centers), dtype=np.int64) if sources is None \
            else np.array(sources, dtype=np.int64).reshape(-1)
        for a in (values, centers, sources):
            a.setflags(write=False)
        self.values = values
        self.centers = centers
        self.sources = sources
        self.provenance = provenance
        self.skipped = int(skipped)

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i) -> Fragment:
        return Fragment(self.values[i], int(self.centers[i]), self.width)

    @property
    def fragments(self) -> list[Fragment]:
        return [self[i] for i in range(len(self))]

    @classmethod
    def from_fragments(cls, fragments: Sequence[Fragment], provenance="", width=None):
        if not fragments:
            if width is None:
                raise ValidationError("width is required for an empty cloud")
            return cls(np.zeros((0, width)), [], width, provenance)
        widths = {f.width for f in fragments}
        if len(widths) != 1:
            raise ValidationError("all fragments must share one width")
        return cls(np.stack([f.values for f in fragments]), [f.source_center for f in fragments],
                   widths.pop(), provenance)

    def subset(self, idx) -> "FragmentCloud":
        idx = np.asarray(idx, dtype=np.int64)
        return FragmentCloud(self.values[idx], self.centers[idx], self.width, self.provenance,
                             self.sources[idx])

    def znormalized(self) -> "FragmentCloud":
        """Per-fragment zero mean / unit std; constant fragments become zeros."""
        v = self.values - self.values.mean(axis=1, keepdims=True)
        sd = v.std(axis=1, keepdims=True)
        v = np.divide(v, sd, out=np.zeros_like(v), where=sd > 0)
        return FragmentCloud(v, self.centers, self.width, self.provenance, self.sources, self.skipped)

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def to_dict(self) -> dict:
        return {"width": self.width, "provenance": self.provenance,
                "fragments": [{"source_center": int(c), "source": int(s), "values": v.tolist()}
                              for c, s, v in zip(self.centers, self.sources, self.values)]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)

    @classmethod
    def from_json(cls, doc) -> "FragmentCloud":
        d = parse_json(doc)
        try:
            width = d["width"]
            frags = d["fragments"]
            values = [f["values"] for f in frags]
            centers = [f["source_center"] for f in frags]
            sources = [f.get("source", 0) for f in frags]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed fragment cloud: missing {exc}") from None
        if any(len(v) != width for v in values):
            raise ValidationError("fragment length does not match cloud width")
        return cls(np.reshape(np.array(values, dtype=np.float64), (-1, width)), centers, width,
                   d.get("provenance", ""), sources)


def _window_ok(n, center, width):
    h = width // 2
    return center - h >= 0 and center + h <= n


def extract_fragment(signal: Signal, center: int, width: int = DEFAULT_WIDTH) -> Fragment:
    width = _check_width(width)
    center = int(center)
    n = len(signal)
    if not _window_ok(n, center, width):
        raise BoundaryError(f"window of width {width} at center {center} leaves signal of length {n}")
    h = width // 2
    return Fragment(signal.samples[center - h:center + h], center, width)


def execute_control(signal: Signal, origin: int, control, width: int = DEFAULT_WIDTH) -> Fragment:
    u = control.u if isinstance(control, Control) else int(control)
    return extract_fragment(signal, int(origin) + u, width)


def jitter_centers(centers, sigma: float, seed) -> np.ndarray:
    """Round each center after adding N(0, sigma) noise."""
    centers = np.asarray(centers, dtype=np.int64)
    if not np.isfinite(sigma) or sigma < 0:
        raise ValidationError("sigma must be finite and ≥ 0")
    if sigma == 0:
        return centers.copy()
    rng = np.random.default_rng(seed)
    return np.rint(centers + rng.normal(0.0, sigma, centers.shape)).astype(np.int64)


def sample_background(signals: Sequence[Signal], n: int, width: int = DEFAULT_WIDTH, seed=0) -> FragmentCloud:
    """``n`` windows at uniform interior centers of uniformly chosen signals."""
    width = _check_width(width)
    h = width // 2
    lengths = np.array([len(s) for s in signals], dtype=np.int64)
    if lengths.size == 0 or np.any(lengths - 2 * h < 1):
        raise ValidationError(f"every signal needs at least one interior window of width {width}")
    rng = np.random.default_rng(seed)
    which = rng.integers(0, len(signals), n)
    centers = np.empty(n, dtype=np.int64)
    values = np.empty((n, width))
    for i, s in enumerate(which):
        c = int(rng.integers(h, lengths[s] - h))
        centers[i] = c
        values[i] = signals[s].samples[c - h:c + h]
    return FragmentCloud(values, centers, width, "background", which)


def collect_control_results(signals: Sequence[Signal], trigger_positions, control,
                            width: int = DEFAULT_WIDTH) -> FragmentCloud:
    """The results of one control executed from every trigger site; out-of-bounds sites are skipped."""
    width = _check_width(width)
    u = control.u if isinstance(control, Control) else int(control)
    h = width // 2
    rows, centers, sources = [], [], []
    skipped = 0
    for si, (sig, sites) in enumerate(zip(signals, trigger_positions)):
        n = len(sig)
        c = np.asarray(sites, dtype=np.int64) + u
        ok = (c - h >= 0) & (c + h <= n)
        skipped += int((~ok).sum())
        for cc in c[ok]:
            rows.append(sig.samples[cc - h:cc + h])
            centers.append(cc)
            sources.append(si)
    values = np.stack(rows) if rows else np.zeros((0, width))
    return FragmentCloud(values, centers, width, f"control:u={u}", sources, skipped)
