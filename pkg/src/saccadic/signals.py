"""Signals, R-peak annotations and the synthetic ECG generator."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError


def _reject_constant(name):
    raise ValidationError(f"non-finite literal {name!r} is not allowed")


def parse_json(doc):
    """Accept JSON text, bytes, or an already-decoded mapping."""
    if isinstance(doc, Mapping):
        return doc
    if isinstance(doc, bytes):
        doc = doc.decode("utf-8")
    try:
        out = json.loads(doc, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON: {exc}") from None
    if not isinstance(out, dict):
        raise ValidationError("top-level JSON value must be an object")
    return out


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    fs_hz: int
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("samples must be a non-empty 1-D sequence")
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise ValidationError(f"non-finite sample at index {int(bad[0])}")
        if isinstance(self.fs_hz, bool) or int(self.fs_hz) != self.fs_hz or self.fs_hz < 1:
            raise ValidationError("fs_hz must be ≥ 1")
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "fs_hz", int(self.fs_hz))

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return (self.fs_hz == other.fs_hz and self.label == other.label
                and np.array_equal(self.samples, other.samples))

    def shifted(self, s: int, fill: float = 0.0) -> "Signal":
        """Signal delayed by ``s`` samples (``s`` < 0 advances), padded with ``fill``."""
        x = self.samples
        if s >= 0:
            y = np.concatenate([np.full(s, fill), x])
        else:
            y = x[-s:]
        return Signal(y, self.fs_hz, self.label)


@dataclass(frozen=True, eq=False)
class AnnotationSet:
    r_peaks: np.ndarray
    t_peaks: np.ndarray | None = None

    def __post_init__(self):
        for name in ("r_peaks", "t_peaks"):
            v = getattr(self, name)
            if v is None:
                continue
            a = np.asarray(v, dtype=np.int64).reshape(-1)
            if a.size > 1 and np.any(np.diff(a) <= 0):
                raise ValidationError(f"{name} must be strictly increasing")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __eq__(self, other):
        if not isinstance(other, AnnotationSet):
            return NotImplemented
        if (self.t_peaks is None) != (other.t_peaks is None):
            return False
        return np.array_equal(self.r_peaks, other.r_peaks) and (
            self.t_peaks is None or np.array_equal(self.t_peaks, other.t_peaks))


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------

def load_signal(doc) -> Signal:
    d = parse_json(doc)
    for key in ("fs_hz", "samples"):
        if key not in d:
            raise ValidationError(f"missing field {key!r}")
    fs = d["fs_hz"]
    if isinstance(fs, bool) or not isinstance(fs, int):
        raise ValidationError("field 'fs_hz' must be an integer")
    label = d.get("label", "")
    if not isinstance(label, str):
        raise ValidationError("field 'label' must be a string")
    samples = d["samples"]
    if not isinstance(samples, list):
        raise ValidationError("field 'samples' must be an array of numbers")
    for i, v in enumerate(samples):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"field 'samples' has a non-numeric entry at index {i}")
        if not math.isfinite(v):
            raise ValidationError(f"non-finite sample at index {i}")
    return Signal(np.array(samples, dtype=np.float64), fs, label)


def signal_to_dict(sig: Signal) -> dict:
    return {"fs_hz": sig.fs_hz, "label": sig.label, "samples": sig.samples.tolist()}


def save_signal(sig: Signal) -> str:
    return json.dumps(signal_to_dict(sig), allow_nan=False)


def load_annotations(doc, signal: Signal) -> AnnotationSet:
    """Parse annotations and normalise them (sorted, deduplicated, in bounds)."""
    d = parse_json(doc)
    if "r_peaks" not in d:
        raise ValidationError("missing field 'r_peaks'")
    n = len(signal)

    def indices(key):
        raw = d[key]
        if not isinstance(raw, list):
            raise ValidationError(f"field {key!r} must be an array of integers")
        out = []
        for v in raw:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ValidationError(f"field {key!r} has a non-integer entry {v!r}")
            v = int(v)
            if v < 0 or v >= n:
                raise ValidationError(f"{key} index {v} out of range for signal length {n}")
            out.append(v)
        return np.unique(np.array(out, dtype=np.int64))

    t = indices("t_peaks") if d.get("t_peaks") is not None else None
    return AnnotationSet(indices("r_peaks"), t)


def annotations_to_dict(ann: AnnotationSet) -> dict:
    d = {"r_peaks": ann.r_peaks.tolist()}
    if ann.t_peaks is not None:
        d["t_peaks"] = ann.t_peaks.tolist()
    return d


def save_annotations(ann: AnnotationSet) -> str:
    return json.dumps(annotations_to_dict(ann))


def read_signal(path) -> Signal:
    return load_signal(Path(path).read_text(encoding="utf-8"))


def read_annotations(path, signal: Signal) -> AnnotationSet:
    return load_annotations(Path(path).read_text(encoding="utf-8"), signal)


SIGNAL_SUFFIX = ".signal.json"
ANNOTATION_SUFFIX = ".annotations.json"


def load_dataset(directory) -> list[tuple[str, Signal, AnnotationSet]]:
    """Load every ``<stem>.signal.json`` / ``<stem>.annotations.json`` pair, sorted by stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"data directory not found: {directory}")
    out = []
    for sp in sorted(directory.glob("*" + SIGNAL_SUFFIX)):
        stem = sp.name[: -len(SIGNAL_SUFFIX)]
        ap = directory / (stem + ANNOTATION_SUFFIX)
        if not ap.exists():
            raise FileNotFoundError(f"missing annotations file: {ap}")
        sig = read_signal(sp)
        out.append((stem, sig, read_annotations(ap, sig)))
    if not out:
        raise FileNotFoundError(f"no *{SIGNAL_SUFFIX} files in {directory}")
    return out


# ---------------------------------------------------------------------------
# Synthetic ECG
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Wave:
    name: str
    offset: int
    amplitude: float
    width_sigma: float


DEFAULT_WAVES = (
    Wave("P", -160, 0.15, 20.0),
    Wave("Q", -20, -0.10, 5.0),
    Wave("R", 0, 1.00, 8.0),
    Wave("S", 20, -0.20, 5.0),
    Wave("T", 120, 0.30, 40.0),
)


@dataclass(frozen=True)
class SynthEcgParams:
    beats: int = 200
    fs_hz: int = 500
    cycle_len: int = 500
    waves: tuple[Wave, ...] = DEFAULT_WAVES
    noise_sigma: float = 0.02
    cycle_jitter_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        waves = tuple(w if isinstance(w, Wave) else Wave(*w) for w in self.waves)
        object.__setattr__(self, "waves", waves)
        if int(self.beats) != self.beats or self.beats < 1:
            raise ValidationError("beats must be a positive integer")
        if int(self.fs_hz) != self.fs_hz or self.fs_hz < 1:
            raise ValidationError("fs_hz must be ≥ 1")
        if not waves:
            raise ValidationError("waves must not be empty")
        if self.cycle_len <= 2 * max(abs(w.offset) for w in waves):
            raise ValidationError("cycle_len must exceed 2 × max |offset_from_R|")
        if any(w.width_sigma <= 0 for w in waves):
            raise ValidationError("width_sigma must be positive")
        if not (self.noise_sigma >= 0 and math.isfinite(self.noise_sigma)):
            raise ValidationError("noise_sigma must be ≥ 0")
        if not (self.cycle_jitter_sigma >= 0 and math.isfinite(self.cycle_jitter_sigma)):
            raise ValidationError("cycle_jitter_sigma must be ≥ 0")

    def wave(self, name: str) -> Wave:
        for w in self.waves:
            if w.name == name:
                return w
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"beats": self.beats, "fs_hz": self.fs_hz, "cycle_len": self.cycle_len,
                "waves": [[w.name, w.offset, w.amplitude, w.width_sigma] for w in self.waves],
                "noise_sigma": self.noise_sigma, "cycle_jitter_sigma": self.cycle_jitter_sigma,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthEcgParams":
        d = dict(d)
        if "waves" in d:
            d["waves"] = tuple(Wave(*w) for w in d["waves"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown synth field(s): {sorted(unknown)}")
        return cls(**d)


def bump(idx, center, wave: Wave):
    """One Gaussian wave evaluated at integer sample positions."""
    rel = np.asarray(idx, dtype=np.float64) - (center + wave.offset)
    return wave.amplitude * np.exp(-rel * rel / (2.0 * wave.width_sigma ** 2))


def render_beats(length: int, r_centers: Sequence[int], waves: Sequence[Wave], cycle_len: int):
    """Noise-free sum of beats; each beat spans offsets [-cycle_len//2, cycle_len - cycle_len//2) around its R."""
    x = np.zeros(length)
    lo_off = -(cycle_len // 2)
    rel = np.arange(lo_off, lo_off + cycle_len)
    # one beat's shape, evaluated once so every beat is bitwise identical
    shape = np.zeros(cycle_len)
    for w in waves:
        shape += bump(rel, 0, w)
    for c in r_centers:
        a = c + lo_off
        lo, hi = max(a, 0), min(a + cycle_len, length)
        if lo < hi:
            x[lo:hi] += shape[lo - a:hi - a]
    return x


def synth_ecg(params: SynthEcgParams) -> tuple[Signal, AnnotationSet]:
    rng = np.random.default_rng(params.seed)
    L = params.cycle_len
    n = params.beats * L
    centers = np.arange(params.beats, dtype=np.int64) * L + L // 2
    jitter = rng.normal(0.0, params.cycle_jitter_sigma, params.beats) if params.cycle_jitter_sigma > 0 \
        else np.zeros(params.beats)
    # beats stay inside their own slot so R order is preserved
    half = L // 2 - 1
    centers = centers + np.clip(np.rint(jitter), -half, half).astype(np.int64)
    x = render_beats(n, centers, params.waves, L)
    if params.noise_sigma > 0:
        x = x + rng.normal(0.0, params.noise_sigma, n)
    try:
        t_off = params.wave("T").offset
        t = centers + t_off
        t = t[(t >= 0) & (t < n)]
    except KeyError:
        t = None
    return Signal(x, params.fs_hz, "i"), AnnotationSet(centers, t)


def signals_and_sites(dataset):
    """Split ``[(stem, Signal, AnnotationSet), ...]`` into parallel lists."""
    return [d[1] for d in dataset], [d[2] for d in dataset]
