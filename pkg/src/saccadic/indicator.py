"""Template-and-threshold indicators, their calibration, and microsaccade search."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BoundaryError, ValidationError
from .fragments import Fragment, FragmentCloud
from .signals import Signal, parse_json

KINDS = ("seeded-from-teacher", "point-born", "refined")
DEFAULT_RADIUS = 10


@dataclass(frozen=True, eq=False)
class Indicator:
    id: str
    template: np.ndarray
    threshold: float
    width: int
    kind: str = "point-born"
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        t = np.array(self.template, dtype=np.float64)
        if t.shape != (self.width,):
            raise ValidationError(f"template length {t.size} does not match width {self.width}")
        if not (np.isfinite(self.threshold) and self.threshold > 0):
            raise ValidationError("threshold must be > 0")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown indicator kind {self.kind!r}")
        t.setflags(write=False)
        object.__setattr__(self, "template", t)
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "flags", tuple(self.flags))

    def __eq__(self, other):
        if not isinstance(other, Indicator):
            return NotImplemented
        return (self.id, self.threshold, self.width, self.kind, self.flags) == \
            (other.id, other.threshold, other.width, other.kind, other.flags) \
            and np.array_equal(self.template, other.template)

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "width": self.width,
             "threshold": self.threshold, "template": self.template.tolist()}
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)

    @classmethod
    def from_dict(cls, d) -> "Indicator":
        d = parse_json(d)
        try:
            return cls(d["id"], d["template"], d["threshold"], d["width"], d["kind"],
                       tuple(d.get("flags", ())))
        except KeyError as exc:
            raise ValidationError(f"indicator is missing field {exc}") from None

    from_json = from_dict


@dataclass(frozen=True)
class TriggerResult:
    fired: bool
    distance: float
    corrected_center: int


def _distances(template, values):
    return np.sqrt(_kernels.row_sqdist(values, template))


@dataclass(frozen=True)
class Calibration:
    threshold: float
    balanced_error: float
    separable: bool
    candidates: int = field(default=0)


def balanced_threshold(pos_d, bg_d) -> Calibration:
    """Threshold minimising ½·FNR + ½·FPR over midpoints of the merged sorted distances.

    A point fires when its distance ≤ threshold.  Ties go to the smallest threshold.
    """
    pos_d = np.sort(np.asarray(pos_d, dtype=np.float64))
    bg_d = np.sort(np.asarray(bg_d, dtype=np.float64))
    merged = np.unique(np.concatenate([pos_d, bg_d]))
    if merged.size < 2:
        thr = float(merged[0]) if merged.size and merged[0] > 0 else 0.0
        return Calibration(thr, 0.5, False, 0)
    cand = (merged[:-1] + merged[1:]) / 2.0
    n_pos, n_bg = pos_d.size, bg_d.size
    fn = n_pos - np.searchsorted(pos_d, cand, side="right")
    fp = np.searchsorted(bg_d, cand, side="right")
    # compare in integers so exact ties stay ties: 2·n_pos·n_bg·err
    score = fn * n_bg + fp * n_pos
    best = int(np.argmin(score))
    err = score[best] / (2.0 * n_pos * n_bg)
    # an error of one half everywhere means the distances carry no information
    separable = bool(score[best] < n_pos * n_bg)
    return Calibration(float(cand[best]), float(err), separable, int(cand.size))


def _fallback_threshold(template):
    rms = float(np.sqrt(np.mean(np.square(template))))
    return 1e-6 * rms if rms > 0 else 1e-12


def fit_initial_indicator(positives: FragmentCloud, background: FragmentCloud, id: str = "A",
                          kind: str = "seeded-from-teacher") -> Indicator:
    if len(positives) == 0 or len(background) == 0:
        raise ValidationError("positive and background clouds must be non-empty")
    if positives.width != background.width:
        raise ValidationError("positive and background clouds must share one width")
    template = positives.mean()
    cal = balanced_threshold(_distances(template, positives.values),
                             _distances(template, background.values))
    flags = () if cal.separable else ("non-separable",)
    thr = cal.threshold
    if thr <= 0:
        thr = _fallback_threshold(template)
        flags += ("threshold-fallback",)
    return Indicator(id, template, thr, positives.width, kind, flags)


def make_point_indicator(b: Fragment, neighbor_cloud: FragmentCloud, k: int = 5,
                         id: str = "B") -> Indicator:
    """Indicator centred on one observed fragment; radius from its k nearest neighbours."""
    if neighbor_cloud.width != b.width:
        raise ValidationError("fragment and neighbour cloud widths differ")
    if k < 1:
        raise ValidationError("k must be ≥ 1")
    d = _distances(b.values, neighbor_cloud.values)
    d = np.sort(d[d > 0])
    if d.size == 0:
        return Indicator(id, b.values, _fallback_threshold(b.values), b.width, "point-born",
                         ("threshold-fallback",))
    return Indicator(id, b.values, float(np.median(d[:k])), b.width, "point-born")


def trigger(ind: Indicator, fragment: Fragment) -> TriggerResult:
    if fragment.width != ind.width:
        raise ValidationError(f"fragment width {fragment.width} != indicator width {ind.width}")
    dist = float(np.sqrt(_kernels.row_sqdist(fragment.values[None, :], ind.template)[0]))
    return TriggerResult(dist <= ind.threshold, dist, int(fragment.source_center))


def microsaccade_scan(ind: Indicator, signal: Signal, predicted_center: int, radius: int):
    """Distances at every interior center within ``radius``; returns (centers, distances)."""
    if radius < 0:
        raise ValidationError("radius must be ≥ 0")
    h = ind.width // 2
    n = len(signal)
    lo = max(predicted_center - radius, h)
    hi = min(predicted_center + radius, n - h)
    if lo > hi:
        raise BoundaryError(f"no interior centers within {radius} of {predicted_center}")
    centers = np.arange(lo, hi + 1, dtype=np.int64)
    d = np.sqrt(_kernels.window_sqdist(signal.samples, ind.template, centers - h))
    return centers, d


def microsaccade_search(ind: Indicator, signal: Signal, predicted_center: int,
                        radius: int = DEFAULT_RADIUS) -> TriggerResult:
    """Brute-force template match around a predicted landmark.

    Minimum distance wins; ties go to the center nearest the prediction, then the smaller one.
    """
    predicted_center = int(predicted_center)
    centers, d = microsaccade_scan(ind, signal, predicted_center, int(radius))
    best = np.lexsort((centers, np.abs(centers - predicted_center), d))[0]
    dist = float(d[best])
    return TriggerResult(dist <= ind.threshold, dist, int(centers[best]))
