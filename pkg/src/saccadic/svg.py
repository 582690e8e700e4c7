"""Dependency-free SVG output with byte-stable formatting."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError

SIZE = 600
MARGIN = 0.05
COLORS = {"background": "#d62728", "control": "#1f77b4"}
RADIUS = 2


def _scale(v, lo, hi):
    span = SIZE * (1.0 - 2.0 * MARGIN)
    if hi > lo:
        return SIZE * MARGIN + (v - lo) / (hi - lo) * span
    return np.full_like(v, SIZE / 2.0)


def scatter_svg(points, labels: Sequence[str], title: str = "") -> str:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    labels = list(labels)
    if len(labels) != len(pts):
        raise ValidationError(f"{len(labels)} labels for {len(pts)} points")
    bad = set(labels) - set(COLORS)
    if bad:
        raise ValidationError(f"unknown label(s) {sorted(bad)}; use 'background' or 'control'")
    if len(pts):
        x = _scale(pts[:, 0], pts[:, 0].min(), pts[:, 0].max())
        # SVG y grows downward
        y = SIZE - _scale(pts[:, 1], pts[:, 1].min(), pts[:, 1].max())
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" '
           f'width="{SIZE}" height="{SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>']
    if title:
        out.append(f'<title>{_escape(title)}</title>')
    # background first so the control cloud stays visible on top
    for lab in ("background", "control"):
        out.append(f'<g fill="{COLORS[lab]}">')
        for i in range(len(pts)):
            if labels[i] == lab:
                out.append(f'<circle cx="{x[i]:.2f}" cy="{y[i]:.2f}" r="{RADIUS}"/>')
        out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def emit_scatter_svg(embedding, labels: Sequence[str], path, title: str = "") -> Path:
    pts = embedding.points if hasattr(embedding, "points") else embedding
    text = scatter_svg(pts, labels, title)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def line_svg(values, title: str = "", reference=None) -> str:
    """Polyline of a 1-D sequence; an optional reference curve is drawn dashed."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValidationError("need at least two values to draw a line")
    series = [v] if reference is None else [v, np.asarray(reference, dtype=np.float64)]
    allv = np.concatenate(series)
    lo, hi = float(allv.min()), float(allv.max())
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" '
           f'width="{SIZE}" height="{SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>']
    if title:
        out.append(f'<title>{_escape(title)}</title>')
    styles = ['stroke="#1f77b4" stroke-width="2"', 'stroke="#7f7f7f" stroke-width="1" stroke-dasharray="4 3"']
    for s, style in zip(series, styles):
        x = _scale(np.arange(s.size, dtype=np.float64), 0.0, float(s.size - 1))
        y = SIZE - _scale(s, lo, hi)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" {style} points="{pts}"/>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def emit_line_svg(values, path, title: str = "", reference=None) -> Path:
    path = Path(path)
    path.write_text(line_svg(values, title, reference), encoding="utf-8")
    return path


def _escape(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
