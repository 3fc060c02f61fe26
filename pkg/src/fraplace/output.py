"""Serialization helpers: canonical JSON, round-trip CSV, minimal SVG line plots."""

import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_json"):
        return _plain(obj.to_json())
    return obj


def write_json(path, payload):
    text = json.dumps(_plain(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def write_csv(path, header, columns):
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join("%.17g" % v for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_svg(path, series, xlabel, ylabel, title="", width=640, height=400):
    """Line plot of ``series = [(label, x, y), ...]``, one polyline each."""
    margin = {"l": 70, "r": 20, "t": 30, "b": 50}
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    y0, y1 = min(0.0, float(np.min(ys))), float(np.max(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = width - margin["l"] - margin["r"]
    ph = height - margin["t"] - margin["b"]

    def X(v):
        return margin["l"] + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return margin["t"] + ph - (v - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{margin["l"]}" y="{margin["t"]}" width="{pw}" height="{ph}" '
           'fill="none" stroke="black"/>']
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(f'<text x="{X(xv):.2f}" y="{height - margin["b"] + 18}" font-size="11" '
                   f'text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{margin["l"] - 6}" y="{Y(yv):.2f}" font-size="11" '
                   f'text-anchor="end">{yv:.4g}</text>')
    for idx, (label, x, y) in enumerate(series):
        pts = " ".join(f"{X(a):.3f},{Y(b):.3f}" for a, b in zip(x, y))
        color = colors[idx % len(colors)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{margin["l"] + 8}" y="{margin["t"] + 16 + 14 * idx}" font-size="12" '
                   f'fill="{color}">{label}</text>')
    out.append(f'<text x="{margin["l"] + pw / 2:.1f}" y="{height - 10}" font-size="13" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{margin["t"] + ph / 2:.1f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {margin["t"] + ph / 2:.1f})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="20" font-size="14" text-anchor="middle">{title}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
