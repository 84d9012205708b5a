"""Trace CSV, summary JSON and SVG writers.

Everything written here is a pure function of its inputs, so identical
configs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .engine import Trace

FORMATS = ("csv", "json", "svg")


def _g(x) -> str:
    return "%.6g" % x


def trace_csv(trace: Trace) -> str:
    """``slot,W,Q,mu,loss,n_decreasing`` plus ``w_i`` columns when recorded."""
    n = trace.config.n_flows
    header = ["slot", "W", "Q", "mu", "loss", "n_decreasing"]
    if trace.windows is not None:
        header += [f"w_{i}" for i in range(n)]
    lines = [",".join(header)]
    for t in range(len(trace)):
        row = [str(t), _g(trace.W[t]), _g(trace.Q[t]), _g(trace.mu[t]),
               "1" if trace.loss[t] else "0", str(int(trace.n_decreasing[t]))]
        if trace.windows is not None:
            row += [_g(x) for x in trace.windows[t]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def table_csv(rows: list[dict], columns: list[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(_g(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


_WIDTH, _HEIGHT, _PAD = 640, 320, 40


def _frame(title: str, body: list[str]) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_PAD}" y="24" font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{_WIDTH - 2 * _PAD}" height="{_HEIGHT - 2 * _PAD}" '
        'fill="none" stroke="black"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _scale(lo: float, hi: float, out_lo: float, out_hi: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: out_lo + (v - lo) / span * (out_hi - out_lo)


def series_svg(values, title: str, guides=()) -> str:
    """Step plot of ``values`` with horizontal guide lines."""
    y = np.asarray(values, dtype=float)
    lo = min([float(y.min())] + list(guides))
    hi = max([float(y.max())] + list(guides))
    sx = _scale(0, max(1, y.size), _PAD, _WIDTH - _PAD)
    sy = _scale(lo, hi, _HEIGHT - _PAD, _PAD)
    pts = []
    for t, v in enumerate(y):
        pts.append(f"{sx(t):.2f},{sy(v):.2f}")
        pts.append(f"{sx(t + 1):.2f},{sy(v):.2f}")
    body = [f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{" ".join(pts)}"/>']
    for g in guides:
        body.append(f'<line x1="{_PAD}" x2="{_WIDTH - _PAD}" y1="{sy(g):.2f}" y2="{sy(g):.2f}" '
                    'stroke="gray" stroke-dasharray="4 3"/>')
    body.append(f'<text x="4" y="{_PAD + 4}" font-family="sans-serif" font-size="10">{_g(hi)}</text>')
    body.append(f'<text x="4" y="{_HEIGHT - _PAD}" font-family="sans-serif" font-size="10">{_g(lo)}</text>')
    return _frame(title, body)


def histogram_svg(edges, counts, title: str, cutoff: float | None = None) -> str:
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    sx = _scale(float(edges[0]), float(edges[-1]), _PAD, _WIDTH - _PAD)
    sy = _scale(0.0, max(1.0, float(counts.max())), _HEIGHT - _PAD, _PAD)
    body = []
    for a, b, c in zip(edges[:-1], edges[1:], counts):
        x0, x1, top = sx(a), sx(b), sy(c)
        body.append(f'<rect x="{x0:.2f}" y="{top:.2f}" width="{x1 - x0:.2f}" '
                    f'height="{_HEIGHT - _PAD - top:.2f}" fill="steelblue" stroke="white"/>')
    if cutoff is not None and edges[0] <= cutoff <= edges[-1]:
        x = sx(cutoff)
        body.append(f'<line x1="{x:.2f}" x2="{x:.2f}" y1="{_PAD}" y2="{_HEIGHT - _PAD}" '
                    'stroke="firebrick" stroke-dasharray="4 3"/>')
    return _frame(title, body)


def write_run(trace: Trace, summary: dict, out_dir: Path, formats=FORMATS, stem: str = "trace"):
    """Write the requested files for one run; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    if "csv" in formats:
        files[out_dir / f"{stem}.csv"] = trace_csv(trace)
    if "json" in formats:
        files[out_dir / f"{stem}.summary.json"] = dumps(summary)
    if "svg" in formats:
        link = trace.config.link
        files[out_dir / f"{stem}.window.svg"] = series_svg(
            trace.W, "aggregate window W(t)", guides=(link.bdp, link.bdp + link.buffer))
        hist = summary["histogram"]
        files[out_dir / f"{stem}.queue.svg"] = histogram_svg(
            hist["edges"], hist["counts"], "queue occupancy", hist.get("cutoff"))
    for path, text in files.items():
        path.write_text(text)
    return sorted(files)
