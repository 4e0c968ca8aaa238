"""Text formats: "FIELD v1" and "MASK v1", plus CSV and SVG report emission."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .fields import ScalarField
from .geometry import Domain, build_grid, domain_from_mask


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(path, field: ScalarField) -> Path:
    g = field.grid
    lines = [f"FIELD v1 {g.cells_per_side} {_fmt(g.extent)}"]
    for row in field.values:
        lines.append(" ".join(_fmt(v) for v in row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field(path) -> ScalarField:
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    if len(head) != 4 or head[0] != "FIELD" or head[1] != "v1":
        raise ValueError(f"{path}: not a 'FIELD v1' file")
    grid = build_grid(int(head[2]), float(head[3]))
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    vals = np.array([[float(v) for v in r] for r in rows])
    if vals.shape != grid.shape:
        raise ValueError(f"{path}: expected {grid.shape} values, found {vals.shape}")
    return ScalarField(grid, vals)


def write_mask(path, domain: Domain) -> Path:
    g = domain.grid
    lines = [f"MASK v1 {g.cells_per_side} {_fmt(g.extent)}"]
    for row in domain.closure_mask:
        lines.append(" ".join("1" if b else "0" for b in row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mask(path) -> Domain:
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    if len(head) != 4 or head[0] != "MASK" or head[1] != "v1":
        raise ValueError(f"{path}: not a 'MASK v1' file")
    grid = build_grid(int(head[2]), float(head[3]))
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    mask = np.array([[v == "1" for v in r] for r in rows], dtype=bool)
    return domain_from_mask(grid, mask)


def csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row.get(c, "")
            if isinstance(v, (float, np.floating)):
                v = _fmt(v)
            out.append(v)
        writer.writerow(out)
    return buf.getvalue()


def svg_lambda_plot(series: dict[str, tuple[np.ndarray, np.ndarray]], title: str,
                    width: int = 640, height: int = 420) -> str:
    """Log-log line plot written as raw SVG paths."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if x > 0 and y > 0]
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="10" y="20" font-size="14">{title}</text>']
    if pts:
        lx = [math.log10(x) for x, _ in pts]
        ly = [math.log10(y) for _, y in pts]
        x0, x1 = min(lx), max(lx) + 1e-12
        y0, y1 = min(ly), max(ly) + 1e-12
        pad = 50

        def sx(v):
            return pad + (math.log10(v) - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(v):
            return height - pad - (math.log10(v) - y0) / (y1 - y0) * (height - 2 * pad)

        out.append(f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" '
                   f'height="{height - 2 * pad}" fill="none" stroke="black"/>')
        for k, (name, (xs, ys)) in enumerate(series.items()):
            seg = [(sx(x), sy(y)) for x, y in zip(xs, ys) if x > 0 and y > 0]
            if not seg:
                continue
            d = "M " + " L ".join(f"{a:.2f} {b:.2f}" for a, b in seg)
            col = colors[k % len(colors)]
            out.append(f'<path d="{d}" fill="none" stroke="{col}"/>')
            out.append(f'<text x="{width - 160}" y="{pad + 16 * (k + 1)}" fill="{col}" '
                       f'font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
