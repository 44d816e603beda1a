"""Static SVG charts: SHAP beeswarm and importance bars.

Written by hand so output bytes are deterministic and the marker/bar
structure can be counted in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .preprocess import FeatureMatrix
from .shapley import AttributionMatrix, ImportanceVector, summarize
from .stability import RankedList


@dataclass(frozen=True)
class PlotSpec:
    top_n: int = 10
    width: int = 720
    height: int = 480
    low_color: str = "#1e88e5"
    high_color: str = "#ff0052"

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.width < 200 or self.height < 100:
            raise ValueError("plot is too small (min 200x100 px)")
        for c in (self.low_color, self.high_color):
            _rgb(c)

    def to_json(self) -> dict:
        return {"top_n": self.top_n, "width": self.width, "height": self.height,
                "low_color": self.low_color, "high_color": self.high_color}

    @classmethod
    def from_json(cls, obj) -> "PlotSpec":
        return cls(**obj)


def _rgb(color: str) -> tuple[int, int, int]:
    if len(color) != 7 or not color.startswith("#"):
        raise ValueError(f"colors are #rrggbb strings, got {color!r}")
    return tuple(int(color[i:i + 2], 16) for i in (1, 3, 5))


def _mix(lo, hi, t: float) -> str:
    r, g, b = (round(a + (c - a) * t) for a, c in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def _f(v: float) -> str:
    return f"{v:.2f}"


LABEL_W = 170
MARGIN = 24
AXIS_H = 36


def _svg_open(spec: PlotSpec, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{spec.width}" height="{spec.height}" fill="white"/>',
    ]


def beeswarm_order(a: AttributionMatrix, top_n: int) -> list[int]:
    """Column indices of the top_n features by mean |SHAP|, in the same order as summarize()."""
    ranked = RankedList.from_vector(summarize(a)).top_k(top_n)
    index = {n: j for j, n in enumerate(a.feature_names)}
    return [index[n] for n in ranked]


def _jitter(i: int, j: int) -> float:
    # deterministic offsets in [-0.5, 0.5) from a golden-ratio sequence
    return ((i * 0.6180339887498949 + j * 0.7548776662466927) % 1.0) - 0.5


def beeswarm_svg(a: AttributionMatrix, m: FeatureMatrix, spec: PlotSpec = PlotSpec(), title: str = "") -> str:
    """One row per top feature, one marker per sample at x = SHAP value, colored by feature value."""
    if a.feature_names != m.feature_names:
        raise ValueError("attribution matrix and feature matrix have different features")
    if a.n_samples != m.n_rows:
        raise ValueError(f"attribution rows ({a.n_samples}) != feature rows ({m.n_rows})")
    cols = beeswarm_order(a, spec.top_n)
    lo, hi = _rgb(spec.low_color), _rgb(spec.high_color)
    plot_x0, plot_x1 = LABEL_W, spec.width - MARGIN
    plot_y0, plot_y1 = MARGIN, spec.height - AXIS_H
    vals = a.values[:, cols] if cols else np.zeros((a.n_samples, 0))
    span = float(np.abs(vals).max()) if vals.size else 0.0
    span = span if span > 0 else 1.0

    def sx(v: float) -> float:
        return plot_x0 + (v + span) / (2 * span) * (plot_x1 - plot_x0)

    row_h = (plot_y1 - plot_y0) / max(1, len(cols))
    out = _svg_open(spec, title or "SHAP summary")
    zero = sx(0.0)
    out.append(f'<line class="zero-axis" x1="{_f(zero)}" y1="{_f(plot_y0)}" x2="{_f(zero)}" '
               f'y2="{_f(plot_y1)}" stroke="#999" stroke-width="1"/>')
    for r, j in enumerate(cols):
        cy = plot_y0 + (r + 0.5) * row_h
        name = a.feature_names[j]
        out.append(f'<g class="feature" data-feature="{escape(name, {chr(34): "&quot;"})}">')
        out.append(f'<text x="{LABEL_W - 8}" y="{_f(cy + 4)}" text-anchor="end">{escape(name)}</text>')
        fv = m.X[:, j]
        lo_v, hi_v = float(fv.min()), float(fv.max())
        for i in range(a.n_samples):
            t = 0.5 if hi_v == lo_v else (float(fv[i]) - lo_v) / (hi_v - lo_v)
            y = cy + _jitter(i, r) * row_h * 0.7
            out.append(f'<circle cx="{_f(sx(float(a.values[i, j])))}" cy="{_f(y)}" r="2.5" '
                       f'fill="{_mix(lo, hi, t)}" fill-opacity="0.8"/>')
        out.append("</g>")
    out.append(f'<text x="{_f((plot_x0 + plot_x1) / 2)}" y="{spec.height - 10}" text-anchor="middle">'
               f"SHAP value (impact on model output)</text>")
    out.append(f'<text x="{_f(plot_x0)}" y="{spec.height - 22}" text-anchor="start">{_num(-span)}</text>')
    out.append(f'<text x="{_f(plot_x1)}" y="{spec.height - 22}" text-anchor="end">{_num(span)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _num(v: float) -> str:
    return f"{v:.3g}"


def fi_bar_svg(v: ImportanceVector, spec: PlotSpec = PlotSpec(), title: str = "") -> str:
    """Horizontal bars for the top_n features in RankedList order, width relative to the largest |score|."""
    ranked = RankedList.from_vector(v)
    names = ranked.top_k(spec.top_n)
    scores = ranked.scores[:len(names)]
    peak = max((abs(s) for s in scores), default=0.0)
    plot_x0, plot_x1 = LABEL_W, spec.width - MARGIN - 60
    plot_y0, plot_y1 = MARGIN, spec.height - AXIS_H
    row_h = (plot_y1 - plot_y0) / max(1, len(names))
    out = _svg_open(spec, title or "Feature importance")
    for r, (name, s) in enumerate(zip(names, scores)):
        w = 0.0 if peak == 0 else abs(s) / peak * (plot_x1 - plot_x0)
        y = plot_y0 + r * row_h + row_h * 0.15
        out.append(f'<g class="bar" data-feature="{escape(name, {chr(34): "&quot;"})}">')
        out.append(f'<text x="{LABEL_W - 8}" y="{_f(y + row_h * 0.35 + 4)}" text-anchor="end">{escape(name)}</text>')
        out.append(f'<rect x="{plot_x0}" y="{_f(y)}" width="{_f(w)}" height="{_f(row_h * 0.7)}" '
                   f'fill="{spec.low_color if s < 0 else spec.high_color}"/>')
        out.append(f'<text x="{_f(plot_x0 + w + 4)}" y="{_f(y + row_h * 0.35 + 4)}">{s:.4g}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
