"""Minimal SVG emission for azimuthal (r, theta) plots.

Legend: cut loci red, ellipses blue, reference curves green, extremal
segments U and L dashed.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

STYLES = {
    "cut": 'stroke="red" fill="none" stroke-width="1.2"',
    "cut_point": 'fill="red"',
    "ellipse": 'stroke="blue" fill="none" stroke-width="1"',
    "reference": 'stroke="green" fill="none" stroke-width="1.2"',
    "U": 'stroke="black" fill="none" stroke-dasharray="6,3"',
    "L": 'stroke="gray" fill="none" stroke-dasharray="2,3"',
    "grid": 'stroke="#ddd" fill="none" stroke-width="0.5"',
    "point": 'fill="black"',
}


class PolarPlot:
    def __init__(self, r_max: float, size: int = 480, title: str = ""):
        self.r_max = float(r_max)
        self.size = size
        self.title = title
        self.items: List[str] = []
        self.legend: List[Tuple[str, str]] = []

    def _xy(self, r, th):
        s = 0.45 * self.size / self.r_max
        c = 0.5 * self.size
        return c + s * np.asarray(r) * np.cos(th), c - s * np.asarray(r) * np.sin(th)

    def grid(self, n_par: int = 4, n_mer: int = 12) -> "PolarPlot":
        c = 0.5 * self.size
        for k in range(1, n_par + 1):
            rad = 0.45 * self.size * k / n_par
            self.items.append(f'<circle cx="{c:.2f}" cy="{c:.2f}" r="{rad:.2f}" {STYLES["grid"]}/>')
        for k in range(n_mer):
            x, y = self._xy(self.r_max, 2 * math.pi * k / n_mer)
            self.items.append(f'<line x1="{c:.2f}" y1="{c:.2f}" x2="{float(x):.2f}" y2="{float(y):.2f}" '
                              f'{STYLES["grid"]}/>')
        return self

    def curve(self, r: Sequence[float], theta: Sequence[float], style: str, label: Optional[str] = None):
        r = np.asarray(r, float)
        th = np.asarray(theta, float)
        ok = np.isfinite(r) & np.isfinite(th)
        if np.count_nonzero(ok) < 2:
            return self
        x, y = self._xy(r[ok], th[ok])
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        self.items.append(f'<polyline points="{pts}" {STYLES[style]}/>')
        if label and (label, style) not in self.legend:
            self.legend.append((label, style))
        return self

    def points(self, r, theta, style: str = "point", radius: float = 2.0, label: Optional[str] = None):
        r = np.asarray(r, float)
        th = np.asarray(theta, float)
        ok = np.isfinite(r) & np.isfinite(th)
        x, y = self._xy(r[ok], th[ok])
        for a, b in zip(x, y):
            self.items.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{radius}" {STYLES[style]}/>')
        if label and (label, style) not in self.legend:
            self.legend.append((label, style))
        return self

    def render(self) -> str:
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.size}" height="{self.size}" '
               f'viewBox="0 0 {self.size} {self.size}">', '<rect width="100%" height="100%" fill="white"/>']
        if self.title:
            out.append(f'<text x="8" y="16" font-size="12">{self.title}</text>')
        out.extend(self.items)
        for i, (label, style) in enumerate(self.legend):
            y = self.size - 12 - 14 * i
            dash = ' stroke-dasharray="4,2"' if style in ("U", "L") else ""
            out.append(f'<line x1="8" y1="{y - 4}" x2="28" y2="{y - 4}" stroke="{_colour(style)}"{dash}/>')
            out.append(f'<text x="32" y="{y}" font-size="11">{label}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def _colour(style: str) -> str:
    return {"cut": "red", "cut_point": "red", "ellipse": "blue", "reference": "green", "U": "black",
            "L": "gray", "point": "black"}.get(style, "black")
