"""Ellipses on the unit flat cylinder, seen in the universal cover.

Cover coordinates are (height, angle) with the flat metric. o0 = (0, 0) and
the lifts of p are p0 = (2, -pi/2) and p1 = (2, 3pi/2). U is the strip
|angle| <= pi, the lift of the normal neighbourhood of o, so Cut(o) lifts to
angle = +-pi.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np
from scipy.optimize import minimize_scalar
from skimage import measure

from .manifolds import cylinder_distance

O0 = np.array([0.0, 0.0])
P0 = np.array([2.0, -0.5 * math.pi])
P1 = np.array([2.0, 1.5 * math.pi])
EQ_TOL = 1e-9


class Regime(str, enum.Enum):
    ELLIPSE = "ELLIPSE"  # E = E(o0, p0; r), a smooth closed curve inside U
    ELLIPSE_PLUS_SEGMENT = "ELLIPSE_PLUS_SEGMENT"  # E(o0, p0; r0) and the segment T(a, q1)
    UNION_BOUNDARY = "UNION_BOUNDARY"  # boundary of B(o0,p0;r) u B(o0,p1;r), cut to U
    UNEXPECTED = "UNEXPECTED"


def F_cyl(pts) -> np.ndarray:
    """d(o, w) + d(p, w) on the cylinder, vectorized over (height, angle) rows."""
    pts = np.atleast_2d(np.asarray(pts, float))
    ks = 2.0 * math.pi * np.arange(-2, 3)

    def d(src):
        dh = pts[:, 0, None] - src[0]
        da = pts[:, 1, None] - src[1] + ks[None, :]
        return np.min(np.hypot(dh, da), axis=1)
    return d(O0) + d(P0)


def cut_objective(y: float) -> float:
    """F at the cut point (y, pi)."""
    return math.sqrt(y * y + math.pi ** 2) + math.sqrt((y - 2.0) ** 2 + 0.25 * math.pi ** 2)


def r0_golden(tol: float = 1e-12) -> tuple:
    """Minimum of F over Cut(o) by golden-section search on y in [0, 2]."""
    res = minimize_scalar(cut_objective, bracket=(0.0, 1.0, 2.0), method="golden", tol=tol)
    return float(res.fun), float(res.x)


def _planar_focal(pts, a, b):
    return np.hypot(*(pts - a).T) + np.hypot(*(pts - b).T)


def _planar_ellipse(a, b, r, n):
    """n points of {x : |x-a| + |x-b| = r}; the segment [a, b] when degenerate."""
    c = 0.5 * (a + b)
    dist = float(np.hypot(*(b - a)))
    u = (b - a) / dist
    v = np.array([-u[1], u[0]])
    semi = 0.5 * r
    minor = math.sqrt(max(semi * semi - 0.25 * dist * dist, 0.0))
    s = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return c + np.outer(semi * np.cos(s), u) + np.outer(minor * np.sin(s), v)


@dataclass
class LevelReport:
    r: float
    regime: Regime
    leaves_U: bool
    n_p0_branch: int
    n_p1_branch: int
    max_residual: float  # |F - r| over the predicted set
    hausdorff_to_grid: float  # grid contour against the predicted set
    grid_components: int
    grid_touches_cut: bool
    samples: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def _grid_contours(r, resolution=600):
    hs = np.linspace(-4.0, 8.0, resolution)
    angs = np.linspace(-math.pi, math.pi, resolution)
    H, A = np.meshgrid(hs, angs, indexing="ij")
    F = F_cyl(np.column_stack([H.ravel(), A.ravel()])).reshape(H.shape)
    cs = measure.find_contours(F, r)
    out = []
    for c in cs:
        h = hs[0] + c[:, 0] * (hs[1] - hs[0])
        a = angs[0] + c[:, 1] * (angs[1] - angs[0])
        out.append(np.column_stack([h, a]))
    return out, float(max(hs[1] - hs[0], angs[1] - angs[0]))


def predicted_set(r: float, n: int = 4000, seg_tol: float = EQ_TOL):
    """Points of the closed-form description of the lifted ellipse at level r.

    Returns (p0 branch, p1 branch, leaves_U, p1 degenerate).
    """
    e0 = _planar_ellipse(O0, P0, r, n)
    in_u = np.abs(e0[:, 1]) <= math.pi
    leaves = bool(np.min(math.pi - np.abs(e0[:, 1])) < -seg_tol)
    d1 = float(np.hypot(*P1))
    if r < d1 - seg_tol:
        b1 = np.zeros((0, 2))
    elif r <= d1 + seg_tol:
        b1 = O0 + np.outer(np.linspace(0.0, 1.0, n), P1 - O0)
    else:
        b1 = _planar_ellipse(O0, P1, r, n)
    part0 = e0[in_u & (_planar_focal(e0, O0, P1) >= r - seg_tol)]
    if len(b1):
        keep = (np.abs(b1[:, 1]) <= math.pi) & (_planar_focal(b1, O0, P0) >= r - seg_tol)
        b1 = b1[keep]
    return part0, b1, leaves, r <= d1 + seg_tol


def classify_level(r: float, n: int = 4000, grid: int = 600) -> LevelReport:
    part0, part1, leaves, degenerate = predicted_set(r, n)
    if len(part1) == 0 and not leaves:
        regime = Regime.ELLIPSE
    elif len(part1) and degenerate:
        regime = Regime.ELLIPSE_PLUS_SEGMENT
    elif len(part1) and not degenerate:
        regime = Regime.UNION_BOUNDARY
    else:
        regime = Regime.UNEXPECTED
    pred = np.vstack([part0, part1])
    resid = float(np.max(np.abs(F_cyl(pred) - r))) if len(pred) else math.inf
    cs, h = _grid_contours(r, grid)
    haus = 0.0
    touches = False
    for c in cs:
        touches |= bool(np.any(math.pi - np.abs(c[:, 1]) < 2 * h))
        # nearest predicted point for each grid contour point
        d = np.min(np.hypot(c[:, None, 0] - pred[None, ::4, 0], c[:, None, 1] - pred[None, ::4, 1]), axis=1)
        haus = max(haus, float(np.max(d)))
    return LevelReport(float(r), regime, leaves, len(part0), len(part1), resid, haus, len(cs), touches,
                       len(pred))


@dataclass
class CylinderReport:
    d_op: float
    d_op_closed_form: float
    r0: float
    r0_argmin_y: float
    r0_exceeds_d_op: bool
    levels: List[LevelReport]
    expected: List[str]
    union_check: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        got = [lv.regime.value for lv in self.levels]
        return (self.r0_exceeds_d_op and got == self.expected
                and abs(self.d_op - self.d_op_closed_form) <= 1e-9
                and self.union_check.get("max_residual", math.inf) <= 1e-9
                and all(lv.max_residual <= 1e-9 for lv in self.levels))

    def to_dict(self) -> dict:
        return {
            "d_op": self.d_op, "d_op_closed_form": self.d_op_closed_form,
            "r0": self.r0, "r0_argmin_y": self.r0_argmin_y, "r0_exceeds_d_op": self.r0_exceeds_d_op,
            "levels": [lv.to_dict() for lv in self.levels], "expected": self.expected,
            "union_check": self.union_check, "passed": self.passed,
        }


def union_boundary_check(r: float, n_points: int = 1000, seed: int = 0) -> Dict[str, float]:
    """Sample the boundary of the union of lifted balls inside U and test F = r there.

    Also checks that points pushed slightly inward lie in the ball and points
    pushed outward do not.
    """
    rng = np.random.default_rng(seed)
    part0, part1, _, _ = predicted_set(r, 20 * n_points)
    pts = np.vstack([part0, part1])
    pts = pts[rng.choice(len(pts), size=min(n_points, len(pts)), replace=False)]
    resid = np.abs(F_cyl(pts) - r)
    # inward and outward probes along the radial direction from o0
    nrm = pts / np.maximum(np.hypot(*pts.T), 1e-300)[:, None]
    eps = 1e-4
    inner = F_cyl(pts - eps * nrm) < r
    outer = F_cyl(pts + eps * nrm) > r
    return {"n_points": int(len(pts)), "max_residual": float(np.max(resid)),
            "inner_fraction": float(np.mean(inner)), "outer_fraction": float(np.mean(outer))}


def example_cylinder(offset: float = 0.3, n_union: int = 1000, seed: int = 0) -> CylinderReport:
    o = (0.0, 0.0)
    p = (2.0, -0.5 * math.pi)
    d_op = cylinder_distance(o, p, 1.0)
    r0, y0 = r0_golden()
    levels = [classify_level(r0 - offset), classify_level(r0), classify_level(r0 + offset)]
    union = union_boundary_check(r0 + offset, n_union, seed)
    return CylinderReport(d_op, math.sqrt(4.0 + 0.25 * math.pi ** 2), r0, y0, r0 > d_op, levels,
                          [Regime.ELLIPSE.value, Regime.ELLIPSE_PLUS_SEGMENT.value,
                           Regime.UNION_BOUNDARY.value], union)
