"""Cut locus of a point on a surface of revolution and extremal segments.

Cut times are found in two stages. A fast-marching distance field flags the
first time where the geodesic is clearly longer than the distance to its
end point; the bracket is then closed by bisection on the exact (shooting)
distance deficit ``t - d(p, gamma(t))``, which vanishes up to the cut time
and is positive after it.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .ellipse import ellipse_point
from .errors import InputError
from .manifolds import DistanceField, polar_distance_field
from .surface import (GeodesicPath, Order, PolarCurve, Surface, SurfacePoint, curve_order,
                      reduce_angle)

DEFICIT_TOL = 1e-8
DYADIC = (0.08, 0.04, 0.02, 0.01)
AMBIGUITY = 5e-2


class Crossing(enum.Enum):
    POSITIVE = "POSITIVE"
    NEGATIVE = "NEGATIVE"
    TANGENTIAL = "TANGENTIAL"


@dataclass
class CutOracle:
    """Grid distance from p together with the cut threshold it supports."""

    field: DistanceField
    eps_cut: float
    horizon: float
    r_top: float


def make_oracle(surface: Surface, p: SurfacePoint, resolution: int = 512,
                r_max: Optional[float] = None, horizon: Optional[float] = None) -> CutOracle:
    prof = surface.profile
    if prof.closed:
        r_top = prof.ell
        horizon = 2 * prof.ell if horizon is None else horizon
    else:
        r_top = min(prof.ell, r_max if r_max is not None else prof.ell)
        horizon = 2 * r_top if horizon is None else horizon
    fld = polar_distance_field(prof, p, resolution, r_max=r_top)
    grid_err = 0.5 * fld.spacing[0]  # calibrated fast-marching error is below half a cell
    eps = max(5e-3 * horizon, 3.0 * grid_err)
    return CutOracle(fld, eps, horizon, r_top)


def _exact_deficit(surface, p, alpha, t):
    x = surface.endpoint(p, alpha, t)
    return t - surface.dist(p, x)


def cut_time(surface: Surface, p: SurfacePoint, alpha: float, oracle: Optional[CutOracle] = None,
             tol: float = 1e-9, with_conjugate: bool = True) -> float:
    """Length after which the geodesic leaving p at angle alpha stops minimizing."""
    if oracle is None:
        oracle = make_oracle(surface, p)
    return _cut_time(surface, p, alpha, oracle, tol, with_conjugate)[0]


def _cut_time(surface, p, alpha, oracle, tol, with_conjugate):
    prof = surface.profile
    T = oracle.horizon
    if not prof.closed:
        # stay inside the chart of the oracle
        T = min(T, 2 * oracle.r_top)
    step = 2.0 * oracle.field.spacing[0]
    ts = np.arange(step, T + step, step)
    st = surface._states(p, alpha, 1, ts, partial=True)
    n = len(ts)
    bad = np.nonzero(~np.isfinite(st[:, 1]) | (st[:, 1] > oracle.r_top - step))[0]
    if len(bad) and not prof.closed:
        n = bad[0]
    ts, st = ts[:n], st[:n]
    conj = None
    if with_conjugate and len(ts):
        J = st[:, 4]
        idx = np.nonzero((J[:-1] > 0) & (J[1:] <= 0))[0]
        if len(idx):
            conj = surface.conjugate_time(GeodesicPath(surface, p, alpha, float(ts[idx[0] + 1]), 1))
    if len(ts) == 0:
        return math.inf, conj
    d_grid = oracle.field.values_at(np.column_stack([st[:, 1], st[:, 2]]))
    deficit = ts - d_grid
    over = np.nonzero(deficit > oracle.eps_cut)[0]
    # bracket end: first flagged sample, else the conjugate time, else the window end
    t_hi = float(ts[over[0]]) if len(over) else float(ts[-1])
    if conj is not None:
        t_hi = min(t_hi, conj)
    if _exact_deficit(surface, p, alpha, t_hi) <= DEFICIT_TOL:
        if conj is not None and t_hi == conj:
            return conj, conj
        return math.inf, conj
    lo, hi = 0.0, t_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _exact_deficit(surface, p, alpha, mid) > DEFICIT_TOL:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), conj


@dataclass
class CutLocus:
    base: SurfacePoint
    alphas: np.ndarray
    cut_times: np.ndarray
    points: np.ndarray  # rows (r, theta) for finite cut times, NaN otherwise
    multiplicity: np.ndarray
    conjugate: np.ndarray
    conjugate_times: np.ndarray
    interior: np.ndarray  # cut point strictly inside the half surface
    edges: List[PolarCurve] = field(default_factory=list)
    boundary_tol: float = 2e-2

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.cut_times)

    def interior_points(self) -> np.ndarray:
        return self.points[self.interior]

    @property
    def is_empty(self) -> bool:
        return not np.any(self.finite)

    def to_csv(self, path: str) -> None:
        rows = np.column_stack([self.alphas, self.cut_times, self.points, self.multiplicity,
                                self.conjugate.astype(int)])
        np.savetxt(path, rows, delimiter=",", header="alpha,t_cut,r,theta,multiplicity,conjugate",
                   comments="", fmt="%.12g")


def cut_locus(surface: Surface, p: SurfacePoint, n_alpha: int = 64, oracle: Optional[CutOracle] = None,
              resolution: int = 512, boundary_tol: float = 2e-2, tol: float = 1e-9) -> CutLocus:
    """Cut points of p along an alpha grid covering [0, pi]."""
    if n_alpha < 64:
        raise InputError("n_alpha must be at least 64")
    if p.is_vertex(surface.profile):
        raise InputError("cut locus of a vertex is a single point or empty; not sampled here")
    if oracle is None:
        oracle = make_oracle(surface, p, resolution)
    alphas = np.linspace(0.0, math.pi, n_alpha)
    tc = np.full(n_alpha, math.inf)
    tconj = np.full(n_alpha, math.inf)
    pts = np.full((n_alpha, 2), np.nan)
    mult = np.zeros(n_alpha, dtype=int)
    conj = np.zeros(n_alpha, dtype=bool)
    for i, a in enumerate(alphas):
        t, c = _cut_time(surface, p, float(a), oracle, tol, True)
        tc[i] = t
        if c is not None:
            tconj[i] = c
        if math.isfinite(t):
            x = surface.endpoint(p, float(a), t)
            pts[i] = (x.r, x.theta)
            res = surface.distance(p, x, n_samples=3)
            mult[i] = max(len(res.paths), 1)
            conj[i] = c is not None and abs(c - t) <= 1e-6
    dth = np.array([reduce_angle(th - p.theta) if np.isfinite(th) else np.nan for th in pts[:, 1]])
    with np.errstate(invalid="ignore"):
        interior = (np.isfinite(dth) & (dth > boundary_tol) & (dth < math.pi - boundary_tol)
                    & (pts[:, 0] > boundary_tol))
        if surface.closed:
            interior &= pts[:, 0] < surface.ell - boundary_tol
    edges = _edges(pts[interior], surface, p, math.pi / (n_alpha - 1))
    return CutLocus(p, alphas, tc, pts, mult, conj, tconj, interior, edges, boundary_tol)


def _edges(pts: np.ndarray, surface: Surface, p: SurfacePoint, alpha_step: float = 0.0) -> List[PolarCurve]:
    """Theta-sorted polylines through interior cut points, one per component.

    ``pts`` is in alpha order. Two points are joined when they are close in
    the plane of the chart, or when they come from adjacent grid angles and
    the jump stays below the continuity bound of the cut time.
    """
    n = len(pts)
    if n < 2:
        return []
    th = np.array([p.theta + (reduce_angle(t - p.theta) % (2 * math.pi)) for t in pts[:, 1]])
    xy = np.column_stack([pts[:, 0] * np.cos(th), pts[:, 0] * np.sin(th)])
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(th)
    gap = np.hypot(*np.diff(xy[order], axis=0).T)
    thr = max(5 * np.median(gap), 0.05 * surface.ell if surface.closed else 0.1)
    for k in np.nonzero(gap <= thr)[0]:
        parent[find(order[k])] = find(order[k + 1])
    jump = 10 * alpha_step * (surface.ell if surface.closed else 1.0)
    for k in range(n - 1):
        if np.hypot(*(xy[k + 1] - xy[k])) <= jump:
            parent[find(k)] = find(k + 1)
    roots = np.array([find(i) for i in range(n)])
    out = []
    for root in np.unique(roots):
        idx = np.nonzero(roots == root)[0]
        idx = idx[np.argsort(th[idx], kind="stable")]
        t, rr = th[idx], pts[idx, 0]
        keep = np.concatenate([[True], np.diff(t) > 1e-9])
        if np.count_nonzero(keep) >= 2:
            out.append(PolarCurve(t[keep], rr[keep]))
    out.sort(key=lambda c: c.theta_range[0])
    return out


# ------------------------------------------------------------ extremal pair

@dataclass
class ExtremalPair:
    upper: GeodesicPath
    lower: GeodesicPath
    unique: bool
    ambiguous: bool = False
    method: str = "unique"
    levels: list = field(default_factory=list)

    def order(self) -> Order:
        return _order_paths(self.lower, self.upper)


def _order_paths(g1: GeodesicPath, g2: GeodesicPath, tol: float = 1e-7) -> Order:
    try:
        return curve_order(g1.polar_curve(), g2.polar_curve(), tol).relation
    except InputError:
        return Order.EQ if abs(g1.signed_angle - g2.signed_angle) < 1e-7 else Order.INCOMPARABLE


def extremal_segments(surface: Surface, p: SurfacePoint, q: SurfacePoint, n_samples: int = 257,
                      levels=DYADIC) -> ExtremalPair:
    """Greatest and least minimizing segments from p to q for the polar order."""
    if q.is_vertex(surface.profile):
        raise InputError("q must not be a vertex")
    res = surface.distance(p, q, n_samples=n_samples)
    paths = sorted(res.paths, key=lambda g: g.signed_angle)
    if len(paths) == 1:
        return ExtremalPair(paths[0], paths[0], True)
    dq = reduce_angle(q.theta - p.theta)
    side = 1 if dq >= 0 else -1
    a = q.r + res.distance
    degenerate = surface.closed and a >= 2 * surface.ell - p.r - 1e-9
    on_far_meridian = abs(abs(dq) - math.pi) < 1e-12
    if degenerate or p.r <= 1e-12:
        # the ellipse is not a curve; use the extreme initial angles
        up = max(paths, key=lambda g: g.initial_angle)
        lo = min(paths, key=lambda g: g.initial_angle)
        return ExtremalPair(up, lo, False, False, "alpha-extremes")
    lim = {}
    for sgn, key in ((-1, "upper"), (1, "lower")):
        seq = []
        for dphi in levels:
            phi = q.theta + side * sgn * dphi
            if on_far_meridian and sgn == 1:
                # past the opposite meridian the picture is the mirror image
                phi = q.theta - side * dphi
            x = ellipse_point(surface, p, a, phi, r_guess=q.r)
            r2 = surface.distance(p, x, n_samples=3)
            s = [side * sa for sa in r2.alphas]
            seq.append(s[0] if len(s) == 1 else (max(s) if sgn < 0 else min(s)))
        lim[key] = seq
    amb = any(abs(v[-1] - v[-2]) > AMBIGUITY for v in lim.values())

    def nearest(target, mirror=False):
        cands = [g for g in paths if (g.orientation == side) != mirror] or paths
        return min(cands, key=lambda g: abs(g.initial_angle - target))

    up = nearest(lim["upper"][-1])
    if on_far_meridian:
        lo = GeodesicPath(surface, up.start, up.initial_angle, up.length, -up.orientation, n_samples)
    else:
        lo = nearest(lim["lower"][-1])
    return ExtremalPair(up, lo, False, amb, "ellipse-limit", [lim["upper"], lim["lower"]])


# ---------------------------------------------------------------- crossing

def classify_crossing(c: PolarCurve, cl: CutLocus, x: SurfacePoint, window: float = 0.05,
                      tol: float = 1e-6, edge_tol: float = 2e-2) -> Crossing:
    """Side from which c reaches the cut-locus edge at x (looking before x)."""
    edge = None
    for e in cl.edges:
        lo, hi = e.theta_range
        if lo - edge_tol <= x.theta <= hi + edge_tol and abs(e(x.theta) - x.r) <= edge_tol:
            edge = e
            break
    if edge is None:
        raise InputError("x is not on an interior edge of the cut locus")
    # stop short of x, where both curves meet and sampling error decides the sign
    lo = max(x.theta - window, edge.theta_range[0], c.theta_range[0])
    hi = min(x.theta - 0.2 * window, edge.theta_range[1], c.theta_range[1])
    if not hi > lo:
        raise InputError("no common theta window before x")
    rel = curve_order(c.restrict(lo, hi), edge.restrict(lo, hi), tol).relation
    if rel is Order.GE:
        return Crossing.POSITIVE
    if rel is Order.LE:
        return Crossing.NEGATIVE
    return Crossing.TANGENTIAL
