"""Ellipses with one focus at the vertex of a surface of revolution.

``E(o, p; a)`` is the level set ``d(o, x) + d(p, x) = a`` and ``B(o, p; a)``
the corresponding sublevel set. Since ``d(o, x) = r(x)``, each meridian
meets the ellipse once, so the curve is stored as ``r(phi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, SolverError
from .surface import PolarCurve, Surface, SurfacePoint

BALL_TOL = 1e-9


def _check_sum(surface: Surface, p: SurfacePoint, a: float):
    c = p.r
    if surface.closed:
        if not (c < a < 2 * surface.ell - c):
            raise InputError(f"sum {a} outside ({c}, {2 * surface.ell - c})")
    elif not a > c:
        raise InputError(f"sum {a} must exceed d(o, p) = {c}")


def ellipse_point(surface: Surface, p: SurfacePoint, a: float, phi: float,
                  tol: float = 1e-10, r_guess: Optional[float] = None) -> SurfacePoint:
    """Point of E(o, p; a) on the meridian theta = phi.

    Solves ``g(r) = r + d(p, (r, phi)) = a``; g is non-decreasing with slope
    ``1 + cos(arrival angle)``, which drives a bracketed Newton iteration.
    """
    _check_sum(surface, p, a)
    lo = 0.0
    hi = surface.ell if surface.closed else min(a, surface.ell)

    def g(r):
        res = surface.distance(p, SurfacePoint(r, phi), paths=False)
        slope = 1.0 + (max(res.arrival_cos) if res.arrival_cos else 0.0)
        return r + res.distance - a, slope

    glo = p.r - a  # g(0) = d(p, o) - a
    if not surface.closed and g(hi)[0] < 0:
        raise SolverError("ellipse leaves the sampled domain of the profile")
    r = 0.5 * (lo + hi) if r_guess is None else min(max(r_guess, lo), hi)
    for _ in range(200):
        gv, dg = g(r)
        if abs(gv) <= tol:
            return SurfacePoint(r, phi)
        if gv < 0:
            lo = r
        else:
            hi = r
        step = r - gv / dg if dg > 1e-3 else None
        r = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-14:
            break
    gv, _ = g(r)
    if abs(gv) > 1e3 * tol:
        raise SolverError(f"ellipse point did not converge (residual {gv:.3g})")
    return SurfacePoint(r, phi)


@dataclass
class EllipseCurve:
    focus_p: SurfacePoint
    sum: float
    phi: np.ndarray
    r: np.ndarray
    residual: np.ndarray
    surface: Surface = field(repr=False)
    checks: dict = field(default_factory=dict)

    @property
    def focus_o(self) -> SurfacePoint:
        return SurfacePoint(0.0, 0.0)

    @property
    def r_of_phi(self) -> PolarCurve:
        return PolarCurve(self.phi, self.r)

    def points(self):
        return [SurfacePoint(float(r), float(t)) for r, t in zip(self.r, self.phi)]

    def to_csv(self, path: str) -> None:
        np.savetxt(path, np.column_stack([self.phi, self.r]), delimiter=",", header="phi,r",
                   comments="", fmt="%.12g")


def phi_grid(theta_p: float, n_phi: int) -> np.ndarray:
    """Symmetric grid on [theta_p - pi, theta_p + pi], denser near both ends."""
    half = max(n_phi // 2, 2)
    s = np.linspace(0.0, 1.0, half + 1)
    u = np.sin(0.5 * math.pi * s)
    return theta_p + math.pi * np.concatenate([-u[:0:-1], u])


def build_ellipse(surface: Surface, p: SurfacePoint, a: float, n_phi: int = 512,
                  validate: bool = True) -> EllipseCurve:
    """Sample E(o, p; a) over a phi grid and record its structural checks."""
    _check_sum(surface, p, a)
    phis = phi_grid(p.theta, n_phi)
    rs = np.empty(len(phis))
    mid = len(phis) // 2
    # continuation outward from theta_p on both sides
    order = [mid] + [i for k in range(1, mid + 1) for i in (mid - k, mid + k)]
    for i in order:
        guess = None
        if i != mid:
            j = i + 1 if i < mid else i - 1
            guess = rs[j]
        rs[i] = ellipse_point(surface, p, a, float(phis[i]), r_guess=guess).r
    resid = np.array([r + surface.dist(p, SurfacePoint(r, t)) - a for r, t in zip(rs, phis)])
    e = EllipseCurve(p, float(a), phis, rs, resid, surface)
    if validate:
        e.checks = ellipse_checks(e)
    return e


def ellipse_checks(e: EllipseCurve) -> dict:
    """Residual, symmetry, monotonicity and maximum of r(phi)."""
    r = e.r
    mid = len(r) // 2
    left, right = r[:mid + 1], r[mid:]
    sym = float(np.max(np.abs(r[::-1] - r)))
    mono_left = float(np.max(np.maximum(0.0, -np.diff(left)))) if len(left) > 1 else 0.0
    mono_right = float(np.max(np.maximum(0.0, np.diff(right)))) if len(right) > 1 else 0.0
    c = e.focus_p.r
    return {
        "max_residual": float(np.max(np.abs(e.residual))),
        "symmetry": sym,
        "monotone_violation": max(mono_left, mono_right),
        "max_r_error": float(abs(np.max(r) - 0.5 * (e.sum + c))),
        "argmax_phi": float(e.phi[int(np.argmax(r))] - e.focus_p.theta),
        "argmin_phi": float(abs(e.phi[int(np.argmin(r))] - e.focus_p.theta)),
    }


def ball_contains(e: EllipseCurve, x: SurfacePoint, tol: float = BALL_TOL) -> bool:
    """x in B(o, p; a), evaluated from the defining inequality."""
    return x.r + e.surface.dist(e.focus_p, x) <= e.sum + tol


def focal_sum(e: EllipseCurve, x: SurfacePoint) -> float:
    return x.r + e.surface.dist(e.focus_p, x)


@dataclass
class StarReport:
    n_boundary: int
    n_checked: int
    max_violation: float
    worst: Optional[tuple] = None

    @property
    def ok(self) -> bool:
        return self.max_violation <= BALL_TOL


def star_shaped_check(e: EllipseCurve, n_samples: int = 64, per_segment: int = 9) -> StarReport:
    """Check that segments from p and from o to boundary points stay in the ball."""
    surface = e.surface
    idx = np.unique(np.linspace(0, len(e.phi) - 1, n_samples).round().astype(int))
    worst, wpt, count = -math.inf, None, 0
    ts = np.linspace(0.0, 1.0, per_segment)[1:-1]
    for i in idx:
        q = SurfacePoint(float(e.r[i]), float(e.phi[i]))
        res = surface.distance(e.focus_p, q, n_samples=per_segment)
        pts = []
        for g in res.paths[:1]:
            pts += [SurfacePoint(float(r), float(t)) for r, t in g.at(ts * g.length)]
        pts += [SurfacePoint(float(s * q.r), q.theta) for s in ts]
        for x in pts:
            v = focal_sum(e, x) - e.sum
            count += 1
            if v > worst:
                worst, wpt = v, (x.r, x.theta)
    return StarReport(len(idx), count, max(worst, 0.0), wpt)


def level_distance_monotone(e: EllipseCurve, n_u: int = 30) -> float:
    """Largest increase of u -> d(p, e+(u)) over the upper half (0 if decreasing)."""
    mid = len(e.r) // 2
    phis, rs = e.phi[mid:], e.r[mid:]
    us = np.linspace(rs[-1], rs[0], n_u + 2)[1:-1]
    vals = []
    for u in us:
        phi = float(np.interp(u, rs[::-1], phis[::-1]))
        # refine the meridian so that the point lies on the level set r = u
        pt = SurfacePoint(float(u), phi)
        lo, hi = e.focus_p.theta, e.focus_p.theta + math.pi
        for _ in range(60):
            f = u + e.surface.dist(e.focus_p, pt) - e.sum
            if abs(f) < 1e-11:
                break
            # f increases with the angular gap from p on a fixed parallel
            if f > 0:
                hi = pt.theta
            else:
                lo = pt.theta
            pt = SurfacePoint(float(u), 0.5 * (lo + hi))
        vals.append(e.surface.dist(e.focus_p, pt))
    return float(max(0.0, np.max(np.diff(vals)))) if len(vals) > 1 else 0.0


def tangency_check(e: EllipseCurve, n: int = 181) -> dict:
    """Circle of radius (a - d(o,p))/2 about p: largest focal sum and where."""
    b = 0.5 * (e.sum - e.focus_p.r)
    best, where = -math.inf, None
    for o in (1, -1):
        for al in np.linspace(0.0, math.pi, n):
            x = e.surface.endpoint(e.focus_p, float(al), b, o)
            v = focal_sum(e, x)
            if v > best:
                best, where = v, x
    return {"radius": b, "max_sum": best, "sum_error": best - e.sum,
            "theta_offset": abs(math.remainder(where.theta - e.focus_p.theta, 2 * math.pi)) * (where.r > 0)}
