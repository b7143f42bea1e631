"""Test manifolds (M, o): distances, minimizing segments and angles.

Three kinds are supported: a surface of revolution (delegating to
:mod:`radcomp.surface`), the flat cylinder (closed form over lifts) and a
rectangular chart with a diagonal metric, whose distances come from a
fast-marching eikonal solve.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import _kernels as _k
from .errors import InputError
from .profile import RadialProfile
from .surface import GeodesicPath, Surface, SurfacePoint, reduce_angle

TWO_PI = 2.0 * math.pi


# ----------------------------------------------------------- distance fields

@dataclass
class DistanceField:
    """Eikonal distance from ``source`` sampled on a chart grid.

    Axis 0 is x (or r on polar charts), axis 1 is y (or theta). Nodes are
    ``axes[0][i], axes[1][j]``; ``s0, s1`` are the square roots of the
    diagonal metric coefficients at the nodes.
    """

    source: Tuple[float, float]
    axes: Tuple[np.ndarray, np.ndarray]
    values: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    periodic: bool = False
    period: float = TWO_PI
    polar: bool = False
    closed: bool = False
    ell: float = math.inf
    order: int = 2

    @property
    def spacing(self) -> Tuple[float, float]:
        a, b = self.axes
        h1 = self.period / len(b) if self.periodic else b[1] - b[0]
        return float(a[1] - a[0]), float(h1)

    @property
    def min_spacing(self) -> float:
        """Smallest metric cell size away from vertices."""
        h0, h1 = self.spacing
        s1 = self.s1[len(self.axes[0]) // 4: 3 * len(self.axes[0]) // 4] if self.polar else self.s1
        return float(min(h0 * np.min(self.s0), h1 * np.max(s1)))

    def _pole_value(self, lo=True):
        row = self.values[0] if lo else self.values[-1]
        return float(np.mean(row))

    def value(self, pt) -> float:
        return float(self.values_at(np.atleast_2d(np.asarray(pt, dtype=float)))[0])

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at chart points (rows of (x, y))."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1 and isinstance(pts, np.ndarray) and len(pts) == 2:
            pts = pts[None, :]
        x, y = pts[:, 0].copy(), pts[:, 1].copy()
        bad = ~(np.isfinite(x) & np.isfinite(y))
        if np.any(bad):
            out = np.full(len(x), np.nan)
            out[~bad] = self.values_at(pts[~bad]) if np.any(~bad) else []
            return out
        a, b = self.axes
        h0, h1 = self.spacing
        V = self.values
        n0, n1 = V.shape
        if self.periodic:
            fy = np.mod(y - b[0], self.period) / h1
            j0 = np.floor(fy).astype(int) % n1
            j1 = (j0 + 1) % n1
            ty = fy - np.floor(fy)
        else:
            fy = np.clip((y - b[0]) / h1, 0, n1 - 1 - 1e-12)
            j0 = np.floor(fy).astype(int)
            j1 = j0 + 1
            ty = fy - j0
        fx = (x - a[0]) / h0
        out = np.empty(len(x))
        lo = fx < 0
        hi = fx > n0 - 1
        mid = ~(lo | hi)
        fxm = fx[mid]
        i0 = np.minimum(np.floor(fxm).astype(int), n0 - 2)
        tx = fxm - i0
        v0 = V[i0, j0[mid]] * (1 - ty[mid]) + V[i0, j1[mid]] * ty[mid]
        v1 = V[i0 + 1, j0[mid]] * (1 - ty[mid]) + V[i0 + 1, j1[mid]] * ty[mid]
        out[mid] = v0 * (1 - tx) + v1 * tx
        for m, i, pole_ok, edge in ((lo, 0, self.polar, 0.0), (hi, n0 - 1, self.polar and self.closed, None)):
            if not np.any(m):
                continue
            ring = V[i, j0[m]] * (1 - ty[m]) + V[i, j1[m]] * ty[m]
            if pole_ok:
                pv = self._pole_value(i == 0)
                xe = 0.0 if i == 0 else self.ell
                w = np.clip(np.abs(x[m] - xe) / (0.5 * h0), 0, 1)
                out[m] = pv * (1 - w) + ring * w
            else:
                out[m] = ring
        return out

    def ridge_mask(self) -> np.ndarray:
        """Nodes where both neighbours along an axis are lower (kinks of d)."""
        V = self.values
        h0, h1 = self.spacing
        m = np.zeros(V.shape, dtype=bool)
        thr0 = 0.1 * h0 * self.s0[1:-1]
        m[1:-1] |= (V[1:-1] - V[:-2] > thr0) & (V[1:-1] - V[2:] > thr0)
        if self.periodic:
            up, dn = np.roll(V, -1, axis=1), np.roll(V, 1, axis=1)
            thr1 = 0.1 * h1 * self.s1
            m |= (V - up > thr1) & (V - dn > thr1)
        else:
            thr1 = 0.1 * h1 * self.s1[:, 1:-1]
            m[:, 1:-1] |= (V[:, 1:-1] - V[:, :-2] > thr1) & (V[:, 1:-1] - V[:, 2:] > thr1)
        # dilate by one cell
        d = m.copy()
        d[1:] |= m[:-1]
        d[:-1] |= m[1:]
        d |= np.roll(m, 1, axis=1) | np.roll(m, -1, axis=1)
        return d

    def eikonal_residual(self, exclude_cells: int = 3) -> np.ndarray:
        """| |grad d|_g - 1 | by centred differences, NaN on excluded nodes."""
        V = self.values
        h0, h1 = self.spacing
        res = np.full(V.shape, np.nan)
        dx = (V[2:, :] - V[:-2, :]) / (2 * h0)
        if self.periodic:
            dy = (np.roll(V, -1, axis=1) - np.roll(V, 1, axis=1)) / (2 * h1)
            dy = dy[1:-1]
        else:
            dy = np.full_like(dx, np.nan)
            dy[:, 1:-1] = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * h1)
        g = np.sqrt((dx / self.s0[1:-1]) ** 2 + (dy / self.s1[1:-1]) ** 2)
        res[1:-1] = np.abs(g - 1.0)
        bad = self.ridge_mask() | (V < exclude_cells * self.min_spacing)
        res[bad] = np.nan
        return res

    def gradient_at(self, pt) -> np.ndarray:
        h0, h1 = self.spacing
        x, y = pt
        e0, e1 = 0.5 * h0, 0.5 * h1
        v = self.values_at(np.array([[x + e0, y], [x - e0, y], [x, y + e1], [x, y - e1]]))
        return np.array([(v[0] - v[1]) / (2 * e0), (v[2] - v[3]) / (2 * e1)])

    def to_csv(self, path: str) -> None:
        a, b = self.axes
        X, Y = np.meshgrid(a, b, indexing="ij")
        np.savetxt(path, np.column_stack([X.ravel(), Y.ravel(), self.values.ravel()]),
                   delimiter=",", header="x,y,d", comments="", fmt="%.12g")


def _march(d, st, h0, h1, s0, s1, periodic, pole_lo, pole_hi):
    if np.any(s0 <= 0) or np.any(s1 <= 0) or not (np.all(np.isfinite(s0)) and np.all(np.isfinite(s1))):
        raise InputError("metric coefficients must be positive and finite")
    ok = _k.fast_march(d, st, float(h0), float(h1), np.ascontiguousarray(s0), np.ascontiguousarray(s1),
                       bool(periodic), bool(pole_lo), bool(pole_hi), True)
    if not ok:
        raise RuntimeError("fast marching heap overflow")
    return d


def cartesian_field(x_axis, y_axis, g11: Callable, g22: Callable, source, periodic=False,
                    period=TWO_PI, init_cells: float = 10.0) -> DistanceField:
    """Distance from ``source`` on a chart with metric g11 dx^2 + g22 dy^2."""
    x_axis = np.asarray(x_axis, float)
    y_axis = np.asarray(y_axis, float)
    X, Y = np.meshgrid(x_axis, y_axis, indexing="ij")
    a0 = np.broadcast_to(np.asarray(g11(X, Y), float), X.shape)
    a1 = np.broadcast_to(np.asarray(g22(X, Y), float), X.shape)
    if not (np.all(np.isfinite(a0)) and np.all(np.isfinite(a1)) and np.all(a0 > 0) and np.all(a1 > 0)):
        raise InputError("degenerate metric cell in chart")
    s0, s1 = np.sqrt(a0), np.sqrt(a1)
    h0 = x_axis[1] - x_axis[0]
    h1 = period / len(y_axis) if periodic else y_axis[1] - y_axis[0]
    d = np.full(X.shape, np.inf)
    st = np.zeros(X.shape, dtype=np.int64)
    sx, sy = float(source[0]), float(source[1])
    dx = X - sx
    dy = Y - sy
    if periodic:
        dy = np.remainder(dy + 0.5 * period, period) - 0.5 * period
    sm0 = np.sqrt(np.asarray(g11(0.5 * (X + sx), Y), float) * np.ones_like(X))
    sm1 = np.sqrt(np.asarray(g22(X, Y - 0.5 * dy), float) * np.ones_like(X))
    loc = np.hypot(sm0 * dx, sm1 * dy)
    near = (np.abs(dx) <= init_cells * h0) & (np.abs(dy) <= init_cells * h1)
    d[near] = loc[near]
    st[near] = _k.KNOWN
    _march(d, st, h0, h1, s0, s1, periodic, False, False)
    return DistanceField((sx, sy), (x_axis, y_axis), d, s0, s1, periodic, period)


def polar_distance_field(profile: RadialProfile, source: SurfacePoint, resolution: int = 1024,
                         r_max: Optional[float] = None, n_theta: Optional[int] = None,
                         init_radius: float = 10.0) -> DistanceField:
    """Distance on the polar chart of a surface of revolution.

    Radii are cell centred, so neither vertex is a node; the neighbour of the
    innermost ring across the vertex is the antipodal node of the same ring.
    """
    if resolution < 16:
        raise InputError("resolution too small")
    closed = profile.closed
    top = profile.ell if (closed or r_max is None) else min(r_max, profile.ell)
    n_r = int(resolution)
    n_t = int(n_theta or resolution)
    if n_t % 2:
        n_t += 1
    hr = top / n_r
    ht = TWO_PI / n_t
    r = (np.arange(n_r) + 0.5) * hr
    th = np.arange(n_t) * ht
    fr = np.maximum(profile.f_interp(r), 1e-300)
    s0 = np.ones((n_r, n_t))
    s1 = np.repeat(fr[:, None], n_t, axis=1)
    d = np.full((n_r, n_t), np.inf)
    st = np.zeros((n_r, n_t), dtype=np.int64)
    rs, ts = float(source.r), float(source.theta)
    R, T = np.meshgrid(r, th, indexing="ij")
    if rs <= 1e-12:
        d[:2] = R[:2]
        st[:2] = _k.KNOWN
    elif closed and rs >= profile.ell - 1e-12:
        d[-2:] = profile.ell - R[-2:]
        st[-2:] = _k.KNOWN
    else:
        dth = np.remainder(T - ts + math.pi, TWO_PI) - math.pi
        far = closed and rs > 0.5 * profile.ell
        rho_s = profile.ell - rs if far else rs
        rho = profile.ell - R if far else R
        if rho_s < 8 * hr:
            # flat approximation in azimuthal coordinates around the vertex
            loc = np.sqrt(np.maximum(rho_s ** 2 + rho ** 2 - 2 * rho_s * rho * np.cos(dth), 0.0))
        else:
            fm = profile.f_interp(0.5 * (R + rs))
            loc = np.hypot(R - rs, fm * dth)
        near = loc <= init_radius * hr
        if not np.any(near):
            raise InputError("source not resolved by the grid")
        d[near] = loc[near]
        st[near] = _k.KNOWN
    _march(d, st, hr, ht, s0, s1, True, True, closed)
    return DistanceField((rs, ts), (r, th), d, s0, s1, True, TWO_PI, polar=True, closed=closed,
                         ell=profile.ell)


# ------------------------------------------------------------------ paths

@dataclass
class MPath:
    """Unit-speed curve in a chart of M: rows (s, x, y)."""

    samples: np.ndarray
    kind: str = "exact"
    tangent0: Optional[np.ndarray] = None  # exact initial chart velocity when known
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return float(self.samples[-1, 0])

    @property
    def points(self) -> np.ndarray:
        return self.samples[:, 1:3]

    def point_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        s = self.samples
        return np.column_stack([np.interp(t, s[:, 0], s[:, 1]), np.interp(t, s[:, 0], s[:, 2])])

    def reversed(self) -> "MPath":
        s = self.samples[::-1].copy()
        s[:, 0] = self.length - s[:, 0]
        meta = dict(self.meta)
        meta.pop("geodesic", None)
        t1 = meta.pop("tangent1", None)
        if self.tangent0 is not None:
            meta["tangent1"] = -np.asarray(self.tangent0)
        return MPath(s, self.kind, None if t1 is None else -np.asarray(t1), meta)


def _fit_tangent(path: MPath, metric_at, n: int = 8) -> np.ndarray:
    s = path.samples[:n]
    if len(s) < 2:
        raise InputError("path too short for a tangent estimate")
    A = np.column_stack([np.ones(len(s)), s[:, 0] - s[0, 0]])
    coef, *_ = np.linalg.lstsq(A, s[:, 1:3], rcond=None)
    v = coef[1]
    if not np.all(np.isfinite(v)) or np.allclose(v, 0):
        raise InputError("degenerate tangent fit")
    return v


# -------------------------------------------------------------- manifolds

def constant_curvature_distance(kappa: float, x, y) -> float:
    """Closed-form distance between polar points (r, theta) at curvature kappa."""
    r1, r2 = float(x[0]), float(y[0])
    s2 = math.sin(0.5 * (y[1] - x[1])) ** 2
    if kappa > 0:
        k = math.sqrt(kappa)
        h = math.sin(0.5 * k * (r1 - r2)) ** 2 + math.sin(k * r1) * math.sin(k * r2) * s2
        return 2.0 * math.asin(min(1.0, math.sqrt(max(h, 0.0)))) / k
    if kappa < 0:
        k = math.sqrt(-kappa)
        h = math.sinh(0.5 * k * (r1 - r2)) ** 2 + math.sinh(k * r1) * math.sinh(k * r2) * s2
        return 2.0 * math.asinh(math.sqrt(max(h, 0.0))) / k
    return math.sqrt((r1 - r2) ** 2 + 4.0 * r1 * r2 * s2)


def cylinder_distance(x, y, radius: float = 1.0, lifts: int = 3) -> float:
    """Distance on the flat cylinder between (height, angle) pairs."""
    if radius <= 0:
        raise InputError("radius must be positive")
    dh = y[0] - x[0]
    da = y[1] - x[1]
    ks = np.arange(-lifts, lifts + 1)
    return float(np.min(np.hypot(dh, radius * (da + TWO_PI * ks))))


@dataclass
class TestManifold:
    """Pointed 2-dimensional manifold (M, o) used on the comparison side.

    kind 'revolution': points are (r, theta) around the vertex, which is o.
    kind 'flat_cylinder': points are (height, angle); metric dh^2 + R^2 da^2.
    kind 'grid_metric': points are chart (x, y); metric g11 dx^2 + g22 dy^2.
    """

    __test__ = False

    kind: str
    base_o: Tuple[float, float] = (0.0, 0.0)
    profile: Optional[RadialProfile] = None
    radius: float = 1.0
    g11: Optional[Callable] = None
    g22: Optional[Callable] = None
    x_range: Tuple[float, float] = (-1.0, 1.0)
    y_range: Tuple[float, float] = (-1.0, 1.0)
    periodic: bool = False
    resolution: int = 256
    name: str = ""
    _fields: dict = field(default_factory=dict, repr=False)
    _surface: Optional[Surface] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("revolution", "flat_cylinder", "grid_metric"):
            raise InputError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "revolution":
            if self.profile is None:
                raise InputError("revolution manifold needs a profile")
            self._surface = Surface(self.profile)
            self.base_o = (0.0, 0.0)
        if self.kind == "flat_cylinder" and self.radius <= 0:
            raise InputError("radius must be positive")
        if self.kind == "grid_metric" and (self.g11 is None or self.g22 is None):
            raise InputError("grid metric needs g11 and g22")

    @property
    def surface(self) -> Surface:
        return self._surface

    @property
    def is_analytic(self) -> bool:
        return self.kind != "grid_metric"

    # ------------------------------------------------------------ metric
    def metric_at(self, x) -> Tuple[float, float]:
        """Diagonal metric coefficients (g11, g22) at chart point x."""
        if self.kind == "revolution":
            return 1.0, float(self.profile.f_interp(x[0])) ** 2
        if self.kind == "flat_cylinder":
            return 1.0, self.radius ** 2
        return float(self.g11(x[0], x[1])), float(self.g22(x[0], x[1]))

    # ---------------------------------------------------------- distance
    def field(self, source) -> DistanceField:
        key = (round(float(source[0]), 12), round(float(source[1]), 12))
        fld = self._fields.get(key)
        if fld is None:
            if self.kind == "revolution":
                fld = polar_distance_field(self.profile, SurfacePoint(*source), self.resolution)
            elif self.kind == "flat_cylinder":
                n = self.resolution
                xs = np.linspace(self.x_range[0], self.x_range[1], n)
                ys = -math.pi + TWO_PI * np.arange(n) / n
                R2 = self.radius ** 2
                fld = cartesian_field(xs, ys, lambda X, Y: np.ones_like(X), lambda X, Y: R2 * np.ones_like(X),
                                      source, periodic=True)
            else:
                n = self.resolution
                xs = np.linspace(*self.x_range, n)
                if self.periodic:
                    span = self.y_range[1] - self.y_range[0]
                    ys = self.y_range[0] + span * np.arange(n) / n
                    fld = cartesian_field(xs, ys, self.g11, self.g22, source, True, span)
                else:
                    ys = np.linspace(*self.y_range, n)
                    fld = cartesian_field(xs, ys, self.g11, self.g22, source)
            if len(self._fields) > 32:
                self._fields.pop(next(iter(self._fields)))
            self._fields[key] = fld
        return fld

    def distance(self, x, y) -> float:
        if self.kind == "revolution":
            kappa = self.profile.meta.get("kappa")
            if kappa is not None:
                return constant_curvature_distance(kappa, x, y)
            return self._surface.dist(SurfacePoint(*x), SurfacePoint(*y))
        if self.kind == "flat_cylinder":
            return cylinder_distance(x, y, self.radius)
        return self.field(x).value(y)

    def dist_o(self, x) -> float:
        if self.kind == "revolution":
            return float(x[0])
        return self.distance(self.base_o, x)

    @property
    def distance_tolerance(self) -> float:
        if self.is_analytic:
            return 1e-8
        h = (self.x_range[1] - self.x_range[0]) / (self.resolution - 1)
        return 2e-3 + 2 * h

    # ---------------------------------------------------------- segments
    def min_segments(self, x, y, n_samples: int = 129) -> List[MPath]:
        return min_segments_M(self, x, y, n_samples)

    def segment(self, x, y, n_samples: int = 129, which: int = 0) -> MPath:
        segs = self.min_segments(x, y, n_samples)
        if not segs:
            raise RuntimeError("no minimizing segment extracted")
        return segs[min(which, len(segs) - 1)]

    def angle_at(self, vertex, path1: MPath, path2: MPath) -> float:
        return angle_at(self, vertex, path1, path2)

    def radial_curvature_audit(self, reference: RadialProfile, n: int = 200):
        return radial_curvature_audit(self, reference, n)


def _revolution_path(g: GeodesicPath, n_samples: int) -> MPath:
    g.n_samples = n_samples
    g._cache.clear()
    tr = g.trace
    f = g.surface.profile.f_interp(g.start.r)
    t0 = None
    if g.start.r > 1e-12 and not g.start.is_vertex(g.surface.profile):
        psi = math.pi - g.initial_angle
        t0 = np.array([math.cos(psi), g.orientation * math.sin(psi) / f])
    meta = {"alpha": g.initial_angle, "orientation": g.orientation, "geodesic": g}
    if tr[-1, 1] > 1e-9:
        meta["tangent1"] = tr[-1, 3:5].copy()
    return MPath(np.column_stack([tr[:, 0], tr[:, 1], tr[:, 2]]), "exact", t0, meta)


def _cylinder_paths(m: TestManifold, x, y, n_samples: int, tol: float = 1e-9) -> List[MPath]:
    R = m.radius
    dh = y[0] - x[0]
    ks = np.arange(-3, 4)
    lens = np.hypot(dh, R * (y[1] - x[1] + TWO_PI * ks))
    best = lens.min()
    out = []
    for k, L in zip(ks, lens):
        if L <= best + tol:
            da = y[1] - x[1] + TWO_PI * k
            s = np.linspace(0.0, L, n_samples)
            if L == 0:
                continue
            u = np.array([dh / L, da / L])
            pts = np.array(x, float)[None, :] + s[:, None] * u[None, :]
            out.append(MPath(np.column_stack([s, pts]), "exact", u, {"lift": int(k), "tangent1": u}))
    return out


def _descend(fld: DistanceField, m: TestManifold, start, n_max: int = 200000) -> Optional[np.ndarray]:
    """Steepest-descent path from start to the field's source (chart points)."""
    h = min(fld.spacing)
    step = 0.5 * h
    x = np.array(start, float)
    pts = [x.copy()]
    src = np.array(fld.source)
    for _ in range(n_max):
        g = fld.gradient_at(x)
        g11, g22 = m.metric_at(x)
        v = np.array([g[0] / g11, g[1] / g22])
        nv = math.sqrt(g11 * v[0] ** 2 + g22 * v[1] ** 2)
        if not np.isfinite(nv) or nv == 0:
            return None
        v /= nv
        # metric step of length `step`
        x = x - step * v
        pts.append(x.copy())
        dd = x - src
        if fld.periodic:
            dd[1] = reduce_angle(dd[1] * TWO_PI / fld.period) * fld.period / TWO_PI
        if math.sqrt(g11 * dd[0] ** 2 + g22 * dd[1] ** 2) < 1.5 * h * max(1.0, math.sqrt(g11)):
            pts.append(src.copy())
            return np.array(pts)
    return None


def _grid_paths(m: TestManifold, x, y, n_samples: int) -> List[MPath]:
    fld = m.field(x)
    h = min(fld.spacing)
    starts = [np.array(y, float)]
    for a in np.linspace(0, TWO_PI, 8, endpoint=False):
        starts.append(np.array(y, float) + 2 * h * np.array([math.cos(a), math.sin(a)]))
    out: List[MPath] = []
    mids = []
    for s0 in starts:
        pts = _descend(fld, m, s0)
        if pts is None:
            warnings.warn("gradient descent did not reach the source; path omitted", stacklevel=3)
            continue
        if not np.allclose(s0, y):
            pts = np.vstack([np.array(y, float)[None], pts])
        pts = pts[::-1]
        seg = np.diff(pts, axis=0)
        w = np.array([m.metric_at(0.5 * (pts[i] + pts[i + 1])) for i in range(len(seg))])
        ds = np.sqrt(w[:, 0] * seg[:, 0] ** 2 + w[:, 1] * seg[:, 1] ** 2)
        s = np.concatenate([[0.0], np.cumsum(ds)])
        ss = np.linspace(0, s[-1], n_samples)
        res = np.column_stack([ss, np.interp(ss, s, pts[:, 0]), np.interp(ss, s, pts[:, 1])])
        mid = res[n_samples // 2, 1:]
        if any(np.hypot(*(mid - q)) <= 10 * h for q in mids):
            continue
        mids.append(mid)
        out.append(MPath(res, "grid"))
    return out


def min_segments_M(m: TestManifold, x, y, n_samples: int = 129) -> List[MPath]:
    """All minimizing segments from x to y that the manifold can enumerate."""
    if m.kind == "revolution":
        res = m.surface.distance(SurfacePoint(*x), SurfacePoint(*y), n_samples=n_samples)
        return [_revolution_path(g, n_samples) for g in res.paths]
    if m.kind == "flat_cylinder":
        return _cylinder_paths(m, x, y, n_samples)
    return _grid_paths(m, x, y, n_samples)


def angle_at(m: TestManifold, vertex, path1: MPath, path2: MPath) -> float:
    """Angle between two paths leaving ``vertex``, in the metric of M."""
    g11, g22 = m.metric_at(vertex)
    if m.kind == "revolution" and vertex[0] <= 1e-12:
        # at the vertex the polar chart degenerates: compare departure meridians
        th1 = path1.samples[min(1, len(path1.samples) - 1), 2]
        th2 = path2.samples[min(1, len(path2.samples) - 1), 2]
        return abs(reduce_angle(th1 - th2))
    vs = []
    for p in (path1, path2):
        v = p.tangent0 if p.tangent0 is not None else _fit_tangent(p, m.metric_at)
        vs.append(np.asarray(v, float))
    u, v = vs
    dot = g11 * u[0] * v[0] + g22 * u[1] * v[1]
    nu = math.sqrt(g11 * u[0] ** 2 + g22 * u[1] ** 2)
    nv = math.sqrt(g11 * v[0] ** 2 + g22 * v[1] ** 2)
    return float(math.acos(max(-1.0, min(1.0, dot / (nu * nv)))))


@dataclass
class CurvatureAudit:
    r: np.ndarray
    K_M: np.ndarray
    K_ref: np.ndarray
    passed: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.K_M - self.K_ref))


def radial_curvature_audit(m: TestManifold, reference: RadialProfile, n: int = 200,
                           tol: float = 1e-9) -> CurvatureAudit:
    """Check K_M(r) >= K(r) nodewise, with K_M = -f_M''/f_M from the grid."""
    if m.kind == "revolution":
        top = min(m.profile.ell, reference.ell)
        r = np.linspace(0, top, n + 2)[1:-1]
        h = 1e-4
        fM = m.profile.f_interp
        fpp = (fM(r + h) - 2 * fM(r) + fM(r - h)) / h ** 2
        KM = -fpp / fM(r)
    elif m.kind == "flat_cylinder":
        r = np.linspace(0, math.pi * m.radius, n + 2)[1:-1]
        KM = np.zeros_like(r)
    else:
        raise InputError("curvature audit needs an analytic manifold")
    Kr = np.asarray(reference.K(r), float) * np.ones_like(r)
    return CurvatureAudit(r, KM, Kr, KM >= Kr - tol)


def eikonal_solve(m: TestManifold, source, resolution: int = 1024) -> DistanceField:
    """Fast-marching distance field from ``source`` at the given resolution."""
    if resolution < 128:
        raise InputError("resolution must be at least 128")
    old = m.resolution
    m.resolution = int(resolution)
    try:
        m._fields.clear()
        return m.field(source)
    finally:
        m.resolution = old
        m._fields.clear()
