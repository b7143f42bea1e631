"""Geodesics, distances and curve order on a surface of revolution.

Points are ``(r, theta)`` in geodesic polar coordinates around the vertex.
A geodesic leaving ``p`` is described by its initial angle ``alpha`` in
``[0, pi]`` measured from the meridian pointing at the vertex, plus an
orientation (+1 when theta increases, -1 for the mirror image).
"""
from __future__ import annotations

import enum
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _kernels as _k
from .errors import DomainError, InputError, SolverError
from .profile import RadialProfile

TWO_PI = 2.0 * math.pi
EPS_POLE = 1e-6
FAN_SIZE = 256
ALPHA_MERGE = 1e-7


def reduce_angle(theta: float) -> float:
    """Representative of theta in (-pi, pi]."""
    x = math.remainder(theta, TWO_PI)
    return math.pi if x == -math.pi else x


@dataclass(frozen=True)
class SurfacePoint:
    """Point in polar coordinates. ``theta`` keeps its lift (no reduction)."""

    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.theta)):
            raise InputError(f"non-finite point ({self.r}, {self.theta})")
        if self.r < 0:
            raise DomainError(f"negative radius {self.r}")

    @property
    def reduced(self) -> float:
        return reduce_angle(self.theta)

    @property
    def winding(self) -> int:
        return int(round((self.theta - self.reduced) / TWO_PI))

    def is_vertex(self, profile: RadialProfile, tol: float = 1e-12) -> bool:
        return self.r <= tol or (profile.closed and self.r >= profile.ell - tol)

    def xy(self):
        """Azimuthal chart coordinates."""
        return self.r * math.cos(self.theta), self.r * math.sin(self.theta)


class Order(enum.Enum):
    LE = "LE"
    GE = "GE"
    EQ = "EQ"
    INCOMPARABLE = "INCOMPARABLE"


class HalfSurface(enum.Enum):
    PLUS = "PLUS"
    MINUS = "MINUS"
    BOUNDARY = "BOUNDARY"


@dataclass
class OrderResult:
    relation: Order
    witness: Optional[float]
    max_above: float  # max of r1 - r2
    max_below: float  # max of r2 - r1

    def __iter__(self):
        yield self.relation
        yield self.witness


@dataclass
class PolarCurve:
    """Curve given as r over a strictly monotone theta grid."""

    theta_nodes: np.ndarray
    r_values: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        th = np.asarray(self.theta_nodes, dtype=float)
        r = np.asarray(self.r_values, dtype=float)
        if th.shape != r.shape or th.ndim != 1 or len(th) < 2:
            raise InputError("polar curve needs matching 1-D arrays with at least 2 nodes")
        d = np.diff(th)
        if not (np.all(d > 1e-12) or np.all(d < -1e-12)):
            raise InputError("theta nodes are not strictly monotone")
        if np.any(r < -1e-12) or not np.all(np.isfinite(r)):
            raise InputError("radius values must be finite and non-negative")
        if d[0] < 0:
            th, r = th[::-1], r[::-1]
        self.theta_nodes = th
        self.r_values = r

    @property
    def theta_range(self):
        return float(self.theta_nodes[0]), float(self.theta_nodes[-1])

    def __call__(self, theta):
        return np.interp(theta, self.theta_nodes, self.r_values)

    def restrict(self, lo: float, hi: float) -> "PolarCurve":
        m = (self.theta_nodes > lo + 1e-12) & (self.theta_nodes < hi - 1e-12)
        th = np.concatenate([[lo], self.theta_nodes[m], [hi]])
        return PolarCurve(th, self(th))


def curve_order(c1: PolarCurve, c2: PolarCurve, tol: float = 1e-9) -> OrderResult:
    """Compare two theta-parameterized curves pointwise in r."""
    lo = max(c1.theta_range[0], c2.theta_range[0])
    hi = min(c1.theta_range[1], c2.theta_range[1])
    if not hi > lo:
        if abs(hi - lo) <= 1e-12:
            th = np.array([lo])
        else:
            raise InputError("curves have no common theta range")
    else:
        th = np.union1d(c1.theta_nodes, c2.theta_nodes)
        th = th[(th >= lo) & (th <= hi)]
        th = np.unique(np.concatenate([[lo], th, [hi]]))
    diff = c1(th) - c2(th)
    above = float(np.max(diff))
    below = float(np.max(-diff))
    le = above <= tol
    ge = below <= tol
    if le and ge:
        return OrderResult(Order.EQ, None, above, below)
    if le:
        return OrderResult(Order.LE, None, above, below)
    if ge:
        return OrderResult(Order.GE, None, above, below)
    i, j = int(np.argmin(diff)), int(np.argmax(diff))
    a, b = min(i, j), max(i, j)
    seg = diff[a:b + 1]
    k = int(np.nonzero(np.sign(seg[1:]) != np.sign(seg[:-1]))[0][0])
    t0, t1, d0, d1 = th[a + k], th[a + k + 1], seg[k], seg[k + 1]
    w = t0 if d1 == d0 else t0 + (t1 - t0) * d0 / (d0 - d1)
    return OrderResult(Order.INCOMPARABLE, float(w), above, below)


def half_surface_membership(x: SurfacePoint, p: SurfacePoint, tol: float = 1e-12) -> HalfSurface:
    """Side of the meridian through p that contains x."""
    if x.r <= tol:
        return HalfSurface.BOUNDARY
    d = reduce_angle(x.theta - p.theta)
    if abs(d) <= tol or abs(abs(d) - math.pi) <= tol:
        return HalfSurface.BOUNDARY
    return HalfSurface.PLUS if d > 0 else HalfSurface.MINUS


@dataclass(eq=False)
class GeodesicPath:
    """Unit-speed geodesic from ``start``; its trace is computed on demand.

    ``trace`` columns are (t, r, theta, dr/dt, dtheta/dt); ``jacobi`` holds
    (J, J') of the normal Jacobi field with J(0)=0, J'(0)=1.
    """

    surface: "Surface"
    start: SurfacePoint
    initial_angle: float
    length: float
    orientation: int = 1
    n_samples: int = 257
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def clairaut(self) -> float:
        return self.orientation * self.surface.profile.f_interp(self.start.r) * math.sin(self.initial_angle)

    @property
    def signed_angle(self) -> float:
        return self.orientation * self.initial_angle

    def _states(self):
        st = self._cache.get("states")
        if st is None:
            ts = np.linspace(0.0, self.length, max(self.n_samples, 2))
            st = self.surface._states(self.start, self.initial_angle, self.orientation, ts)
            self._cache["states"] = st
        return st

    @property
    def trace(self) -> np.ndarray:
        st = self._states()
        f = np.maximum(self.surface.profile.f_interp(st[:, 1]), 1e-300)
        dr = np.cos(st[:, 3])
        dth = self.orientation * np.sin(st[:, 3]) / f
        return np.column_stack([st[:, 0], st[:, 1], st[:, 2], dr, dth])

    @property
    def jacobi(self) -> np.ndarray:
        return self._states()[:, 4:6]

    @property
    def end(self) -> SurfacePoint:
        st = self._states()
        return SurfacePoint(float(st[-1, 1]), float(st[-1, 2]))

    def at(self, t) -> np.ndarray:
        """Rows (r, theta) at arclengths t."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        st = self.surface._states(self.start, self.initial_angle, self.orientation, ts)
        return st[:, 1:3]

    def unit_speed_residual(self) -> float:
        tr = self.trace
        f = self.surface.profile.f_interp(tr[:, 1])
        return float(np.max(np.abs(tr[:, 3] ** 2 + (f * tr[:, 4]) ** 2 - 1.0)))

    def clairaut_residual(self, vertex_margin: float = 1e-3) -> float:
        tr = self.trace
        f = self.surface.profile.f_interp(tr[:, 1])
        m = f > vertex_margin
        if not np.any(m):
            return 0.0
        return float(np.max(np.abs(f[m] ** 2 * tr[m, 4] - self.clairaut)))

    def polar_curve(self) -> PolarCurve:
        """Theta-parameterized form, truncated at the first monotonicity break."""
        tr = self.trace
        th, r = tr[:, 2], tr[:, 1]
        d = np.diff(th) * self.orientation
        bad = np.nonzero(d <= 1e-13)[0]
        truncated = len(bad) > 0
        stop = bad[0] + 1 if truncated else len(th)
        if stop < 2:
            raise InputError("geodesic is not theta-parameterized (meridian)")
        return PolarCurve(th[:stop], r[:stop], truncated=truncated)

    def reversed_sample(self, n: Optional[int] = None):
        tr = self.trace
        return tr[::-1]


@dataclass
class DistanceResult:
    """Distance, minimizing segments and the arrival angles of those segments.

    ``arrival_cos[i]`` is dr/dt of segment i at q, i.e. the derivative of the
    distance with respect to r(q) along that branch.
    """

    distance: float
    paths: List[GeodesicPath]
    oracle_only: bool = False
    alphas: List[float] = field(default_factory=list)
    arrival_cos: List[float] = field(default_factory=list)

    def __iter__(self):
        yield self.distance
        yield self.paths


@dataclass
class _Fan:
    t_max: float
    rows: np.ndarray
    counts: np.ndarray
    status: np.ndarray


class Surface:
    """Numerical geometry of the surface with warping function ``profile.f``."""

    def __init__(self, profile: RadialProfile, rtol: float = 1e-10, fan_rtol: float = 1e-8,
                 eps_pole: float = EPS_POLE, fan_size: int = FAN_SIZE, cache_size: int = 64):
        self.profile = profile
        self.rtol = rtol
        self.fan_rtol = fan_rtol
        self.eps_pole = eps_pole
        self.fan_alphas = math.pi * (np.arange(fan_size) + 0.5) / fan_size
        self._fans: "OrderedDict[float, _Fan]" = OrderedDict()
        self._cache_size = cache_size
        self._tab = profile.table
        self.ell = profile.ell
        self.closed = profile.closed

    def __repr__(self):
        return f"Surface({self.profile!r})"

    # -------------------------------------------------------------- shooting
    def _integrate(self, r0, alpha, t_end, theta_stop=None, t_eval=None, rtol=None, record=0):
        rtol = self.rtol if rtol is None else rtol
        y = np.array([r0, 0.0, math.pi - alpha, 0.0, 1.0])
        te = np.empty(0) if t_eval is None else np.ascontiguousarray(t_eval, dtype=float)
        ev = np.empty((len(te), 6))
        rec = np.empty((max(record, 1), 6))
        stop = 0.0 if theta_stop is None else float(theta_stop)
        st, t, nr = _k.integrate(y, float(t_end), stop, theta_stop is not None, *self._tab,
                                 rtol, rtol * 1e-2, self.eps_pole, record > 0, rec, te, ev)
        if st == _k.ST_FAIL:
            raise SolverError(f"geodesic integration failed at t={t:.6g} (r0={r0}, alpha={alpha})")
        return st, t, y, ev, rec[:nr]

    def _states(self, start: SurfacePoint, alpha: float, orientation: int, ts: np.ndarray,
                partial: bool = False) -> np.ndarray:
        """Rows (t, r, theta, psi, J, J') at the arclengths ts.

        With ``partial`` a geodesic leaving the sampled domain yields NaN rows
        instead of an error.
        """
        ts = np.asarray(ts, dtype=float)
        if start.r <= 1e-12 or (self.closed and start.r >= self.ell - 1e-12):
            return self._vertex_states(start, alpha, ts)
        order = np.argsort(ts, kind="stable")
        st, t, y, ev, _ = self._integrate(start.r, alpha, float(ts[order[-1]]) if len(ts) else 0.0,
                                          t_eval=ts[order])
        if st == _k.ST_DOMAIN and not partial:
            raise DomainError(f"geodesic leaves the sampled domain r<={self.ell:g} at t={t:.6g}")
        out = np.empty_like(ev)
        out[order] = ev
        if alpha == 0.0 or alpha == math.pi:
            out[:, 2] = self._meridian_theta(start.r, alpha, out[:, 0])
        out[:, 2] = start.theta + orientation * out[:, 2]
        return out

    def _meridian_theta(self, r0, alpha, ts):
        """Exact theta offset along a meridian (jumps by pi at each vertex)."""
        if alpha == 0.0:
            s = ts - r0
        else:
            s = ts - (self.ell - r0) if self.closed else np.full_like(ts, -1.0)
        if not self.closed:
            return np.where(s > 0, math.pi, 0.0)
        hits = np.where(s > 0, 1 + np.floor(s / self.ell), 0)
        return math.pi * np.mod(hits, 2)

    def _vertex_states(self, start, alpha, ts):
        """Geodesics from a vertex are meridians in the direction ``start.theta``."""
        at_far = start.r > 0.5 * self.ell and self.closed
        r0 = self.ell - 1e-12 if at_far else 1e-12
        a = 0.0 if at_far else math.pi
        st, t, y, ev, _ = self._integrate(r0, a, float(np.max(ts)) if len(ts) else 0.0,
                                          t_eval=np.sort(ts))
        out = ev[np.argsort(np.argsort(ts, kind="stable"), kind="stable")]
        out[:, 2] = start.theta
        if self.closed:
            bounces = np.floor(out[:, 0] / self.ell)
            out[:, 2] += math.pi * np.mod(bounces, 2)
        return out

    def shoot(self, p: SurfacePoint, alpha: float, length: float, orientation: int = 1,
              n_samples: int = 257) -> GeodesicPath:
        """Unit-speed geodesic of the given length leaving p at angle alpha."""
        if not (0.0 <= alpha <= math.pi):
            raise InputError(f"initial angle {alpha} outside [0, pi]")
        if not length > 0:
            raise InputError("length must be positive")
        if orientation not in (1, -1):
            raise InputError("orientation must be +1 or -1")
        g = GeodesicPath(self, p, float(alpha), float(length), orientation, n_samples)
        g._states()
        return g

    def endpoint(self, p: SurfacePoint, alpha: float, length: float, orientation: int = 1):
        st = self._states(p, alpha, orientation, np.array([length]))
        return SurfacePoint(float(st[0, 1]), float(st[0, 2]))

    # ------------------------------------------------------------------ fans
    def fan(self, r0: float, t_max: float) -> _Fan:
        """Recorded geodesics from (r0, 0) over the interior alpha grid."""
        key = round(float(r0), 15)
        fan = self._fans.get(key)
        if fan is not None and fan.t_max >= t_max:
            self._fans.move_to_end(key)
            return fan
        if fan is not None:
            t_max = max(t_max, 1.5 * fan.t_max)
        m = len(self.fan_alphas)
        cap = 1024
        while True:
            rows = np.empty((m, cap, 6))
            counts = np.zeros(m, dtype=np.int64)
            status = np.zeros(m, dtype=np.int64)
            _k.fan(float(r0), self.fan_alphas, float(t_max), math.pi + 0.05, *self._tab,
                   self.fan_rtol, self.fan_rtol * 1e-2, self.eps_pole, rows, counts, status)
            if counts.max() < cap or cap >= 65536:
                break
            cap *= 4
        if np.any(status == _k.ST_FAIL):
            raise SolverError(f"fan integration failed from r={r0}")
        fan = _Fan(float(t_max), rows[:, :int(counts.max())].copy(), counts, status)
        self._fans[key] = fan
        if len(self._fans) > self._cache_size:
            self._fans.popitem(last=False)
        return fan

    def _fan_cross(self, fan, dtheta):
        res = np.empty((len(self.fan_alphas), 2))
        _k.fan_cross(fan.rows, fan.counts, float(dtheta), self._tab[0], self._tab[1],
                     self._tab[5], self._tab[6], res)
        return res

    def fan_at_time(self, fan, t):
        res = np.empty((len(self.fan_alphas), 2))
        _k.fan_at_time(fan.rows, fan.counts, float(t), self._tab[0], self._tab[1],
                       self._tab[5], self._tab[6], res)
        return res

    # -------------------------------------------------------------- distance
    def upper_bound(self, rp: float, rq: float) -> float:
        ub = rp + rq
        if self.closed:
            ub = min(ub, 2 * self.ell - rp - rq)
        return ub

    def _arrival(self, rp, alpha, dtheta, t_max):
        st, t, y, _, _ = self._integrate(rp, alpha, t_max, theta_stop=dtheta)
        if st != _k.ST_THETA:
            return math.nan, math.nan, math.nan
        return y[0], t, y[2]

    def _candidates(self, rp, rq, dtheta, enumerate_all):
        """(alpha, length) for geodesics from (rp,0) reaching (rq,dtheta)."""
        ub = self.upper_bound(rp, rq)
        horizon = 1.05 * ub + 0.05
        fan = self.fan(rp, horizon)
        cross = self._fan_cross(fan, dtheta)
        t_arr, g = cross[:, 0], cross[:, 1] - rq
        al = self.fan_alphas
        out = []

        h_precise = 3.0 * ub + 1.0
        memo = {}

        def g_at(a):
            v = memo.get(a)
            if v is None:
                r, t, psi = self._arrival(rp, a, dtheta, h_precise)
                v = memo[a] = (r - rq, t, psi)
            return v

        def refine(a0, a1):
            try:
                a = brentq(lambda x: g_at(x)[0], a0, a1, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            except ValueError:
                return False
            gv, t, psi = g_at(a)
            if math.isfinite(t) and abs(gv) < 1e-6:
                # near a meridian the arrival radius is ill-conditioned in alpha;
                # move the end along q's meridian by first variation instead
                out.append((a, t - gv * math.cos(psi), psi))
            return True

        near = np.isfinite(g) & (np.abs(g) < 1e-6)
        if enumerate_all or np.count_nonzero(near) > 2:
            idx = np.nonzero(near)[0]
            if not enumerate_all:
                # for the value alone the shortest few arrivals suffice
                idx = idx[np.argsort(t_arr[idx])[:3]]
            for i in idx:
                gv, t, psi = g_at(float(al[i]))
                if math.isfinite(gv) and abs(gv) < 1e-9:
                    out.append((float(al[i]), t, psi))
        # virtual endpoints: alpha=0 runs through the vertex and arrives at r=0
        ext_a = np.concatenate([[0.0], al, [math.pi]])
        g0 = -rq if dtheta < math.pi else math.nan
        gpi = (self.ell - rq) if self.closed and dtheta < math.pi else math.nan
        ext_g = np.concatenate([[g0], g, [gpi]])
        last = len(ext_a) - 1
        fin = np.isfinite(ext_g)
        with np.errstate(invalid="ignore"):
            neg = ext_g < 0
        cand = (fin[:-1] != fin[1:]) | (fin[:-1] & fin[1:] & (neg[:-1] != neg[1:]))
        for i in np.nonzero(cand)[0]:
            a, b = ext_g[i], ext_g[i + 1]
            fa, fb = bool(fin[i]), bool(fin[i + 1])
            if not fa and 0 < i:
                a = g_at(float(ext_a[i]))[0]
            if not fb and i + 1 < last:
                b = g_at(float(ext_a[i + 1]))[0]
            lo, hi = float(ext_a[i]), float(ext_a[i + 1])
            if math.isfinite(a) != math.isfinite(b):
                # arrival time blows up towards the unreachable side: walk into it
                good, bad = (lo, hi) if math.isfinite(a) else (hi, lo)
                gg = a if math.isfinite(a) else b
                for _ in range(60):
                    mid = 0.5 * (good + bad)
                    gm = g_at(mid)[0]
                    if not math.isfinite(gm):
                        bad = mid
                    elif (gm < 0) == (gg < 0):
                        good = mid
                    else:
                        bad = mid
                        break
                else:
                    continue
                lo, hi = min(good, bad), max(good, bad)
                a, b = g_at(lo)[0], g_at(hi)[0]
            if not (math.isfinite(a) and math.isfinite(b)) or a == 0.0 or (a < 0) == (b < 0):
                continue
            glo = g_at(lo)[0] if i == 0 else a
            ghi = g_at(hi)[0] if i + 1 == last else b
            if math.isfinite(glo) != math.isfinite(ghi) and (i == 0 or i + 1 == last):
                # a virtual meridian end never reaches the target angle exactly:
                # approach it with exact shots until the sign flips
                good, far = (hi, lo) if i == 0 else (lo, hi)
                gg = ghi if i == 0 else glo
                for _ in range(60):
                    mid = 0.5 * (good + far)
                    gm = g_at(mid)[0]
                    if math.isfinite(gm) and (gm < 0) != (gg < 0):
                        lo, hi = min(good, mid), max(good, mid)
                        glo, ghi = g_at(lo)[0], g_at(hi)[0]
                        break
                    if math.isfinite(gm):
                        good = mid
                    else:
                        far = mid
            if not (math.isfinite(glo) and math.isfinite(ghi)) or (glo < 0) == (ghi < 0):
                continue
            if not refine(lo, hi):
                # the fan's sign change can sit one node off when a root lies
                # within its interpolation error of a grid angle
                for j in (i - 1, i + 1):
                    if 0 < j and j + 1 < last and fin[j] and fin[j + 1]:
                        u0, u1 = float(ext_a[j]), float(ext_a[j + 1])
                        h0, h1 = g_at(u0)[0], g_at(u1)[0]
                        if math.isfinite(h0) and math.isfinite(h1) and (h0 < 0) != (h1 < 0):
                            refine(u0, u1)
        # tangential roots show up as local minima of |g| without a sign change
        ag = np.abs(g)
        with np.errstate(invalid="ignore"):
            c = ag[1:-1]
            sg = np.sign(g)
            # the dip must stand out of the fan's integration noise
            dip = np.minimum(ag[:-2], ag[2:]) - c
            tang = ((c <= ag[:-2]) & (c <= ag[2:]) & (c > 0) & (c < 1e-4) & (dip > 1e-7)
                    & (sg[:-2] == sg[1:-1]) & (sg[2:] == sg[1:-1]))
        for i in np.nonzero(tang)[0] + 1:
            res = minimize_scalar(lambda x: abs(g_at(float(x))[0]), bounds=(al[i - 1], al[i + 1]),
                                  method="bounded", options={"xatol": 1e-14})
            gv, t, psi = g_at(float(res.x))
            if math.isfinite(gv) and abs(gv) < 1e-9:
                out.append((float(res.x), t, psi))
        return out, ub

    def distance(self, p: SurfacePoint, q: SurfacePoint, paths: bool = True,
                 n_samples: int = 257) -> DistanceResult:
        """Distance between p and q together with all minimizing segments found."""
        return self._distance(p, q, paths, n_samples)

    def dist(self, p: SurfacePoint, q: SurfacePoint) -> float:
        return self._distance(p, q, False, 0).distance

    def _distance(self, p, q, want_paths, n_samples):
        ell = self.ell
        for x in (p, q):
            if x.r > ell + 1e-12 or (not self.closed and x.r > ell):
                raise DomainError(f"point radius {x.r} outside [0, {ell}]")

        def result(d, rows, start=p):
            # rows: (alpha, orientation, arrival cos)
            gps = [GeodesicPath(self, start, a, d, o, n_samples) for a, o, _ in rows] if want_paths and d > 0 else []
            return DistanceResult(float(d), gps, False, [o * a for a, o, _ in rows], [c for *_, c in rows])

        p_far = self.closed and p.r >= ell - 1e-12
        q_far = self.closed and q.r >= ell - 1e-12
        if p.r <= 1e-12 or p_far:
            near = p.r <= 1e-12
            d = q.r if near else ell - q.r
            return result(d, [(math.pi if near else 0.0, 1, 1.0 if near else -1.0)], SurfacePoint(p.r, q.theta))
        if q.r <= 1e-12 or q_far:
            near = q.r <= 1e-12
            d = p.r if near else ell - p.r
            return result(d, [(0.0 if near else math.pi, 1, -1.0 if near else 1.0)])
        p_in, q_in = self._in_vertex_disk(p), self._in_vertex_disk(q)
        if p_in and q_in:
            return result(self._disk_pair_distance(p, q), [])
        if p_in:
            # shoot from q instead, then turn each branch around
            sw = self._distance(q, p, False, 0)
            rows = []
            for sa, c in zip(sw.alphas, sw.arrival_cos):
                o = -1 if math.copysign(1.0, sa) > 0 else 1
                rows.append((math.acos(max(-1.0, min(1.0, c))), o, math.cos(abs(sa))))
            return result(sw.distance, rows)
        delta = reduce_angle(q.theta - p.theta)
        sgn = 1 if delta >= 0 else -1
        dth = abs(delta)
        if dth <= 1e-14:
            inward = q.r < p.r
            return result(abs(p.r - q.r), [(0.0 if inward else math.pi, 1, -1.0 if inward else 1.0)])
        if math.pi - dth <= 1e-14:
            dth = math.pi
        cands, ub = self._candidates(p.r, q.r, dth, want_paths)
        found = [(a, t, sgn, math.cos(psi)) for a, t, psi in cands]
        if dth == math.pi:
            found += [(a, t, -sgn, c) for a, t, _, c in found]
            found.append((0.0, p.r + q.r, sgn, 1.0))
            if self.closed:
                found.append((math.pi, 2 * ell - p.r - q.r, sgn, -1.0))
        if not found or min(dth, math.pi - dth) < 1e-6:
            found += [(a, t, sgn, c) for a, t, c in self._near_meridian(p.r, q.r, dth)]
        if not found:
            d = self._oracle_distance(p, q)
            return DistanceResult(d, [], oracle_only=True)
        d = min(f[1] for f in found)
        tol = 1e-8 * (1 + d)
        mins = sorted((o * a, a, t, o, c) for a, t, o, c in found if t <= d + tol)
        merged = []
        for row in mins:
            if merged and abs(row[0] - merged[-1][0]) < ALPHA_MERGE:
                continue
            merged.append(row)
        d = min(m[2] for m in merged)
        return result(d, [(a, o, c) for _, a, _, o, c in merged])

    def _radius_shot(self, rp, alpha, rq, t0):
        """State where the geodesic from (rp, 0) first meets r = rq near time t0."""
        start = SurfacePoint(rp, 0.0)
        t = t0
        for _ in range(8):
            row = self._states(start, alpha, 1, np.array([t]), partial=True)[0]
            if not np.all(np.isfinite(row)):
                return None
            c = math.cos(row[3])
            if abs(c) < 0.5:
                return None
            step = (row[1] - rq) / c
            t -= step
            if abs(step) < 1e-14 * (1 + t):
                break
        row = self._states(start, alpha, 1, np.array([t]), partial=True)[0]
        return row if np.all(np.isfinite(row)) and abs(row[1] - rq) < 1e-11 else None

    def _near_meridian(self, rp, rq, dtheta):
        """Nearly meridional geodesics solved with a stop on r = rq.

        Stopping on the target angle is ill-conditioned there: theta barely
        moves along the path, so the arrival radius swings wildly with alpha.
        Along r the same family is well-conditioned.
        """
        routes = []
        if dtheta < 1e-4:
            routes.append((rq < rp, abs(rp - rq), dtheta))
        if math.pi - dtheta < 1e-4:
            routes.append((True, rp + rq, dtheta))
            if self.closed:
                routes.append((False, 2 * self.ell - rp - rq, dtheta))
        out = []
        for inward, t0, target in routes:
            def h(e):
                row = self._radius_shot(rp, e if inward else math.pi - e, rq, t0)
                return (math.nan, None) if row is None else (row[2] - target, row)
            lo, (hlo, _) = 0.0, h(0.0)
            if not math.isfinite(hlo):
                continue
            hi, hhi = 1e-12, math.nan
            while hi < 1e-2:
                hhi = h(hi)[0]
                if math.isfinite(hhi) and (hhi < 0) != (hlo < 0):
                    break
                hi *= 4
            else:
                continue
            try:
                e = brentq(lambda x: h(x)[0], lo, hi, xtol=1e-18, rtol=4 * np.finfo(float).eps, maxiter=200)
            except ValueError:
                continue
            gv, row = h(e)
            if row is not None and abs(gv) < 1e-10:
                out.append((e if inward else math.pi - e, float(row[0]), math.cos(row[3])))
        return out

    def _in_vertex_disk(self, x: SurfacePoint) -> bool:
        return x.r < self.eps_pole or (self.closed and x.r > self.ell - self.eps_pole)

    def _disk_pair_distance(self, p: SurfacePoint, q: SurfacePoint) -> float:
        """Both points within eps_pole of a vertex: tangent-plane geometry.

        At one vertex this is the planar law of cosines. At opposite vertices
        every meridian has length ell, so the distance is ell minus the planar
        distance between p and the reflection of q through the far vertex.
        Both are exact to second order in eps_pole.
        """
        def disk(x):
            far = self.closed and x.r > 0.5 * self.ell
            return far, (self.ell - x.r if far else x.r)
        fp, rp = disk(p)
        fq, rq = disk(q)
        c = math.cos(q.theta - p.theta)
        if fp == fq:
            return math.sqrt(max(rp * rp + rq * rq - 2 * rp * rq * c, 0.0))
        return self.ell - math.sqrt(max(rp * rp + rq * rq + 2 * rp * rq * c, 0.0))

    def _oracle_distance(self, p, q):
        from .manifolds import polar_distance_field
        fld = polar_distance_field(self.profile, p, resolution=512)
        return float(fld.value((q.r, q.theta)))

    # ------------------------------------------------------------- conjugate
    def conjugate_time(self, g: GeodesicPath) -> Optional[float]:
        """First zero of the normal Jacobi field along g, or None."""
        if g.start.is_vertex(self.profile):
            r0 = 1e-12 if g.start.r < 0.5 * self.ell else self.ell - 1e-12
            a = math.pi if g.start.r < 0.5 * self.ell else 0.0
        else:
            r0, a = g.start.r, g.initial_angle
        st, t, y, _, rec = self._integrate(r0, a, g.length, record=200000)
        J = rec[:, 4]
        for k in range(2, len(J)):
            if J[k - 1] > 0 and J[k] <= 0:
                t0, t1 = rec[k - 1, 0], rec[k, 0]
                if J[k] == 0:
                    return float(t1)

                def Jt(tt):
                    return self._integrate(r0, a, tt)[2][3]
                return float(brentq(Jt, t0, t1, xtol=1e-14))
        return None


def angle_between(g1: GeodesicPath, g2: GeodesicPath) -> float:
    """Angle between two geodesics leaving the same point."""
    if abs(g1.start.r - g2.start.r) > 1e-12 or abs(reduce_angle(g1.start.theta - g2.start.theta)) > 1e-12:
        if not (g1.start.r <= 1e-12 and g2.start.r <= 1e-12):
            raise InputError("geodesics do not share their start point")
    if g1.start.r <= 1e-12:
        x = abs(reduce_angle(g1.start.theta - g2.start.theta))
        return x
    x = abs(g1.signed_angle - g2.signed_angle) % TWO_PI
    return min(x, TWO_PI - x)


def shoot_geodesic(surface: Surface, p: SurfacePoint, alpha: float, length: float,
                   orientation: int = 1, n_samples: int = 257) -> GeodesicPath:
    return surface.shoot(p, alpha, length, orientation, n_samples)


def distance(surface: Surface, p: SurfacePoint, q: SurfacePoint) -> DistanceResult:
    return surface.distance(p, q)


def conjugate_time(g: GeodesicPath) -> Optional[float]:
    return g.surface.conjugate_time(g)


def points_from_rows(rows: Sequence) -> List[SurfacePoint]:
    return [SurfacePoint(float(r), float(t)) for r, t in rows]
