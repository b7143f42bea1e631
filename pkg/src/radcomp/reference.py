"""Reference points and reference curves on the model surface.

A point q of the test manifold M is represented on the surface of revolution
through the pair (d(o, q), d(p, q)): its reference point is the point of the
parallel r = d(o, q) in the half surface of p~ at distance d(p, q) from p~.
Only distance pairs are used, never coordinates of M.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from skimage import measure

from .cutlocus import CutLocus
from .errors import InputError, NotRepresentable
from .manifolds import MPath, TestManifold, constant_curvature_distance, polar_distance_field
from .surface import PolarCurve, Surface, SurfacePoint, reduce_angle

TWO_PI = 2.0 * math.pi
MONOTONE_TOL = 1e-9
GAP_TOL = 1e-8


class Direction(enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


class Boundary(enum.IntEnum):
    INTERIOR = 0
    NEAR = 1  # on the meridian of the anchor
    FAR = 2  # on the opposite meridian


def _closed_form_g(kappa: float, c: float, u: float, phi: float, t: float):
    """Distance residual and its phi-derivative at constant curvature kappa."""
    d = constant_curvature_distance(kappa, (c, 0.0), (u, phi))
    if kappa > 0:
        k = math.sqrt(kappa)
        num, den = math.sin(k * c) * math.sin(k * u), k * math.sin(k * d)
    elif kappa < 0:
        k = math.sqrt(-kappa)
        num, den = math.sinh(k * c) * math.sinh(k * u), k * math.sinh(k * d)
    else:
        num, den = c * u, d
    slope = num * math.sin(phi) / den if den > 1e-300 else 0.0
    return d - t, max(slope, 0.0)


def _solve_meridian_angle(surface: Surface, anchor: SurfacePoint, u: float, t: float, side: int,
                          tol: float, guess: Optional[float]) -> float:
    """phi in [0, pi] with d(anchor, (u, theta_a + side*phi)) = t."""
    c = anchor.r
    fc = float(surface.profile.f_interp(c))
    g0 = abs(u - c) - t
    scale = tol * (1.0 + t)
    if g0 > scale:
        raise NotRepresentable(f"d(p, q) = {t:.12g} below |d(o,q) - d(o,p)| = {abs(u - c):.12g}", pair=(u, t))
    if g0 >= -scale:
        return 0.0

    kappa = surface.profile.meta.get("kappa")

    def g(phi):
        if kappa is not None:
            return _closed_form_g(kappa, c, u, phi, t)
        res = surface.distance(anchor, SurfacePoint(u, anchor.theta + side * phi), paths=False)
        slope = fc * max((abs(math.sin(a)) for a in res.alphas), default=0.0)
        return res.distance - t, slope

    lo, hi = 0.0, math.pi
    g_hi = None
    if guess is None:
        # flat law of cosines as a first guess
        cosv = (c * c + u * u - t * t) / (2 * c * u)
        phi = math.acos(max(-1.0, min(1.0, cosv)))
    else:
        phi = min(max(guess, 0.0), math.pi)
    for _ in range(100):
        gv, dg = g(phi)
        if abs(gv) <= scale:
            return phi
        if gv < 0:
            lo = phi
        else:
            hi = phi
        if hi >= math.pi and g_hi is None and (math.pi - lo < 1e-6 or dg <= 0):
            g_hi = g(math.pi)[0]
            if g_hi < -scale:
                raise NotRepresentable(f"d(p, q) = {t:.12g} exceeds the far-meridian distance", pair=(u, t))
            if g_hi <= scale:
                return math.pi
        step = phi - gv / dg if dg > 1e-12 else None
        phi = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-14:
            break
    if g_hi is None and math.pi - lo < 1e-10:
        g_hi = g(math.pi)[0]
        if g_hi < -scale:
            raise NotRepresentable("pair lies beyond the far meridian", pair=(u, t))
    return 0.5 * (lo + hi)


def reference_point(pair: Tuple[float, float], p_tilde: SurfacePoint, surface: Surface,
                    side: int = 1, tol: float = 1e-10, guess: Optional[float] = None) -> SurfacePoint:
    """Point at radius pair[0] and distance pair[1] from p_tilde, in its half surface.

    ``side=+1`` searches theta in [theta_p, theta_p + pi], ``side=-1`` the
    mirror range. Raises NotRepresentable when no such point exists.
    """
    u, t = float(pair[0]), float(pair[1])
    if not (math.isfinite(u) and math.isfinite(t)) or t < 0:
        raise InputError(f"invalid distance pair {pair}")
    ell = surface.ell
    eps = tol * (1.0 + t)
    if u < -eps or u > ell + eps or (not surface.closed and u > ell):
        raise NotRepresentable(f"d(o, q) = {u:.12g} outside [0, {ell:g}]", pair=(u, t))
    u = min(max(u, 0.0), ell)
    c = p_tilde.r
    if u <= 1e-12 or (surface.closed and u >= ell - 1e-12):
        d_v = c if u <= 1e-12 else ell - c
        if abs(d_v - t) > max(eps, 1e-9):
            raise NotRepresentable("vertex pair inconsistent with d(o, p)", pair=(u, t))
        return SurfacePoint(u, p_tilde.theta)
    if c <= 1e-12 or (surface.closed and c >= ell - 1e-12):
        d_v = u if c <= 1e-12 else ell - u
        if abs(d_v - t) > max(eps, 1e-9):
            raise NotRepresentable("pair inconsistent with a vertex anchor", pair=(u, t))
        return SurfacePoint(u, p_tilde.theta)
    phi = _solve_meridian_angle(surface, p_tilde, u, t, side, tol, guess)
    return SurfacePoint(u, p_tilde.theta + side * phi)


@dataclass
class ReferenceCurve:
    kind: Direction
    samples: np.ndarray  # rows (t, r, theta)
    anchor: SurfacePoint
    length: float
    source: str = ""
    side: int = 1
    boundary: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    failed_at: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def r(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def theta(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def complete(self) -> bool:
        return self.failed_at is None

    def points(self) -> List[SurfacePoint]:
        return [SurfacePoint(float(r), float(th)) for _, r, th in self.samples]

    def end(self) -> SurfacePoint:
        return SurfacePoint(float(self.samples[-1, 1]), float(self.samples[-1, 2]))

    def interior_interval(self) -> Tuple[int, int]:
        """Index range [i0, i1) of samples strictly inside the half surface."""
        inside = np.nonzero(self.boundary == Boundary.INTERIOR)[0]
        if len(inside) == 0:
            return 0, 0
        return int(inside[0]), int(inside[-1]) + 1

    def polar_curve(self) -> PolarCurve:
        th, r = self.theta, self.r
        if self.side < 0:
            th, r = th[::-1], r[::-1]
        # meridian pieces collapse to their last point
        keep = np.concatenate([np.diff(th) > 1e-12, [True]])
        return PolarCurve(th[keep], r[keep])

    def parameter_residual(self, surface: Surface) -> float:
        """max |d(anchor, sample(t)) - t|."""
        return float(max((abs(surface.dist(self.anchor, SurfacePoint(r, th)) - t)
                          for t, r, th in self.samples), default=0.0))

    def monotone_violation(self) -> float:
        """Largest decrease of side*theta on the interior interval."""
        i0, i1 = self.interior_interval()
        if i1 - i0 < 2:
            return 0.0
        th = self.side * self.theta[i0:i1]
        return float(max(0.0, np.max(-np.diff(th))))

    def to_csv(self, path: str) -> None:
        np.savetxt(path, self.samples, delimiter=",", header="t,r,theta", comments="", fmt="%.12g")


def _classify(theta, anchor_theta, side, tol=1e-9) -> np.ndarray:
    phi = side * (np.asarray(theta) - anchor_theta)
    out = np.full(len(phi), int(Boundary.INTERIOR))
    out[phi <= tol] = Boundary.NEAR
    out[phi >= math.pi - tol] = Boundary.FAR
    return out


def curve_from_pairs(surface: Surface, anchor: SurfacePoint, ts: Sequence[float], us: Sequence[float],
                     kind: Direction = Direction.FORWARD, side: int = 1, source: str = "",
                     tol: float = 1e-10) -> ReferenceCurve:
    """Reference curve through the pairs (us[k], ts[k]) seen from ``anchor``."""
    ts = np.asarray(ts, float)
    us = np.asarray(us, float)
    rows, failed, prev = [], None, []
    for k, (t, u) in enumerate(zip(ts, us)):
        guess = None
        if len(prev) >= 2:
            guess = 2 * prev[-1] - prev[-2]
        elif prev:
            guess = prev[-1]
        try:
            x = reference_point((u, t), anchor, surface, side, tol, guess)
        except NotRepresentable:
            failed = k
            break
        phi = side * (x.theta - anchor.theta)
        prev.append(phi)
        rows.append((t, x.r, x.theta))
    samples = np.array(rows, float).reshape(-1, 3)
    bnd = _classify(samples[:, 2], anchor.theta, side)
    c = ReferenceCurve(kind, samples, anchor, float(ts[-1]) if len(ts) else 0.0, source, side, bnd, failed)
    c.meta.update(_boundary_cases(c))
    return c


def _boundary_cases(c: ReferenceCurve) -> dict:
    """Which alternative applies when the curve touches a boundary meridian."""
    out = {}
    if len(c.samples) == 0:
        return out
    near = np.nonzero(c.boundary == Boundary.NEAR)[0]
    far = np.nonzero(c.boundary == Boundary.FAR)[0]
    if len(near) and c.t[near[-1]] > 0:
        k = near[-1]
        out["t0"] = float(c.t[k])
        out["t0_case"] = "through_o" if c.r[k] <= c.anchor.r + 1e-9 else "outward_meridian"
    if len(far) and c.t[far[0]] < c.length:
        out["t0_far"] = float(c.t[far[0]])
    return out


def _pairs_along(m: TestManifold, seg: MPath) -> Tuple[np.ndarray, np.ndarray]:
    ts = seg.samples[:, 0].copy()
    us = np.array([m.dist_o(x) for x in seg.samples[:, 1:3]])
    return ts, us


def reference_curve(m: TestManifold, seg: MPath, surface: Surface, direction="forward",
                    p_tilde: Optional[SurfacePoint] = None, tol: float = 1e-10) -> ReferenceCurve:
    """Image of the segment under the reference map, forward or reverse.

    The segment's own sample nodes are used, so forward and reverse curves
    share their radii exactly.
    """
    direction = Direction(direction) if not isinstance(direction, Direction) else direction
    if len(seg.samples) < 2:
        raise InputError("segment needs at least two samples")
    ts, us = _pairs_along(m, seg)
    d = float(ts[-1])
    if p_tilde is None:
        p_tilde = SurfacePoint(float(us[0]), 0.0)
    if direction is Direction.FORWARD:
        return curve_from_pairs(surface, p_tilde, ts, us, direction, 1, seg.meta.get("id", ""), tol)
    if d <= 0:
        return ReferenceCurve(direction, np.array([[0.0, us[0], p_tilde.theta]]), p_tilde, 0.0,
                              boundary=np.zeros(1, dtype=int), side=-1)
    q_tilde = reference_point((us[-1], d), p_tilde, surface, 1, tol)
    s = d - ts[::-1]
    return curve_from_pairs(surface, q_tilde, s, us[::-1], direction, -1, seg.meta.get("id", ""), tol)


@dataclass
class ThetaGap:
    t: np.ndarray
    gap: np.ndarray

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gap)) if len(self.gap) else 0.0

    @property
    def ok(self) -> bool:
        return self.min_gap >= -GAP_TOL


def theta_gap(fwd: ReferenceCurve, rev: ReferenceCurve) -> ThetaGap:
    """t -> theta(R~(d - t)) - theta(T~(t)) at the shared nodes."""
    if fwd.kind is not Direction.FORWARD or rev.kind is not Direction.REVERSE:
        raise InputError("expected a forward and a reverse curve")
    if abs(fwd.length - rev.length) > 1e-9:
        raise InputError("curves come from different segments")
    if len(fwd.samples) <= 1:
        return ThetaGap(np.zeros(0), np.zeros(0))
    m = len(rev.samples)
    k = np.arange(min(len(fwd.samples), m))
    j = m - 1 - k
    ok = j >= 0
    gap = rev.theta[j[ok]] - fwd.theta[k[ok]]
    return ThetaGap(fwd.t[k[ok]], gap)


# ------------------------------------------------------------------ E(p)

@dataclass
class EllipsoidMaxSet:
    r_levels: List[float]
    maxima: List[np.ndarray]  # per level, rows (x, y) in the chart of M
    images: List[np.ndarray]  # per level, rows (d(o, x), d(p, x))
    plateaus: List[list] = field(default_factory=list)
    skipped: List[float] = field(default_factory=list)
    spacing: float = 0.0
    pruned: int = 0

    @property
    def position_error(self) -> float:
        return 2.0 * self.spacing

    def all_images(self) -> np.ndarray:
        rows = [im for im in self.images if len(im)]
        return np.vstack(rows) if rows else np.zeros((0, 2))

    def all_maxima(self) -> np.ndarray:
        rows = [mx for mx in self.maxima if len(mx)]
        return np.vstack(rows) if rows else np.zeros((0, 2))


def _chart_grids(m: TestManifold, o, p, resolution: int, r_cap: float):
    """(x axis, y axis, d_o grid, d_p grid, periodic, period)."""
    if m.kind == "revolution":
        prof = m.profile
        r_max = prof.ell if prof.closed else min(prof.ell, r_cap)
        fp = polar_distance_field(prof, SurfacePoint(*p), resolution, r_max=r_max)
        rs, ths = fp.axes
        do = np.repeat(rs[:, None], len(ths), axis=1)
        return rs, ths, do, fp.values, True, TWO_PI
    if m.kind == "flat_cylinder":
        n = resolution
        hs = np.linspace(m.x_range[0], m.x_range[1], n)
        ang = -math.pi + TWO_PI * np.arange(n) / n
        H, A = np.meshgrid(hs, ang, indexing="ij")

        def cyl(src):
            da = np.mod(A - src[1] + math.pi, TWO_PI) - math.pi
            return np.hypot(H - src[0], m.radius * da)
        return hs, ang, cyl(o), cyl(p), True, TWO_PI
    old = m.resolution
    m.resolution = resolution
    try:
        fo, fp = m.field(o), m.field(p)
    finally:
        m.resolution = old
    return fo.axes[0], fo.axes[1], fo.values, fp.values, fo.periodic, fo.period


def _local_maxima(v: np.ndarray, closed: bool, window: int = 2, flat_tol: float = 1e-12):
    """Indices of strict maxima over +-window nodes and plateau runs."""
    n = len(v)
    if closed and n > 1:
        v = v[:-1]  # first and last node coincide
        n = len(v)
    peaks, plateaus = [], []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(v[j + 1] - v[i]) <= flat_tol:
            j += 1
        if not closed and (i - window < 0 or j + window >= n):
            i = j + 1
            continue
        left = [v[(i - k) % n] for k in range(1, window + 1)]
        right = [v[(j + k) % n] for k in range(1, window + 1)]
        if all(v[i] > w + flat_tol for w in left + right):
            if j == i:
                peaks.append(i)
            else:
                plateaus.append((i, j))
        i = j + 1
    return peaks, plateaus


def _lemma_prunable(m: TestManifold, o, p, x, d_op: float, tol: float) -> bool:
    """Sufficient condition for x not being a local maximum, when checkable."""
    if m.kind == "revolution":
        if m.profile.closed and x[0] >= m.profile.ell - tol:
            return False  # the far vertex is Cut(o)
        on_cut = False
    elif m.kind == "flat_cylinder":
        on_cut = abs(abs(reduce_angle(x[1] - o[1])) - math.pi) <= tol / max(m.radius, 1e-12)
    else:
        return False
    if on_cut:
        return False
    d_ox = m.dist_o(x)
    d_px = m.distance(p, x)
    return abs(d_op + d_px - d_ox) > tol


def detect_E_p(m: TestManifold, o, p, r_levels: Sequence[float], resolution: int = 256,
               prune: bool = True) -> EllipsoidMaxSet:
    """Local maxima of d(o, .) on traced level sets of d(o, .) + d(p, .)."""
    o = tuple(map(float, o))
    p = tuple(map(float, p))
    d_op = m.dist_o(p) if m.kind != "revolution" else p[0]
    levels = [float(a) for a in r_levels]
    for a in levels:
        if a <= d_op:
            raise InputError(f"level {a} must exceed d(o, p) = {d_op}")
    r_cap = 0.6 * (max(levels) + d_op) + 0.5
    xs, ys, DO, DP, periodic, period = _chart_grids(m, o, p, resolution, r_cap)
    F = DO + DP
    pad = len(ys) // 4 if periodic else 0
    if pad:
        F = np.concatenate([F[:, -pad:], F, F[:, :pad]], axis=1)
        DOp = np.concatenate([DO[:, -pad:], DO, DO[:, :pad]], axis=1)
    else:
        DOp = DO
    h0 = xs[1] - xs[0]
    h1 = ys[1] - ys[0]
    spacing = float(max(h0, h1 * (m.radius if m.kind == "flat_cylinder" else 1.0)))
    if m.kind == "revolution":
        spacing = float(max(h0, h1 * float(np.max(m.profile.f_interp(xs)))))
    tol = 2.0 * spacing
    out = EllipsoidMaxSet(levels, [], [], [], [], spacing)
    for a in levels:
        try:
            contours = measure.find_contours(F, a)
        except Exception as exc:  # pragma: no cover - skimage failure is unusual
            warnings.warn(f"contour extraction failed at level {a}: {exc}")
            out.skipped.append(a)
            out.maxima.append(np.zeros((0, 2)))
            out.images.append(np.zeros((0, 2)))
            out.plateaus.append([])
            continue
        if not contours:
            warnings.warn(f"no level set found at {a}")
            out.skipped.append(a)
        pts, plats = [], []
        for cnt in contours:
            if len(cnt) < 5:
                continue
            ii, jj = cnt[:, 0], cnt[:, 1]
            x = xs[0] + ii * h0
            y = ys[0] + (jj - pad) * h1
            i0 = np.clip(np.floor(ii).astype(int), 0, F.shape[0] - 2)
            j0 = np.clip(np.floor(jj).astype(int), 0, F.shape[1] - 2)
            ti, tj = ii - i0, jj - j0
            v = (DOp[i0, j0] * (1 - ti) * (1 - tj) + DOp[i0 + 1, j0] * ti * (1 - tj)
                 + DOp[i0, j0 + 1] * (1 - ti) * tj + DOp[i0 + 1, j0 + 1] * ti * tj)
            closed = bool(np.allclose(cnt[0], cnt[-1]))
            peaks, plateaus = _local_maxima(v, closed)
            central = (y >= ys[0] - 1e-12) & (y < ys[0] + period - 1e-12) if pad else np.ones(len(y), bool)
            for k in peaks:
                if central[k]:
                    pts.append((x[k], y[k]))
            for i, j in plateaus:
                mid = (i + j) // 2
                if central[mid]:
                    pts.append((x[mid], y[mid]))
                    plats.append(((x[i], y[i]), (x[j], y[j])))
        arr = np.array(pts, float).reshape(-1, 2)
        if prune and len(arr) and m.kind != "grid_metric":
            keep = np.array([not _lemma_prunable(m, o, p, tuple(q), d_op, tol) for q in arr], bool)
            out.pruned += int(np.count_nonzero(~keep))
            arr = arr[keep]
        if m.kind == "grid_metric":
            fo, fp_ = m.field(o), m.field(p)
            imgs = np.column_stack([fo.values_at(arr), fp_.values_at(arr)]) if len(arr) else np.zeros((0, 2))
        else:
            imgs = np.array([(m.dist_o(tuple(q)), m.distance(p, tuple(q))) for q in arr], float).reshape(-1, 2)
        out.maxima.append(arr)
        out.images.append(imgs)
        out.plateaus.append(plats)
    return out


# ----------------------------------------------------------- condition (2.1)

@dataclass
class Condition21:
    passed: bool
    variant: str
    min_distance: float
    tau: float
    witness: Optional[dict] = None
    n_images: int = 0
    n_cut: int = 0
    not_representable: int = 0

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _densify(cl: CutLocus, variant: str, per_edge: int = 8) -> np.ndarray:
    rows = []
    if variant == "interior":
        for e in cl.edges:
            th = e.theta_nodes
            fine = np.linspace(th[0], th[-1], per_edge * len(th))
            rows.append(np.column_stack([e(fine), fine]))
        pts = cl.points[cl.interior]
    else:
        pts = cl.points[cl.finite]
    if len(pts):
        rows.append(pts)
    return np.vstack(rows) if rows else np.zeros((0, 2))


def _local_dist(surface: Surface, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Small-distance approximation sqrt(dr^2 + f(rbar)^2 dtheta^2)."""
    rbar = 0.5 * (a[:, None, 0] + b[None, :, 0])
    f = np.asarray(surface.profile.f_interp(np.clip(rbar, 0, surface.ell)))
    dth = np.mod(a[:, None, 1] - b[None, :, 1] + math.pi, TWO_PI) - math.pi
    return np.hypot(a[:, None, 0] - b[None, :, 0], f * dth)


def check_condition_2_1(maxset: EllipsoidMaxSet, cl: CutLocus, p_tilde: SurfacePoint, surface: Surface,
                        variant: str = "interior", tau: Optional[float] = None) -> Condition21:
    """Mapped E(p) against Cut(p~) in the interior (or closed) half surface."""
    if variant not in ("interior", "closed"):
        raise InputError("variant must be 'interior' or 'closed'")
    if tau is None:
        tau = 3.0 * (maxset.position_error + 1e-6)
    imgs, bad = [], 0
    for u, t in maxset.all_images():
        try:
            x = reference_point((u, t), p_tilde, surface)
            imgs.append((x.r, x.theta))
        except NotRepresentable:
            bad += 1
    imgs = np.array(imgs, float).reshape(-1, 2)
    cut = _densify(cl, variant)
    if len(imgs) == 0 or len(cut) == 0:
        return Condition21(True, variant, math.inf, tau, None, len(imgs), len(cut), bad)
    D = _local_dist(surface, imgs, cut)
    k = np.unravel_index(int(np.argmin(D)), D.shape)
    dmin = float(D[k])
    if dmin > tau:
        return Condition21(True, variant, dmin, tau, None, len(imgs), len(cut), bad)
    a = SurfacePoint(*imgs[k[0]])
    b = SurfacePoint(*cut[k[1]])
    wit = {"image": (a.r, a.theta), "cut_point": (b.r, b.theta), "distance": surface.dist(a, b)}
    return Condition21(False, variant, dmin, tau, wit, len(imgs), len(cut), bad)
