"""Triangle-level comparison checks between a test manifold and a model surface.

For a triangle o, p, q of M the comparison triangle is built from the three
side lengths on the surface of revolution, with o~ at the vertex and
p~ = (d(o, p), 0). The checks compare distances from o along the base
T(p, q), the three angles, and the order of the reference curves against
the extremal segments U and L of (p~, q~).
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .cutlocus import ExtremalPair, extremal_segments
from .errors import InputError, NotRepresentable, PerimeterViolation, SolverError
from .manifolds import MPath, TestManifold, angle_at
from .profile import RadialProfile, perturb_profile
from .reference import (Direction, ReferenceCurve, reference_curve, reference_point)
from .surface import GeodesicPath, Order, OrderResult, Surface, SurfacePoint, reduce_angle

SCHEMA = 1
TAU_ANG_ANALYTIC = 1e-6
TAU_ANG_GRID = 2e-2
TAU_EQ = 1e-6
DEGENERATE = 1e-3


class Status(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    COUNTEREXAMPLE_EXPECTED = "COUNTEREXAMPLE-EXPECTED"
    NOT_REPRESENTABLE = "NOT_REPRESENTABLE"
    PERIMETER_VIOLATION = "PERIMETER_VIOLATION"
    SOLVER_FAILURE = "SOLVER_FAILURE"


class Certificate(str, enum.Enum):
    CERTIFIED_CUT = "CERTIFIED_CUT"
    NO_CLAIM = "NO_CLAIM"


@dataclass
class Tolerances:
    tau_cmp: Optional[float] = None  # default: 3x combined distance error
    tau_ang: Optional[float] = None  # default: by manifold kind
    tau_eq: float = TAU_EQ
    tau_order: Optional[float] = None  # default: tau_cmp

    def resolved(self, m: TestManifold) -> "Tolerances":
        cmp_ = self.tau_cmp if self.tau_cmp is not None else 3.0 * (m.distance_tolerance + 1e-8)
        ang = self.tau_ang if self.tau_ang is not None else (TAU_ANG_ANALYTIC if m.is_analytic else TAU_ANG_GRID)
        order = self.tau_order if self.tau_order is not None else cmp_
        return Tolerances(cmp_, ang, self.tau_eq, order)


# ------------------------------------------------------------ triangle

@dataclass
class ComparisonTriangle:
    sides: Tuple[float, float, float]  # d(o,p), d(o,q), d(p,q)
    p_tilde: SurfacePoint
    q_tilde: SurfacePoint
    segment: Optional[GeodesicPath]
    pair: Optional[ExtremalPair]
    choice: str
    surface: Surface = field(repr=False)

    @property
    def angles(self) -> Tuple[float, float, float]:
        """Angles at o~, p~ and q~."""
        a_o = abs(reduce_angle(self.q_tilde.theta - self.p_tilde.theta))
        if self.segment is None:
            return a_o, math.nan, math.nan
        g = self.segment
        a_p = float(g.initial_angle)
        st = g.surface._states(g.start, g.initial_angle, g.orientation, np.array([g.length]))
        # reversed direction at q~ against the inward meridian: cos = dr/dt at arrival
        a_q = float(math.acos(max(-1.0, min(1.0, math.cos(st[0, 3])))))
        return a_o, a_p, a_q

    def r_along(self, ts) -> np.ndarray:
        ts = np.asarray(ts, float)
        if self.segment is None:
            return np.full(len(ts), self.p_tilde.r)
        return self.segment.at(np.clip(ts, 0.0, self.segment.length))[:, 0]


def _check_sides(sides, tol=1e-9):
    a, b, c = map(float, sides)
    if min(a, b, c) < 0 or not all(map(math.isfinite, (a, b, c))):
        raise InputError(f"invalid side lengths {sides}")
    s = 1e-9 + tol * (a + b + c)
    if a > b + c + s or b > a + c + s or c > a + b + s:
        raise InputError(f"side lengths {sides} violate the triangle inequality")
    return a, b, c


def comparison_triangle(sides, surface: Surface, choice: str = "L", n_samples: int = 65) -> ComparisonTriangle:
    """Triangle o~ p~ q~ with the given side lengths (d(o,p), d(o,q), d(p,q))."""
    if choice not in ("L", "U"):
        raise InputError("choice must be 'L' or 'U'")
    a, b, c = _check_sides(sides)
    if surface.closed and a + b + c > 2 * surface.ell + 1e-9:
        raise PerimeterViolation(f"perimeter {a + b + c:.12g} exceeds 2*ell = {2 * surface.ell:.12g}")
    p_t = SurfacePoint(a, 0.0)
    if c <= 1e-12:
        return ComparisonTriangle((a, b, c), p_t, p_t, None, None, choice, surface)
    q_t = reference_point((b, c), p_t, surface)
    if q_t.r <= 1e-12:
        g = GeodesicPath(surface, p_t, 0.0, a, 1, n_samples)
        return ComparisonTriangle((a, b, c), p_t, q_t, g, ExtremalPair(g, g, True), choice, surface)
    pair = extremal_segments(surface, p_t, q_t, n_samples)
    seg = pair.lower if choice == "L" else pair.upper
    return ComparisonTriangle((a, b, c), p_t, q_t, seg, pair, choice, surface)


# -------------------------------------------------------------- report

@dataclass
class TriangleReport:
    id: int
    q: Tuple[float, float]
    sides: Tuple[float, float, float]
    angles_M: Tuple[float, float, float] = (math.nan, math.nan, math.nan)
    angles_ref: Tuple[float, float, float] = (math.nan, math.nan, math.nan)
    convexity_gaps: List[float] = field(default_factory=list)
    gap_t: List[float] = field(default_factory=list)
    positional: Dict[str, object] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=lambda: {
        "pass": False, "equality_detected": False, "hypothesis_failed": False,
        "not_representable": False})
    checks: Dict[str, object] = field(default_factory=dict)
    status: str = Status.FAIL.value
    choice: str = "L"
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def min_gap(self) -> float:
        return float(min(self.convexity_gaps)) if self.convexity_gaps else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["min_gap"] = self.min_gap
        return _clean(d)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else (None if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def check_alexandrov_convexity(m: TestManifold, seg: MPath, tri: ComparisonTriangle, report: TriangleReport,
                               tau_cmp: float) -> TriangleReport:
    """gap(t) = d(o, T(p,q)(t)) - d(o~, T(p~,q~)(t)) at the segment nodes."""
    ts = seg.samples[:, 0]
    d_o = np.array([m.dist_o(x) for x in seg.samples[:, 1:3]])
    gaps = d_o - tri.r_along(ts)
    report.gap_t = ts.tolist()
    report.convexity_gaps = gaps.tolist()
    report.checks["convexity"] = {"pass": bool(np.min(gaps) >= -tau_cmp), "min_gap": float(np.min(gaps)),
                                  "tau_cmp": tau_cmp}
    return report


def triangle_angles_M(m: TestManifold, o, p, q, seg_pq: MPath, n_samples: int = 65) -> Tuple[float, float, float]:
    """Angles at o, p and q of the triangle with base seg_pq."""
    s_op = m.segment(o, p, n_samples)
    s_oq = m.segment(o, q, n_samples)
    s_po = m.segment(p, o, n_samples)
    s_qo = m.segment(q, o, n_samples)
    a_o = angle_at(m, o, s_op, s_oq)
    a_p = angle_at(m, p, s_po, seg_pq)
    a_q = angle_at(m, q, s_qo, seg_pq.reversed())
    return a_o, a_p, a_q


def check_angle_comparison(m: TestManifold, o, p, q, seg_pq: MPath, tri: ComparisonTriangle,
                           report: TriangleReport, tau_ang: float, n_samples: int = 65) -> TriangleReport:
    """Each angle of the triangle in M against the comparison angle."""
    am = triangle_angles_M(m, o, p, q, seg_pq, n_samples)
    ar = tri.angles
    report.angles_M = tuple(float(a) for a in am)
    report.angles_ref = tuple(float(a) for a in ar)
    margins = [a - b for a, b in zip(am, ar)]
    report.checks["angles"] = {"pass": bool(all(x >= -tau_ang for x in margins if math.isfinite(x))),
                               "margins": margins, "worst_margin": float(np.nanmin(margins)),
                               "tau_ang": tau_ang}
    return report


# ----------------------------------------------------------- positional

def _order_vs_geodesic(curve: ReferenceCurve, g: GeodesicPath, tol: float) -> OrderResult:
    """Order of a reference curve against a geodesic of the model, exactly evaluated."""
    surf = g.surface
    th_c = curve.theta
    sgn = g.orientation
    end = g.end
    th0, th1 = g.start.theta, g.start.theta + sgn * abs(reduce_angle(end.theta - g.start.theta))
    if abs(math.sin(g.initial_angle)) < 1e-12 or abs(th1 - th0) < 1e-12:
        # meridian segment: compare radii at equal arclength instead
        r_g = g.at(np.clip(curve.t, 0, g.length))[:, 0] if curve.kind is Direction.FORWARD else \
            g.at(np.clip(g.length - curve.t, 0, g.length))[:, 0]
        diff = curve.r - r_g
    else:
        lo, hi = min(th0, th1), max(th0, th1)
        keep = (th_c >= lo - 1e-12) & (th_c <= hi + 1e-12)
        diff = []
        for th, r in zip(th_c[keep], curve.r[keep]):
            dth = sgn * (th - g.start.theta)
            if dth <= 1e-14:
                rg = g.start.r
            elif abs(th - th1) <= 1e-12:
                rg = end.r
            else:
                rg, _, _ = surf._arrival(g.start.r, g.initial_angle, dth, g.length * 1.001 + 1e-9)
                if not math.isfinite(rg):
                    rg = end.r
            diff.append(r - rg)
        diff = np.asarray(diff)
    if len(diff) == 0:
        return OrderResult(Order.INCOMPARABLE, None, math.nan, math.nan)
    above, below = float(np.max(diff)), float(np.max(-diff))
    if above <= tol and below <= tol:
        rel = Order.EQ
    elif above <= tol:
        rel = Order.LE
    elif below <= tol:
        rel = Order.GE
    else:
        rel = Order.INCOMPARABLE
    return OrderResult(rel, None, above, below)


def _ge(rel: Order) -> bool:
    return rel in (Order.GE, Order.EQ)


def check_positional_relation(fwd: ReferenceCurve, rev: ReferenceCurve, pair: ExtremalPair,
                              chosen: Optional[GeodesicPath] = None, tol: float = 1e-8) -> dict:
    """Order of T~ and R~ against U and L, and the T~/R~ equivalence."""
    out = {}
    for cname, c in (("T", fwd), ("R", rev)):
        for gname, g in (("U", pair.upper), ("L", pair.lower)):
            res = _order_vs_geodesic(c, g, tol)
            out[f"{cname}_vs_{gname}"] = res.relation.value
            out[f"{cname}_vs_{gname}_margin"] = -res.max_below if math.isfinite(res.max_below) else None
    g = chosen if chosen is not None else pair.lower
    rt = _order_vs_geodesic(fwd, g, tol).relation
    rr = _order_vs_geodesic(rev, g, tol).relation
    out["T_vs_chosen"] = rt.value
    out["R_vs_chosen"] = rr.value
    out["equivalence_consistent"] = bool(_ge(rt) == _ge(rr))
    return out


@dataclass
class CutCertificate:
    status: Certificate
    relation: str
    n_segments: int = 0
    conjugate: bool = False
    validated: bool = False


def cut_point_certificate(fwd: ReferenceCurve, pair: ExtremalPair, m: TestManifold, p, q,
                          tol: float = 1e-8) -> CutCertificate:
    """Certify q as a cut point of p when T~(p,q) is not above U(p~,q~)."""
    rel = _order_vs_geodesic(fwd, pair.upper, tol).relation
    if rel not in (Order.INCOMPARABLE, Order.LE):
        return CutCertificate(Certificate.NO_CLAIM, rel.value)
    segs = m.min_segments(p, q)
    conj = False
    if m.kind == "revolution" and segs:
        g = segs[0].meta.get("geodesic")
        if g is not None:
            ct = m.surface.conjugate_time(GeodesicPath(m.surface, g.start, g.initial_angle,
                                                       g.length * (1 + 1e-6) + 1e-9, g.orientation))
            conj = ct is not None and abs(ct - g.length) <= 1e-6 * (1 + g.length)
    return CutCertificate(Certificate.CERTIFIED_CUT, rel.value, len(segs), conj, len(segs) >= 2 or conj)


# --------------------------------------------------------------- audits

def reference_angle_monotonicity(m: TestManifold, surface: Surface, o, p, q, n: int = 33) -> float:
    """Largest increase of theta(reference point of T(o,q)(t)) over n nodes."""
    seg = m.segment(o, q, n)
    p_t = SurfacePoint(m.dist_o(p), 0.0)
    ths = []
    for s, x, y in seg.samples[1:]:
        pt = (x, y)
        try:
            ths.append(reference_point((m.dist_o(pt), m.distance(p, pt)), p_t, surface).theta)
        except NotRepresentable:
            return math.inf
    return float(max(0.0, np.max(np.diff(ths)))) if len(ths) > 1 else 0.0


@dataclass
class AuditReport:
    n_triples: int
    ell: float
    max_perimeter: float
    max_distance: float
    perimeter_ratio: float
    diameter_ratio: float
    tolerance: float
    worst_triple: Optional[tuple] = None
    diameter_pair: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.perimeter_ratio <= 1 + self.tolerance and self.diameter_ratio <= 1 + self.tolerance

    @property
    def maximal_diameter(self) -> bool:
        """Diameter equals ell: the rigidity case of the diameter bound."""
        return abs(self.diameter_ratio - 1.0) <= self.tolerance

    def to_dict(self) -> dict:
        d = _clean(asdict(self))
        d.update(passed=self.passed, maximal_diameter=self.maximal_diameter)
        return d


def _sample_points(m: TestManifold, n: int, rng: np.random.Generator) -> np.ndarray:
    if m.kind == "revolution":
        top = m.profile.ell
        return np.column_stack([rng.uniform(0, top, n), rng.uniform(-math.pi, math.pi, n)])
    if m.kind == "flat_cylinder":
        return np.column_stack([rng.uniform(*m.x_range, n), rng.uniform(-math.pi, math.pi, n)])
    return np.column_stack([rng.uniform(*m.x_range, n), rng.uniform(*m.y_range, n)])


def perimeter_diameter_audit(m: TestManifold, reference: RadialProfile, n_triples: int = 10000,
                             seed: int = 0, tolerance: Optional[float] = None,
                             refine: bool = True) -> AuditReport:
    """Largest perimeter d(o,p)+d(p,q)+d(o,q) against 2*ell and largest distance against ell."""
    tol = tolerance if tolerance is not None else (1e-6 if m.is_analytic else 5e-3)
    ell = reference.ell if reference.closed else math.inf
    rng = np.random.default_rng(seed)
    P = _sample_points(m, n_triples, rng)
    Q = _sample_points(m, n_triples, rng)
    o = m.base_o
    best_per, wt, best_d, wp = -1.0, None, -1.0, None
    for p, q in zip(P, Q):
        a, b, c = m.dist_o(p), m.dist_o(q), m.distance(p, q)
        s = a + b + c
        if s > best_per:
            best_per, wt = s, (tuple(p), tuple(q))
        for dd, pair in ((a, (o, tuple(p))), (b, (o, tuple(q))), (c, (tuple(p), tuple(q)))):
            if dd > best_d:
                best_d, wp = dd, pair
    if refine and m.kind != "grid_metric" and wp is not None:
        x0 = np.concatenate([np.asarray(wp[0], float), np.asarray(wp[1], float)])

        def neg(z):
            zz = _clip_chart(m, z)
            return -m.distance(tuple(zz[:2]), tuple(zz[2:]))
        res = minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        z = _clip_chart(m, res.x)
        v = -neg(z)
        if v > best_d:
            best_d, wp = v, (tuple(z[:2]), tuple(z[2:]))
        if m.kind == "revolution" and m.profile.closed:
            # the far vertex realizes d(o, .) = ell_M
            far = (m.profile.ell, 0.0)
            v = m.dist_o(far)
            if v > best_d:
                best_d, wp = v, (o, far)
    per_ratio = best_per / (2 * ell) if math.isfinite(ell) else 0.0
    dia_ratio = best_d / ell if math.isfinite(ell) else 0.0
    return AuditReport(n_triples, ell, best_per, best_d, per_ratio, dia_ratio, tol, wt, wp)


def _clip_chart(m: TestManifold, z):
    z = np.array(z, float)
    if m.kind == "revolution":
        top = m.profile.ell
        z[0] = min(max(z[0], 0.0), top)
        z[2] = min(max(z[2], 0.0), top)
    elif m.kind == "flat_cylinder":
        z[0] = min(max(z[0], m.x_range[0]), m.x_range[1])
        z[2] = min(max(z[2], m.x_range[0]), m.x_range[1])
    return z


# ---------------------------------------------------------------- batch

@dataclass
class BatchConfig:
    manifold: TestManifold
    reference: RadialProfile
    o: Tuple[float, float]
    p: Tuple[float, float]
    n_triangles: int = 200
    seed: int = 0
    choice: str = "L"
    n_samples: int = 65
    r_range: Optional[Tuple[float, float]] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    hypothesis_ok: bool = True
    positional: bool = True
    angle_monotone_nodes: int = 0


def halton_points(cfg: BatchConfig, n: int) -> np.ndarray:
    """Low-discrepancy q = (r, theta) or chart points, degenerate triangles rejected."""
    m = cfg.manifold
    if cfg.r_range is not None:
        lo, hi = cfg.r_range
    elif m.kind == "revolution":
        lo, hi = 0.0, m.profile.ell
    else:
        lo, hi = m.x_range
    if m.kind == "grid_metric":
        ylo, yhi = m.y_range
    else:
        ylo, yhi = -math.pi, math.pi
    sampler = qmc.Halton(d=2, scramble=True, seed=cfg.seed)
    out = []
    d_op = m.dist_o(cfg.p)
    while len(out) < n:
        u = sampler.random(max(64, 2 * (n - len(out))))
        for a, b in u:
            q = (lo + (hi - lo) * a, ylo + (yhi - ylo) * b)
            d_oq, d_pq = m.dist_o(q), m.distance(cfg.p, q)
            s = sorted((d_op, d_oq, d_pq))
            if s[0] < DEGENERATE or s[0] + s[1] - s[2] < DEGENERATE:
                continue
            out.append(q)
            if len(out) == n:
                break
    return np.array(out)


def verify_triangle(cfg: BatchConfig, surface: Surface, q, tid: int = 0,
                    tri_cache: Optional[dict] = None) -> TriangleReport:
    """All comparison checks for the triangle (o, p, q) of the batch configuration."""
    m = cfg.manifold
    tol = cfg.tolerances.resolved(m)
    o, p = tuple(cfg.o), tuple(cfg.p)
    q = tuple(float(v) for v in q)
    sides = (m.dist_o(p), m.dist_o(q), m.distance(p, q))
    rep = TriangleReport(tid, q, sides, choice=cfg.choice,
                         tolerances={"tau_cmp": tol.tau_cmp, "tau_ang": tol.tau_ang, "tau_eq": tol.tau_eq,
                                     "tau_order": tol.tau_order})
    try:
        seg = m.segment(p, q, cfg.n_samples)
        tri = comparison_triangle(sides, surface, cfg.choice, cfg.n_samples)
    except PerimeterViolation as exc:
        rep.status = Status.PERIMETER_VIOLATION.value
        rep.checks["error"] = str(exc)
        return rep
    except NotRepresentable as exc:
        rep.flags["not_representable"] = True
        rep.status = Status.NOT_REPRESENTABLE.value
        rep.checks["error"] = str(exc)
        return rep
    except (SolverError, RuntimeError) as exc:
        rep.status = Status.SOLVER_FAILURE.value
        rep.checks["error"] = str(exc)
        return rep
    rep.checks["q_tilde"] = (tri.q_tilde.r, tri.q_tilde.theta)
    rep.checks["extremal_unique"] = bool(tri.pair.unique) if tri.pair is not None else True
    check_alexandrov_convexity(m, seg, tri, rep, tol.tau_cmp)
    check_angle_comparison(m, o, p, q, seg, tri, rep, tol.tau_ang, cfg.n_samples)
    if cfg.positional and tri.pair is not None and tri.segment is not None:
        fwd = reference_curve(m, seg, surface, "forward", tri.p_tilde)
        rev = reference_curve(m, seg, surface, "reverse", tri.p_tilde)
        if fwd.complete and rev.complete:
            rep.positional = check_positional_relation(fwd, rev, tri.pair, tri.segment, tol.tau_order)
            rep.positional["theta_gap_min"] = float(np.min(rev.theta[::-1] - fwd.theta))
        else:
            rep.flags["not_representable"] = True
            rep.positional = {"failed_at": fwd.failed_at if not fwd.complete else rev.failed_at}
    if cfg.angle_monotone_nodes:
        rep.checks["o_angle_increase"] = reference_angle_monotonicity(m, surface, o, p, q,
                                                                      cfg.angle_monotone_nodes)
    conv = rep.checks["convexity"]["pass"]
    ang = rep.checks["angles"]["pass"]
    gaps = np.asarray(rep.convexity_gaps)
    rep.flags["equality_detected"] = bool(np.all(np.abs(gaps) <= tol.tau_eq))
    if rep.positional.get("T_vs_chosen") in (Order.GE.value, Order.EQ.value):
        # r(q~(t)) >= r(T(p~,q~)(t)) must then hold along the base
        rep.checks["chain_implied"] = bool(np.min(gaps) >= -tol.tau_cmp)
    ok = conv and ang and not rep.flags["not_representable"]
    rep.flags["hypothesis_failed"] = not cfg.hypothesis_ok
    rep.flags["pass"] = bool(ok)
    if ok:
        rep.status = Status.PASS.value
    else:
        rep.status = (Status.COUNTEREXAMPLE_EXPECTED if not cfg.hypothesis_ok else Status.FAIL).value
    return rep


@dataclass
class BatchReport:
    triangles: List[TriangleReport]
    config: dict

    @property
    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for t in self.triangles:
            out[t.status] = out.get(t.status, 0) + 1
        return dict(sorted(out.items()))

    @property
    def all_pass(self) -> bool:
        return all(t.status == Status.PASS.value for t in self.triangles)

    @property
    def violations(self) -> int:
        return sum(t.status in (Status.FAIL.value, Status.NOT_REPRESENTABLE.value,
                                Status.PERIMETER_VIOLATION.value) for t in self.triangles)

    @property
    def min_gap(self) -> float:
        g = [t.min_gap for t in self.triangles if t.convexity_gaps]
        return float(min(g)) if g else math.nan

    def to_dict(self) -> dict:
        tris = sorted(self.triangles, key=lambda t: t.id)
        return _clean({
            "schema": SCHEMA,
            "scenario_hash": scenario_hash(self.config),
            "config": self.config,
            "triangles": [t.to_dict() for t in tris],
            "aggregate": {"n": len(tris), "counts": self.counts, "min_gap": self.min_gap,
                          "all_pass": self.all_pass},
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("id,r_q,theta_q,d_op,d_oq,d_pq,min_gap,angle_o,angle_p,angle_q,status\n")
            for t in sorted(self.triangles, key=lambda t: t.id):
                row = [t.id, *t.q, *t.sides, t.min_gap, *t.angles_M, t.status]
                fh.write(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def scenario_hash(config: dict) -> str:
    blob = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


_BATCH = None


def _verify_index(i: int) -> TriangleReport:
    cfg, surface, qs = _BATCH
    return verify_triangle(cfg, surface, qs[i], i)


def verify_batch(cfg: BatchConfig, config_echo: Optional[dict] = None, workers: int = 1,
                 progress: Optional[Callable[[int], None]] = None) -> BatchReport:
    """Run every check on a low-discrepancy batch of triangles."""
    surface = Surface(cfg.reference)
    qs = halton_points(cfg, cfg.n_triangles)
    reps = []
    if workers > 1 and len(qs) > 1:
        # profiles hold closures, so workers inherit the batch by fork instead of pickling
        global _BATCH
        _BATCH = (cfg, surface, qs)
        ctx = multiprocessing.get_context("fork")
        try:
            with ProcessPoolExecutor(workers, mp_context=ctx) as ex:
                reps = list(ex.map(_verify_index, range(len(qs)), chunksize=max(1, len(qs) // (4 * workers))))
        finally:
            _BATCH = None
    else:
        for i, q in enumerate(qs):
            reps.append(verify_triangle(cfg, surface, q, i))
            if progress:
                progress(i)
    return BatchReport(sorted(reps, key=lambda r: r.id), config_echo or {})


# ------------------------------------------------------------- delta run

@dataclass
class DeltaRun:
    deltas: List[float]
    gaps: List[np.ndarray]  # per delta level, shape (n_triangles, n_samples)
    sup_differences: List[float]

    @property
    def decreasing(self) -> bool:
        d = self.sup_differences
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def gap_minima(self) -> List[float]:
        return [float(np.nanmin(g)) for g in self.gaps]

    def to_dict(self) -> dict:
        return _clean({"deltas": self.deltas, "sup_differences": self.sup_differences,
                       "decreasing": self.decreasing, "gap_minima": self.gap_minima})


def delta_stabilized_run(cfg: BatchConfig, deltas: Sequence[float]) -> DeltaRun:
    """Convexity gaps against f_delta for decreasing delta, ending at delta = 0."""
    levels = sorted({float(d) for d in deltas} | {0.0}, reverse=True)
    for d in levels:
        if d < 0:
            raise InputError("delta must be non-negative")
    m = cfg.manifold
    qs = halton_points(cfg, cfg.n_triangles)
    p = tuple(cfg.p)
    base = []
    for q in qs:
        q = tuple(q)
        sides = (m.dist_o(p), m.dist_o(q), m.distance(p, q))
        seg = m.segment(p, q, cfg.n_samples)
        d_o = np.array([m.dist_o(x) for x in seg.samples[:, 1:3]])
        base.append((sides, seg.samples[:, 0], d_o))
    all_gaps = []
    for d in levels:
        surface = Surface(perturb_profile(cfg.reference, d) if d > 0 else cfg.reference)
        rows = []
        for sides, ts, d_o in base:
            try:
                tri = comparison_triangle(sides, surface, cfg.choice, cfg.n_samples)
                rows.append(d_o - tri.r_along(ts))
            except (NotRepresentable, PerimeterViolation):
                rows.append(np.full(len(ts), np.nan))
        all_gaps.append(np.array(rows))
    sup = [float(np.nanmax(np.abs(a - b))) for a, b in zip(all_gaps, all_gaps[1:])]
    return DeltaRun(levels, all_gaps, sup)
