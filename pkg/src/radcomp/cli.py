"""Scenario-driven command line front end.

Exit codes: 0 all checks pass, 1 a comparison violation, 2 input or config
error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import yaml

from . import comparison as cmp
from .cutlocus import cut_locus, extremal_segments
from .cylinder_example import example_cylinder
from .ellipse import build_ellipse, star_shaped_check
from .errors import InputError, NotRepresentable, SolverError
from .manifolds import TestManifold
from .profile import _SAFE, RadialProfile, profile_from_config
from .reference import check_condition_2_1, detect_E_p, reference_curve, theta_gap
from .surface import Surface, SurfacePoint
from .svg import PolarPlot

log = logging.getLogger("radcomp")

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
RUN_KINDS = ("profile", "geodesic", "cutlocus", "ellipse", "refcurve", "verify-triangles",
             "example-cylinder", "audit")


@dataclass
class Scenario:
    run: str
    name: str = "scenario"
    reference: dict = field(default_factory=lambda: {"kind": "named", "name": "sphere"})
    manifold: dict = field(default_factory=lambda: {"same_as_reference": True})
    o: List[float] = field(default_factory=lambda: [0.0, 0.0])
    p: List[float] = field(default_factory=lambda: [1.0, 0.0])
    q: Optional[List[float]] = None
    seed: int = 0
    n_triangles: int = 200
    n_samples: int = 65
    choice: str = "L"
    r_range: Optional[List[float]] = None
    hypothesis_ok: bool = True
    positional: bool = True
    angle_monotone_nodes: int = 33
    tolerances: dict = field(default_factory=dict)
    deltas: List[float] = field(default_factory=list)
    condition21: Optional[dict] = None
    audit: dict = field(default_factory=lambda: {"n_triples": 10000})
    geodesic: dict = field(default_factory=lambda: {"alpha": 1.5707963267948966, "length": 1.0,
                                                     "orientation": 1})
    levels: List[float] = field(default_factory=list)
    n_alpha: int = 64
    resolution: int = 512
    n_phi: int = 256

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise InputError("scenario must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise InputError(f"unknown scenario keys: {sorted(extra)}")
        if "run" not in d:
            raise InputError("scenario needs a 'run' kind")
        sc = cls(**d)
        if sc.run not in RUN_KINDS:
            raise InputError(f"run must be one of {RUN_KINDS}, got {sc.run!r}")
        if sc.choice not in ("L", "U"):
            raise InputError("choice must be 'L' or 'U'")
        return sc


def _xy_expression(src):
    code = compile(str(src), "<metric>", "eval")
    for nm in code.co_names:
        if nm not in ("x", "y") and nm not in _SAFE:
            raise InputError(f"name {nm!r} not allowed in metric expression {src!r}")

    def fn(x, y):
        x = np.asarray(x, float)
        return np.broadcast_to(eval(code, {"__builtins__": {}}, dict(_SAFE, x=x, y=y)), np.shape(x)) * 1.0
    return fn


def build_manifold(spec: dict, reference: RadialProfile) -> TestManifold:
    spec = dict(spec or {})
    if spec.pop("same_as_reference", False):
        return TestManifold("revolution", profile=reference, name="reference")
    kind = spec.get("kind", "revolution")
    if kind == "revolution":
        return TestManifold("revolution", profile=profile_from_config(spec["profile"]),
                            resolution=int(spec.get("resolution", 256)), name=spec.get("name", ""))
    if kind == "flat_cylinder":
        return TestManifold("flat_cylinder", radius=float(spec.get("radius", 1.0)),
                            x_range=tuple(spec.get("x_range", (-6.0, 6.0))),
                            resolution=int(spec.get("resolution", 256)))
    if kind == "grid_metric":
        try:
            g11, g22 = _xy_expression(spec["g11"]), _xy_expression(spec["g22"])
        except (KeyError, SyntaxError) as exc:
            raise InputError(f"grid metric needs valid g11 and g22: {exc}") from None
        return TestManifold("grid_metric", base_o=tuple(spec.get("o", (0.0, 0.0))), g11=g11, g22=g22,
                            x_range=tuple(spec.get("x_range", (-1.0, 1.0))),
                            y_range=tuple(spec.get("y_range", (-1.0, 1.0))),
                            periodic=bool(spec.get("periodic", False)),
                            resolution=int(spec.get("resolution", 256)))
    raise InputError(f"unknown manifold kind {kind!r}")


def _tolerances(sc: Scenario) -> cmp.Tolerances:
    t = sc.tolerances or {}
    allowed = {"tau_cmp", "tau_ang", "tau_eq", "tau_order"}
    if set(t) - allowed:
        raise InputError(f"unknown tolerance keys {sorted(set(t) - allowed)}")
    return cmp.Tolerances(**{k: float(v) for k, v in t.items()})


# ------------------------------------------------------------------- runs

def run_profile(sc, ref, m, out):
    rs = np.linspace(0.0, ref.ell, 9)
    res = {"ell": ref.ell, "closed": ref.closed, "name": ref.name,
           "table": [[float(r), float(ref.f_interp(r)), float(ref.fp_interp(r))] for r in rs],
           "max_jacobi_residual": float(np.max(np.abs(ref.jacobi_residual(rs[1:-1]))))}
    return res, res["max_jacobi_residual"] <= 1e-6, None


def run_geodesic(sc, ref, m, out):
    s = Surface(ref)
    g = sc.geodesic
    p = SurfacePoint(*sc.p)
    path = s.shoot(p, float(g.get("alpha", math.pi / 2)), float(g.get("length", 1.0)),
                   int(g.get("orientation", 1)))
    res = {"end": [path.end.r, path.end.theta], "clairaut_residual": path.clairaut_residual(),
           "unit_speed_residual": path.unit_speed_residual(),
           "conjugate_time": s.conjugate_time(path)}
    if sc.q is not None:
        d = s.distance(p, SurfacePoint(*sc.q))
        res["distance"] = d.distance
        res["n_segments"] = len(d.paths)
    ok = res["clairaut_residual"] <= 1e-8 * max(1.0, path.length) and res["unit_speed_residual"] <= 1e-8
    plot = PolarPlot(max(ref.ell if ref.closed else 0.0, float(np.max(path.trace[:, 1])) * 1.1),
                     title="geodesic").grid()
    plot.curve(path.trace[:, 1], path.trace[:, 2], "reference", "geodesic")
    return res, ok, plot


def run_cutlocus(sc, ref, m, out):
    s = Surface(ref)
    p = SurfacePoint(*sc.p)
    cl = cut_locus(s, p, n_alpha=sc.n_alpha, resolution=sc.resolution)
    cl.to_csv(os.path.join(out, "cutlocus.csv"))
    res = {"n_finite": int(np.count_nonzero(cl.finite)), "n_interior": int(np.count_nonzero(cl.interior)),
           "n_edges": len(cl.edges), "conjugate": int(np.count_nonzero(cl.conjugate)),
           "points": cl.points[cl.finite].tolist()}
    plot = PolarPlot(ref.ell if ref.closed else 1.2 * float(np.nanmax(cl.points[:, 0], initial=p.r)),
                     title="cut locus").grid()
    plot.points(cl.points[:, 0], cl.points[:, 1], "cut_point", label="Cut(p)")
    for e in cl.edges:
        plot.curve(e(e.theta_nodes), e.theta_nodes, "cut")
    plot.points([p.r], [p.theta])
    return res, True, plot


def run_ellipse(sc, ref, m, out):
    s = Surface(ref)
    p = SurfacePoint(*sc.p)
    levels = sc.levels or [p.r + 0.5]
    rows, ok = [], True
    plot = PolarPlot(ref.ell if ref.closed else max(levels), title="ellipses").grid()
    for a in levels:
        e = build_ellipse(s, p, float(a), sc.n_phi)
        star = star_shaped_check(e)
        chk = dict(e.checks, star_violation=star.max_violation)
        ok &= (chk["max_residual"] <= 1e-8 and chk["symmetry"] <= 1e-8 and chk["monotone_violation"] <= 1e-8
               and chk["max_r_error"] <= 1e-6 and star.ok)
        rows.append({"a": float(a), **chk})
        plot.curve(e.r, e.phi, "ellipse", "E(o,p;a)")
    return {"levels": rows}, ok, plot


def run_refcurve(sc, ref, m, out):
    s = Surface(ref)
    if sc.q is None:
        raise InputError("refcurve needs q")
    p, q = tuple(sc.p), tuple(sc.q)
    seg = m.segment(p, q, sc.n_samples)
    p_t = SurfacePoint(m.dist_o(p), 0.0)
    fwd = reference_curve(m, seg, s, "forward", p_t)
    rev = reference_curve(m, seg, s, "reverse", p_t)
    fwd.to_csv(os.path.join(out, "refcurve_forward.csv"))
    rev.to_csv(os.path.join(out, "refcurve_reverse.csv"))
    res = {"forward_complete": fwd.complete, "reverse_complete": rev.complete,
           "monotone_violation": max(fwd.monotone_violation(), rev.monotone_violation()),
           "parameter_residual": max(fwd.parameter_residual(s), rev.parameter_residual(s))}
    ok = fwd.complete and rev.complete
    plot = PolarPlot(ref.ell if ref.closed else 1.2 * float(max(np.max(fwd.r), np.max(rev.r))),
                     title="reference curves").grid()
    plot.curve(fwd.r, fwd.theta, "reference", "T~(p,q)")
    plot.curve(rev.r, rev.theta, "reference", "R~(p,q)")
    if ok:
        gap = theta_gap(fwd, rev)
        res["theta_gap_min"] = gap.min_gap
        ok &= gap.ok
        q_t = rev.anchor
        if q_t.r > 1e-12 and not q_t.is_vertex(ref):
            pair = extremal_segments(s, p_t, q_t, sc.n_samples)
            res["positional"] = cmp.check_positional_relation(fwd, rev, pair)
            plot.curve(pair.upper.trace[:, 1], pair.upper.trace[:, 2], "U", "U")
            plot.curve(pair.lower.trace[:, 1], pair.lower.trace[:, 2], "L", "L")
    else:
        res["failed_at"] = fwd.failed_at if not fwd.complete else rev.failed_at
    return res, ok, plot


def run_audit(sc, ref, m, out):
    a = dict(sc.audit or {})
    rep = cmp.perimeter_diameter_audit(m, ref, int(a.get("n_triples", 10000)), sc.seed,
                                       a.get("tolerance"), bool(a.get("refine", True)))
    return rep.to_dict(), rep.passed, None


def _condition21(sc, ref, m):
    c = dict(sc.condition21)
    levels = c.get("levels")
    d_op = m.dist_o(tuple(sc.p))
    if not levels:
        hi = c.get("max_level", 2.0 * d_op + 1.0)
        levels = np.linspace(d_op + 0.1, hi, int(c.get("n_levels", 8))).tolist()
    ms = detect_E_p(m, tuple(sc.o), tuple(sc.p), levels, int(c.get("resolution", 256)))
    s = Surface(ref)
    p_t = SurfacePoint(d_op, 0.0)
    cl = cut_locus(s, p_t, n_alpha=int(c.get("n_alpha", 64)), resolution=int(c.get("cut_resolution", 512)))
    res = check_condition_2_1(ms, cl, p_t, s, c.get("variant", "interior"), c.get("tau"))
    return {"status": res.status, "variant": res.variant, "min_distance": res.min_distance, "tau": res.tau,
            "witness": res.witness, "n_images": res.n_images, "n_cut": res.n_cut,
            "not_representable": res.not_representable, "levels": levels,
            "n_maxima": int(sum(len(x) for x in ms.maxima))}, res.passed


def run_verify(sc, ref, m, out, workers=1):
    cfg = cmp.BatchConfig(m, ref, tuple(sc.o), tuple(sc.p), sc.n_triangles, sc.seed, sc.choice, sc.n_samples,
                          None if sc.r_range is None else tuple(sc.r_range), _tolerances(sc), sc.hypothesis_ok,
                          sc.positional, sc.angle_monotone_nodes)
    batch = cmp.verify_batch(cfg, {}, workers)
    batch.to_csv(os.path.join(out, "triangles.csv"))
    res = {"aggregate": {"n": len(batch.triangles), "counts": batch.counts, "min_gap": batch.min_gap,
                         "all_pass": batch.all_pass},
           "triangles": [t.to_dict() for t in batch.triangles]}
    ok = batch.violations == 0 if sc.hypothesis_ok else True
    solver = any(t.status == cmp.Status.SOLVER_FAILURE.value for t in batch.triangles)
    if sc.condition21 is not None:
        res["condition21"], c_ok = _condition21(sc, ref, m)
        ok &= c_ok or not sc.hypothesis_ok
    if sc.deltas:
        dr = cmp.delta_stabilized_run(cfg, sc.deltas)
        res["delta_run"] = dr.to_dict()
        ok &= dr.decreasing
    if solver:
        raise SolverError("at least one triangle hit a solver failure")
    return res, ok, None


def run_example_cylinder(sc, ref, m, out):
    rep = example_cylinder(seed=sc.seed)
    return rep.to_dict(), rep.passed, None


RUNNERS = {"profile": run_profile, "geodesic": run_geodesic, "cutlocus": run_cutlocus,
           "ellipse": run_ellipse, "refcurve": run_refcurve, "audit": run_audit,
           "example-cylinder": run_example_cylinder}


# -------------------------------------------------------------------- main

def load_scenario(path: str, overrides: dict) -> Scenario:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read scenario: {exc}") from None
    except yaml.YAMLError as exc:
        raise InputError(f"malformed scenario: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError("scenario must be a mapping")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return Scenario.from_dict(raw)


def execute(sc: Scenario, out: str, workers: int = 1, svg: bool = False, built=None) -> tuple:
    """Run a scenario, write report.json (and plots) into ``out``."""
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    ref, m = built if built is not None else (profile_from_config(sc.reference), None)
    if m is None:
        m = build_manifold(sc.manifold, ref)
    if sc.run == "verify-triangles":
        res, ok, plot = run_verify(sc, ref, m, out, workers)
    else:
        res, ok, plot = RUNNERS[sc.run](sc, ref, m, out)
    config = dataclasses.asdict(sc)
    report = {"schema": cmp.SCHEMA, "run": sc.run, "name": sc.name, "config": config,
              "scenario_hash": cmp.scenario_hash(config), "status": "PASS" if ok else "FAIL",
              "results": res}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(cmp._clean(report), fh, sort_keys=True, indent=1)
    if svg and plot is not None:
        plot.save(os.path.join(out, f"{sc.run}.svg"))
    log.info("%s finished in %.1f s: %s", sc.run, time.perf_counter() - t0, report["status"])
    return report, ok


def _parse_tolerances(items):
    out = {}
    for it in items or []:
        if "=" not in it:
            raise InputError(f"tolerance override must be key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = float(v)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="radcomp", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", help="YAML scenario file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--workers", type=int, default=None, help="worker processes for batch verification")
    ap.add_argument("--svg", action="store_true", help="write an SVG plot when the run has one")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--delta-list", default=None, help="comma separated deltas for the stabilized run")
    ap.add_argument("--tolerance", action="append", metavar="KEY=VALUE",
                    help="override tau_cmp, tau_ang, tau_eq or tau_order")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        overrides = {"seed": args.seed}
        if args.delta_list:
            overrides["deltas"] = [float(x) for x in args.delta_list.split(",") if x.strip()]
        sc = load_scenario(args.scenario, overrides)
        tol = _parse_tolerances(args.tolerance)
        if tol:
            sc.tolerances = dict(sc.tolerances or {}, **tol)
        ref = profile_from_config(sc.reference)
        m = build_manifold(sc.manifold, ref)
    except (InputError, KeyError, TypeError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    try:
        report, ok = execute(sc, args.out, workers, args.svg, (ref, m))
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, NotRepresentable) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{sc.run}: {report['status']}")
    return EXIT_OK if ok else EXIT_VIOLATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
