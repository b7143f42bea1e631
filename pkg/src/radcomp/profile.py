"""Radial profiles of reference surfaces of revolution.

A profile is the warping function ``f`` of the metric ``dr^2 + f(r)^2 dtheta^2``.
It is either solved from a curvature function ``K`` through the Jacobi
equation ``f'' + K f = 0, f(0) = 0, f'(0) = 1`` or supplied in closed form.

Every profile also carries a dense cubic-Hermite table of ``(f, f', f'', K)``
used by the compiled geodesic kernels.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, InputError, SolverError

TABLE_INTERVALS = 16384
DEFAULT_R_MAX = 16.0


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Warping function of a surface of revolution around its vertex.

    ``ell`` is the first zero of ``f`` when ``closed`` is true. Otherwise the
    surface is open and ``ell`` is only the end of the sampled domain.
    """

    K: Callable
    f: Callable
    f_prime: Callable
    ell: float
    closed: bool
    sample_grid: np.ndarray
    f_nodes: np.ndarray
    fp_nodes: np.ndarray
    K_nodes: np.ndarray
    interp_order: int = 3
    name: str = "profile"
    meta: dict = field(default_factory=dict)

    @property
    def step(self) -> float:
        return self.ell / (len(self.sample_grid) - 1)

    @property
    def table(self):
        """Arrays consumed by the compiled kernels."""
        t = self.__dict__.get("_table")
        if t is None:
            fpp = -self.K_nodes * self.f_nodes
            t = (
                np.ascontiguousarray(self.f_nodes),
                np.ascontiguousarray(self.fp_nodes),
                np.ascontiguousarray(fpp),
                np.ascontiguousarray(self.K_nodes),
                np.ascontiguousarray(np.gradient(self.K_nodes, self.step, edge_order=2)),
                float(self.step),
                int(len(self.sample_grid) - 1),
                float(self.ell),
                bool(self.closed),
            )
            object.__setattr__(self, "_table", t)
        return t

    def f_interp(self, r):
        """Cubic Hermite evaluation of f from the stored grid."""
        return _hermite(self.sample_grid, self.f_nodes, self.fp_nodes, r)

    def fp_interp(self, r):
        return _hermite(self.sample_grid, self.fp_nodes, -self.K_nodes * self.f_nodes, r)

    def jacobi_residual(self, r, h=None):
        """|f'' + K f| by centered differences on the stored interpolant.

        The default step is the table spacing; much smaller steps resolve the
        jumps of the cubic interpolant's second derivative at the nodes.
        """
        r = np.asarray(r, dtype=float)
        h = self.step if h is None else h
        fpp = (self.f_interp(r + h) - 2 * self.f_interp(r) + self.f_interp(r - h)) / h**2
        return np.abs(fpp + self.K(r) * self.f_interp(r))

    def __repr__(self):
        kind = "closed" if self.closed else "open"
        return f"RadialProfile({self.name!r}, ell={self.ell:.12g}, {kind})"


def _hermite(x, y, dy, r):
    r = np.asarray(r, dtype=float)
    h = x[1] - x[0]
    n = len(x) - 1
    i = np.clip((r / h).astype(int), 0, n - 1)
    s = r / h - i
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h * dy[i]
            + (-2 * s3 + 3 * s2) * y[i + 1] + (s3 - s2) * h * dy[i + 1])


def _vectorize(fn):
    def wrapped(r):
        out = fn(np.asarray(r, dtype=float))
        return np.broadcast_to(out, np.shape(r)).astype(float) if np.ndim(r) else float(out)
    return wrapped


def _build(K, f, fp, ell, closed, name, meta=None, n=TABLE_INTERVALS):
    grid = np.linspace(0.0, ell, n + 1)
    fn = np.asarray(f(grid), dtype=float)
    fpn = np.asarray(fp(grid), dtype=float)
    Kn = np.broadcast_to(np.asarray(K(grid), dtype=float), grid.shape).copy()
    fn[0], fpn[0] = 0.0, 1.0
    if closed:
        fn[-1] = 0.0
    if not (np.all(np.isfinite(fn)) and np.all(np.isfinite(fpn)) and np.all(np.isfinite(Kn))):
        raise InputError(f"profile {name!r} has non-finite samples")
    return RadialProfile(K=K, f=f, f_prime=fp, ell=float(ell), closed=bool(closed),
                         sample_grid=grid, f_nodes=fn, fp_nodes=fpn, K_nodes=Kn,
                         name=name, meta=dict(meta or {}))


def _check_curvature(K, r_stop, name):
    grid = np.linspace(0.0, r_stop, 4097)
    vals = np.asarray([K(r) for r in grid], dtype=float) if not _is_vectorized(K) else np.asarray(K(grid), dtype=float)
    vals = np.broadcast_to(vals, grid.shape)
    if not np.all(np.isfinite(vals)):
        bad = grid[~np.isfinite(vals)][0]
        raise InputError(f"curvature of {name!r} is not finite at r={bad:.6g}")
    lip = np.max(np.abs(np.diff(vals))) / (grid[1] - grid[0])
    if lip > 1e6:
        warnings.warn(f"curvature of {name!r} varies fast (Lipschitz estimate {lip:.3g})", stacklevel=3)


def _is_vectorized(K):
    try:
        out = np.asarray(K(np.array([0.0, 0.5])), dtype=float)
        return out.shape in ((2,), ())
    except Exception:
        return False


def solve_profile(K: Callable, r_stop: float = DEFAULT_R_MAX, tol: float = 1e-11,
                  name: str = "solved") -> RadialProfile:
    """Integrate ``f'' + K f = 0`` from the vertex.

    The first zero of ``f`` in ``(0, r_stop]`` becomes ``ell``; without one the
    profile is open and sampled up to ``r_stop``.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    if not r_stop > 0:
        raise InputError("r_stop must be positive")
    _check_curvature(K, r_stop, name)

    def rhs(r, y):
        return [y[1], -float(K(r)) * y[0]]

    def zero(r, y):
        return y[0]
    zero.terminal = True
    zero.direction = -1

    sol = solve_ivp(rhs, (0.0, r_stop), [0.0, 1.0], method="RK45", rtol=tol,
                    atol=tol * 1e-3, dense_output=True, events=zero)
    if sol.status == -1:
        raise SolverError(f"profile integration failed: {sol.message}")
    closed = sol.status == 1 and len(sol.t_events[0]) > 0
    ell = float(sol.t_events[0][0]) if closed else float(r_stop)
    dense = sol.sol

    def f(r):
        return dense(np.asarray(r, dtype=float))[0]

    def fp(r):
        return dense(np.asarray(r, dtype=float))[1]

    Kv = K if _is_vectorized(K) else np.vectorize(K, otypes=[float])
    prof = _build(Kv, f, fp, ell, closed, name, meta={"source": "curvature", "tol": tol})
    if closed and abs(prof.fp_nodes[-1] + 1.0) > 1e-6:
        warnings.warn(f"{name!r}: f'(ell) = {prof.fp_nodes[-1]:.6g} != -1; the far vertex is a cone point",
                      stacklevel=2)
    return prof


def from_warping(f: Callable, f_prime: Callable, K: Optional[Callable] = None, *,
                 ell: Optional[float] = None, r_max: float = DEFAULT_R_MAX,
                 name: str = "warping") -> RadialProfile:
    """Closed-form profile; ``ell`` given means the surface closes there."""
    if K is None:
        def K(r, _f=f, _fp=f_prime, h=1e-5):
            r = np.asarray(r, dtype=float)
            rr = np.where(r < h, h, r)
            return -(_fp(rr + h) - _fp(rr - h)) / (2 * h) / _f(rr)
    closed = ell is not None
    return _build(K, f, f_prime, ell if closed else r_max, closed, name, meta={"source": "warping"})


def constant_curvature(kappa: float, r_max: float = DEFAULT_R_MAX, name: Optional[str] = None) -> RadialProfile:
    """Sphere (kappa > 0), plane (0) or hyperbolic plane (kappa < 0)."""
    kappa = float(kappa)
    prof = _constant_curvature(kappa, r_max, name)
    prof.meta["kappa"] = kappa
    return prof


def _constant_curvature(kappa, r_max, name):
    if kappa > 0:
        s = math.sqrt(kappa)
        return from_warping(lambda r: np.sin(s * np.asarray(r)) / s,
                            lambda r: np.cos(s * np.asarray(r)),
                            lambda r: np.full(np.shape(r), kappa) if np.ndim(r) else kappa,
                            ell=math.pi / s, name=name or f"sphere(K={kappa:g})")
    if kappa == 0:
        return from_warping(lambda r: np.asarray(r, dtype=float) * 1.0,
                            lambda r: np.ones(np.shape(r)) if np.ndim(r) else 1.0,
                            lambda r: np.zeros(np.shape(r)) if np.ndim(r) else 0.0,
                            r_max=r_max, name=name or "flat")
    s = math.sqrt(-kappa)
    return from_warping(lambda r: np.sinh(s * np.asarray(r)) / s,
                        lambda r: np.cosh(s * np.asarray(r)),
                        lambda r: np.full(np.shape(r), kappa) if np.ndim(r) else kappa,
                        r_max=r_max, name=name or f"hyperbolic(K={kappa:g})")


def sphere(radius: float = 1.0) -> RadialProfile:
    return constant_curvature(1.0 / radius**2)


def flat(r_max: float = DEFAULT_R_MAX) -> RadialProfile:
    return constant_curvature(0.0, r_max=r_max)


def von_mangoldt(power: int = 2, r_max: float = DEFAULT_R_MAX) -> RadialProfile:
    """Profile of ``K(r) = 1/(1+r^2)^power``; non-increasing, hence von Mangoldt."""
    def K(r):
        return 1.0 / (1.0 + np.asarray(r, dtype=float) ** 2) ** power
    return solve_profile(K, r_stop=r_max, name=f"von_mangoldt(1/(1+r^2)^{power})")


def oblate(eps: float = 0.1) -> RadialProfile:
    """Closed profile ``(sin r - eps sin(3r)/3)/(1-eps)``.

    For ``eps > 0`` the curvature grows from the vertex to the equator, so the
    surface is not von Mangoldt and cut loci leave the opposite meridian.
    """
    c = 1.0 / (1.0 - eps)

    def f(r):
        r = np.asarray(r, dtype=float)
        return c * (np.sin(r) - eps * np.sin(3 * r) / 3)

    def fp(r):
        r = np.asarray(r, dtype=float)
        return c * (np.cos(r) - eps * np.cos(3 * r))

    def K(r):
        r = np.asarray(r, dtype=float)
        num = np.sin(r) - 3 * eps * np.sin(3 * r)
        den = np.sin(r) - eps * np.sin(3 * r) / 3
        small = np.abs(r) < 1e-6
        safe = np.where(small, 1.0, den)
        return np.where(small, (1 - 9 * eps) / (1 - eps), num / safe)

    return from_warping(f, fp, K, ell=math.pi, name=f"oblate(eps={eps:g})")


def perturb_profile(p: RadialProfile, delta: float) -> RadialProfile:
    """Profile of ``f'' + (K - delta) f = 0`` with the same initial data."""
    if delta < 0:
        raise InputError("delta must be non-negative")
    if delta == 0:
        return p
    K0 = p.K

    def K(r):
        return np.asarray(K0(r), dtype=float) - delta
    r_stop = 2.0 * p.ell if p.closed else p.ell
    out = solve_profile(K, r_stop=r_stop, name=f"{p.name}-delta{delta:g}")
    out.meta.update(base=p.name, delta=delta)
    return out


def gauss_curvature(p: RadialProfile, r: float, check_tol: float = 1e-5) -> float:
    """K(r), cross-checked against -f''/f on the stored grid."""
    if not 0 < r < p.ell:
        raise DomainError(f"r={r} outside (0, {p.ell})")
    k = float(np.asarray(p.K(r), dtype=float))
    h = min(1e-3, r / 4, (p.ell - r) / 4)
    fpp = (p.f_interp(r + h) - 2 * p.f_interp(r) + p.f_interp(r - h)) / h**2
    fr = float(p.f_interp(r))
    if fr > 1e-6 and abs(-fpp / fr - k) > check_tol * (1 + abs(k)) + 1e-6 / fr:
        warnings.warn(f"stored grid disagrees with K at r={r}: {-fpp / fr} vs {k}", stacklevel=2)
    return k


def profile_from_config(cfg: dict) -> RadialProfile:
    """Build a profile from a scenario entry.

    Accepted forms::

        {kind: constant, curvature: 1.0}
        {kind: curvature, expression: "1/(1+r**2)**2", r_max: 16}
        {kind: curvature, table: [[r, K], ...]}
        {kind: warping, expression: "sin(r)", derivative: "cos(r)", ell: 3.14159}
        {kind: named, name: sphere|flat|hyperbolic|von_mangoldt|oblate, ...}
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise InputError("profile spec must be a mapping with a 'kind'")
    kind = cfg["kind"]
    r_max = float(cfg.get("r_max", DEFAULT_R_MAX))
    if kind == "constant":
        return constant_curvature(float(cfg["curvature"]), r_max=r_max)
    if kind == "named":
        nm = cfg.get("name")
        if nm == "sphere":
            return constant_curvature(float(cfg.get("curvature", 1.0)))
        if nm == "flat":
            return flat(r_max)
        if nm == "hyperbolic":
            return constant_curvature(float(cfg.get("curvature", -1.0)), r_max=r_max)
        if nm == "von_mangoldt":
            return von_mangoldt(int(cfg.get("power", 2)), r_max=r_max)
        if nm == "oblate":
            return oblate(float(cfg.get("eps", 0.1)))
        raise InputError(f"unknown named profile {nm!r}")
    if kind == "curvature":
        shift = float(cfg.get("shift", 0.0))
        if "table" in cfg:
            tab = np.asarray(cfg["table"], dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or len(tab) < 2 or not np.all(np.isfinite(tab)):
                raise InputError("curvature table must be a list of finite (r, K) pairs")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise InputError("curvature table r-values must be strictly increasing")
            rr, kk = tab[:, 0].copy(), tab[:, 1].copy()

            def K(r):
                return np.interp(np.asarray(r, dtype=float), rr, kk) + shift
            r_max = float(cfg.get("r_max", rr[-1]))
        elif "expression" in cfg:
            K = _expression(cfg["expression"], shift)
        else:
            raise InputError("curvature profile needs 'expression' or 'table'")
        return solve_profile(K, r_stop=r_max, tol=float(cfg.get("tol", 1e-11)),
                             name=cfg.get("label", "curvature"))
    if kind == "warping":
        f = _expression(cfg["expression"])
        if "derivative" in cfg:
            fp = _expression(cfg["derivative"])
        else:
            def fp(r, h=1e-4):
                r = np.asarray(r, dtype=float)
                return (-f(r + 2 * h) + 8 * f(r + h) - 8 * f(r - h) + f(r - 2 * h)) / (12 * h)
        ell = cfg.get("ell")
        return from_warping(f, fp, ell=None if ell is None else float(ell), r_max=r_max,
                            name=cfg.get("label", "warping"))
    raise InputError(f"unknown profile kind {kind!r}")


_SAFE = {k: getattr(np, k) for k in ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log",
                                       "sqrt", "arctan", "abs", "pi", "where", "minimum", "maximum")}


def _expression(src: str, shift: float = 0.0):
    try:
        code = compile(str(src), "<profile>", "eval")
    except SyntaxError as exc:
        raise InputError(f"bad expression {src!r}: {exc}") from None
    for nm in code.co_names:
        if nm != "r" and nm not in _SAFE:
            raise InputError(f"name {nm!r} not allowed in expression {src!r}")

    def fn(r):
        r = np.asarray(r, dtype=float)
        return np.broadcast_to(eval(code, {"__builtins__": {}}, dict(_SAFE, r=r)), r.shape) + shift
    try:
        fn(np.array([0.0, 0.5]))
    except Exception as exc:
        raise InputError(f"expression {src!r} failed to evaluate: {exc}") from None
    return fn
