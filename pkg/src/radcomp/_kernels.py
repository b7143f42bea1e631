"""Compiled inner loops: geodesic/Jacobi integration and fast marching.

Geodesic state is ``(r, theta, psi, J, J')`` where ``psi`` is the angle of the
unit velocity from the outward radial direction, so that

    r' = cos psi,  theta' = sin psi / f,  psi' = -f' sin psi / f,  J'' = -K J.

Within ``eps_pole`` of a vertex the metric is flat to round-off and the path
is continued as a straight chord.
"""
import math

import numpy as np
from numba import njit

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B = _A[6].copy()
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4

ST_TIME, ST_THETA, ST_DOMAIN, ST_FAIL = 0, 1, 2, 3
NSTATE = 5


@njit(cache=True, error_model="numpy")
def herm(y, dy, h, n, r):
    x = r / h
    i = int(math.floor(x))
    if i < 0:
        i = 0
    elif i > n - 1:
        i = n - 1
    s = x - i
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h * dy[i]
            + (-2 * s3 + 3 * s2) * y[i + 1] + (s3 - s2) * h * dy[i + 1])


@njit(cache=True, error_model="numpy")
def lin(y, h, n, r):
    x = r / h
    i = int(math.floor(x))
    if i < 0:
        i = 0
    elif i > n - 1:
        i = n - 1
    s = x - i
    return (1 - s) * y[i] + s * y[i + 1]


@njit(cache=True, error_model="numpy")
def _rhs(y, F, FP, FPP, KK, KP, h, n, out):
    r = y[0]
    f = herm(F, FP, h, n, r)
    fp = herm(FP, FPP, h, n, r)
    s = math.sin(y[2])
    c = math.cos(y[2])
    out[0] = c
    out[1] = s / f
    out[2] = -fp * s / f
    out[3] = y[4]
    out[4] = -herm(KK, KP, h, n, r) * y[3]


@njit(cache=True, error_model="numpy")
def _step(y, hs, F, FP, FPP, KK, KP, h, n, ell, closed, guard, A, B, E, k, ynew, yerr):
    """One DP step; returns False if a stage leaves the guarded domain."""
    tmp = k[7]
    _rhs(y, F, FP, FPP, KK, KP, h, n, k[0])
    for s in range(1, 7):
        for j in range(NSTATE):
            acc = y[j]
            for m in range(s):
                acc += hs * A[s, m] * k[m, j]
            tmp[j] = acc
        if tmp[0] < guard or (closed and tmp[0] > ell - guard) or ((not closed) and tmp[0] > ell):
            return False
        _rhs(tmp, F, FP, FPP, KK, KP, h, n, k[s])
    for j in range(NSTATE):
        a = y[j]
        e = 0.0
        for m in range(7):
            a += hs * B[m] * k[m, j]
            e += hs * E[m] * k[m, j]
        ynew[j] = a
        yerr[j] = e
    return True


@njit(cache=True, error_model="numpy")
def _chord(y, s_lim, theta_target, use_theta, ell, far, kv, eps):
    """Straight continuation through the vertex disk.

    Returns (ds, hit_theta). ``y`` is updated in place. ``s_lim`` caps the
    travelled length; ``theta_target`` stops the chord on that meridian.
    A start deep inside the disk heading outward runs out to radius ``eps``,
    since the ODE step cannot start there.
    """
    if far:
        rho = ell - y[0]
        ps = math.pi - y[2]
    else:
        rho = y[0]
        ps = y[2]
    vx = math.cos(ps)
    vy = math.sin(ps)
    if vx >= 0.0:
        if rho >= 0.5 * eps:
            return 0.0, False
        s_full = -rho * vx + math.sqrt(max(eps * eps - rho * rho * vy * vy, 0.0))
    else:
        s_full = -2.0 * rho * vx
        if rho < 0.5 * eps:
            s_full = -rho * vx + math.sqrt(max(eps * eps - rho * rho * vy * vy, 0.0))
    s = s_full
    hit = False
    if use_theta:
        d = theta_target - y[1]
        sd = math.sin(d)
        cd = math.cos(d)
        den = vx * sd - vy * cd
        if d <= math.pi + 1e-12 and d >= 0.0 and den != 0.0:
            sh = -(rho * sd) / den
            if 0.0 <= sh <= s_full:
                s = sh
                hit = True
    if s > s_lim:
        s = s_lim
        hit = False
    px = rho + s * vx
    py = s * vy
    rn = math.sqrt(px * px + py * py)
    dth = math.atan2(py, px)
    if vy >= -1e-13 and dth < 0.0:
        dth += 2 * math.pi
    if hit:
        dth = theta_target - y[1]
    if rn > 0:
        ex = px / rn
        ey = py / rn
    else:
        ex = -1.0
        ey = 0.0
    cps = vx * ex + vy * ey
    sps = -vx * ey + vy * ex
    psn = math.atan2(sps, cps)
    if far:
        y[0] = ell - rn
        y[2] = math.pi - psn
    else:
        y[0] = rn
        y[2] = psn
    y[1] += dth
    # Jacobi field with the vertex curvature held constant
    j = y[3]
    y[3] = j + s * y[4] - 0.5 * kv * j * s * s
    y[4] -= kv * (j + 0.5 * s * y[4]) * s
    return s, hit


@njit(cache=True, error_model="numpy")
def integrate(y0, t_end, theta_stop, use_theta, F, FP, FPP, KK, KP, h, n, ell, closed,
              rtol, atol, eps_pole, record, rec, t_eval, ev):
    """Adaptive DP45 integration of the geodesic + Jacobi system.

    rec: (m, 6) rows (t, r, theta, psi, J, J') at accepted steps when record.
    ev:  (len(t_eval), 6) states at the requested sorted times (NaN if unreached).
    Returns (status, t, nrec).
    """
    A = _A
    B = _B
    E = _E
    y = y0.copy()
    t = 0.0
    k = np.empty((8, NSTATE))
    ynew = np.empty(NSTATE)
    yerr = np.empty(NSTATE)
    ytry = np.empty(NSTATE)
    ev[:, :] = np.nan
    ie = 0
    while ie < len(t_eval) and t_eval[ie] <= 0.0:
        ev[ie, 0] = 0.0
        ev[ie, 1:] = y
        ie += 1
    nrec = 0
    maxrec = rec.shape[0]
    if record and nrec < maxrec:
        rec[nrec, 0] = 0.0
        rec[nrec, 1:] = y
        nrec += 1
    hs = min(0.05, t_end)
    guard = 0.5 * eps_pole
    nstep = 0
    status = ST_FAIL
    while True:
        if t >= t_end:
            status = ST_TIME
            break
        if nstep > 200000:
            status = ST_FAIL
            break
        nstep += 1
        near = y[0] < eps_pole
        farv = closed and y[0] > ell - eps_pole
        if near or farv:
            ycp = y.copy()
            ds, hit = _chord(y, t_end - t, theta_stop, use_theta, ell, farv, KK[n] if farv else KK[0], eps_pole)
            if ds > 0.0:
                t_new = t + ds
                while ie < len(t_eval) and t_eval[ie] <= t_new:
                    y2 = ycp.copy()
                    _chord(y2, t_eval[ie] - t, 0.0, False, ell, farv, KK[n] if farv else KK[0], eps_pole)
                    ev[ie, 0] = t_eval[ie]
                    ev[ie, 1:] = y2
                    ie += 1
                t = t_new
                if record and nrec < maxrec:
                    rec[nrec, 0] = t
                    rec[nrec, 1:] = y
                    nrec += 1
                if hit:
                    status = ST_THETA
                    break
                continue
        c = math.cos(y[2])
        if c < 0.0 and y[0] > eps_pole:
            lim = (y[0] - 0.75 * eps_pole) / (-c)
            if lim < hs:
                hs = max(lim, 1e-14)
        if closed and c > 0.0 and y[0] < ell - eps_pole:
            lim = (ell - 0.75 * eps_pole - y[0]) / c
            if lim < hs:
                hs = max(lim, 1e-14)
        if hs > t_end - t:
            hs = t_end - t
        ok = _step(y, hs, F, FP, FPP, KK, KP, h, n, ell, closed, guard, A, B, E, k, ynew, yerr)
        if not ok:
            if (not closed) and y[0] + hs > ell:
                status = ST_DOMAIN
                if hs < 1e-12:
                    break
            hs *= 0.25
            if hs < 1e-15:
                status = ST_DOMAIN if not closed else ST_FAIL
                break
            continue
        err = 0.0
        for j in range(NSTATE):
            sc = atol + rtol * max(abs(y[j]), abs(ynew[j]))
            v = abs(yerr[j]) / sc
            if v > err:
                err = v
        if err > 1.0:
            hs *= max(0.2, 0.9 * err ** (-0.2))
            if hs < 1e-15:
                status = ST_FAIL
                break
            continue
        # accepted step [t, t + hs]
        t_new = t + hs
        if use_theta and ynew[1] >= theta_stop:
            # locate the crossing by re-stepping from y
            lo = 0.0
            hi = hs
            th0 = y[1]
            dth_step = ynew[1] - th0
            hcur = hs * (theta_stop - th0) / dth_step if dth_step > 0.0 else 0.5 * hs
            for it in range(60):
                if hcur <= lo or hcur >= hi:
                    hcur = 0.5 * (lo + hi)
                _step(y, hcur, F, FP, FPP, KK, KP, h, n, ell, closed, -1.0, A, B, E, k, ytry, yerr)
                g = ytry[1] - theta_stop
                if abs(g) < 1e-15 * (1 + abs(theta_stop)):
                    break
                if g > 0:
                    hi = hcur
                else:
                    lo = hcur
                fr = herm(F, FP, h, n, ytry[0])
                dth = math.sin(ytry[2]) / fr
                if dth > 0:
                    hcur = hcur - g / dth
                else:
                    hcur = 0.5 * (lo + hi)
                if hi - lo < 1e-16:
                    break
            while ie < len(t_eval) and t_eval[ie] <= t + hcur:
                _step(y, t_eval[ie] - t, F, FP, FPP, KK, KP, h, n, ell, closed, -1.0, A, B, E, k, ynew, yerr)
                ev[ie, 0] = t_eval[ie]
                ev[ie, 1:] = ynew
                ie += 1
            t = t + hcur
            y[:] = ytry
            y[1] = theta_stop
            if record and nrec < maxrec:
                rec[nrec, 0] = t
                rec[nrec, 1:] = y
                nrec += 1
            status = ST_THETA
            break
        while ie < len(t_eval) and t_eval[ie] <= t_new:
            dt = t_eval[ie] - t
            if dt >= hs:
                ev[ie, 0] = t_eval[ie]
                ev[ie, 1:] = ynew
            else:
                _step(y, dt, F, FP, FPP, KK, KP, h, n, ell, closed, -1.0, A, B, E, k, ytry, yerr)
                ev[ie, 0] = t_eval[ie]
                ev[ie, 1:] = ytry
            ie += 1
        t = t_new
        y[:] = ynew
        if record and nrec < maxrec:
            rec[nrec, 0] = t
            rec[nrec, 1:] = y
            nrec += 1
        if (not closed) and y[0] >= ell:
            status = ST_DOMAIN
            break
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** (-0.2)))
        hs *= fac
    y0[:] = y
    return status, t, nrec


@njit(cache=True, error_model="numpy")
def fan(r0, alphas, t_max, theta_max, F, FP, FPP, KK, KP, h, n, ell, closed,
        rtol, atol, eps_pole, out, counts, status):
    """Shoot one geodesic per initial angle, recording accepted steps."""
    te = np.empty(0)
    ev = np.empty((0, 6))
    y = np.empty(NSTATE)
    for i in range(len(alphas)):
        y[0] = r0
        y[1] = 0.0
        y[2] = math.pi - alphas[i]
        y[3] = 0.0
        y[4] = 1.0
        st, t, nr = integrate(y, t_max, theta_max, True, F, FP, FPP, KK, KP, h, n, ell, closed,
                              rtol, atol, eps_pole, True, out[i], te, ev)
        counts[i] = nr
        status[i] = st


# ---------------------------------------------------------------- fast marching

FAR, TRIAL, KNOWN = 0, 1, 2


@njit(cache=True, error_model="numpy")
def _heap_push(hv, hi, hj, size, v, i, j):
    k = size
    hv[k] = v
    hi[k] = i
    hj[k] = j
    while k > 0:
        p = (k - 1) >> 1
        if hv[p] <= hv[k]:
            break
        hv[p], hv[k] = hv[k], hv[p]
        hi[p], hi[k] = hi[k], hi[p]
        hj[p], hj[k] = hj[k], hj[p]
        k = p
    return size + 1


@njit(cache=True, error_model="numpy")
def _heap_pop(hv, hi, hj, size):
    v, i, j = hv[0], hi[0], hj[0]
    size -= 1
    hv[0], hi[0], hj[0] = hv[size], hi[size], hj[size]
    k = 0
    while True:
        l = 2 * k + 1
        if l >= size:
            break
        m = l
        if l + 1 < size and hv[l + 1] < hv[l]:
            m = l + 1
        if hv[k] <= hv[m]:
            break
        hv[k], hv[m] = hv[m], hv[k]
        hi[k], hi[m] = hi[m], hi[k]
        hj[k], hj[m] = hj[m], hj[k]
        k = m
    return v, i, j, size


@njit(cache=True, error_model="numpy")
def _nb(i, j, di, dj, n0, n1, per1, pole_lo, pole_hi):
    """Neighbour of (i, j) one step along (di, dj); (-1, -1) if none."""
    ni = i + di
    nj = j + dj
    if dj != 0:
        if nj < 0 or nj >= n1:
            if not per1:
                return -1, -1
            nj %= n1
        return ni, nj
    if ni < 0:
        if pole_lo:
            return 0, (j + n1 // 2) % n1
        return -1, -1
    if ni >= n0:
        if pole_hi:
            return n0 - 1, (j + n1 // 2) % n1
        return -1, -1
    return ni, nj


@njit(cache=True, error_model="numpy")
def _axis_term(d, st, i, j, axis, n0, n1, per1, pole_lo, pole_hi, second):
    """Best upwind (value, second-order value or nan) along an axis."""
    best = np.inf
    best2 = np.nan
    for sgn in (-1, 1):
        di = sgn if axis == 0 else 0
        dj = sgn if axis == 1 else 0
        a, b = _nb(i, j, di, dj, n0, n1, per1, pole_lo, pole_hi)
        if a < 0 or st[a, b] != KNOWN:
            continue
        v1 = d[a, b]
        if v1 < best:
            best = v1
            best2 = np.nan
            if second:
                # continue in the same grid direction (through the pole if needed)
                if axis == 0 and (a, b) != (i + di, j):
                    a2, b2 = _nb(a, b, -di, 0, n0, n1, per1, pole_lo, pole_hi)
                else:
                    a2, b2 = _nb(a, b, di, dj, n0, n1, per1, pole_lo, pole_hi)
                if a2 >= 0 and st[a2, b2] == KNOWN and d[a2, b2] <= v1:
                    best2 = d[a2, b2]
    return best, best2


@njit(cache=True, error_model="numpy")
def _solve_node(d, st, i, j, h0, h1, s0, s1, n0, n1, per1, pole_lo, pole_hi, second):
    vals = np.empty(2)
    coef = np.empty(2)
    cnt = 0
    for axis in range(2):
        v1, v2 = _axis_term(d, st, i, j, axis, n0, n1, per1, pole_lo, pole_hi, second)
        if v1 == np.inf:
            continue
        hh = (h0 * s0[i, j]) if axis == 0 else (h1 * s1[i, j])
        if second and not np.isnan(v2):
            vals[cnt] = (4 * v1 - v2) / 3
            coef[cnt] = (1.5 / hh) ** 2
        else:
            vals[cnt] = v1
            coef[cnt] = (1.0 / hh) ** 2
        cnt += 1
    if cnt == 0:
        return np.inf
    # solve sum c_k (u - v_k)^2 = 1, dropping the larger value when inconsistent
    while True:
        a = 0.0
        b = 0.0
        c = -1.0
        for k in range(cnt):
            a += coef[k]
            b += -2 * coef[k] * vals[k]
            c += coef[k] * vals[k] ** 2
        disc = b * b - 4 * a * c
        u = np.inf
        if disc >= 0:
            u = (-b + math.sqrt(disc)) / (2 * a)
        ok = disc >= 0
        for k in range(cnt):
            if u < vals[k]:
                ok = False
        if ok or cnt == 1:
            if not ok:
                u = vals[0] + 1.0 / math.sqrt(coef[0])
            return u
        # drop the largest value
        km = 0
        for k in range(cnt):
            if vals[k] > vals[km]:
                km = k
        vals[km] = vals[cnt - 1]
        coef[km] = coef[cnt - 1]
        cnt -= 1


@njit(cache=True, error_model="numpy")
def fast_march(d, st, h0, h1, s0, s1, per1, pole_lo, pole_hi, second):
    """March from the KNOWN seeds in ``st``/``d`` (in place)."""
    n0, n1 = d.shape
    cap = 8 * n0 * n1 + 16
    hv = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    hj = np.empty(cap, dtype=np.int64)
    size = 0
    for i in range(n0):
        for j in range(n1):
            if st[i, j] == KNOWN:
                for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    a, b = _nb(i, j, di, dj, n0, n1, per1, pole_lo, pole_hi)
                    if a >= 0 and st[a, b] != KNOWN:
                        u = _solve_node(d, st, a, b, h0, h1, s0, s1, n0, n1, per1, pole_lo, pole_hi, second)
                        if u < d[a, b]:
                            d[a, b] = u
                            st[a, b] = TRIAL
                            size = _heap_push(hv, hi, hj, size, u, a, b)
    while size > 0:
        v, i, j, size = _heap_pop(hv, hi, hj, size)
        if st[i, j] == KNOWN or v > d[i, j]:
            continue
        st[i, j] = KNOWN
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            a, b = _nb(i, j, di, dj, n0, n1, per1, pole_lo, pole_hi)
            if a >= 0 and st[a, b] != KNOWN:
                u = _solve_node(d, st, a, b, h0, h1, s0, s1, n0, n1, per1, pole_lo, pole_hi, second)
                if u < d[a, b]:
                    d[a, b] = u
                    st[a, b] = TRIAL
                    if size >= cap:
                        return False
                    size = _heap_push(hv, hi, hj, size, u, a, b)
    return True


@njit(cache=True, error_model="numpy")
def _hermite_row(r0, th0, ps0, r1, th1, ps1, dt, s, F, FP, h, n):
    """Cubic Hermite in time between two recorded states; returns (r, theta)."""
    f0 = herm(F, FP, h, n, r0)
    f1 = herm(F, FP, h, n, r1)
    dr0 = math.cos(ps0)
    dr1 = math.cos(ps1)
    dth0 = math.sin(ps0) / f0 if f0 > 1e-9 else (th1 - th0) / dt
    dth1 = math.sin(ps1) / f1 if f1 > 1e-9 else (th1 - th0) / dt
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    r = h00 * r0 + h10 * dt * dr0 + h01 * r1 + h11 * dt * dr1
    th = h00 * th0 + h10 * dt * dth0 + h01 * th1 + h11 * dt * dth1
    return r, th


@njit(cache=True, error_model="numpy")
def fan_cross(out, counts, theta_target, F, FP, h, n, res):
    """First crossing of theta_target per recorded ray: res[i] = (t, r) or NaN."""
    for i in range(out.shape[0]):
        res[i, 0] = np.nan
        res[i, 1] = np.nan
        rows = out[i]
        m = counts[i]
        if m < 2 or rows[m - 1, 2] < theta_target or rows[0, 2] > theta_target:
            continue
        # theta is non-decreasing along a ray: binary search for the crossing row
        lo_k = 0
        hi_k = m - 1
        while hi_k - lo_k > 1:
            mk = (lo_k + hi_k) // 2
            if rows[mk, 2] >= theta_target:
                hi_k = mk
            else:
                lo_k = mk
        for k in range(hi_k, hi_k + 1):
            a = rows[k - 1]
            b = rows[k]
            if b[2] >= theta_target and a[2] <= theta_target:
                dt = b[0] - a[0]
                if dt <= 0.0:
                    continue
                # Illinois false position on the Hermite interpolant
                lo = 0.0
                hi = 1.0
                glo = a[2] - theta_target
                ghi = b[2] - theta_target
                s = 0.0 if ghi <= glo else -glo / (ghi - glo)
                r = a[1]
                side = 0
                for it in range(60):
                    r, th = _hermite_row(a[1], a[2], a[3], b[1], b[2], b[3], dt, s, F, FP, h, n)
                    g = th - theta_target
                    if abs(g) < 1e-14 or hi - lo < 1e-14:
                        break
                    if g > 0:
                        hi = s
                        ghi = g
                        if side == 1:
                            glo *= 0.5
                        side = 1
                    else:
                        lo = s
                        glo = g
                        if side == -1:
                            ghi *= 0.5
                        side = -1
                    s = lo - glo * (hi - lo) / (ghi - glo) if ghi != glo else 0.5 * (lo + hi)
                    if not (lo <= s <= hi):
                        s = 0.5 * (lo + hi)
                res[i, 0] = a[0] + s * dt
                res[i, 1] = r
                break


@njit(cache=True, error_model="numpy")
def fan_at_time(out, counts, t, F, FP, h, n, res):
    """State (r, theta) of every recorded ray at time t, NaN if unreached."""
    for i in range(out.shape[0]):
        res[i, 0] = np.nan
        res[i, 1] = np.nan
        rows = out[i]
        for k in range(1, counts[i]):
            a = rows[k - 1]
            b = rows[k]
            if b[0] >= t and a[0] <= t:
                dt = b[0] - a[0]
                if dt <= 0.0:
                    res[i, 0] = b[1]
                    res[i, 1] = b[2]
                else:
                    r, th = _hermite_row(a[1], a[2], a[3], b[1], b[2], b[3], dt, (t - a[0]) / dt, F, FP, h, n)
                    res[i, 0] = r
                    res[i, 1] = th
                break
