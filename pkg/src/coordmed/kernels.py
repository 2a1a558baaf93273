"""
Hot numeric kernels, each in two flavours.

``*_nb`` functions are scalar loops compiled with numba; ``*_np`` functions
are vectorised numpy equivalents.  The public wrappers at the bottom of the
module dispatch on the active backend, which defaults to the value of the
``COORDMED_BACKEND`` environment variable (see :mod:`coordmed._accel`).

Conventions shared by every kernel:

* profiles are ``float64`` arrays of shape ``(n, 2)`` (batched: ``(S, n, 2)``)
* ``p`` is a float and ``p_inf`` a bool; when ``p_inf`` is set ``p`` is ignored
* geometric-median certificates are ``max(0, |R| - w)`` at a data point and
  ``|sum of unit vectors|`` elsewhere
"""
import math
from contextlib import contextmanager

import numpy as np

from ._accel import NUMBA_AVAILABLE, njit, requested_backend

_backend = requested_backend() if NUMBA_AVAILABLE else "numpy"


def backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def using_backend(name):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


# ---------------------------------------------------------------------------
# social cost
# ---------------------------------------------------------------------------


@njit
def _cost_nb(ya, yb, pts, p, p_inf):
    n = pts.shape[0]
    if p_inf:
        m = 0.0
        for i in range(n):
            d = math.hypot(ya - pts[i, 0], yb - pts[i, 1])
            if d > m:
                m = d
        return m
    s = 0.0
    if p == 1.0:
        for i in range(n):
            s += math.hypot(ya - pts[i, 0], yb - pts[i, 1])
        return s
    if p == 2.0:
        for i in range(n):
            da = ya - pts[i, 0]
            db = yb - pts[i, 1]
            s += da * da + db * db
        return math.sqrt(s)
    # scale by the largest distance so d**p cannot overflow
    dmax = 0.0
    for i in range(n):
        d = math.hypot(ya - pts[i, 0], yb - pts[i, 1])
        if d > dmax:
            dmax = d
    if dmax == 0.0:
        return 0.0
    for i in range(n):
        s += (math.hypot(ya - pts[i, 0], yb - pts[i, 1]) / dmax) ** p
    return dmax * s ** (1.0 / p)


def _cost_rows_np(dist, p, p_inf):
    """Social cost of each row of a distance matrix."""
    if p_inf:
        return dist.max(axis=-1)
    if p == 1.0:
        return dist.sum(axis=-1)
    if p == 2.0:
        return np.sqrt((dist * dist).sum(axis=-1))
    dmax = dist.max(axis=-1)
    safe = np.where(dmax > 0, dmax, 1.0)
    s = ((dist / safe[..., None]) ** p).sum(axis=-1)
    return np.where(dmax > 0, dmax * s ** (1.0 / p), 0.0)


def _cost_np(ya, yb, pts, p, p_inf):
    dist = np.hypot(ya - pts[:, 0], yb - pts[:, 1])
    return float(_cost_rows_np(dist, p, p_inf))


@njit
def _cost_many_nb(cands, pts, p, p_inf):
    out = np.empty(cands.shape[0])
    for k in range(cands.shape[0]):
        out[k] = _cost_nb(cands[k, 0], cands[k, 1], pts, p, p_inf)
    return out


def _cost_many_np(cands, pts, p, p_inf, chunk=65536):
    out = np.empty(cands.shape[0])
    for start in range(0, cands.shape[0], chunk):
        c = cands[start:start + chunk]
        dist = np.hypot(c[:, 0:1] - pts[None, :, 0], c[:, 1:2] - pts[None, :, 1])
        out[start:start + chunk] = _cost_rows_np(dist, p, p_inf)
    return out


@njit
def _cost_batch_nb(locs, profiles, p, p_inf):
    out = np.empty(profiles.shape[0])
    for s in range(profiles.shape[0]):
        out[s] = _cost_nb(locs[s, 0], locs[s, 1], profiles[s], p, p_inf)
    return out


def _cost_batch_np(locs, profiles, p, p_inf):
    dist = np.hypot(locs[:, None, 0] - profiles[:, :, 0], locs[:, None, 1] - profiles[:, :, 1])
    return _cost_rows_np(dist, p, p_inf)


# ---------------------------------------------------------------------------
# geometric median (p = 1)
# ---------------------------------------------------------------------------


@njit
def _gm_nb(pts, tol, maxit):
    n = pts.shape[0]
    scale = 1.0
    for i in range(n):
        scale = max(scale, abs(pts[i, 0]), abs(pts[i, 1]))
    eps = 1e-12 * scale

    # a data point z is optimal iff |R| <= multiplicity(z)
    best = -1
    best_cost = np.inf
    best_cert = 0.0
    for j in range(n):
        dup = False
        for q in range(j):
            if abs(pts[q, 0] - pts[j, 0]) <= eps and abs(pts[q, 1] - pts[j, 1]) <= eps:
                dup = True
                break
        if dup:
            continue
        rx = 0.0
        ry = 0.0
        w = 0
        cost = 0.0
        for i in range(n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            d = math.hypot(dx, dy)
            if d <= eps:
                w += 1
            else:
                rx += dx / d
                ry += dy / d
                cost += d
        rn = math.hypot(rx, ry)
        if rn <= w + tol:
            better = cost < best_cost
            if cost == best_cost and best >= 0:
                if pts[j, 0] < pts[best, 0] or (pts[j, 0] == pts[best, 0] and pts[j, 1] < pts[best, 1]):
                    better = True
            if better:
                best = j
                best_cost = cost
                best_cert = max(0.0, rn - w)
    if best >= 0:
        return pts[best, 0], pts[best, 1], best_cert, 0, True

    ya = 0.0
    yb = 0.0
    for i in range(n):
        ya += pts[i, 0]
        yb += pts[i, 1]
    ya /= n
    yb /= n
    cert = np.inf
    for it in range(1, maxit + 1):
        gx = 0.0
        gy = 0.0
        wsum = 0.0
        sa = 0.0
        sb = 0.0
        anchor = -1
        for i in range(n):
            dx = ya - pts[i, 0]
            dy = yb - pts[i, 1]
            d = math.hypot(dx, dy)
            if d <= eps:
                anchor = i
                break
            gx += dx / d
            gy += dy / d
            wsum += 1.0 / d
            sa += pts[i, 0] / d
            sb += pts[i, 1] / d
        if anchor >= 0:
            # landed on a non-optimal data point: step off along R
            za = pts[anchor, 0]
            zb = pts[anchor, 1]
            rx = 0.0
            ry = 0.0
            w = 0
            inv = 0.0
            base = 0.0
            for i in range(n):
                dx = pts[i, 0] - za
                dy = pts[i, 1] - zb
                d = math.hypot(dx, dy)
                if d <= eps:
                    w += 1
                else:
                    rx += dx / d
                    ry += dy / d
                    inv += 1.0 / d
                    base += d
            rn = math.hypot(rx, ry)
            step = (rn - w) / inv
            ta = za
            tb = zb
            for _ in range(80):
                ta = za + step * rx / rn
                tb = zb + step * ry / rn
                if _cost_nb(ta, tb, pts, 1.0, False) < base:
                    break
                step *= 0.5
            ya = ta
            yb = tb
            continue
        cert = math.hypot(gx, gy)
        if cert <= tol:
            return ya, yb, cert, it, True
        da = sa / wsum - ya
        db = sb / wsum - yb
        lam = _extrapolate_nb(ya, yb, da, db, pts, eps)
        ya += lam * da
        yb += lam * db
    return ya, yb, cert, maxit, False


@njit
def _slope_nb(ya, yb, da, db, pts, eps):
    """Directional derivative of the distance sum; nan at a data point."""
    s = 0.0
    for i in range(pts.shape[0]):
        dx = ya - pts[i, 0]
        dy = yb - pts[i, 1]
        d = math.hypot(dx, dy)
        if d <= eps:
            return np.nan
        s += (dx * da + dy * db) / d
    return s


@njit
def _extrapolate_nb(ya, yb, da, db, pts, eps):
    # the plain Weiszfeld step (lam = 1) is a descent step; keep doubling
    # while the objective is still decreasing along the ray
    lam = 1.0
    for _ in range(60):
        s = _slope_nb(ya + 2.0 * lam * da, yb + 2.0 * lam * db, da, db, pts, eps)
        if not s < 0.0:
            break
        lam *= 2.0
    return lam


def _gm_np(pts, tol, maxit):
    pts = np.asarray(pts, dtype=np.float64)
    n = pts.shape[0]
    scale = max(1.0, float(np.abs(pts).max()))
    eps = 1e-12 * scale

    diff = pts[None, :, :] - pts[:, None, :]          # diff[j, i] = x_i - x_j
    dist = np.hypot(diff[..., 0], diff[..., 1])
    coincident = dist <= eps
    safe = np.where(coincident, 1.0, dist)
    unit = np.where(coincident[..., None], 0.0, diff / safe[..., None])
    rn = np.hypot(unit[..., 0].sum(axis=1), unit[..., 1].sum(axis=1))
    w = coincident.sum(axis=1)
    cost = np.where(coincident, 0.0, dist).sum(axis=1)
    first = np.argmax(coincident, axis=1) == np.arange(n)   # skip later duplicates
    ok = first & (rn <= w + tol)
    if ok.any():
        idx = np.flatnonzero(ok)
        order = np.lexsort((pts[idx, 1], pts[idx, 0], cost[idx]))
        j = idx[order[0]]
        return pts[j, 0], pts[j, 1], max(0.0, rn[j] - w[j]), 0, True

    y = pts.mean(axis=0)
    cert = np.inf
    for it in range(1, maxit + 1):
        dv = y - pts
        d = np.hypot(dv[:, 0], dv[:, 1])
        near = d <= eps
        if near.any():
            anchor = int(np.argmax(near))
            z = pts[anchor]
            dz = pts - z
            dd = np.hypot(dz[:, 0], dz[:, 1])
            c = dd <= eps
            w = int(c.sum())
            u = dz[~c] / dd[~c, None]
            r = u.sum(axis=0)
            rn = float(np.hypot(r[0], r[1]))
            step = (rn - w) / float((1.0 / dd[~c]).sum())
            base = float(dd.sum())
            for _ in range(80):
                trial = z + step * r / rn
                if _cost_np(trial[0], trial[1], pts, 1.0, False) < base:
                    break
                step *= 0.5
            y = trial
            continue
        g = (dv / d[:, None]).sum(axis=0)
        cert = float(np.hypot(g[0], g[1]))
        if cert <= tol:
            return y[0], y[1], cert, it, True
        inv = 1.0 / d
        step = (pts * inv[:, None]).sum(axis=0) / inv.sum() - y
        y = y + _extrapolate_np(y, step, pts, eps) * step
    return y[0], y[1], cert, maxit, False


def _extrapolate_np(y, step, pts, eps):
    lam = 1.0
    for _ in range(60):
        dv = y + 2.0 * lam * step - pts
        d = np.hypot(dv[:, 0], dv[:, 1])
        if (d <= eps).any() or not float(((dv @ step) / d).sum()) < 0.0:
            break
        lam *= 2.0
    return lam


@njit
def _gm_batch_nb(profiles, tol, maxit):
    s_count = profiles.shape[0]
    locs = np.empty((s_count, 2))
    certs = np.empty(s_count)
    iters = np.empty(s_count, dtype=np.int64)
    conv = np.empty(s_count, dtype=np.bool_)
    for s in range(s_count):
        a, b, c, k, ok = _gm_nb(profiles[s], tol, maxit)
        locs[s, 0] = a
        locs[s, 1] = b
        certs[s] = c
        iters[s] = k
        conv[s] = ok
    return locs, certs, iters, conv


def _gm_batch_np(profiles, tol, maxit):
    s_count = profiles.shape[0]
    locs = np.empty((s_count, 2))
    certs = np.empty(s_count)
    iters = np.empty(s_count, dtype=np.int64)
    conv = np.empty(s_count, dtype=bool)
    for s in range(s_count):
        a, b, c, k, ok = _gm_np(profiles[s], tol, maxit)
        locs[s] = a, b
        certs[s], iters[s], conv[s] = c, k, ok
    return locs, certs, iters, conv


# ---------------------------------------------------------------------------
# general finite p: damped gradient descent on sum d^p
# ---------------------------------------------------------------------------


@njit
def _pobj_nb(ya, yb, pts, p):
    """Objective sum d^p, its gradient, and sum p*d^(p-1) (the gradient scale)."""
    f = 0.0
    gx = 0.0
    gy = 0.0
    scale = 0.0
    for i in range(pts.shape[0]):
        dx = ya - pts[i, 0]
        dy = yb - pts[i, 1]
        d = math.hypot(dx, dy)
        if d == 0.0:
            continue
        dp = d ** p
        f += dp
        w = p * dp / (d * d)
        gx += w * dx
        gy += w * dy
        scale += p * dp / d
    return f, gx, gy, scale


@njit
def _pdesc_nb(pts, p, tol, maxit):
    n = pts.shape[0]
    ya = 0.0
    yb = 0.0
    for i in range(n):
        ya += pts[i, 0]
        yb += pts[i, 1]
    ya /= n
    yb /= n
    f, gx, gy, scale = _pobj_nb(ya, yb, pts, p)
    if scale == 0.0:
        return ya, yb, 0.0, 0, True
    gn = math.hypot(gx, gy)
    # first trial step: inverse of a curvature bound at the centroid
    curv = 0.0
    for i in range(n):
        d = math.hypot(ya - pts[i, 0], yb - pts[i, 1])
        if d > 0.0:
            curv += d ** (p - 2.0)
    step = 1.0 / (p * max(p - 1.0, 1.0) * curv)
    for it in range(1, maxit + 1):
        cert = gn / scale
        if cert <= tol:
            return ya, yb, cert, it - 1, True
        accepted = False
        for _ in range(100):
            na = ya - step * gx
            nb = yb - step * gy
            nf, ngx, ngy, nscale = _pobj_nb(na, nb, pts, p)
            if nf <= f - 1e-4 * step * gn * gn:
                accepted = True
                break
            # below the resolution of f, judge progress by the gradient
            if nf <= f * (1.0 + 1e-14) and math.hypot(ngx, ngy) < gn:
                accepted = True
                break
            step *= 0.5
        if not accepted or (na == ya and nb == yb):
            return ya, yb, cert, it, False
        sa = na - ya
        sb = nb - yb
        ua = ngx - gx
        ub = ngy - gy
        curv = sa * ua + sb * ub
        if curv > 0.0:
            step = (sa * sa + sb * sb) / curv
        else:
            step *= 2.0
        ya, yb, f, gx, gy, scale = na, nb, nf, ngx, ngy, nscale
        gn = math.hypot(gx, gy)
        if scale == 0.0:
            return ya, yb, 0.0, it, True
    return ya, yb, gn / scale, maxit, False


def _pobj_np(y, pts, p):
    dv = y - pts
    d = np.hypot(dv[:, 0], dv[:, 1])
    nz = d > 0
    dp = np.zeros_like(d)
    dp[nz] = d[nz] ** p
    w = np.zeros_like(d)
    w[nz] = p * dp[nz] / (d[nz] * d[nz])
    g = (w[:, None] * dv).sum(axis=0)
    scale = float((p * dp[nz] / d[nz]).sum())
    return float(dp.sum()), g, scale


def _pdesc_np(pts, p, tol, maxit):
    pts = np.asarray(pts, dtype=np.float64)
    y = pts.mean(axis=0)
    f, g, scale = _pobj_np(y, pts, p)
    if scale == 0.0:
        return y[0], y[1], 0.0, 0, True
    gn = float(np.hypot(g[0], g[1]))
    d = np.hypot(*(y - pts).T)
    step = 1.0 / (p * max(p - 1.0, 1.0) * float((d[d > 0] ** (p - 2.0)).sum()))
    for it in range(1, maxit + 1):
        cert = gn / scale
        if cert <= tol:
            return y[0], y[1], cert, it - 1, True
        for _ in range(100):
            ny = y - step * g
            nf, ng, nscale = _pobj_np(ny, pts, p)
            if nf <= f - 1e-4 * step * gn * gn:
                break
            if nf <= f * (1.0 + 1e-14) and float(np.hypot(ng[0], ng[1])) < gn:
                break
            step *= 0.5
        else:
            return y[0], y[1], cert, it, False
        if (ny == y).all():
            return y[0], y[1], cert, it, False
        s = ny - y
        u = ng - g
        curv = float(s @ u)
        step = float(s @ s) / curv if curv > 0.0 else step * 2.0
        y, f, g, scale = ny, nf, ng, nscale
        gn = float(np.hypot(g[0], g[1]))
        if scale == 0.0:
            return y[0], y[1], 0.0, it, True
    return y[0], y[1], gn / scale, maxit, False


# ---------------------------------------------------------------------------
# minimum enclosing circle (p = infinity), Welzl's incremental form
# ---------------------------------------------------------------------------


@njit
def _circum_nb(ax, ay, bx, by, cx, cy):
    bxr = bx - ax
    byr = by - ay
    cxr = cx - ax
    cyr = cy - ay
    det = 2.0 * (bxr * cyr - byr * cxr)
    if det == 0.0:
        return np.nan, np.nan
    b2 = bxr * bxr + byr * byr
    c2 = cxr * cxr + cyr * cyr
    ux = (cyr * b2 - byr * c2) / det
    uy = (bxr * c2 - cxr * b2) / det
    return ax + ux, ay + uy


@njit
def _mec_nb(pts):
    n = pts.shape[0]
    scale = 1.0
    for i in range(n):
        scale = max(scale, abs(pts[i, 0]), abs(pts[i, 1]))
    eps = 1e-13 * scale
    support = np.full(3, -1, dtype=np.int64)
    ca = pts[0, 0]
    cb = pts[0, 1]
    r = 0.0
    support[0] = 0
    for i in range(1, n):
        if math.hypot(pts[i, 0] - ca, pts[i, 1] - cb) <= r + eps:
            continue
        ca = pts[i, 0]
        cb = pts[i, 1]
        r = 0.0
        support[:] = -1
        support[0] = i
        for j in range(i):
            if math.hypot(pts[j, 0] - ca, pts[j, 1] - cb) <= r + eps:
                continue
            ca = 0.5 * (pts[i, 0] + pts[j, 0])
            cb = 0.5 * (pts[i, 1] + pts[j, 1])
            r = 0.5 * math.hypot(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1])
            support[:] = -1
            support[0] = i
            support[1] = j
            for k in range(j):
                if math.hypot(pts[k, 0] - ca, pts[k, 1] - cb) <= r + eps:
                    continue
                ua, ub = _circum_nb(pts[i, 0], pts[i, 1], pts[j, 0], pts[j, 1], pts[k, 0], pts[k, 1])
                if math.isnan(ua):
                    # collinear triple: k lies beyond the i-j diameter
                    continue
                ca = ua
                cb = ub
                r = max(math.hypot(pts[i, 0] - ca, pts[i, 1] - cb),
                        math.hypot(pts[j, 0] - ca, pts[j, 1] - cb),
                        math.hypot(pts[k, 0] - ca, pts[k, 1] - cb))
                support[0] = i
                support[1] = j
                support[2] = k
    return ca, cb, r, support


def _circum_np(a, b, c):
    br = b - a
    cr = c - a
    det = 2.0 * (br[0] * cr[1] - br[1] * cr[0])
    if det == 0.0:
        return None
    b2 = br @ br
    c2 = cr @ cr
    return a + np.array([(cr[1] * b2 - br[1] * c2) / det, (br[0] * c2 - cr[0] * b2) / det])


def _mec_np(pts):
    pts = np.asarray(pts, dtype=np.float64)
    n = pts.shape[0]
    eps = 1e-13 * max(1.0, float(np.abs(pts).max()))
    c = pts[0].copy()
    r = 0.0
    support = [0]

    def inside(q):
        return math.hypot(q[0] - c[0], q[1] - c[1]) <= r + eps

    for i in range(1, n):
        if inside(pts[i]):
            continue
        c, r, support = pts[i].copy(), 0.0, [i]
        for j in range(i):
            if inside(pts[j]):
                continue
            c = 0.5 * (pts[i] + pts[j])
            r = 0.5 * math.hypot(*(pts[i] - pts[j]))
            support = [i, j]
            for k in range(j):
                if inside(pts[k]):
                    continue
                u = _circum_np(pts[i], pts[j], pts[k])
                if u is None:
                    continue
                c = u
                r = max(math.hypot(*(pts[q] - c)) for q in (i, j, k))
                support = [i, j, k]
    out = np.full(3, -1, dtype=np.int64)
    out[:len(support)] = support
    return c[0], c[1], r, out


# ---------------------------------------------------------------------------
# batched optimum for any p
# ---------------------------------------------------------------------------


@njit
def _optimal_batch_nb(profiles, p, p_inf, tol, maxit):
    s_count = profiles.shape[0]
    locs = np.empty((s_count, 2))
    costs = np.empty(s_count)
    for s in range(s_count):
        pts = profiles[s]
        if p_inf:
            a, b, r, _ = _mec_nb(pts)
        elif p == 1.0:
            a, b, _, _, _ = _gm_nb(pts, tol, maxit)
        elif p == 2.0:
            a = 0.0
            b = 0.0
            for i in range(pts.shape[0]):
                a += pts[i, 0]
                b += pts[i, 1]
            a /= pts.shape[0]
            b /= pts.shape[0]
        else:
            a, b, _, _, _ = _pdesc_nb(pts, p, tol, maxit)
        locs[s, 0] = a
        locs[s, 1] = b
        costs[s] = _cost_nb(a, b, pts, p, p_inf)
    return locs, costs


def _optimal_batch_np(profiles, p, p_inf, tol, maxit):
    s_count = profiles.shape[0]
    locs = np.empty((s_count, 2))
    if p_inf:
        for s in range(s_count):
            locs[s] = _mec_np(profiles[s])[:2]
    elif p == 1.0:
        for s in range(s_count):
            locs[s] = _gm_np(profiles[s], tol, maxit)[:2]
    elif p == 2.0:
        locs = profiles.mean(axis=1)
    else:
        for s in range(s_count):
            locs[s] = _pdesc_np(profiles[s], p, tol, maxit)[:2]
    return locs, _cost_batch_np(locs, profiles, p, p_inf)


# ---------------------------------------------------------------------------
# coordinate-wise medians (inputs already expressed in the scheme's frame)
# ---------------------------------------------------------------------------


@njit
def _median_index(total, lower):
    if total % 2 == 1:
        return total // 2
    if lower:
        return total // 2 - 1
    return total // 2


@njit
def _cwm_batch_nb(profiles, consts, lower):
    s_count, n = profiles.shape[0], profiles.shape[1]
    k = consts.shape[0]
    idx = _median_index(n + k, lower)
    out = np.empty((s_count, 2))
    buf = np.empty(n + k)
    for s in range(s_count):
        for j in range(2):
            for i in range(n):
                buf[i] = profiles[s, i, j]
            for c in range(k):
                buf[n + c] = consts[c, j]
            buf.sort()
            out[s, j] = buf[idx]
    return out


def _cwm_batch_np(profiles, consts, lower):
    s_count, n = profiles.shape[0], profiles.shape[1]
    k = consts.shape[0]
    vals = np.concatenate([profiles, np.broadcast_to(consts, (s_count, k, 2))], axis=1)
    vals = np.sort(vals, axis=1)
    total = n + k
    idx = total // 2 if total % 2 else (total // 2 - 1 if lower else total // 2)
    return vals[:, idx, :].copy()


# With the other n + k - 1 values sorted as ``o``, inserting ``v`` puts
# ``clip(v, o[idx - 1], o[idx])`` at position ``idx``; missing neighbours are
# treated as -inf / +inf.


@njit
def _cwm_deviations_nb(pts, consts, agent, devs, lower):
    n = pts.shape[0]
    k = consts.shape[0]
    total = n + k
    idx = _median_index(total, lower)
    lo = np.empty(2)
    hi = np.empty(2)
    others = np.empty(total - 1)
    for j in range(2):
        c = 0
        for i in range(n):
            if i != agent:
                others[c] = pts[i, j]
                c += 1
        for q in range(k):
            others[c] = consts[q, j]
            c += 1
        others.sort()
        lo[j] = others[idx - 1] if idx >= 1 else -np.inf
        hi[j] = others[idx] if idx <= total - 2 else np.inf
    out = np.empty((devs.shape[0], 2))
    for d in range(devs.shape[0]):
        for j in range(2):
            v = devs[d, j]
            if v < lo[j]:
                v = lo[j]
            elif v > hi[j]:
                v = hi[j]
            out[d, j] = v
    return out


def _cwm_deviations_np(pts, consts, agent, devs, lower):
    n, k = pts.shape[0], consts.shape[0]
    total = n + k
    idx = total // 2 if total % 2 else (total // 2 - 1 if lower else total // 2)
    others = np.sort(np.concatenate([np.delete(pts, agent, axis=0), consts.reshape(-1, 2)]), axis=0)
    lo = others[idx - 1] if idx >= 1 else np.full(2, -np.inf)
    hi = others[idx] if idx <= total - 2 else np.full(2, np.inf)
    return np.minimum(np.maximum(devs, lo), hi)


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def social_cost(y, pts, p, p_inf):
    f = _cost_nb if _backend == "numba" else _cost_np
    return float(f(float(y[0]), float(y[1]), _f64(pts), float(p), bool(p_inf)))


def social_cost_many(cands, pts, p, p_inf):
    f = _cost_many_nb if _backend == "numba" else _cost_many_np
    return f(_f64(cands), _f64(pts), float(p), bool(p_inf))


def social_cost_batch(locs, profiles, p, p_inf):
    f = _cost_batch_nb if _backend == "numba" else _cost_batch_np
    return f(_f64(locs), _f64(profiles), float(p), bool(p_inf))


def geometric_median(pts, tol, maxit):
    f = _gm_nb if _backend == "numba" else _gm_np
    a, b, cert, it, ok = f(_f64(pts), float(tol), int(maxit))
    return float(a), float(b), float(cert), int(it), bool(ok)


def geometric_median_batch(profiles, tol, maxit):
    f = _gm_batch_nb if _backend == "numba" else _gm_batch_np
    return f(_f64(profiles), float(tol), int(maxit))


def pnorm_descent(pts, p, tol, maxit):
    f = _pdesc_nb if _backend == "numba" else _pdesc_np
    a, b, cert, it, ok = f(_f64(pts), float(p), float(tol), int(maxit))
    return float(a), float(b), float(cert), int(it), bool(ok)


def min_enclosing_circle(pts):
    f = _mec_nb if _backend == "numba" else _mec_np
    a, b, r, support = f(_f64(pts))
    return float(a), float(b), float(r), [int(i) for i in support if i >= 0]


def optimal_batch(profiles, p, p_inf, tol, maxit):
    f = _optimal_batch_nb if _backend == "numba" else _optimal_batch_np
    return f(_f64(profiles), float(p), bool(p_inf), float(tol), int(maxit))


def cwm_batch(profiles, consts, lower):
    f = _cwm_batch_nb if _backend == "numba" else _cwm_batch_np
    return f(_f64(profiles), _f64(consts).reshape(-1, 2), bool(lower))


def cwm_deviations(pts, consts, agent, devs, lower):
    f = _cwm_deviations_nb if _backend == "numba" else _cwm_deviations_np
    return f(_f64(pts), _f64(consts).reshape(-1, 2), int(agent), _f64(devs), bool(lower))
