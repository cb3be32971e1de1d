"""Pure-Python/NumPy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and the same arithmetic order, so the two backends agree to rounding.
"""
import math

import numpy as np

BACKEND = "python"

PI = math.pi
TWO_PI = 2.0 * math.pi
MAX_SUBSTEP = 0.05


def wrap_angle(a):
    r = math.fmod(a + PI, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    r -= PI
    if r >= PI:
        r -= TWO_PI
    return r


def wrap_angles(a):
    r = np.fmod(np.asarray(a, dtype=float) + PI, TWO_PI)
    r = np.where(r < 0.0, r + TWO_PI, r) - PI
    return np.where(r >= PI, r - TWO_PI, r)


def substep_count(dt):
    return max(1, int(math.ceil(dt / MAX_SUBSTEP)))


# ---------------------------------------------------------------------------
# kinematic car: x' = v cos th, y' = v sin th, th' = v tan(phi) / L
# ---------------------------------------------------------------------------


def car_rollout(x, u, dt, wheelbase):
    """RK4 substep states of the car, shape (m + 1, 3), headings wrapped."""
    m = substep_count(dt)
    h = dt / m
    px, py, th = float(x[0]), float(x[1]), float(x[2])
    v, phi = float(u[0]), float(u[1])
    w = v * math.tan(phi) / wheelbase
    out = np.empty((m + 1, 3))
    out[0, 0] = px
    out[0, 1] = py
    out[0, 2] = wrap_angle(th)
    for i in range(m):
        k1x = v * math.cos(th)
        k1y = v * math.sin(th)
        t2 = th + 0.5 * h * w
        k2x = v * math.cos(t2)
        k2y = v * math.sin(t2)
        t3 = th + 0.5 * h * w
        k3x = v * math.cos(t3)
        k3y = v * math.sin(t3)
        t4 = th + h * w
        k4x = v * math.cos(t4)
        k4y = v * math.sin(t4)
        px += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        py += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        th += h / 6.0 * (w + 2.0 * w + 2.0 * w + w)
        out[i + 1, 0] = px
        out[i + 1, 1] = py
        out[i + 1, 2] = wrap_angle(th)
    return out


def car_propagate(x, u, dt, wheelbase):
    return car_rollout(x, u, dt, wheelbase)[-1].copy()


def _car_batch(X, U, dt, wheelbase, with_jacobian):
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    n = X.shape[0]
    m = substep_count(dt)
    h = dt / m
    px = X[:, 0].copy()
    py = X[:, 1].copy()
    th = X[:, 2].copy()
    v = U[:, 0]
    phi = U[:, 1]
    tp = np.tan(phi)
    cp = np.cos(phi)
    w = v * tp / wheelbase
    dw_dv = tp / wheelbase
    dw_dphi = v / (wheelbase * cp * cp)
    # sensitivities d(px, py, th)/d(v, phi)
    S = np.zeros((n, 3, 2))
    for _ in range(m):
        t1 = th
        t2 = th + 0.5 * h * w
        t3 = th + 0.5 * h * w
        t4 = th + h * w
        if with_jacobian:
            dk = []
            prev = None
            for a, t in ((0.0, t1), (0.5, t2), (0.5, t3), (1.0, t4)):
                St = S[:, 2, :] if prev is None else S[:, 2, :] + a * h * prev[:, 2, :]
                k = np.empty((n, 3, 2))
                c = np.cos(t)
                s = np.sin(t)
                k[:, 0, 0] = -v * s * St[:, 0] + c
                k[:, 0, 1] = -v * s * St[:, 1]
                k[:, 1, 0] = v * c * St[:, 0] + s
                k[:, 1, 1] = v * c * St[:, 1]
                k[:, 2, 0] = dw_dv
                k[:, 2, 1] = dw_dphi
                dk.append(k)
                prev = k
            S = S + h / 6.0 * (dk[0] + 2.0 * dk[1] + 2.0 * dk[2] + dk[3])
        px = px + h / 6.0 * (v * np.cos(t1) + 2.0 * (v * np.cos(t2)) + 2.0 * (v * np.cos(t3)) + v * np.cos(t4))
        py = py + h / 6.0 * (v * np.sin(t1) + 2.0 * (v * np.sin(t2)) + 2.0 * (v * np.sin(t3)) + v * np.sin(t4))
        th = th + h / 6.0 * (w + 2.0 * w + 2.0 * w + w)
    out = np.stack([px, py, wrap_angles(th)], axis=1)
    return out, S


def car_propagate_batch(X, U, dt, wheelbase):
    return _car_batch(X, U, dt, wheelbase, False)[0]


def car_jacobian_batch(X, U, dt, wheelbase):
    """Final states (n, 3) and control Jacobians (n, 3, 2)."""
    return _car_batch(X, U, dt, wheelbase, True)


# ---------------------------------------------------------------------------
# weighted, wrap-aware distances
# ---------------------------------------------------------------------------


def _diff(P, q, angular):
    d = P - q
    if angular.any():
        d[..., angular] = wrap_angles(d[..., angular])
    return d


def distances(P, q, weights, angular):
    """Weighted distances from each row of ``P`` to the single point ``q``."""
    P = np.asarray(P, dtype=float)
    d = _diff(P, np.asarray(q, dtype=float), np.asarray(angular, dtype=bool)) * weights
    return np.sqrt(np.einsum("...i,...i->...", d, d))


def nearest(P, n, ids, alive, q, weights, angular):
    """Row of the closest live point; ties go to the lowest id; -1 if none."""
    if n == 0:
        return -1, math.inf
    d = distances(P[:n], q, weights, angular)
    d = np.where(alive[:n], d, np.inf)
    best = d.min()
    if not np.isfinite(best):
        return -1, math.inf
    rows = np.flatnonzero(d == best)
    row = rows[np.argmin(ids[rows])]
    return int(row), float(best)


def within(P, n, alive, q, radius, weights, angular):
    if n == 0:
        return np.empty(0, dtype=np.int64)
    d = distances(P[:n], q, weights, angular)
    return np.flatnonzero((d <= radius) & alive[:n]).astype(np.int64)


def best_near(P, n, ids, alive, values, q, radius, weights, angular):
    """Row of the minimum-value live point within ``radius`` of ``q``, or -1."""
    rows = within(P, n, alive, q, radius, weights, angular)
    if rows.size == 0:
        return -1
    vals = values[rows]
    best = vals.min()
    cand = rows[vals == best]
    return int(cand[np.argmin(ids[cand])])


# ---------------------------------------------------------------------------
# collision checking
# ---------------------------------------------------------------------------


def points_free(pts, ws_lo, ws_hi, box_lo, box_hi, sph_c, sph_r):
    pts = np.atleast_2d(pts)
    ok = np.all((pts >= ws_lo) & (pts <= ws_hi), axis=1)
    if box_lo.shape[0]:
        inside = np.all(
            (pts[:, None, :] >= box_lo[None]) & (pts[:, None, :] <= box_hi[None]), axis=2
        )
        ok &= ~inside.any(axis=1)
    if sph_c.shape[0]:
        d2 = ((pts[:, None, :] - sph_c[None]) ** 2).sum(axis=2)
        ok &= ~(d2 <= sph_r[None] ** 2).any(axis=1)
    return ok


def segment_free(rows, resolution, weights, angular, pos_dims, ws_lo, ws_hi,
                 box_lo, box_hi, sph_c, sph_r):
    """True iff every interpolated sample along ``rows`` is collision free.

    Consecutive rows are split into ``ceil(dist / resolution)`` pieces in the
    weighted metric; positions are linearly interpolated between rows.
    """
    rows = np.asarray(rows, dtype=float)
    pos = rows[:, pos_dims]
    if not points_free(pos[:1], ws_lo, ws_hi, box_lo, box_hi, sph_c, sph_r)[0]:
        return False
    if rows.shape[0] == 1:
        return True
    d = _diff(rows[1:], rows[:-1], np.asarray(angular, dtype=bool)) * weights
    seg = np.sqrt(np.einsum("ij,ij->i", d, d))
    counts = np.maximum(1, np.ceil(seg / resolution)).astype(np.int64)
    samples = []
    for i, k in enumerate(counts):
        t = np.arange(1, k + 1, dtype=float) / k
        samples.append(pos[i] + t[:, None] * (pos[i + 1] - pos[i]))
    return bool(points_free(np.concatenate(samples), ws_lo, ws_hi, box_lo, box_hi, sph_c, sph_r).all())
