# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels.py``.

Signatures and arithmetic order mirror the Python fallback.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, tan, sqrt, fmod, ceil, INFINITY

cnp.import_array()

BACKEND = "cython"

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586
cdef double MAX_SUBSTEP = 0.05


cdef inline double _wrap(double a) noexcept nogil:
    cdef double r = a + PI
    # fmod is the identity on [0, 2*pi); skip the call there
    if not (r >= 0.0 and r < TWO_PI):
        r = fmod(r, TWO_PI)
        if r < 0.0:
            r += TWO_PI
    r -= PI
    if r >= PI:
        r -= TWO_PI
    return r


def wrap_angle(double a):
    return _wrap(a)


def wrap_angles(a):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(a, dtype=np.float64).ravel().copy()
    cdef Py_ssize_t i
    for i in range(flat.shape[0]):
        flat[i] = _wrap(flat[i])
    return flat.reshape(np.shape(a))


cdef inline int _substeps(double dt) noexcept nogil:
    cdef int m = <int>ceil(dt / MAX_SUBSTEP)
    return m if m > 1 else 1


def substep_count(double dt):
    return _substeps(dt)


cdef void _car_row(double px, double py, double th, double v, double phi, double dt,
                   double wheelbase, double[:, ::1] out, bint record) noexcept nogil:
    cdef int m = _substeps(dt)
    cdef double h = dt / m
    cdef double w = v * tan(phi) / wheelbase
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y, t2, t3, t4
    cdef int i
    out[0, 0] = px
    out[0, 1] = py
    out[0, 2] = _wrap(th)
    for i in range(m):
        k1x = v * cos(th)
        k1y = v * sin(th)
        t2 = th + 0.5 * h * w
        k2x = v * cos(t2)
        k2y = v * sin(t2)
        t3 = th + 0.5 * h * w
        k3x = v * cos(t3)
        k3y = v * sin(t3)
        t4 = th + h * w
        k4x = v * cos(t4)
        k4y = v * sin(t4)
        px += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        py += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        th += h / 6.0 * (w + 2.0 * w + 2.0 * w + w)
        if record:
            out[i + 1, 0] = px
            out[i + 1, 1] = py
            out[i + 1, 2] = _wrap(th)
    if not record:
        out[0, 0] = px
        out[0, 1] = py
        out[0, 2] = _wrap(th)


def car_rollout(x, u, double dt, double wheelbase):
    cdef int m = _substeps(dt)
    out = np.empty((m + 1, 3))
    cdef double[:, ::1] o = out
    _car_row(float(x[0]), float(x[1]), float(x[2]), float(u[0]), float(u[1]), dt, wheelbase, o, True)
    return out


def car_propagate(x, u, double dt, double wheelbase):
    out = np.empty((1, 3))
    cdef double[:, ::1] o = out
    _car_row(float(x[0]), float(x[1]), float(x[2]), float(u[0]), float(u[1]), dt, wheelbase, o, False)
    return out[0]


def car_propagate_batch(X, U, double dt, double wheelbase):
    cdef double[:, ::1] xs = np.ascontiguousarray(X, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] us = np.ascontiguousarray(U, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = xs.shape[0], i
    out = np.empty((n, 3))
    cdef double[:, ::1] o = out
    for i in range(n):
        _car_row(xs[i, 0], xs[i, 1], xs[i, 2], us[i, 0], us[i, 1], dt, wheelbase, o[i:i + 1], False)
    return out


def car_jacobian_batch(X, U, double dt, double wheelbase):
    cdef double[:, ::1] xs = np.ascontiguousarray(X, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] us = np.ascontiguousarray(U, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = xs.shape[0], i
    cdef int m = _substeps(dt), j, stage, a_i, b_i
    cdef double h = dt / m
    out = np.empty((n, 3))
    jac = np.zeros((n, 3, 2))
    cdef double[:, ::1] o = out
    cdef double[:, :, ::1] J = jac
    cdef double px, py, th, v, phi, w, dwv, dwp, cp, t, a, c, s
    cdef double S[3][2]
    cdef double K[4][3][2]
    cdef double st0, st1
    cdef double ts[4]
    cdef double av[4]
    av[0] = 0.0
    av[1] = 0.5
    av[2] = 0.5
    av[3] = 1.0
    for i in range(n):
        px = xs[i, 0]
        py = xs[i, 1]
        th = xs[i, 2]
        v = us[i, 0]
        phi = us[i, 1]
        cp = cos(phi)
        w = v * tan(phi) / wheelbase
        dwv = tan(phi) / wheelbase
        dwp = v / (wheelbase * cp * cp)
        S[0][0] = 0.0
        S[0][1] = 0.0
        S[1][0] = 0.0
        S[1][1] = 0.0
        S[2][0] = 0.0
        S[2][1] = 0.0
        for j in range(m):
            ts[0] = th
            ts[1] = th + 0.5 * h * w
            ts[2] = th + 0.5 * h * w
            ts[3] = th + h * w
            for stage in range(4):
                t = ts[stage]
                a = av[stage]
                if stage == 0:
                    st0 = S[2][0]
                    st1 = S[2][1]
                else:
                    st0 = S[2][0] + a * h * K[stage - 1][2][0]
                    st1 = S[2][1] + a * h * K[stage - 1][2][1]
                c = cos(t)
                s = sin(t)
                K[stage][0][0] = -v * s * st0 + c
                K[stage][0][1] = -v * s * st1
                K[stage][1][0] = v * c * st0 + s
                K[stage][1][1] = v * c * st1
                K[stage][2][0] = dwv
                K[stage][2][1] = dwp
            for a_i in range(3):
                for b_i in range(2):
                    S[a_i][b_i] = S[a_i][b_i] + h / 6.0 * (K[0][a_i][b_i] + 2.0 * K[1][a_i][b_i] + 2.0 * K[2][a_i][b_i] + K[3][a_i][b_i])
            px = px + h / 6.0 * (v * cos(ts[0]) + 2.0 * (v * cos(ts[1])) + 2.0 * (v * cos(ts[2])) + v * cos(ts[3]))
            py = py + h / 6.0 * (v * sin(ts[0]) + 2.0 * (v * sin(ts[1])) + 2.0 * (v * sin(ts[2])) + v * sin(ts[3]))
            th = th + h / 6.0 * (w + 2.0 * w + 2.0 * w + w)
        o[i, 0] = px
        o[i, 1] = py
        o[i, 2] = _wrap(th)
        for a_i in range(3):
            for b_i in range(2):
                J[i, a_i, b_i] = S[a_i][b_i]
    return out, jac


cdef inline double _dist2(const double* p, const double* q, const double* w, const unsigned char* ang,
                          Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0, diff
    for k in range(d):
        diff = p[k] - q[k]
        if ang[k]:
            diff = _wrap(diff)
        diff = diff * w[k]
        acc += diff * diff
    return acc


cdef inline double _dist(const double[:, ::1] P, Py_ssize_t row, const double[::1] q,
                         const double[::1] w, const unsigned char[::1] ang) noexcept nogil:
    return sqrt(_dist2(&P[row, 0], &q[0], &w[0], &ang[0], q.shape[0]))


# squared-distance prefilter margin; the exact comparison runs on sqrt values
cdef double SQ_SLACK = 1.0 + 1e-12


def _prep(P, q, weights, angular):
    return (np.ascontiguousarray(P, dtype=np.float64),
            np.ascontiguousarray(q, dtype=np.float64).ravel(),
            np.ascontiguousarray(weights, dtype=np.float64),
            np.ascontiguousarray(angular, dtype=np.uint8))


def distances(P, q, weights, angular):
    P2 = np.ascontiguousarray(P, dtype=np.float64)
    full = np.shape(P2)
    shape = tuple(full[:len(full) - 1])
    Pa, qa, wa, aa = _prep(P2.reshape(-1, full[len(full) - 1]), q, weights, angular)
    cdef const double[:, ::1] Pm = Pa
    cdef const double[::1] qm = qa
    cdef const double[::1] wm = wa
    cdef const unsigned char[::1] am = aa
    cdef Py_ssize_t i, n = Pm.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _dist(Pm, i, qm, wm, am)
    return out.reshape(shape)


def nearest(P, Py_ssize_t n, ids, alive, q, weights, angular):
    if n == 0:
        return -1, INFINITY
    Pa, qa, wa, aa = _prep(P, q, weights, angular)
    cdef const double[:, ::1] Pm = Pa
    cdef const double[::1] qm = qa
    cdef const double[::1] wm = wa
    cdef const unsigned char[::1] am = aa
    cdef const long long[::1] idm = np.ascontiguousarray(ids, dtype=np.int64)
    cdef const unsigned char[::1] alm = np.ascontiguousarray(alive, dtype=np.uint8)
    cdef Py_ssize_t i, best = -1
    cdef double bd = INFINITY, d, a, cut = INFINITY
    for i in range(n):
        if not alm[i]:
            continue
        a = _dist2(&Pm[i, 0], &qm[0], &wm[0], &am[0], qm.shape[0])
        if a > cut:
            continue
        d = sqrt(a)
        if d < bd or (d == bd and best >= 0 and idm[i] < idm[best]):
            bd = d
            best = i
            cut = bd * bd * SQ_SLACK
    return best, bd


def within(P, Py_ssize_t n, alive, q, double radius, weights, angular):
    if n == 0:
        return np.empty(0, dtype=np.int64)
    Pa, qa, wa, aa = _prep(P, q, weights, angular)
    cdef const double[:, ::1] Pm = Pa
    cdef const double[::1] qm = qa
    cdef const double[::1] wm = wa
    cdef const unsigned char[::1] am = aa
    cdef const unsigned char[::1] alm = np.ascontiguousarray(alive, dtype=np.uint8)
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t i, c = 0
    cdef double cut = radius * radius * SQ_SLACK, a
    for i in range(n):
        if not alm[i]:
            continue
        a = _dist2(&Pm[i, 0], &qm[0], &wm[0], &am[0], qm.shape[0])
        if a <= cut and sqrt(a) <= radius:
            o[c] = i
            c += 1
    return out[:c]


def best_near(P, Py_ssize_t n, ids, alive, values, q, double radius, weights, angular):
    if n == 0:
        return -1
    Pa, qa, wa, aa = _prep(P, q, weights, angular)
    cdef const double[:, ::1] Pm = Pa
    cdef const double[::1] qm = qa
    cdef const double[::1] wm = wa
    cdef const unsigned char[::1] am = aa
    cdef const long long[::1] idm = np.ascontiguousarray(ids, dtype=np.int64)
    cdef const unsigned char[::1] alm = np.ascontiguousarray(alive, dtype=np.uint8)
    cdef const double[::1] vm = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t i, best = -1
    cdef double bv = INFINITY, a, cut = radius * radius * SQ_SLACK
    for i in range(n):
        if not alm[i]:
            continue
        a = _dist2(&Pm[i, 0], &qm[0], &wm[0], &am[0], qm.shape[0])
        if a > cut or sqrt(a) > radius:
            continue
        if best < 0 or vm[i] < bv or (vm[i] == bv and idm[i] < idm[best]):
            bv = vm[i]
            best = i
    return best


cdef inline bint _point_free(const double* p, Py_ssize_t dim,
                             const double[::1] ws_lo, const double[::1] ws_hi,
                             const double[:, ::1] box_lo, const double[:, ::1] box_hi,
                             const double[:, ::1] sph_c, const double[::1] sph_r) noexcept nogil:
    cdef Py_ssize_t k, b
    cdef bint inside
    cdef double acc, diff
    for k in range(dim):
        if p[k] < ws_lo[k] or p[k] > ws_hi[k]:
            return False
    for b in range(box_lo.shape[0]):
        inside = True
        for k in range(dim):
            if p[k] < box_lo[b, k] or p[k] > box_hi[b, k]:
                inside = False
                break
        if inside:
            return False
    for b in range(sph_c.shape[0]):
        acc = 0.0
        for k in range(dim):
            diff = p[k] - sph_c[b, k]
            acc += diff * diff
        if acc <= sph_r[b] * sph_r[b]:
            return False
    return True


def points_free(pts, ws_lo, ws_hi, box_lo, box_hi, sph_c, sph_r):
    cdef const double[:, ::1] pm = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    cdef const double[::1] wl = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] wh = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef const double[:, ::1] bl = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] bh = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[:, ::1] sc = np.ascontiguousarray(sph_c, dtype=np.float64)
    cdef const double[::1] sr = np.ascontiguousarray(sph_r, dtype=np.float64)
    cdef Py_ssize_t i, n = pm.shape[0], dim = pm.shape[1]
    out = np.empty(n, dtype=bool)
    for i in range(n):
        out[i] = _point_free(&pm[i, 0], dim, wl, wh, bl, bh, sc, sr)
    return out


def segment_free(rows, double resolution, weights, angular, pos_dims, ws_lo, ws_hi,
                 box_lo, box_hi, sph_c, sph_r):
    cdef const double[:, ::1] R = np.ascontiguousarray(rows, dtype=np.float64)
    cdef const double[::1] wm = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const unsigned char[::1] am = np.ascontiguousarray(angular, dtype=np.uint8)
    cdef const long long[::1] pd = np.ascontiguousarray(pos_dims, dtype=np.int64)
    cdef const double[::1] wl = np.ascontiguousarray(ws_lo, dtype=np.float64)
    cdef const double[::1] wh = np.ascontiguousarray(ws_hi, dtype=np.float64)
    cdef const double[:, ::1] bl = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] bh = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef const double[:, ::1] sc = np.ascontiguousarray(sph_c, dtype=np.float64)
    cdef const double[::1] sr = np.ascontiguousarray(sph_r, dtype=np.float64)
    cdef Py_ssize_t nrows = R.shape[0], dim = pd.shape[0], nd = R.shape[1], i, j, k
    cdef double p[8]
    cdef double acc, diff, seg, t
    cdef long long count
    if dim > 8:
        raise ValueError("at most 8 position dimensions are supported")
    for k in range(dim):
        p[k] = R[0, pd[k]]
    if not _point_free(p, dim, wl, wh, bl, bh, sc, sr):
        return False
    for i in range(nrows - 1):
        acc = 0.0
        for k in range(nd):
            diff = R[i + 1, k] - R[i, k]
            if am[k]:
                diff = _wrap(diff)
            diff = diff * wm[k]
            acc += diff * diff
        seg = sqrt(acc)
        count = <long long>ceil(seg / resolution)
        if count < 1:
            count = 1
        for j in range(1, count + 1):
            t = (<double>j) / count
            for k in range(dim):
                p[k] = R[i, pd[k]] + t * (R[i + 1, pd[k]] - R[i, pd[k]])
            if not _point_free(p, dim, wl, wh, bl, bh, sc, sr):
                return False
    return True
