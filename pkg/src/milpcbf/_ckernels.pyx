# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: origin-to-polygon projection and the bounded
primal/dual simplex loops used by the LP and branch-and-bound solver.

Mirrors ``_pykernels`` one-to-one.
"""

from libc.math cimport INFINITY, fabs

cdef int OPTIMAL = 0
cdef int UNBOUNDED = 1
cdef int INFEASIBLE = 2
cdef int ITER_LIMIT = 3


def project_origin(const double[:, ::1] V0, const double[:, ::1] Ac,
                   const double[::1] bc0, double px, double py):
    cdef Py_ssize_t k = V0.shape[0]
    cdef Py_ssize_t r, s
    cdef int inside = 1
    cdef double best = INFINITY
    cdef double bzx = 0.0, bzy = 0.0, bt = 0.0
    cdef Py_ssize_t bedge = -1
    cdef double off, ax, ay, ex, ey, den, t, zx, zy, dd
    for r in range(k):
        off = bc0[r] - Ac[r, 0] * px - Ac[r, 1] * py
        if off >= 0.0:
            continue
        inside = 0
        ax = V0[r, 0] - px
        ay = V0[r, 1] - py
        s = r + 1 if r + 1 < k else 0
        ex = V0[s, 0] - px - ax
        ey = V0[s, 1] - py - ay
        den = ex * ex + ey * ey
        t = -(ax * ex + ay * ey) / den if den > 0.0 else 0.0
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        zx = ax + t * ex
        zy = ay + t * ey
        dd = zx * zx + zy * zy
        if dd < best:
            best = dd
            bzx = zx
            bzy = zy
            bedge = r
            bt = t
    if inside:
        return 1, 0.0, 0.0, -1, 0.0
    return 0, bzx, bzy, bedge, bt


cdef void _pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t N = T.shape[1]
    cdef Py_ssize_t i, j
    cdef double piv = T[r, q]
    cdef double f
    cdef double inv = 1.0 / piv
    for j in range(N):
        T[r, j] *= inv
    T[r, q] = 1.0
    for i in range(m):
        if i == r:
            continue
        f = T[i, q]
        if f != 0.0:
            for j in range(N):
                T[i, j] -= f * T[r, j]
            T[i, q] = 0.0
    f = d[q]
    if f != 0.0:
        for j in range(N):
            d[j] -= f * T[r, j]
        d[q] = 0.0


def pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q):
    _pivot(T, d, r, q)


def primal_simplex(double[:, ::1] T, long[::1] basis, long[::1] pos, double[::1] x,
                   const double[::1] lo, const double[::1] up, double[::1] d,
                   long max_iter, double tol_d, double tol_p, double tol_piv, long bland):
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t N = T.shape[1]
    cdef Py_ssize_t i, j, q, r, jout
    cdef long it = 0, degen = 0
    cdef int status = ITER_LIMIT
    cdef bint use_bland = bland < 0
    cdef bint at_up
    cdef double score, best_score, sigma, theta, lim, al, best_alpha, dj
    with nogil:
        while it < max_iter:
            q = -1
            best_score = 0.0
            for j in range(N):
                if pos[j] >= 0 or up[j] - lo[j] <= tol_p:
                    continue
                dj = d[j]
                at_up = x[j] >= up[j]
                if at_up:
                    score = dj
                else:
                    score = -dj
                if score > tol_d:
                    if use_bland:
                        q = j
                        break
                    if score > best_score:
                        best_score = score
                        q = j
            if q < 0:
                status = OPTIMAL
                break
            at_up = x[q] >= up[q]
            sigma = -1.0 if at_up else 1.0
            theta = up[q] - lo[q]
            r = -1
            best_alpha = 0.0
            for i in range(m):
                al = sigma * T[i, q]
                if al > tol_piv:
                    lim = (x[basis[i]] - lo[basis[i]]) / al
                elif al < -tol_piv and up[basis[i]] < INFINITY:
                    lim = (up[basis[i]] - x[basis[i]]) / (-al)
                else:
                    continue
                if lim < 0.0:
                    lim = 0.0
                if lim < theta - 1e-12:
                    theta = lim
                    r = i
                    best_alpha = fabs(al)
                elif lim <= theta + 1e-12 and r >= 0:
                    if use_bland:
                        if basis[i] < basis[r]:
                            if lim < theta:
                                theta = lim
                            r = i
                            best_alpha = fabs(al)
                    elif fabs(al) > best_alpha:
                        if lim < theta:
                            theta = lim
                        r = i
                        best_alpha = fabs(al)
            if theta == INFINITY:
                status = UNBOUNDED
                break
            if theta > 0.0:
                for i in range(m):
                    x[basis[i]] -= theta * sigma * T[i, q]
            x[q] += sigma * theta
            if r < 0:
                x[q] = lo[q] if sigma < 0 else up[q]
            else:
                jout = basis[r]
                if sigma * T[r, q] > 0.0:
                    x[jout] = lo[jout]
                else:
                    x[jout] = up[jout]
                _pivot(T, d, r, q)
                pos[jout] = -1
                pos[q] = r
                basis[r] = q
            it += 1
            if theta <= tol_p:
                degen += 1
                if bland > 0 and degen >= bland:
                    use_bland = True
            else:
                degen = 0
    return status, it


def dual_simplex(double[:, ::1] T, long[::1] basis, long[::1] pos, double[::1] x,
                 const double[::1] lo, const double[::1] up, double[::1] d,
                 long max_iter, double tol_d, double tol_p, double tol_piv):
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t N = T.shape[1]
    cdef Py_ssize_t i, j, q, r, jout, b
    cdef long it = 0
    cdef int status = ITER_LIMIT
    cdef double v, vmax, target, rj, ratio, rmin, amax, dq
    cdef bint below, at_up, ok
    with nogil:
        while it < max_iter:
            r = -1
            vmax = tol_p
            below = False
            for i in range(m):
                b = basis[i]
                v = lo[b] - x[b]
                if v > vmax:
                    vmax = v
                    r = i
                    below = True
                v = x[b] - up[b]
                if v > vmax:
                    vmax = v
                    r = i
                    below = False
            if r < 0:
                status = OPTIMAL
                break
            b = basis[r]
            target = lo[b] if below else up[b]
            q = -1
            rmin = INFINITY
            amax = 0.0
            for j in range(N):
                if pos[j] >= 0 or up[j] - lo[j] <= tol_p:
                    continue
                rj = T[r, j]
                at_up = x[j] >= up[j]
                if below:
                    ok = (rj < -tol_piv and not at_up) or (rj > tol_piv and at_up)
                else:
                    ok = (rj > tol_piv and not at_up) or (rj < -tol_piv and at_up)
                if not ok:
                    continue
                ratio = fabs(d[j]) / fabs(rj)
                if ratio < rmin - 1e-12:
                    rmin = ratio
                    q = j
                    amax = fabs(rj)
                elif ratio <= rmin + 1e-12 and fabs(rj) > amax:
                    if ratio < rmin:
                        rmin = ratio
                    q = j
                    amax = fabs(rj)
            if q < 0:
                status = INFEASIBLE
                break
            dq = (x[b] - target) / T[r, q]
            for i in range(m):
                x[basis[i]] -= dq * T[i, q]
            x[q] += dq
            jout = b
            x[jout] = target
            _pivot(T, d, r, q)
            pos[jout] = -1
            pos[q] = r
            basis[r] = q
            it += 1
    return status, it
