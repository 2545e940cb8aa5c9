"""Pure-Python reference implementations of the hot kernels.

Signatures and semantics match ``_ckernels.pyx`` exactly; `milpcbf.kernels`
picks one of the two at import time.
"""

import math

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
INFEASIBLE = 2
ITER_LIMIT = 3


def project_origin(V0, Ac, bc0, px, py):
    """Project the origin onto the polygon ``V0 - p``.

    Returns ``(inside, zx, zy, edge, t)``: ``inside`` is 1 when the origin
    lies in the closed polygon (then ``z = 0``), otherwise ``z`` is the
    closest point, found on edge ``edge`` at parameter ``t`` in [0, 1].
    """
    k = V0.shape[0]
    inside = 1
    best = math.inf
    bzx = bzy = 0.0
    bedge = -1
    bt = 0.0
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
            bzx, bzy, bedge, bt = zx, zy, r, t
    if inside:
        return 1, 0.0, 0.0, -1, 0.0
    return 0, bzx, bzy, bedge, bt


def pivot(T, d, r, q):
    piv = T[r, q]
    T[r] /= piv
    col = T[:, q].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if len(nz):
        T[nz] -= np.outer(col[nz], T[r])
    if d[q] != 0.0:
        d -= d[q] * T[r]
        d[q] = 0.0


def primal_simplex(T, basis, pos, x, lo, up, d, max_iter, tol_d, tol_p, tol_piv, bland):
    """Bounded primal simplex from a primal feasible basis.

    ``bland`` < 0 means always use Bland's rule; otherwise Dantzig pricing is
    used until ``bland`` consecutive degenerate pivots occur, after which
    Bland's rule takes over for the rest of the call.
    """
    m, N = T.shape
    it = 0
    degen = 0
    use_bland = bland < 0
    movable = (up - lo) > tol_p
    while it < max_iter:
        nb = (pos < 0) & movable
        at_up = x >= up
        elig = nb & (((~at_up) & (d < -tol_d)) | (at_up & (d > tol_d)))
        cand = np.nonzero(elig)[0]
        if len(cand) == 0:
            return OPTIMAL, it
        if use_bland:
            q = int(cand[0])
        else:
            q = int(cand[np.argmax(np.abs(d[cand]))])
        sigma = -1.0 if at_up[q] else 1.0
        a = sigma * T[:, q]
        theta = up[q] - lo[q]
        r = -1
        best_alpha = 0.0
        xb = x[basis]
        lob = lo[basis]
        upb = up[basis]
        for i in np.nonzero(np.abs(a) > tol_piv)[0]:
            al = a[i]
            if al > 0.0:
                lim = (xb[i] - lob[i]) / al
            elif upb[i] < math.inf:
                lim = (upb[i] - xb[i]) / (-al)
            else:
                continue
            if lim < 0.0:
                lim = 0.0
            if lim < theta - 1e-12:
                theta, r, best_alpha = lim, i, abs(al)
            elif lim <= theta + 1e-12 and r >= 0:
                if use_bland:
                    if basis[i] < basis[r]:
                        theta, r, best_alpha = min(lim, theta), i, abs(al)
                elif abs(al) > best_alpha:
                    theta, r, best_alpha = min(lim, theta), i, abs(al)
        if theta == math.inf:
            return UNBOUNDED, it
        if theta > 0.0:
            x[basis] = xb - theta * a
        x[q] += sigma * theta
        if r < 0:
            x[q] = lo[q] if sigma < 0 else up[q]
        else:
            jout = basis[r]
            x[jout] = lo[jout] if a[r] > 0.0 else up[jout]
            pivot(T, d, r, q)
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
    return ITER_LIMIT, it


def dual_simplex(T, basis, pos, x, lo, up, d, max_iter, tol_d, tol_p, tol_piv):
    """Bounded dual simplex from a dual feasible basis."""
    m, N = T.shape
    it = 0
    movable = (up - lo) > tol_p
    while it < max_iter:
        xb = x[basis]
        below = lo[basis] - xb
        above = xb - up[basis]
        viol = np.maximum(below, above)
        r = int(np.argmax(viol))
        if viol[r] <= tol_p:
            return OPTIMAL, it
        row = T[r]
        nb = (pos < 0) & movable
        at_up = x >= up
        if below[r] > 0.0:
            target = lo[basis[r]]
            elig = nb & (((~at_up) & (row < -tol_piv)) | (at_up & (row > tol_piv)))
        else:
            target = up[basis[r]]
            elig = nb & (((~at_up) & (row > tol_piv)) | (at_up & (row < -tol_piv)))
        cand = np.nonzero(elig)[0]
        if len(cand) == 0:
            return INFEASIBLE, it
        ratios = np.abs(d[cand]) / np.abs(row[cand])
        q, rmin, amax = -1, math.inf, 0.0
        for j, ratio in zip(cand.tolist(), ratios.tolist()):
            aj = abs(row[j])
            if ratio < rmin - 1e-12:
                q, rmin, amax = j, ratio, aj
            elif ratio <= rmin + 1e-12 and aj > amax:
                q, rmin, amax = j, min(rmin, ratio), aj
        dq = (xb[r] - target) / row[q]
        x[basis] = xb - dq * T[:, q]
        x[q] += dq
        jout = basis[r]
        x[jout] = target
        pivot(T, d, r, q)
        pos[jout] = -1
        pos[q] = r
        basis[r] = q
        it += 1
    return ITER_LIMIT, it
