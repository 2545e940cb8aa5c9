"""Dense bounded-variable simplex and best-first branch and bound.

The LP engine works on a tableau ``B^-1 [A | I_art]`` of the problem in
computational standard form ``A y = b, lo <= y <= up``. A cold solve runs the
classic two-phase method; branch-and-bound children only change variable
bounds, so they are re-optimized from the parent's basis with the dual
simplex method. The pivoting loops live in `milpcbf.kernels`.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import kernels

TOL_PRIMAL = 1e-9
TOL_DUAL = 1e-9
TOL_PIVOT = 1e-9
INT_TOL = 1e-6
# consecutive degenerate pivots tolerated before switching to Bland's rule
BLAND_AFTER = 50
# warm solves between residual audits of an inherited tableau
AUDIT_EVERY = 8


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node_limit"


@dataclass
class LinearProgram:
    """``min c@x`` s.t. ``A_ub@x <= b_ub``, ``A_eq@x == b_eq``, ``lower <= x <= upper``.

    Missing constraint blocks default to empty; missing bounds default to
    ``[0, inf)``.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = len(self.c)
        for A_name, b_name in (("A_ub", "b_ub"), ("A_eq", "b_eq")):
            A, b = getattr(self, A_name), getattr(self, b_name)
            A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
            b = np.zeros(len(A)) if b is None else np.asarray(b, dtype=float).reshape(-1)
            if len(b) != len(A):
                raise ValueError(f"{A_name} has {len(A)} rows but {b_name} has {len(b)}")
            setattr(self, A_name, A)
            setattr(self, b_name, b)
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(n)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(n)
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("infinite bound on the wrong side")

    @property
    def n(self) -> int:
        return len(self.c)

    def residual(self, x) -> float:
        """Largest constraint or bound violation at ``x``."""
        x = np.asarray(x, dtype=float)
        r = 0.0
        if len(self.b_ub):
            r = max(r, float(np.max(self.A_ub @ x - self.b_ub)))
        if len(self.b_eq):
            r = max(r, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        r = max(r, float(np.max(self.lower - x, initial=0.0)))
        r = max(r, float(np.max(x - self.upper, initial=0.0)))
        return r


@dataclass
class MILPProblem:
    lp: LinearProgram
    binary_indices: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in set(self.binary_indices)))
        if idx and (idx[0] < 0 or idx[-1] >= self.lp.n):
            raise ValueError("binary index out of range")
        lo, up = self.lp.lower[list(idx)], self.lp.upper[list(idx)]
        if np.any(lo != 0.0) or np.any(up != 1.0):
            raise ValueError("binary variables must have bounds [0, 1]")
        self.binary_indices = idx


@dataclass
class MILPSolution:
    status: Status
    x_star: np.ndarray | None
    objective: float
    nodes_explored: int = 0
    lp_iterations: int = 0
    bound: float = -math.inf

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class _StandardForm:
    """``A y = b``, ``lo <= y <= up`` with finite ``lo``; columns are
    structural, then one slack per inequality row, then one artificial per row."""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        cols, kinds, offs = [], [], []
        # x_k = off + y  |  x_k = off - y  |  x_k = y_a - y_b
        for k in range(n):
            l, u = lp.lower[k], lp.upper[k]
            if np.isfinite(l):
                kinds.append(0); offs.append(l); cols.append((k, 1.0, u - l))
            elif np.isfinite(u):
                kinds.append(1); offs.append(u); cols.append((k, -1.0, np.inf))
            else:
                kinds.append(2); offs.append(0.0)
                cols.append((k, 1.0, np.inf)); cols.append((k, -1.0, np.inf))
        self.n_orig = n
        self.kinds = np.array(kinds)
        self.offs = np.array(offs, dtype=float)
        ns = len(cols)
        self.col_var = np.array([c[0] for c in cols])
        self.col_sign = np.array([c[1] for c in cols])
        mu, me = len(lp.b_ub), len(lp.b_eq)
        m = mu + me
        self.m, self.n_struct, self.n_slack = m, ns, mu
        N = ns + mu + m
        self.N = N
        A_orig = np.vstack([lp.A_ub, lp.A_eq]) if m else np.zeros((0, n))
        b_orig = np.concatenate([lp.b_ub, lp.b_eq])
        A = np.zeros((m, N))
        A[:, :ns] = A_orig[:, self.col_var] * self.col_sign
        A[np.arange(mu), ns + np.arange(mu)] = 1.0
        A[np.arange(m), ns + mu + np.arange(m)] = 1.0
        self.A = A
        self.b = b_orig - A_orig @ self.offs
        c = np.zeros(N)
        c[:ns] = lp.c[self.col_var] * self.col_sign
        self.c = c
        lo = np.zeros(N)
        up = np.full(N, np.inf)
        up[:ns] = [cc[2] for cc in cols]
        up[ns + mu:] = 0.0
        self.lo, self.up = lo, up
        # column of each original variable of kind 0 (used for binaries)
        self.first_col = np.zeros(n, dtype=np.int64)
        seen = set()
        for j, k in enumerate(self.col_var):
            if k not in seen:
                self.first_col[k] = j
                seen.add(k)

    def to_original(self, y) -> np.ndarray:
        x = self.offs.copy()
        np.add.at(x, self.col_var, self.col_sign * y[: self.n_struct])
        return x

    @property
    def art(self) -> slice:
        return slice(self.n_struct + self.n_slack, self.N)


@dataclass
class _LPState:
    """Simplex state over the standard-form columns ``cols``.

    Phase 1 works on every column; afterwards artificial columns that left
    the basis are dropped, so ``T`` is ``m x len(cols)``. Structural and
    slack columns always come first, so their indices are shared.
    """

    T: np.ndarray
    basis: np.ndarray
    pos: np.ndarray
    x: np.ndarray
    d: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    cols: np.ndarray
    age: int = 0


@dataclass
class _LPResult:
    status: Status
    objective: float = math.inf
    state: _LPState | None = None
    iterations: int = 0


class _Engine:
    def __init__(self, sf: _StandardForm, bland_after: int = BLAND_AFTER):
        self.sf = sf
        self.kern = kernels.get()
        self.bland = bland_after
        self.chunk = max(100, 2 * sf.m)
        self.max_total = 50 * (sf.m + sf.N) + 1000
        self._A_of: dict[bytes, np.ndarray] = {}

    def _A(self, cols: np.ndarray) -> np.ndarray:
        key = cols.tobytes()
        A = self._A_of.get(key)
        if A is None:
            A = self._A_of[key] = np.ascontiguousarray(self.sf.A[:, cols])
        return A

    def _refresh(self, st: _LPState, c: np.ndarray) -> None:
        """Recompute tableau, basic values and reduced costs from the basis."""
        sf = self.sf
        A = self._A(st.cols)
        B = A[:, st.basis]
        st.T = np.ascontiguousarray(np.linalg.solve(B, A))
        xn = st.x.copy()
        xn[st.basis] = 0.0
        st.x[st.basis] = np.linalg.solve(B, sf.b - A @ xn)
        st.d = c - c[st.basis] @ st.T
        st.d[st.basis] = 0.0

    def _drop_artificials(self, st: _LPState) -> _LPState:
        """Pivot zero-valued artificials out of the basis and drop their columns.

        An artificial stays (fixed at zero) only when its row has no usable
        pivot among the other columns, i.e. the row is redundant.
        """
        sf = self.sf
        art0 = sf.art.start
        for r in range(sf.m):
            if st.basis[r] < art0:
                continue
            row = np.abs(st.T[r, :art0])
            row[st.pos[:art0] >= 0] = 0.0
            q = int(np.argmax(row)) if art0 else 0
            if art0 == 0 or row[q] <= 1e-7:
                continue
            self.kern.pivot(st.T, st.d, r, q)
            st.pos[st.basis[r]] = -1
            st.basis[r] = q
            st.pos[q] = r
        keep_art = np.sort(st.basis[st.basis >= art0])
        cols = np.concatenate([np.arange(art0), keep_art]).astype(np.int64)
        remap = np.full(sf.N, -1, dtype=np.int64)
        remap[cols] = np.arange(len(cols))
        basis = remap[st.basis]
        pos = np.full(len(cols), -1, dtype=np.int64)
        pos[basis] = np.arange(sf.m)
        return _LPState(np.ascontiguousarray(st.T[:, cols]), basis, pos, st.x[cols].copy(),
                        st.d[cols].copy(), st.lo[cols].copy(), st.up[cols].copy(), cols)

    def _run(self, which: str, st: _LPState, c: np.ndarray) -> tuple[int, int]:
        total = 0
        while True:
            if which == "primal":
                code, it = self.kern.primal_simplex(
                    st.T, st.basis, st.pos, st.x, st.lo, st.up, st.d, self.chunk,
                    TOL_DUAL, TOL_PRIMAL, TOL_PIVOT, self.bland)
            else:
                code, it = self.kern.dual_simplex(
                    st.T, st.basis, st.pos, st.x, st.lo, st.up, st.d, self.chunk,
                    TOL_DUAL, TOL_PRIMAL, TOL_PIVOT)
            total += it
            if code != kernels.ITER_LIMIT:
                return code, total
            if total >= self.max_total:
                return kernels.ITER_LIMIT, total
            self._refresh(st, c)

    def cold(self, lo: np.ndarray, up: np.ndarray) -> _LPResult:
        sf = self.sf
        m, N = sf.m, sf.N
        lo, up = lo.copy(), up.copy()
        if np.any(lo > up + TOL_PRIMAL):
            return _LPResult(Status.INFEASIBLE)
        x = lo.copy()
        if m == 0:
            # only bounds: each variable sits at its cheaper end
            for j in range(N):
                if sf.c[j] < 0:
                    if not np.isfinite(up[j]):
                        return _LPResult(Status.UNBOUNDED)
                    x[j] = up[j]
            st = _LPState(np.zeros((0, N)), np.zeros(0, np.int64), np.full(N, -1, np.int64),
                          x, sf.c.copy(), lo, up, np.arange(N))
            return _LPResult(Status.OPTIMAL, float(sf.c @ x), st)
        res = sf.b - sf.A[:, : sf.art.start] @ x[: sf.art.start]
        art0 = sf.art.start
        basis = np.empty(m, dtype=np.int64)
        c1 = np.zeros(N)
        for i in range(m):
            if i < sf.n_slack and res[i] >= 0.0:
                basis[i] = sf.n_struct + i
            else:
                basis[i] = art0 + i
                sf.A[i, art0 + i] = 1.0 if res[i] >= 0.0 else -1.0
                up[art0 + i] = np.inf
                c1[art0 + i] = 1.0
        pos = np.full(N, -1, dtype=np.int64)
        pos[basis] = np.arange(m)
        st = _LPState(None, basis, pos, x, None, lo, up, np.arange(N))
        self._refresh(st, c1)
        iters = 0
        if c1.any():
            code, it = self._run("primal", st, c1)
            iters += it
            if code == kernels.ITER_LIMIT:
                raise RuntimeError("phase 1 iteration limit")
            infeas = float(c1 @ st.x)
            if infeas > 1e-7 * max(1.0, float(np.max(np.abs(sf.b)))):
                return _LPResult(Status.INFEASIBLE, iterations=iters)
            up[sf.art] = 0.0
            st.x[sf.art] = 0.0
        st = self._drop_artificials(st)
        c = sf.c[st.cols]
        self._refresh(st, c)
        code, it = self._run("primal", st, c)
        iters += it
        if code == kernels.UNBOUNDED:
            return _LPResult(Status.UNBOUNDED, iterations=iters)
        if code == kernels.ITER_LIMIT:
            raise RuntimeError("phase 2 iteration limit")
        return _LPResult(Status.OPTIMAL, float(c @ st.x), st, iters)

    def _cold_from(self, st: _LPState) -> _LPResult:
        lo, up = self.sf.lo.copy(), self.sf.up.copy()
        lo[st.cols], up[st.cols] = st.lo, st.up
        return self.cold(lo, up)

    def warm(self, st: _LPState, fix: dict[int, float]) -> _LPResult:
        """Re-optimize a copied state after fixing the columns in ``fix``."""
        c = self.sf.c[st.cols]
        for j, v in fix.items():
            st.lo[j] = st.up[j] = v
            if st.pos[j] < 0 and st.x[j] != v:
                st.x[st.basis] -= (v - st.x[j]) * st.T[:, j]
                st.x[j] = v
        # flip boxed nonbasic columns onto their dual feasible bound
        free = (st.pos < 0) & (st.up - st.lo > TOL_PRIMAL)
        at_up = st.x >= st.up
        to_up = free & ~at_up & (st.d < -TOL_DUAL)
        to_lo = free & at_up & (st.d > TOL_DUAL)
        if to_up.any() or to_lo.any():
            if not np.all(np.isfinite(st.up[to_up])):
                return self._cold_from(st)
            for j in np.nonzero(to_up | to_lo)[0]:
                target = st.up[j] if to_up[j] else st.lo[j]
                st.x[st.basis] -= (target - st.x[j]) * st.T[:, j]
                st.x[j] = target
        code, iters = self._run("dual", st, c)
        if code == kernels.INFEASIBLE:
            return _LPResult(Status.INFEASIBLE, iterations=iters)
        if code == kernels.ITER_LIMIT:
            return self._cold_from(st)
        code, it = self._run("primal", st, c)
        iters += it
        if code != kernels.OPTIMAL:
            return self._cold_from(st)
        # incremental updates drift slowly; audit every few warm solves
        st.age += 1
        if st.age >= AUDIT_EVERY:
            st.age = 0
            if not self._consistent(st):
                self._refresh(st, c)
                if not self._consistent(st):
                    return self._cold_from(st)
        return _LPResult(Status.OPTIMAL, float(c @ st.x), st, iters)

    def _consistent(self, st: _LPState) -> bool:
        sf = self.sf
        scale = 1.0 + float(np.max(np.abs(sf.b), initial=0.0))
        r = np.max(np.abs(self._A(st.cols) @ st.x - sf.b), initial=0.0)
        bnd = max(np.max(st.lo - st.x, initial=0.0), np.max(st.x - st.up, initial=0.0))
        return r <= 1e-8 * scale and bnd <= 1e-7


def _copy_state(st: _LPState) -> _LPState:
    return _LPState(st.T.copy(), st.basis.copy(), st.pos.copy(), st.x.copy(),
                    st.d.copy(), st.lo.copy(), st.up.copy(), st.cols, st.age)


def solve_lp(lp: LinearProgram, bland_after: int = BLAND_AFTER) -> MILPSolution:
    """Two-phase simplex. ``bland_after=-1`` uses Bland's rule throughout."""
    sf = _StandardForm(lp)
    eng = _Engine(sf, bland_after)
    res = eng.cold(sf.lo, sf.up)
    if res.status is not Status.OPTIMAL:
        return MILPSolution(res.status, None, math.nan, 0, res.iterations)
    x = sf.to_original(res.state.x)
    return MILPSolution(Status.OPTIMAL, x, float(lp.c @ x), 1, res.iterations,
                        bound=float(lp.c @ x))


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixed: dict = field(compare=False)
    parent: int = field(compare=False, default=-1)


def solve_milp(p: MILPProblem, gap_tol: float = 1e-6, node_limit: int = 100_000,
               warm_start=None, cache_size: int = 32, dive: bool = True,
               heuristic=None) -> MILPSolution:
    """Best-first branch and bound over the binary variables.

    Branches on the most fractional binary (lowest index on ties); a node is
    pruned when its LP bound is within ``gap_tol`` of the incumbent.

    Parameters
    ----------
    warm_start : array_like, optional
        One 0/1 vector over ``p.binary_indices``, or a 2-D array of them;
        each is tried as a heuristic incumbent before branching.
    dive : bool
        Without an incumbent, round the most fractional binary repeatedly
        from the root to find one, so a search stopped by ``node_limit``
        still has a feasible answer.
    heuristic : callable, optional
        ``heuristic(x_root)`` gets the root relaxation (original variables)
        and returns further 0/1 candidate vectors.
    """
    lp = p.lp
    sf = _StandardForm(lp)
    eng = _Engine(sf)
    bcols = sf.first_col[list(p.binary_indices)] if p.binary_indices else np.zeros(0, np.int64)
    root = eng.cold(sf.lo, sf.up)
    iters = root.iterations
    if root.status is not Status.OPTIMAL:
        return MILPSolution(root.status, None, math.nan, 1, iters)

    best_x, best_obj = None, math.inf

    def consider(res: _LPResult) -> bool:
        nonlocal best_x, best_obj
        vals = res.state.x[bcols]
        if np.all(np.abs(vals - np.round(vals)) <= INT_TOL) and res.objective < best_obj:
            y = res.state.x.copy()
            y[bcols] = np.round(vals)
            best_x, best_obj = y, res.objective
            return True
        return False

    candidates = []
    if warm_start is not None and len(bcols):
        candidates.extend(np.asarray(warm_start, dtype=float).reshape(-1, len(bcols)))
    if heuristic is not None and len(bcols):
        for v in heuristic(sf.to_original(root.state.x)):
            candidates.append(np.asarray(v, dtype=float).reshape(len(bcols)))
    for ws in candidates:
        res = eng.warm(_copy_state(root.state), {int(j): float(round(v)) for j, v in zip(bcols, ws)})
        iters += res.iterations
        if res.status is Status.OPTIMAL:
            consider(res)

    if dive and best_x is None and len(bcols):
        st = _copy_state(root.state)
        res = root
        for _ in range(len(bcols)):
            vals = st.x[bcols]
            frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
            k = int(np.argmax(frac))
            if frac[k] <= INT_TOL:
                consider(res)
                break
            v = float(round(vals[k]))
            res = eng.warm(_copy_state(st), {int(bcols[k]): v})
            iters += res.iterations
            if res.status is not Status.OPTIMAL:
                # rounding failed: try the other side once before giving up
                res = eng.warm(_copy_state(st), {int(bcols[k]): 1.0 - v})
                iters += res.iterations
                if res.status is not Status.OPTIMAL:
                    break
            st = res.state

    cache: OrderedDict[int, _LPState] = OrderedDict()
    pending: dict[int, int] = {}
    seq = itertools.count()
    heap: list[_Node] = []
    nodes = 0
    root_bound = root.objective

    def process(node_id: int, res: _LPResult, fixed: dict) -> None:
        if res.objective >= best_obj - gap_tol:
            return
        if consider(res):
            return
        vals = res.state.x[bcols]
        frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
        k = int(np.argmax(frac))
        j = int(bcols[k])
        cache[node_id] = res.state
        pending[node_id] = 2
        while len(cache) > cache_size:
            cache.popitem(last=False)
        first = 1.0 if vals[k] >= 0.5 else 0.0
        for v in (first, 1.0 - first):
            child = dict(fixed)
            child[j] = v
            heapq.heappush(heap, _Node(res.objective, next(seq), child, node_id))

    root_id = next(seq)
    nodes = 1
    pristine = _copy_state(root.state)
    process(root_id, root, {})
    status = Status.OPTIMAL
    while heap:
        node = heapq.heappop(heap)
        if node.bound >= best_obj - gap_tol:
            heap.clear()
            break
        if nodes >= node_limit:
            heapq.heappush(heap, node)
            status = Status.NODE_LIMIT
            break
        nodes += 1
        parent = cache.get(node.parent)
        if parent is not None:
            pending[node.parent] -= 1
            if pending[node.parent] == 0:
                # last child to be expanded takes the cached state over
                st = cache.pop(node.parent)
                parent = st
            else:
                cache.move_to_end(node.parent)
                st = _copy_state(parent)
            delta = {j: v for j, v in node.fixed.items() if parent.lo[j] != v or parent.up[j] != v}
        else:
            st = _copy_state(pristine)
            delta = node.fixed
        res = eng.warm(st, delta)
        iters += res.iterations
        if res.status is not Status.OPTIMAL:
            continue
        process(node.seq, res, node.fixed)

    # node objectives omit the constant from shifting variables to lo = 0
    bound = min([n.bound for n in heap], default=best_obj)
    bound = max(min(bound, best_obj), root_bound) + float(lp.c @ sf.offs)
    if best_x is None:
        st = Status.NODE_LIMIT if status is Status.NODE_LIMIT else Status.INFEASIBLE
        return MILPSolution(st, None, math.nan, nodes, iters, bound)
    x = sf.to_original(best_x)
    x[list(p.binary_indices)] = np.round(x[list(p.binary_indices)])
    return MILPSolution(status, x, float(lp.c @ x), nodes, iters, bound)
