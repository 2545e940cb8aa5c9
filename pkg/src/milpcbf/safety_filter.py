"""Min-norm safety filter and the reactive CLF-CBF-QP baseline.

Both are tiny strictly convex QPs of the form ``min |y - y_ref|^2`` subject
to rows ``C y >= d``; they are solved exactly with the Goldfarb-Idnani dual
active-set method, which starts from the unconstrained minimizer and adds
violated rows one at a time while keeping multipliers nonnegative.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .cbf import CBFConstraint
from .dynamics import DynamicsModel, DynKind

VIOLATION_TOL = 1e-11


class FilterStatus(enum.Enum):
    OK = "ok"
    INFEASIBLE = "infeasible"


@dataclass
class FilterConfig:
    k: float = 3.0
    k1: float = 2.0
    k2: float = 10.0
    u_min: np.ndarray = field(default_factory=lambda: np.full(2, -5.0))
    u_max: np.ndarray = field(default_factory=lambda: np.full(2, 5.0))
    clf_gain: float = 1.0
    clf_relax_weight: float = 1.0

    def __post_init__(self):
        self.u_min = np.asarray(self.u_min, dtype=float)
        self.u_max = np.asarray(self.u_max, dtype=float)
        if min(self.k, self.k1, self.k2, self.clf_gain, self.clf_relax_weight) <= 0:
            raise ValueError("gains and weights must be positive")
        if np.any(self.u_min >= self.u_max):
            raise ValueError("u_min must be below u_max")


@dataclass
class FilterResult:
    u_star: np.ndarray | None
    active_constraints: tuple
    intervened: bool
    status: FilterStatus
    multipliers: dict = field(default_factory=dict)
    delta: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is FilterStatus.OK


def min_norm_qp(y_ref, C, d, tol: float = VIOLATION_TOL):
    """Solve ``min |y - y_ref|^2 s.t. C y >= d`` (dual active set).

    Returns ``(y, active, multipliers)`` or ``None`` if the rows are
    inconsistent. ``multipliers`` are for the objective ``1/2 |y - y_ref|^2``.
    """
    x = np.array(y_ref, dtype=float)
    C = np.asarray(C, dtype=float).reshape(-1, len(x))
    d = np.asarray(d, dtype=float).reshape(-1)
    scale = 1.0 + np.abs(d)
    active: list[int] = []
    u = np.zeros(0)
    for _ in range(10 * (len(d) + len(x)) + 10):
        s = C @ x - d
        viol = s / scale
        p = int(np.argmin(viol)) if len(d) else -1
        if p < 0 or viol[p] >= -tol:
            return x, tuple(active), dict(zip(active, u.tolist()))
        npv = C[p]
        u_plus = np.append(u, 0.0)
        while True:
            if active:
                N = C[active].T
                G = N.T @ N
                r = np.linalg.solve(G, N.T @ npv)
                z = npv - N @ r
            else:
                r = np.zeros(0)
                z = npv.copy()
            t1, kdrop = math.inf, -1
            for idx in range(len(active)):
                if r[idx] > 1e-14:
                    cand = u_plus[idx] / r[idx]
                    if cand < t1:
                        t1, kdrop = cand, idx
            zn = float(z @ npv)
            t2 = -(float(npv @ x) - d[p]) / zn if zn > 1e-14 * max(1.0, float(npv @ npv)) else math.inf
            if t2 == math.inf and t1 == math.inf:
                return None
            t = min(t1, t2)
            if t2 < math.inf:
                x = x + t * z
            u_plus[:-1] -= t * r
            u_plus[-1] += t
            if t2 <= t1:
                active.append(p)
                u = u_plus
                break
            del active[kdrop]
            u_plus = np.delete(u_plus, kdrop)
    raise RuntimeError("active-set iteration did not terminate")


def _bound_rows(u_min, u_max):
    m = len(u_min)
    C = np.vstack([np.eye(m), -np.eye(m)])
    d = np.concatenate([u_min, -u_max])
    return C, d


def filter(u_ref, rows: list[CBFConstraint], cfg: FilterConfig) -> FilterResult:  # noqa: A001
    """Closest input to ``u_ref`` satisfying every barrier row and the box.

    Indices in ``active_constraints`` refer to ``rows``; the bound rows
    follow, numbered ``len(rows) + i`` for ``u_i >= u_min_i`` and
    ``len(rows) + m + i`` for ``u_i <= u_max_i``.
    """
    u_ref = np.asarray(u_ref, dtype=float)
    m = len(u_ref)
    Cb, db = _bound_rows(cfg.u_min, cfg.u_max)
    if rows:
        C = np.vstack([np.vstack([r.coeff_u for r in rows]), Cb])
        d = np.concatenate([[r.rhs for r in rows], db])
    else:
        C, d = Cb, db
    out = min_norm_qp(u_ref, C, d)
    if out is None:
        return FilterResult(None, (), True, FilterStatus.INFEASIBLE)
    u, active, mult = out
    u = np.clip(u, cfg.u_min, cfg.u_max)
    intervened = bool(np.max(np.abs(u - u_ref)) > 1e-9)
    return FilterResult(u, tuple(sorted(active)), intervened, FilterStatus.OK, mult)


def clf_weight(dyn_kind) -> np.ndarray:
    """Quadratic form ``P`` of the baseline Lyapunov function ``e^T P e``.

    Identity for the single integrator. For the double integrator
    ``|e_p|^2 + |e_v + e_p|^2``: the plain full-state norm has ``LgV = 0``
    whenever the velocity error vanishes, which freezes the robot at rest.
    """
    if DynKind.parse(dyn_kind) is DynKind.SINGLE:
        return np.eye(2)
    I2 = np.eye(2)
    return np.block([[2 * I2, I2], [I2, I2]])


def clf_cbf_baseline(x, x_g, rows: list[CBFConstraint], cfg: FilterConfig, dyn_kind) -> FilterResult:
    """Reactive CLF-CBF-QP with ``V = e^T P e``, ``e = x - x_g`` (see `clf_weight`).

    ``min |u|^2 + w delta^2`` s.t. ``Vdot <= -c V + delta``, the barrier rows
    and the input box. The slack is rescaled so the QP has an identity
    Hessian. ``intervened`` reports whether a barrier row is active.
    """
    kind = DynKind.parse(dyn_kind)
    model = DynamicsModel(kind)
    P = clf_weight(kind)
    x = np.asarray(x, dtype=float)
    e = x - np.asarray(x_g, dtype=float)
    Pe = P @ e
    V = float(e @ Pe)
    f, g = model.f(x), model.g(x)
    m = g.shape[1]
    sw = math.sqrt(cfg.clf_relax_weight)
    # -2 e^T P g u + delta'/sw >= 2 e^T P f + c V
    clf_row = np.concatenate([-2.0 * Pe @ g, [1.0 / sw]])
    clf_rhs = 2.0 * float(Pe @ f) + cfg.clf_gain * V
    Cb, db = _bound_rows(cfg.u_min, cfg.u_max)
    C = [clf_row]
    d = [clf_rhs]
    for r in rows:
        C.append(np.concatenate([r.coeff_u, [0.0]]))
        d.append(r.rhs)
    for cb, dbv in zip(Cb, db):
        C.append(np.concatenate([cb, [0.0]]))
        d.append(dbv)
    out = min_norm_qp(np.zeros(m + 1), np.array(C), np.array(d))
    if out is None:
        return FilterResult(None, (), True, FilterStatus.INFEASIBLE)
    y, active, mult = out
    u = np.clip(y[:m], cfg.u_min, cfg.u_max)
    # report indices relative to the barrier rows (CLF row is -1)
    act = tuple(sorted(a - 1 for a in active))
    blocked = any(0 <= a < len(rows) for a in act)
    return FilterResult(u, act, blocked, FilterStatus.OK,
                        {a - 1: v for a, v in mult.items()}, float(y[m] / sw))
