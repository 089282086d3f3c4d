"""Primal simplex for linear programs with bounded variables.

Dense full-tableau implementation, two phases with explicit artificials.
Entering variable follows Dantzig pricing until the run stops improving for
too long, then switches to Bland's rule to break cycles. All tie-breaking is
by smallest index, so a given problem always replays the same pivot path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import BINARY, INTEGER, MipModel

INF = math.inf

AT_LOWER = 0
AT_UPPER = 1

_RC_TOL = 1e-9  # reduced-cost threshold
_PIV_TOL = 1e-9  # smallest acceptable pivot magnitude


@dataclass
class StandardForm:
    """Dense snapshot of a MipModel ready for repeated solves."""

    c: np.ndarray          # minimization costs over structural variables
    const: float
    A: np.ndarray          # m x n constraint matrix
    sense: np.ndarray      # -1 for <=, 0 for =, +1 for >=
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    int_ids: np.ndarray    # structural indices carrying integrality
    maximize: bool
    infeasible_empty: bool = False  # an empty constraint was inconsistent


@dataclass
class LpSolution:
    status: str            # optimal | infeasible | unbounded | breakdown
    x: np.ndarray | None = None
    obj: float | None = None  # minimization objective including the constant
    iters: int = 0
    message: str = ""


def standard_form(model: MipModel) -> StandardForm:
    n = len(model.variables)
    lb = np.array([v.lb for v in model.variables], dtype=np.float64)
    ub = np.array([v.ub for v in model.variables], dtype=np.float64)
    rows = []
    senses = []
    rhs = []
    sense_code = {"<=": -1, "=": 0, ">=": 1}
    infeasible_empty = False
    for con in model.constraints:
        if not con.terms or all(coef == 0.0 for _, coef in con.terms):
            # Presolve: empty rows are dropped after a consistency check.
            ok = (
                (con.sense == "<=" and 0.0 <= con.rhs + 1e-12)
                or (con.sense == ">=" and 0.0 >= con.rhs - 1e-12)
                or (con.sense == "=" and abs(con.rhs) <= 1e-12)
            )
            if not ok:
                infeasible_empty = True
            continue
        row = np.zeros(n)
        for vid, coef in con.terms:
            row[vid] += coef
        rows.append(row)
        senses.append(sense_code[con.sense])
        rhs.append(con.rhs)
    A = np.array(rows) if rows else np.zeros((0, n))
    c = np.zeros(n)
    for vid, coef in model.objective.terms:
        c[vid] += coef
    const = model.objective.constant
    maximize = model.objective.sense == "max"
    if maximize:
        c = -c
        const = -const
    int_ids = np.array(
        [v.id for v in model.variables if v.kind in (BINARY, INTEGER)], dtype=np.int64
    )
    return StandardForm(
        c=c,
        const=const,
        A=A,
        sense=np.array(senses, dtype=np.int8),
        b=np.array(rhs, dtype=np.float64),
        lb=lb,
        ub=ub,
        int_ids=int_ids,
        maximize=maximize,
        infeasible_empty=infeasible_empty,
    )


def _initial_point(lb, ub):
    """Nonbasic start values: the finite bound nearest zero, else zero."""
    v = np.zeros(lb.shape)
    at_upper = np.zeros(lb.shape, dtype=bool)
    finite_lb = np.isfinite(lb)
    finite_ub = np.isfinite(ub)
    v[finite_lb] = lb[finite_lb]
    take_ub = ~finite_lb & finite_ub
    v[take_ub] = ub[take_ub]
    at_upper[take_ub] = True
    return v, at_upper


class _Tableau:
    """Mutable pivot state shared by both phases."""

    def __init__(self, A_full, b, lb, ub, basis, x_b, v, at_upper):
        self.T = A_full
        self.b = b
        self.lb = lb
        self.ub = ub
        self.basis = basis
        self.x_b = x_b
        self.v = v
        self.at_upper = at_upper
        self.in_basis = np.zeros(A_full.shape[1], dtype=bool)
        self.in_basis[basis] = True
        self.free = ~np.isfinite(lb) & ~np.isfinite(ub)
        self.iters = 0

    def values(self):
        x = self.v.copy()
        x[self.basis] = self.x_b
        return x

    def pivot(self, r, q, entering_value):
        T = self.T
        piv = T[r, q]
        T[r] = T[r] / piv
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        leaving = self.basis[r]
        self.in_basis[leaving] = False
        self.in_basis[q] = True
        self.basis[r] = q
        self.x_b[r] = entering_value
        return leaving


def _optimize(tab: _Tableau, c, feas_tol, max_iters, bland_trigger):
    """Run pivots until optimal/unbounded/iteration cap. Returns a status."""
    T = tab.T
    lb, ub = tab.lb, tab.ub
    n_total = T.shape[1]
    stalled = 0
    bland = False
    last_obj = None
    while True:
        if tab.iters >= max_iters:
            return "breakdown"
        d = c - c[tab.basis] @ T
        movable = ~tab.in_basis & ((ub - lb) > 0)
        up_ok = movable & (tab.free | ~tab.at_upper) & (d < -_RC_TOL)
        dn_ok = movable & (tab.free | tab.at_upper) & (d > _RC_TOL)
        eligible = up_ok | dn_ok
        if not eligible.any():
            return "optimal"
        if bland:
            q = int(np.nonzero(eligible)[0][0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            q = int(np.argmax(score))
        direction = 1.0 if up_ok[q] else -1.0

        y = T[:, q]
        move = direction * y
        # How far each basic variable lets the entering variable travel.
        t_best = ub[q] - lb[q] if not tab.free[q] else INF
        r_best = -1
        hit_upper = False
        rows_dn = np.nonzero(move > _PIV_TOL)[0]
        rows_up = np.nonzero(move < -_PIV_TOL)[0]
        candidates = []
        if rows_dn.size:
            room = tab.x_b[rows_dn] - lb[tab.basis[rows_dn]]
            ratio = room / move[rows_dn]
            for idx, i in enumerate(rows_dn):
                candidates.append((float(ratio[idx]), int(i), False))
        if rows_up.size:
            room = ub[tab.basis[rows_up]] - tab.x_b[rows_up]
            ratio = room / (-move[rows_up])
            for idx, i in enumerate(rows_up):
                candidates.append((float(ratio[idx]), int(i), True))
        if candidates:
            t_rows = min(cand[0] for cand in candidates)
        else:
            t_rows = INF
        t_star = min(t_best, t_rows)
        if not np.isfinite(t_star):
            return "unbounded"
        t_star = max(t_star, 0.0)

        tab.iters += 1
        if t_rows > t_star + 1e-12 or not candidates:
            # Bound flip: the entering variable crosses to its other bound.
            tab.x_b -= t_star * move
            tab.v[q] = ub[q] if direction > 0 else lb[q]
            tab.at_upper[q] = direction > 0
        else:
            near = [cand for cand in candidates if cand[0] <= t_star + 1e-12]
            if bland:
                near.sort(key=lambda cand: tab.basis[cand[1]])
                ratio, r, to_upper = near[0]
            else:
                near.sort(key=lambda cand: (-abs(move[cand[1]]), tab.basis[cand[1]]))
                ratio, r, to_upper = near[0]
            tab.x_b -= t_star * move
            entering_value = (tab.v[q] if not tab.in_basis[q] else 0.0) + direction * t_star
            leaving = tab.pivot(r, q, entering_value)
            tab.v[leaving] = ub[leaving] if to_upper else lb[leaving]
            if not np.isfinite(tab.v[leaving]):
                tab.v[leaving] = 0.0  # free variable leaving on a degenerate step
            tab.at_upper[leaving] = to_upper

        obj = c[tab.basis] @ tab.x_b + c[~tab.in_basis] @ tab.v[~tab.in_basis]
        if last_obj is not None and obj > last_obj - 1e-12:
            stalled += 1
            if stalled > bland_trigger:
                bland = True
        else:
            stalled = 0
        last_obj = obj


def simplex_solve(
    sf: StandardForm,
    lb=None,
    ub=None,
    extra_rows=None,
    feas_tol=1e-7,
    max_iters=None,
    bland_trigger=1000,
) -> LpSolution:
    """Solve min c'x s.t. Ax {<=,=,>=} b, lb <= x <= ub with bounds relaxed
    to continuous. ``lb``/``ub`` override the stored variable bounds (used by
    branch and bound); ``extra_rows`` appends (A2, sense2, b2) cut rows.
    """
    if sf.infeasible_empty:
        return LpSolution(status="infeasible", message="inconsistent empty constraint")
    n = sf.A.shape[1]
    lb_s = np.array(sf.lb if lb is None else lb, dtype=np.float64)
    ub_s = np.array(sf.ub if ub is None else ub, dtype=np.float64)
    if (lb_s > ub_s).any():
        return LpSolution(status="infeasible", message="crossed variable bounds")
    A = sf.A
    sense = sf.sense
    b = sf.b
    if extra_rows is not None:
        A2, sense2, b2 = extra_rows
        if len(b2):
            A = np.vstack([A, A2])
            sense = np.concatenate([sense, sense2])
            b = np.concatenate([b, b2])
    m = A.shape[0]

    if m == 0:
        x = np.where(sf.c > 0, lb_s, np.where(sf.c < 0, ub_s, 0.0))
        zero_c = sf.c == 0
        x[zero_c] = np.where(
            np.isfinite(lb_s[zero_c]),
            lb_s[zero_c],
            np.where(np.isfinite(ub_s[zero_c]), ub_s[zero_c], 0.0),
        )
        if not np.isfinite(x).all():
            return LpSolution(status="unbounded")
        return LpSolution(status="optimal", x=x, obj=float(sf.c @ x + sf.const))

    slack_lb = np.where(sense < 0, 0.0, np.where(sense > 0, -INF, 0.0))
    slack_ub = np.where(sense < 0, INF, np.where(sense > 0, 0.0, 0.0))
    lb_full = np.concatenate([lb_s, slack_lb])
    ub_full = np.concatenate([ub_s, slack_ub])
    v, at_upper = _initial_point(lb_full, ub_full)

    beta = b - A @ v[:n]
    basis = n + np.arange(m)
    x_b = beta.copy()
    art_cols = []
    art_rows = []
    scale = np.ones(m)
    for i in range(m):
        lo_i, hi_i = lb_full[n + i], ub_full[n + i]
        if beta[i] < lo_i - 1e-11 or beta[i] > hi_i + 1e-11:
            clamp = lo_i if beta[i] < lo_i else hi_i
            v[n + i] = clamp
            at_upper[n + i] = clamp == hi_i and hi_i != lo_i
            resid = beta[i] - clamp
            sign = 1.0 if resid >= 0 else -1.0
            col = np.zeros(m)
            col[i] = sign
            art_cols.append(col)
            art_rows.append(i)
            scale[i] = sign
            x_b[i] = abs(resid)

    k = len(art_cols)
    A_full = np.hstack([A, np.eye(m)] + ([np.array(art_cols).T] if k else []))
    lb_full = np.concatenate([lb_full, np.zeros(k)])
    ub_full = np.concatenate([ub_full, np.full(k, INF)])
    v = np.concatenate([v, np.zeros(k)])
    at_upper = np.concatenate([at_upper, np.zeros(k, dtype=bool)])
    for j, i in enumerate(art_rows):
        basis[i] = n + m + j
    T = A_full * scale[:, None]

    tab = _Tableau(T, b, lb_full, ub_full, basis, x_b, v, at_upper)
    total = n + m + k
    if max_iters is None:
        max_iters = max(2000, 40 * (m + n))

    if k:
        c1 = np.zeros(total)
        c1[n + m :] = 1.0
        status = _optimize(tab, c1, feas_tol, max_iters, bland_trigger)
        if status == "breakdown":
            return LpSolution(status="breakdown", iters=tab.iters, message="phase 1 iteration cap")
        if status == "unbounded":
            return LpSolution(status="breakdown", iters=tab.iters, message="phase 1 unbounded")
        infeas = c1[tab.basis] @ tab.x_b
        if infeas > feas_tol * (1.0 + np.abs(b).max()):
            return LpSolution(status="infeasible", iters=tab.iters)
        # Try to pivot leftover artificials out on any usable column.
        for r in range(m):
            if tab.basis[r] >= n + m:
                row = tab.T[r, : n + m]
                ok = (np.abs(row) > _PIV_TOL) & ~tab.in_basis[: n + m]
                ok &= (tab.ub[: n + m] - tab.lb[: n + m]) > 0
                idx = np.nonzero(ok)[0]
                if idx.size:
                    q = int(idx[0])
                    leaving = tab.pivot(r, q, tab.v[q])
                    tab.v[leaving] = 0.0
                    tab.at_upper[leaving] = False
                    tab.iters += 1
        # Freeze every artificial at zero for phase 2.
        tab.ub[n + m :] = 0.0
        tab.lb[n + m :] = 0.0

    c2 = np.zeros(total)
    c2[:n] = sf.c
    status = _optimize(tab, c2, feas_tol, max_iters, bland_trigger)
    if status == "breakdown":
        return LpSolution(status="breakdown", iters=tab.iters, message="phase 2 iteration cap")
    if status == "unbounded":
        return LpSolution(status="unbounded", iters=tab.iters)

    # Refine the basic values against the original data; a long pivot chain
    # can drift, and incumbents must satisfy constraints tightly.
    nb = ~tab.in_basis
    rhs = b - A_full[:, nb] @ tab.v[nb]
    try:
        exact = np.linalg.solve(A_full[:, tab.basis], rhs)
        if np.abs(exact - tab.x_b).max() < 1e-4:
            tab.x_b = exact
    except np.linalg.LinAlgError:
        pass
    x_full = tab.values()
    x = x_full[:n]
    return LpSolution(status="optimal", x=x, obj=float(sf.c @ x + sf.const), iters=tab.iters)
