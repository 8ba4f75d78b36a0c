"""Bounded-variable two-phase primal simplex with an explicit basis inverse.

Dantzig pricing with a smallest-index (Bland) fallback after a stall, a
ratio test that honors both variable bounds (bound flips included), eta
updates of the inverse with periodic refactorization, and artificial
variables for phase 1.  Deterministic: identical inputs replay the exact
pivot sequence.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .model import INF, CompiledModel, Model, SolveResult, SolveStats, SolverConfig, Status

# Reduced-cost optimality threshold and degenerate-step threshold.
_DUAL_TOL = 1e-9
_STEP_EPS = 1e-12

_AT_LB, _AT_UB, _AT_FREE = 0, 1, 2


class _Breakdown(Exception):
    pass


class _State:
    """Mutable simplex workspace over the extended column set (struct+slack+artificial)."""

    def __init__(self, A_work: sp.csc_matrix, b, lb, ub, config: SolverConfig):
        self.A = A_work
        self.AT = A_work.T.tocsr()
        self.indptr = A_work.indptr
        self.indices = A_work.indices
        self.data = A_work.data
        self.b = b
        self.lb = lb
        self.ub = ub
        self.config = config
        self.m = A_work.shape[0]
        self.n = A_work.shape[1]
        self.x = np.zeros(self.n)
        self.basis = np.empty(self.m, dtype=int)
        self.in_basis = np.zeros(self.n, dtype=bool)
        self.nb_state = np.zeros(self.n, dtype=np.int8)
        self.Binv = np.eye(self.m)
        self.pivots = 0
        self.since_refactor = 0

    def column(self, j: int) -> np.ndarray:
        s, e = self.indptr[j], self.indptr[j + 1]
        w = np.zeros(self.m)
        w[self.indices[s:e]] = self.data[s:e]
        return w

    def ftran(self, j: int) -> np.ndarray:
        s, e = self.indptr[j], self.indptr[j + 1]
        return self.Binv[:, self.indices[s:e]] @ self.data[s:e]

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise _Breakdown(f"singular basis: {exc}") from exc
        x_nb = self.x.copy()
        x_nb[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ x_nb)
        self.since_refactor = 0

    def objective(self, c: np.ndarray) -> float:
        return float(c @ self.x)


def _nonbasic_start(lb: np.ndarray, ub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Place every variable at a finite bound (lower preferred) or at 0 if free."""
    n = lb.shape[0]
    x = np.zeros(n)
    state = np.full(n, _AT_FREE, dtype=np.int8)
    lb_fin = np.isfinite(lb)
    ub_fin = np.isfinite(ub)
    x[lb_fin] = lb[lb_fin]
    state[lb_fin] = _AT_LB
    only_ub = ~lb_fin & ub_fin
    x[only_ub] = ub[only_ub]
    state[only_ub] = _AT_UB
    return x, state


def _price(st: _State, c: np.ndarray, bland: bool) -> tuple[int, int] | None:
    """Pick an entering column and direction, or None when dual-feasible."""
    y = c[st.basis] @ st.Binv
    d = c - st.AT @ y
    movable = ~st.in_basis & (st.ub - st.lb > 0)
    down_ok = movable & ((st.nb_state == _AT_UB) | (st.nb_state == _AT_FREE)) & (d > _DUAL_TOL)
    up_ok = movable & ((st.nb_state == _AT_LB) | (st.nb_state == _AT_FREE)) & (d < -_DUAL_TOL)
    cand = down_ok | up_ok
    if not cand.any():
        return None
    if bland:
        j = int(np.flatnonzero(cand)[0])
    else:
        score = np.where(cand, np.abs(d), -1.0)
        j = int(np.argmax(score))
    return j, (1 if d[j] < 0 else -1)


def _ratio_test(st: _State, j: int, delta: int, w: np.ndarray, bland: bool):
    """Max step for entering column j; returns (step, leaving_row or None, flip)."""
    dw = delta * w
    xB = st.x[st.basis]
    lbB = st.lb[st.basis]
    ubB = st.ub[st.basis]
    ratios = np.full(st.m, INF)
    pos = dw > _STEP_EPS
    neg = dw < -_STEP_EPS
    with np.errstate(invalid="ignore"):
        ratios[pos] = (xB[pos] - lbB[pos]) / dw[pos]
        ratios[neg] = (xB[neg] - ubB[neg]) / dw[neg]
    ratios[~np.isfinite(lbB) & pos] = INF
    ratios[~np.isfinite(ubB) & neg] = INF
    np.maximum(ratios, 0.0, out=ratios)

    t_basic = float(ratios.min()) if st.m else INF
    rng = st.ub[j] - st.lb[j]
    t_bound = rng if math.isfinite(rng) else INF

    if t_bound <= t_basic:
        if not math.isfinite(t_bound):
            return INF, None, False
        return t_bound, None, True
    if not math.isfinite(t_basic):
        return INF, None, False

    tie = ratios <= t_basic + 1e-9 * (1.0 + abs(t_basic))
    tie_rows = np.flatnonzero(tie)
    if bland:
        r = int(tie_rows[np.argmin(st.basis[tie_rows])])
    else:
        r = int(tie_rows[np.argmax(np.abs(dw[tie_rows]))])
    if abs(w[r]) < st.config.pivot_tol:
        # prefer a numerically safe pivot among the ties
        safe = tie_rows[np.abs(w[tie_rows]) >= st.config.pivot_tol]
        if safe.size == 0:
            raise _Breakdown(f"no pivot above tolerance in column {j}")
        r = int(safe[np.argmax(np.abs(dw[safe]))])
    return float(ratios[r]), r, False


def _apply_pivot(st: _State, j: int, delta: int, w: np.ndarray, t: float, r: int):
    st.x[st.basis] -= delta * t * w
    st.x[j] += delta * t
    leave = st.basis[r]
    # snap the leaving variable exactly onto the bound it hit
    st.x[leave] = st.lb[leave] if delta * w[r] > 0 else st.ub[leave]
    st.nb_state[leave] = _AT_LB if delta * w[r] > 0 else _AT_UB
    st.in_basis[leave] = False
    st.basis[r] = j
    st.in_basis[j] = True
    piv = w[r]
    st.Binv[r, :] /= piv
    mask = w.copy()
    mask[r] = 0.0
    st.Binv -= np.outer(mask, st.Binv[r, :])
    st.pivots += 1
    st.since_refactor += 1
    if st.since_refactor >= st.config.refactor_every:
        st.refactor()


def _run_phase(st: _State, c: np.ndarray, iter_budget: int) -> str:
    """Iterate to dual feasibility.  Returns 'optimal' or 'unbounded'."""
    bland = False
    stall = 0
    last_obj = st.objective(c)
    it = 0
    while True:
        it += 1
        if it > iter_budget:
            raise _Breakdown("iteration limit exceeded")
        pick = _price(st, c, bland)
        if pick is None:
            return "optimal"
        j, delta = pick
        try:
            w = st.ftran(j)
            t, r, flip = _ratio_test(st, j, delta, w, bland)
        except _Breakdown:
            # stale inverse can hide a usable pivot; refactor once and retry
            st.refactor()
            w = st.ftran(j)
            t, r, flip = _ratio_test(st, j, delta, w, bland)
        if t == INF:
            return "unbounded"
        if flip:
            st.x[st.basis] -= delta * t * w
            st.x[j] = st.ub[j] if delta > 0 else st.lb[j]
            st.nb_state[j] = _AT_UB if delta > 0 else _AT_LB
            st.pivots += 1
        else:
            _apply_pivot(st, j, delta, w, t, r)
        obj = st.objective(c)
        if obj < last_obj - _STEP_EPS:
            stall = 0
            bland = False
        else:
            stall += 1
            if stall >= st.config.stall_threshold:
                bland = True
        last_obj = obj


def simplex_solve(
    comp: CompiledModel,
    lb: np.ndarray,
    ub: np.ndarray,
    c: np.ndarray,
    c_const: float,
    config: SolverConfig,
) -> tuple[Status, np.ndarray | None, float | None, int]:
    """Solve min c.x over A_full x = b, lb <= x <= ub (arrays cover struct+slack).

    Returns (status, structural values, objective, pivot count).  Numerical
    breakdown surfaces as Status.FAILURE, never as a silent wrong answer.
    """
    m, n = comp.m, comp.n_struct + comp.m
    x0, state0 = _nonbasic_start(lb, ub)

    # initial basis: slack per row; rows whose slack cannot absorb the
    # residual get a +/-1 artificial column instead
    resid = comp.b - comp.A @ x0
    art_rows, art_signs = [], []
    basis = np.arange(comp.n_struct, n)
    for i in range(m):
        s_idx = comp.n_struct + i
        val = resid[i]
        if lb[s_idx] - 1e-12 <= val <= ub[s_idx] + 1e-12:
            x0[s_idx] = val
        else:
            pinned = min(max(val, lb[s_idx]), ub[s_idx])
            x0[s_idx] = pinned
            art_rows.append(i)
            art_signs.append(1.0 if val - pinned > 0 else -1.0)

    n_art = len(art_rows)
    if n_art:
        T = sp.csc_matrix(
            (np.array(art_signs), (np.array(art_rows), np.arange(n_art))), shape=(m, n_art)
        )
        A_work = sp.hstack([comp.A, T], format="csc")
        lb_w = np.concatenate([lb, np.zeros(n_art)])
        ub_w = np.concatenate([ub, np.full(n_art, INF)])
    else:
        A_work = comp.A
        lb_w, ub_w = lb, ub

    st = _State(A_work, comp.b, lb_w, ub_w, config)
    st.x[: x0.shape[0]] = x0
    st.nb_state[: state0.shape[0]] = state0
    for k, (i, sign) in enumerate(zip(art_rows, art_signs)):
        j = n + k
        basis[i] = j
        st.x[j] = abs(resid[i] - x0[comp.n_struct + i])
        st.Binv[i, i] = sign
    st.basis = basis
    st.in_basis[basis] = True

    budget = config.max_iterations or max(5000, 60 * (m + comp.n_struct))
    try:
        if n_art:
            c1 = np.zeros(st.n)
            c1[n:] = 1.0
            outcome = _run_phase(st, c1, budget)
            if outcome != "optimal":  # pragma: no cover - phase 1 is bounded below
                raise _Breakdown("phase 1 reported unbounded")
            if st.objective(c1) > config.feas_tol:
                return Status.INFEASIBLE, None, None, st.pivots
            # pin artificials at zero; they may linger in the basis but cannot move
            st.lb[n:] = 0.0
            st.ub[n:] = 0.0
            st.x[n:] = np.maximum(st.x[n:], 0.0)

        c_w = np.concatenate([c, np.zeros(st.n - n)]) if st.n > n else c
        outcome = _run_phase(st, c_w, budget)
        if outcome == "unbounded":
            return Status.UNBOUNDED, None, None, st.pivots
        st.refactor()
        # a stale inverse may have hidden reduced-cost violations; re-price once
        if _price(st, c_w, bland=False) is not None:
            outcome = _run_phase(st, c_w, budget)
            if outcome == "unbounded":
                return Status.UNBOUNDED, None, None, st.pivots
            st.refactor()
        xB = st.x[st.basis]
        viol = np.maximum(st.lb[st.basis] - xB, xB - st.ub[st.basis])
        viol = viol[np.isfinite(viol)]
        scale = 1.0 + float(np.abs(comp.b).max()) if m else 1.0
        if viol.size and float(viol.max()) > config.feas_tol * scale:
            raise _Breakdown(f"basic solution drifted out of bounds by {float(viol.max())}")
    except _Breakdown:
        return Status.FAILURE, None, None, st.pivots

    x_struct = st.x[: comp.n_struct].copy()
    obj = float(c[: comp.n_struct + comp.m] @ st.x[: comp.n_struct + comp.m]) + c_const
    return Status.OPTIMAL, x_struct, obj, st.pivots


def solve_lp(model: Model, config: SolverConfig | None = None) -> SolveResult:
    """Solve the continuous relaxation of ``model`` (integrality ignored)."""
    import time

    config = config or SolverConfig()
    comp = model.compiled()
    t0 = time.perf_counter()
    status, x, obj, pivots = simplex_solve(comp, comp.lb, comp.ub, comp.c, comp.c_const, config)
    stats = SolveStats(pivots=pivots, nodes=0, seconds=time.perf_counter() - t0)
    return SolveResult(
        status=status,
        values=x,
        objective=obj,
        best_bound=obj,
        gap=0.0 if status is Status.OPTIMAL else None,
        stats=stats,
    )
