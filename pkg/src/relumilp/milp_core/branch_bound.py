"""Branch-and-bound over binary variables, plus an exhaustive oracle.

Node selection is best-bound (ties broken by creation order), branching
picks the most-fractional binary with smallest-index tie-break, and a
depth-first dive seeds the incumbent.  The oracle enumerates every binary
assignment and is the ground truth the tree search is tested against.
"""
from __future__ import annotations

import heapq
import itertools
import time

import numpy as np

from ..errors import ConfigurationError
from .model import Model, SolveResult, SolveStats, SolverConfig, Status
from .simplex import simplex_solve, solve_lp


def _rel_gap(incumbent: float, bound: float) -> float:
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def _fractional(values: np.ndarray, bins: np.ndarray, int_tol: float):
    """Index of the most-fractional binary (smallest index on ties), or None."""
    if bins.size == 0:
        return None
    v = values[bins]
    frac = np.abs(v - np.round(v))
    if float(frac.max()) <= int_tol:
        return None
    k = int(np.argmax(0.5 - np.abs(v - np.floor(v) - 0.5)))
    return k


def solve_milp(model: Model, config: SolverConfig | None = None) -> SolveResult:
    """Minimize over the model with its binaries integral.

    Terminates with OPTIMAL once the proven relative gap is at (default,
    tiny) tolerance, GAP_LIMIT when a looser configured gap stops the
    search early, or an honest limit status carrying the best incumbent.
    """
    config = config or SolverConfig()
    comp = model.compiled()
    bins = comp.binary_idx
    t0 = time.perf_counter()
    if bins.size == 0:
        return solve_lp(model, config)

    total_pivots = 0
    nodes = 0
    incumbent_obj = None
    incumbent_x = None
    counter = itertools.count()

    def node_solve(bin_lb, bin_ub):
        nonlocal total_pivots, nodes
        lb = comp.lb.copy()
        ub = comp.ub.copy()
        lb[bins] = bin_lb
        ub[bins] = bin_ub
        status, x, obj, pivots = simplex_solve(comp, lb, ub, comp.c, comp.c_const, config)
        total_pivots += pivots
        nodes += 1
        return status, x, obj

    def finish(status: Status, bound: float | None) -> SolveResult:
        nonlocal incumbent_obj, incumbent_x
        if incumbent_x is not None:
            # re-solve with binaries pinned to exact integers for a clean point
            lb = np.round(incumbent_x[bins])
            status_p, x_p, obj_p, pivots_p = simplex_solve(
                comp,
                _override(comp.lb, bins, lb),
                _override(comp.ub, bins, lb),
                comp.c,
                comp.c_const,
                config,
            )
            if status_p is Status.OPTIMAL:
                incumbent_x, incumbent_obj = x_p, obj_p
        gap = None
        if incumbent_obj is not None and bound is not None:
            gap = _rel_gap(incumbent_obj, bound)
        return SolveResult(
            status=status,
            values=incumbent_x,
            objective=incumbent_obj,
            best_bound=bound,
            gap=gap,
            stats=SolveStats(
                pivots=total_pivots, nodes=nodes, seconds=time.perf_counter() - t0
            ),
        )

    def _override(base, idx, vals):
        arr = base.copy()
        arr[idx] = vals
        return arr

    def accept(x, obj):
        nonlocal incumbent_obj, incumbent_x
        if incumbent_obj is None or obj < incumbent_obj - 1e-12:
            incumbent_obj = obj
            incumbent_x = x

    def dive(bin_lb, bin_ub, x, config_int_tol):
        """Round-and-fix descent from a fractional point to seed an incumbent."""
        bl, bu = bin_lb.copy(), bin_ub.copy()
        cur = x
        while True:
            k = _fractional(cur, bins, config_int_tol)
            if k is None:
                return
            v = round(float(cur[bins[k]]))
            bl[k] = bu[k] = v
            status, cur, obj = node_solve(bl, bu)
            if status is not Status.OPTIMAL:
                return
            if _fractional(cur, bins, config_int_tol) is None:
                accept(cur, obj)
                return

    root_lb = comp.lb[bins].copy()
    root_ub = comp.ub[bins].copy()
    status, x, obj = node_solve(root_lb, root_ub)
    if status is Status.INFEASIBLE:
        return finish(Status.INFEASIBLE, None)
    if status is Status.UNBOUNDED:
        return finish(Status.UNBOUNDED, None)
    if status is Status.FAILURE:
        return finish(Status.FAILURE, None)

    heap = []
    k = _fractional(x, bins, config.int_tol)
    if k is None:
        accept(x, obj)
    else:
        dive(root_lb, root_ub, x, config.int_tol)
        heapq.heappush(heap, (obj, next(counter), root_lb, root_ub))

    while heap:
        if config.time_limit is not None and time.perf_counter() - t0 > config.time_limit:
            return finish(Status.TIME_LIMIT, heap[0][0] if heap else incumbent_obj)
        if config.node_limit is not None and nodes >= config.node_limit:
            return finish(Status.NODE_LIMIT, heap[0][0] if heap else incumbent_obj)

        bound_key, _, bin_lb, bin_ub = heapq.heappop(heap)
        if incumbent_obj is not None:
            if _rel_gap(incumbent_obj, bound_key) <= config.mip_gap:
                heapq.heappush(heap, (bound_key, next(counter), bin_lb, bin_ub))
                bound = heap[0][0]
                status = Status.OPTIMAL if _rel_gap(incumbent_obj, bound) <= 1e-6 else Status.GAP_LIMIT
                return finish(status, bound)

        status, x, obj = node_solve(bin_lb, bin_ub)
        if status is Status.INFEASIBLE:
            continue
        if status is Status.UNBOUNDED:
            return finish(Status.UNBOUNDED, None)
        if status is Status.FAILURE:
            return finish(Status.FAILURE, heap[0][0] if heap else bound_key)
        if incumbent_obj is not None and obj >= incumbent_obj - config.mip_gap * max(
            1.0, abs(incumbent_obj)
        ):
            continue
        k = _fractional(x, bins, config.int_tol)
        if k is None:
            accept(x, obj)
            continue
        if incumbent_obj is None:
            dive(bin_lb, bin_ub, x, config.int_tol)
        v = float(x[bins[k]])
        first = round(v)
        for val in (first, 1 - first):
            bl, bu = bin_lb.copy(), bin_ub.copy()
            bl[k] = bu[k] = float(val)
            heapq.heappush(heap, (obj, next(counter), bl, bu))

    if incumbent_obj is None:
        return finish(Status.INFEASIBLE, None)
    return finish(Status.OPTIMAL, incumbent_obj)


def brute_force_milp(model: Model, config: SolverConfig | None = None) -> SolveResult:
    """Enumerate every binary assignment and keep the best LP; the test oracle.

    Refuses instances above ``config.brute_force_max_binaries`` (the point of
    this routine is trustworthy ground truth, not scale).
    """
    config = config or SolverConfig()
    comp = model.compiled()
    bins = comp.binary_idx
    if bins.size > config.brute_force_max_binaries:
        raise ConfigurationError(
            f"brute force refused: {bins.size} binaries exceeds ceiling "
            f"{config.brute_force_max_binaries}"
        )
    t0 = time.perf_counter()
    if bins.size == 0:
        return solve_lp(model, config)

    best_obj = None
    best_x = None
    total_pivots = 0
    n_solved = 0
    saw_unbounded = False
    saw_failure = False
    k = bins.size
    free_mask = comp.ub[bins] - comp.lb[bins] > 0.5  # respect pre-fixed binaries
    for mask in range(1 << k):
        assign = np.array([(mask >> i) & 1 for i in range(k)], dtype=float)
        assign = np.where(free_mask, assign, comp.lb[bins])
        if not free_mask.all() and mask and np.any(
            assign != np.array([(mask >> i) & 1 for i in range(k)], dtype=float)
        ):
            # skip duplicate masks that only differ on pre-fixed binaries
            if any(((mask >> i) & 1) and not free_mask[i] for i in range(k)):
                continue
        lb = comp.lb.copy()
        ub = comp.ub.copy()
        lb[bins] = assign
        ub[bins] = assign
        status, x, obj, pivots = simplex_solve(comp, lb, ub, comp.c, comp.c_const, config)
        total_pivots += pivots
        n_solved += 1
        if status is Status.OPTIMAL and (best_obj is None or obj < best_obj - 1e-12):
            best_obj, best_x = obj, x
        elif status is Status.UNBOUNDED:
            saw_unbounded = True
        elif status is Status.FAILURE:
            saw_failure = True

    stats = SolveStats(pivots=total_pivots, nodes=n_solved, seconds=time.perf_counter() - t0)
    if saw_unbounded:
        return SolveResult(Status.UNBOUNDED, None, None, stats=stats)
    if saw_failure and best_obj is None:
        return SolveResult(Status.FAILURE, None, None, stats=stats)
    if best_obj is None:
        return SolveResult(Status.INFEASIBLE, None, None, stats=stats)
    return SolveResult(Status.OPTIMAL, best_x, best_obj, best_bound=best_obj, gap=0.0, stats=stats)


def probe_variable(
    model: Model,
    var: int,
    maximize: bool = False,
    milp: bool = False,
    config: SolverConfig | None = None,
) -> SolveResult:
    """Optimize a single variable over the model's feasible set.

    Used by the exactness-verification loop: min/max probes of a network
    output variable reveal the feasible interval an encoding admits.  The
    returned objective is reported in the probe's direction (negated back
    for maximize).
    """
    probe = model.copy()
    probe.set_objective([(var, -1.0 if maximize else 1.0)])
    res = solve_milp(probe, config) if milp else solve_lp(probe, config)
    if maximize and res.objective is not None:
        res.objective = -res.objective
        res.best_bound = -res.best_bound if res.best_bound is not None else None
    return res
