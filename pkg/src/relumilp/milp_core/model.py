"""Mixed-integer linear model container and solver-facing compiled form.

A ``Model`` is a plain builder: variables with bounds and an integrality
kind, sparse constraint rows, and one minimization objective.  Solvers work
on a ``CompiledModel`` (numpy/scipy arrays with one slack column per row),
which is cached and invalidated on mutation.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError

INF = math.inf

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]()]*$")

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)


class Status(str, Enum):
    """Solve outcome.  ``FAILURE`` flags numerical breakdown, never a silent wrong answer."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    GAP_LIMIT = "gap_limit"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"
    FAILURE = "failure"


@dataclass
class SolverConfig:
    """Tolerances and limits shared by the LP and MILP engines."""

    feas_tol: float = 1e-6
    int_tol: float = 1e-6
    mip_gap: float = 1e-6
    pivot_tol: float = 1e-9
    time_limit: float | None = None
    node_limit: int | None = None
    # Dantzig pricing switches to the smallest-index rule after this many
    # consecutive non-improving iterations, and back once progress resumes.
    stall_threshold: int = 200
    refactor_every: int = 100
    max_iterations: int | None = None
    brute_force_max_binaries: int = 20

    def __post_init__(self):
        for name in ("feas_tol", "int_tol", "mip_gap", "pivot_tol"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass
class SolveStats:
    pivots: int = 0
    nodes: int = 0
    seconds: float = 0.0


@dataclass
class SolveResult:
    """Outcome of an LP or MILP solve.

    ``values`` has one entry per declared variable (None unless a feasible
    point was found).  ``best_bound`` is a proven lower bound on the true
    optimum (equals ``objective`` for exact solves).
    """

    status: Status
    values: np.ndarray | None
    objective: float | None
    best_bound: float | None = None
    gap: float | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def is_optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class Variable:
    name: str
    lb: float
    ub: float
    kind: str  # "continuous" | "binary"


@dataclass
class Constraint:
    name: str
    terms: list[tuple[int, float]]
    sense: str
    rhs: float


class Model:
    """Minimization MILP builder with sparse rows and named variables."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.obj_terms: dict[int, float] = {}
        self.obj_constant: float = 0.0
        self._name_to_idx: dict[str, int] = {}
        self._version = 0
        self._compiled: CompiledModel | None = None

    # -- construction ------------------------------------------------------

    def add_var(
        self, name: str | None = None, lb: float = 0.0, ub: float = INF, kind: str = "continuous"
    ) -> int:
        if name is None:
            name = f"x{len(self.variables)}"
        if name in self._name_to_idx:
            raise ConfigurationError(f"duplicate variable name {name!r}")
        if not _NAME_RE.match(name):
            raise ConfigurationError(f"variable name {name!r} is not export-safe")
        if kind not in ("continuous", "binary"):
            raise ConfigurationError(f"unknown variable kind {kind!r}")
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ConfigurationError(f"variable {name!r}: bad bounds [{lb}, {ub}]")
        if kind == "binary" and not (0.0 <= lb and ub <= 1.0):
            raise ConfigurationError(f"binary {name!r} must have bounds within [0, 1]")
        idx = len(self.variables)
        self.variables.append(Variable(name=name, lb=float(lb), ub=float(ub), kind=kind))
        self._name_to_idx[name] = idx
        self._touch()
        return idx

    def add_binary(self, name: str | None = None) -> int:
        return self.add_var(name=name, lb=0.0, ub=1.0, kind="binary")

    def add_constr(self, terms, sense: str, rhs: float, name: str | None = None) -> int:
        """Add a sparse row.  ``terms`` is an iterable of (var index, coefficient)."""
        if sense not in _SENSES:
            raise ConfigurationError(f"unknown constraint sense {sense!r}")
        if not math.isfinite(rhs):
            raise ConfigurationError(f"constraint rhs must be finite, got {rhs}")
        merged: dict[int, float] = {}
        for var, coef in dict(terms).items() if isinstance(terms, dict) else terms:
            if not (0 <= var < len(self.variables)):
                raise ConfigurationError(f"constraint references undeclared variable {var}")
            if not math.isfinite(coef):
                raise ConfigurationError("constraint coefficient must be finite")
            merged[var] = merged.get(var, 0.0) + float(coef)
        if name is None:
            name = f"c{len(self.constraints)}"
        self.constraints.append(
            Constraint(name=name, terms=sorted(merged.items()), sense=sense, rhs=float(rhs))
        )
        self._touch()
        return len(self.constraints) - 1

    def set_objective(self, terms, constant: float = 0.0) -> None:
        self.obj_terms = {}
        self.obj_constant = 0.0
        self.add_objective_terms(terms, constant)

    def add_objective_terms(self, terms, constant: float = 0.0) -> None:
        items = terms.items() if isinstance(terms, dict) else terms
        for var, coef in items:
            if not (0 <= var < len(self.variables)):
                raise ConfigurationError(f"objective references undeclared variable {var}")
            if not math.isfinite(coef):
                raise ConfigurationError("objective coefficient must be finite")
            self.obj_terms[var] = self.obj_terms.get(var, 0.0) + float(coef)
        if not math.isfinite(constant):
            raise ConfigurationError("objective constant must be finite")
        self.obj_constant += float(constant)
        self._touch()

    def fix_var(self, var: int, value: float) -> None:
        v = self.variables[var]
        v.lb = v.ub = float(value)
        self._touch()

    # -- queries -----------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == "binary"]

    def var_index(self, name: str) -> int:
        return self._name_to_idx[name]

    def copy(self) -> "Model":
        other = Model(self.name)
        for v in self.variables:
            other.add_var(v.name, v.lb, v.ub, v.kind)
        for c in self.constraints:
            other.add_constr(list(c.terms), c.sense, c.rhs, name=c.name)
        other.set_objective(dict(self.obj_terms), self.obj_constant)
        return other

    def _touch(self):
        self._version += 1
        self._compiled = None

    def compiled(self) -> "CompiledModel":
        if self._compiled is None:
            self._compiled = CompiledModel(self)
        return self._compiled


class CompiledModel:
    """Standard-form arrays: ``A_full @ x = b`` with one slack column per row.

    Slack bounds encode the sense: [0, inf) for <=, (-inf, 0] for >=, and
    [0, 0] for equalities.  Columns 0..n_vars-1 are the structural
    variables in declaration order.
    """

    def __init__(self, model: Model):
        n = model.n_vars
        m = len(model.constraints)
        self.n_struct = n
        self.m = m
        rows, cols, vals = [], [], []
        b = np.zeros(m)
        for i, con in enumerate(model.constraints):
            b[i] = con.rhs
            for var, coef in con.terms:
                if coef != 0.0:
                    rows.append(i)
                    cols.append(var)
                    vals.append(coef)
            rows.append(i)
            cols.append(n + i)
            vals.append(1.0)
        self.A = sp.csc_matrix((vals, (rows, cols)), shape=(m, n + m))
        self.A_csr = self.A.tocsr()
        self.b = b

        lb = np.empty(n + m)
        ub = np.empty(n + m)
        for j, v in enumerate(model.variables):
            lb[j], ub[j] = v.lb, v.ub
        for i, con in enumerate(model.constraints):
            if con.sense == LE:
                lb[n + i], ub[n + i] = 0.0, INF
            elif con.sense == GE:
                lb[n + i], ub[n + i] = -INF, 0.0
            else:
                lb[n + i], ub[n + i] = 0.0, 0.0
        self.lb = lb
        self.ub = ub

        c = np.zeros(n + m)
        for var, coef in model.obj_terms.items():
            c[var] = coef
        self.c = c
        self.c_const = model.obj_constant
        self.binary_idx = np.array(model.binary_indices, dtype=int)


def check_solution(
    model: Model, values: np.ndarray, tol: float = 1e-6, int_tol: float = 1e-6
) -> list[str]:
    """Independent residual audit of a candidate point: plain dot products only.

    Returns human-readable violation messages (empty list means the point
    satisfies every bound, row, and binary integrality within ``tol``).
    """
    out = []
    values = np.asarray(values, dtype=float)
    if values.shape != (model.n_vars,):
        return [f"value vector has shape {values.shape}, expected ({model.n_vars},)"]
    for i, v in enumerate(model.variables):
        x = values[i]
        if x < v.lb - tol or x > v.ub + tol:
            out.append(f"bound: {v.name} = {x} outside [{v.lb}, {v.ub}]")
        if v.kind == "binary" and abs(x - round(x)) > int_tol:
            out.append(f"integrality: {v.name} = {x}")
    for con in model.constraints:
        lhs = sum(coef * values[var] for var, coef in con.terms)
        resid = lhs - con.rhs
        if con.sense == LE and resid > tol:
            out.append(f"row {con.name}: lhs - rhs = {resid} > 0")
        elif con.sense == GE and resid < -tol:
            out.append(f"row {con.name}: lhs - rhs = {resid} < 0")
        elif con.sense == EQ and abs(resid) > tol:
            out.append(f"row {con.name}: |lhs - rhs| = {abs(resid)}")
    return out


def objective_value(model: Model, values: np.ndarray) -> float:
    """Recompute the objective from a value vector (no solver state)."""
    return float(
        sum(coef * values[var] for var, coef in model.obj_terms.items()) + model.obj_constant
    )
