"""LP text format: deterministic writer plus a minimal reader.

The export lets full-scale instances run on external solvers; the reader
exists so round-trips can be checked without one.  Objective constants are
written as a bare numeric term, which this reader (and most modern ones)
accepts.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

from ..errors import ConfigurationError
from .model import EQ, GE, INF, LE, Model

_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _num(x: float) -> str:
    if x == math.floor(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _terms_text(terms, names) -> str:
    parts = []
    for var, coef in terms:
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        piece = names[var] if mag == 1.0 else f"{_num(mag)} {names[var]}"
        parts.append(f"{sign} {piece}")
    if not parts:
        return ""
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp_text(model: Model) -> str:
    """Emit the model in LP text format with deterministic ordering.

    Sections: Minimize / Subject To / Bounds / Binary / End.  Every
    variable gets an explicit Bounds line so no reader-side defaults apply.
    """
    names = [v.name for v in model.variables]
    lines = [f"\\ LP export of model {model.name!r}", "Minimize"]
    obj = _terms_text(sorted(model.obj_terms.items()), names)
    if model.obj_constant != 0.0:
        const = _num(model.obj_constant)
        obj = f"{obj} + {const}" if obj and model.obj_constant > 0 else (
            f"{obj} - {_num(-model.obj_constant)}" if obj else const
        )
    lines.append(f" obj: {obj if obj else '0 ' + names[0] if names else ''}")
    lines.append("Subject To")
    for con in model.constraints:
        body = _terms_text(con.terms, names)
        if not body:
            raise ConfigurationError(f"constraint {con.name!r} has no nonzero terms")
        lines.append(f" {con.name}: {body} {con.sense} {_num(con.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.lb == v.ub:
            lines.append(f" {v.name} = {_num(v.lb)}")
        elif v.lb == -INF and v.ub == INF:
            lines.append(f" {v.name} free")
        elif v.lb == -INF:
            lines.append(f" -infinity <= {v.name} <= {_num(v.ub)}")
        elif v.ub == INF:
            lines.append(f" {v.name} >= {_num(v.lb)}")
        else:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables if v.kind == "binary"]
    if binaries:
        lines.append("Binary")
        for i in range(0, len(binaries), 8):
            lines.append(" " + " ".join(binaries[i : i + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp_file(model: Model, path) -> None:
    Path(path).write_text(export_lp_text(model))


# -- minimal reader ---------------------------------------------------------


def _parse_expr(tokens: list[str], model: Model, var_of: dict[str, int]):
    """Parse `[+-] [coef] name ...` tokens into (terms, constant)."""
    terms: list[tuple[int, float]] = []
    const = 0.0
    sign = 1.0
    coef: float | None = None
    for tok in tokens:
        if tok == "+":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = 1.0
        elif tok == "-":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = -1.0
        elif _NUM_RE.match(tok):
            if coef is not None:
                const += sign * coef
            coef = float(tok)
        else:
            if tok not in var_of:
                var_of[tok] = model.add_var(tok, lb=0.0, ub=INF)
            terms.append((var_of[tok], sign * (coef if coef is not None else 1.0)))
            sign = 1.0
            coef = None
    if coef is not None:
        const += sign * coef
    return terms, const


def parse_lp_text(text: str) -> Model:
    """Read the subset of LP format this package writes (plus common variants)."""
    model = Model("parsed")
    var_of: dict[str, int] = {}
    section = None
    pending: list[str] = []

    def flush_constraint(tokens):
        if not tokens:
            return
        line = " ".join(tokens)
        name = None
        if ":" in line:
            name, line = line.split(":", 1)
            name = name.strip()
        m = re.search(r"(<=|>=|=|<|>)", line)
        if not m:
            raise ConfigurationError(f"constraint line has no sense: {line!r}")
        sense = {"<": LE, "<=": LE, ">": GE, ">=": GE, "=": EQ}[m.group(1)]
        lhs, rhs = line[: m.start()], line[m.end() :]
        terms, const = _parse_expr(lhs.split(), model, var_of)
        rhs_terms, rhs_const = _parse_expr(rhs.split(), model, var_of)
        if rhs_terms:
            raise ConfigurationError("reader requires a numeric right-hand side")
        model.add_constr(terms, sense, rhs_const - const, name=name)

    def handle_bounds_line(raw: str):
        toks = raw.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            _set_bounds(toks[0], -INF, INF)
        elif len(toks) == 3 and toks[1] in ("=", "<=", ">="):
            name_first = not _NUM_RE.match(toks[0]) and toks[0].lower() != "-infinity"
            name, val = (toks[0], toks[2]) if name_first else (toks[2], toks[0])
            v = _tofloat(val)
            if toks[1] == "=":
                _set_bounds(name, v, v)
            elif (toks[1] == "<=") == name_first:
                _set_bounds(name, None, v)
            else:
                _set_bounds(name, v, None)
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            _set_bounds(toks[2], _tofloat(toks[0]), _tofloat(toks[4]))
        else:
            raise ConfigurationError(f"unrecognized bounds line: {raw!r}")

    def _tofloat(tok: str) -> float:
        t = tok.lower()
        if t in ("-infinity", "-inf"):
            return -INF
        if t in ("infinity", "inf", "+infinity", "+inf"):
            return INF
        return float(tok)

    def _set_bounds(name: str, lb, ub):
        if name not in var_of:
            var_of[name] = model.add_var(name, lb=0.0, ub=INF)
        v = model.variables[var_of[name]]
        if lb is not None:
            v.lb = lb
        if ub is not None:
            v.ub = ub
        model._touch()

    headers = {
        "minimize": "objective",
        "min": "objective",
        "subject to": "constraints",
        "such that": "constraints",
        "st": "constraints",
        "s.t.": "constraints",
        "bounds": "bounds",
        "binary": "binary",
        "binaries": "binary",
        "bin": "binary",
        "general": "general",
        "end": "end",
    }
    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in headers:
            if section == "constraints":
                flush_constraint(pending)
                pending = []
            elif section == "objective" and pending:
                _finish_objective(pending, model, var_of)
                pending = []
            section = headers[key]
            continue
        if section == "objective":
            pending.extend(line.split())
        elif section == "constraints":
            # a new row starts at a `name:` label; continuation lines extend it
            if ":" in line and pending:
                flush_constraint(pending)
                pending = []
            pending.extend(line.split())
        elif section == "bounds":
            handle_bounds_line(line)
        elif section == "binary":
            for name in line.split():
                if name not in var_of:
                    var_of[name] = model.add_var(name, lb=0.0, ub=INF)
                v = model.variables[var_of[name]]
                v.kind = "binary"
                v.lb = max(v.lb, 0.0)
                v.ub = min(v.ub, 1.0)
                model._touch()
    if section == "constraints" and pending:
        flush_constraint(pending)
    return model


def _finish_objective(tokens, model, var_of):
    body = " ".join(tokens)
    if ":" in body:
        body = body.split(":", 1)[1]
    terms, const = _parse_expr(body.split(), model, var_of)
    model.set_objective(terms, const)


def parse_lp_file(path) -> Model:
    return parse_lp_text(Path(path).read_text())
