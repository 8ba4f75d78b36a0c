"""Linear embeddings of a ReLU network into a mixed-integer model.

Four activation encodings are supported, selected by a method object:

* ``Bpwl``  — exact big-M reformulation, one binary per encoded neuron.
* ``Ctar``  — convex triangle relaxation between the activation and the
  chord over the neuron's pre-activation interval [lb, ub].
* ``PCtar`` — the triangle rows plus a per-layer penalty weight on each
  activation variable, returned for the caller's objective.
* ``Pcar``  — only the two epigraph rows (a >= x, a >= 0) plus the
  penalty; no interval information is used at all.

Every layer contributes equality rows ``x = W a_prev + b``; the output
layer is affine and never gets activation rows.  Neurons whose interval
proves the activation sign (stable neurons) collapse to one equality
under Bpwl/Ctar/PCtar; for Ctar/PCtar this is mandatory (the chord needs
lb < 0 < ub), for Bpwl it can be disabled with ``faithful=True``.  Pcar
never bypasses: once upstream activations relax, a pre-activation may
leave its nominal interval, so pinning a = x would cut below the
activation's epigraph.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError
from .milp_core import EQ, GE, INF, LE, Model
from .nn_model import MlpNetwork, NeuronBoundTable, propagate_bounds


@dataclass(frozen=True)
class Bpwl:
    """Exact big-M encoding.  ``big_m=None`` derives a per-neuron constant
    from the propagated bounds; a float is used globally (and validated
    against the bounds, since an undersized constant silently truncates
    the function)."""

    big_m: float | None = 100.0


@dataclass(frozen=True)
class Ctar:
    """Triangle relaxation; bounds default to interval propagation over the
    input variables' declared box."""

    bounds: NeuronBoundTable | None = None


@dataclass(frozen=True)
class PCtar:
    """Triangle relaxation plus per-layer penalty weights on activations."""

    penalty: float | Sequence[float] = 10.0
    bounds: NeuronBoundTable | None = None


@dataclass(frozen=True)
class Pcar:
    """Epigraph-only relaxation with per-layer penalty weights."""

    penalty: float | Sequence[float] = 10.0


EncodingMethod = Union[Bpwl, Ctar, PCtar, Pcar]


@dataclass
class NeuronBinding:
    x_var: int
    a_var: int
    delta_var: int | None = None


@dataclass
class NetworkEmbedding:
    """Variable bindings for one embedded network.

    ``input_vars`` are the scaled feature variables supplied by the caller;
    ``output_var`` is the raw (pre output-scaling) network output.  Penalty
    terms are returned, not added to the objective: objective assembly is
    owned by the scheduling model.
    """

    input_vars: list[int]
    output_var: int
    neurons: list[list[NeuronBinding]]
    penalty_terms: list[tuple[int, float]] = field(default_factory=list)
    bounds: NeuronBoundTable | None = None
    warnings: list[str] = field(default_factory=list)
    affine_rows: int = 0
    activation_rows: int = 0
    n_unstable: int = 0
    n_stable_pos: int = 0
    n_stable_neg: int = 0


def encode_bpwl_neuron(model: Model, x_var: int, a_var: int, delta_var: int, big_m: float):
    """Emit the four exact rows: a <= x + M(1-d), a >= x, a <= M d, a >= 0."""
    if big_m <= 0:
        raise ConfigurationError(f"big-M must be positive, got {big_m}")
    model.add_constr([(a_var, 1.0), (x_var, -1.0), (delta_var, big_m)], LE, big_m)
    model.add_constr([(a_var, 1.0), (x_var, -1.0)], GE, 0.0)
    model.add_constr([(a_var, 1.0), (delta_var, -big_m)], LE, 0.0)
    model.add_constr([(a_var, 1.0)], GE, 0.0)


def encode_ctar_neuron(model: Model, x_var: int, a_var: int, lb: float, ub: float):
    """Emit a >= x, a >= 0 and the chord a <= ub (x - lb) / (ub - lb).

    The feasible set is the triangle with vertices (lb, 0), (0, 0), (ub, ub)
    intersected with the x bounds; requires lb < 0 < ub.
    """
    if not (lb < 0.0 < ub):
        raise ConfigurationError(f"triangle relaxation needs lb < 0 < ub, got [{lb}, {ub}]")
    model.add_constr([(a_var, 1.0), (x_var, -1.0)], GE, 0.0)
    model.add_constr([(a_var, 1.0)], GE, 0.0)
    k = ub / (ub - lb)
    model.add_constr([(a_var, 1.0), (x_var, -k)], LE, -k * lb)


def encode_pctar_neuron(
    model: Model, x_var: int, a_var: int, lb: float, ub: float, penalty: float
) -> tuple[int, float]:
    if penalty < 0:
        raise ConfigurationError(f"penalty weight must be nonnegative, got {penalty}")
    encode_ctar_neuron(model, x_var, a_var, lb, ub)
    return (a_var, penalty)


def encode_pcar_neuron(model: Model, x_var: int, a_var: int, penalty: float) -> tuple[int, float]:
    if penalty < 0:
        raise ConfigurationError(f"penalty weight must be nonnegative, got {penalty}")
    model.add_constr([(a_var, 1.0), (x_var, -1.0)], GE, 0.0)
    model.add_constr([(a_var, 1.0)], GE, 0.0)
    return (a_var, penalty)


def _layer_penalties(method, n_hidden: int) -> list[float]:
    p = method.penalty
    if np.isscalar(p):
        vals = [float(p)] * n_hidden
    else:
        vals = [float(v) for v in p]
        if len(vals) != n_hidden:
            raise ConfigurationError(
                f"need one penalty weight per hidden layer ({n_hidden}), got {len(vals)}"
            )
    if any(v < 0 for v in vals):
        raise ConfigurationError("penalty weights must be nonnegative")
    return vals


def _input_box(model: Model, input_vars) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = [], []
    for v in input_vars:
        var = model.variables[v]
        if not (np.isfinite(var.lb) and np.isfinite(var.ub)):
            raise ConfigurationError(
                f"input variable {var.name!r} must carry finite bounds (the scaled input box)"
            )
        lo.append(var.lb)
        hi.append(var.ub)
    return np.array(lo), np.array(hi)


def embed_network(
    model: Model,
    net: MlpNetwork,
    input_vars: Sequence[int],
    method: EncodingMethod,
    faithful: bool = False,
    name_prefix: str = "nn",
) -> NetworkEmbedding:
    """Add equality and activation rows embedding ``net`` into ``model``.

    ``input_vars`` must already exist with bounds matching the scaled input
    box; interval bounds are propagated from exactly that box.  Returns the
    embedding with penalty terms for the caller to fold into the objective.
    """
    input_vars = list(input_vars)
    if len(input_vars) != net.input_width:
        raise ConfigurationError(
            f"{len(input_vars)} input variables for a width-{net.input_width} network"
        )

    needs_bounds = isinstance(method, (Bpwl, Ctar, PCtar))
    table = None
    if needs_bounds:
        table = getattr(method, "bounds", None)
        if table is None:
            table = propagate_bounds(net, _input_box(model, input_vars))
        elif len(table.hidden) != len(net.hidden_widths) or any(
            t[0].shape[0] != w for t, w in zip(table.hidden, net.hidden_widths)
        ):
            raise ConfigurationError("bound table does not match the network topology")
    if isinstance(method, Bpwl) and method.big_m is not None and method.big_m <= 0:
        raise ConfigurationError(f"big-M must be positive, got {method.big_m}")
    penalties = (
        _layer_penalties(method, len(net.hidden_widths))
        if isinstance(method, (PCtar, Pcar))
        else None
    )

    emb = NetworkEmbedding(
        input_vars=input_vars, output_var=-1, neurons=[], bounds=table
    )
    prev_vars = input_vars
    n_layers = len(net.layers)
    for k, layer in enumerate(net.layers):
        is_output = k == n_layers - 1
        layer_bindings: list[NeuronBinding] = []
        for i in range(layer.out_width):
            if is_output:
                if table is not None:
                    olb, oub = float(table.output[0][i]), float(table.output[1][i])
                    x_var = model.add_var(f"{name_prefix}_out{i}", olb, oub)
                else:
                    x_var = model.add_var(f"{name_prefix}_out{i}", -INF, INF)
            else:
                if table is not None:
                    lb, ub = float(table.hidden[k][0][i]), float(table.hidden[k][1][i])
                    x_var = model.add_var(f"{name_prefix}_h{k}x{i}", lb, ub)
                    a_var = model.add_var(f"{name_prefix}_h{k}a{i}", 0.0, max(0.0, ub))
                else:
                    x_var = model.add_var(f"{name_prefix}_h{k}x{i}", -INF, INF)
                    a_var = model.add_var(f"{name_prefix}_h{k}a{i}", 0.0, INF)

            terms = [(x_var, 1.0)] + [
                (prev_vars[j], -layer.weights[i, j])
                for j in range(layer.in_width)
                if layer.weights[i, j] != 0.0
            ]
            model.add_constr(terms, EQ, float(layer.biases[i]), name=f"{name_prefix}_def_h{k}n{i}")
            emb.affine_rows += 1

            if is_output:
                emb.output_var = x_var
                continue

            delta_var = None
            if table is not None:
                stable_pos = lb >= 0.0
                stable_neg = ub <= 0.0
            else:
                stable_pos = stable_neg = False
            bypass = (stable_pos or stable_neg) and (
                isinstance(method, (Ctar, PCtar)) or not faithful
            )
            if bypass:
                if stable_pos:
                    model.add_constr([(a_var, 1.0), (x_var, -1.0)], EQ, 0.0)
                    model.variables[a_var].lb = lb
                    emb.n_stable_pos += 1
                else:
                    model.add_constr([(a_var, 1.0)], EQ, 0.0)
                    model.variables[a_var].ub = 0.0
                    emb.n_stable_neg += 1
                model._touch()
                emb.activation_rows += 1
            elif isinstance(method, Bpwl):
                mag = max(abs(lb), abs(ub))
                if method.big_m is None:
                    m_val = max(mag, 1e-9)
                else:
                    m_val = method.big_m
                    if m_val < mag:
                        emb.warnings.append(
                            f"big-M {m_val} below bound magnitude {mag:.6g} for neuron "
                            f"h{k}n{i}: encoding truncates the function"
                        )
                delta_var = model.add_binary(f"{name_prefix}_h{k}d{i}")
                encode_bpwl_neuron(model, x_var, a_var, delta_var, m_val)
                emb.activation_rows += 4
                emb.n_unstable += 1
            elif isinstance(method, Ctar):
                encode_ctar_neuron(model, x_var, a_var, lb, ub)
                emb.activation_rows += 3
                emb.n_unstable += 1
            elif isinstance(method, PCtar):
                emb.penalty_terms.append(
                    encode_pctar_neuron(model, x_var, a_var, lb, ub, penalties[k])
                )
                emb.activation_rows += 3
                emb.n_unstable += 1
            elif isinstance(method, Pcar):
                emb.penalty_terms.append(encode_pcar_neuron(model, x_var, a_var, penalties[k]))
                emb.activation_rows += 2
                emb.n_unstable += 1
            else:
                raise ConfigurationError(f"unknown encoding method {method!r}")
            layer_bindings.append(NeuronBinding(x_var=x_var, a_var=a_var, delta_var=delta_var))
        if not is_output:
            emb.neurons.append(layer_bindings)
            prev_vars = [nb.a_var for nb in layer_bindings]
    return emb


def method_label(method: EncodingMethod) -> str:
    """CLI/report label for a method instance."""
    return {Bpwl: "bpwl", Ctar: "ctar", PCtar: "pctar", Pcar: "pcar"}[type(method)]
