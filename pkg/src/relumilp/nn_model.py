"""Fully-connected ReLU network: representation, exact evaluation, interval bounds.

The battery-degradation predictor used by the scheduling model is a small
dense network (5 inputs -> ReLU hidden layers -> 1 linear output).  This
module owns the weight-file schema, a deterministic synthetic generator
standing in for a trained model, exact forward evaluation (the reference
the MILP encodings must reproduce), and interval propagation of
pre-activation bounds (consumed by the triangle relaxation and by big-M
validation).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NetworkLoadError

NET_FORMAT = "relumilp-net-v1"

#: Input feature order used everywhere: ambient temperature [degC],
#: charge/discharge rate [1/h], state of charge, depth of discharge,
#: state of health (all fractions).
FEATURE_NAMES = ("temperature", "c_rate", "soc", "dod", "soh")


@dataclass(frozen=True)
class FeatureVector:
    """One degradation-model input point, in raw (physical) units."""

    temperature: float
    c_rate: float
    soc: float
    dod: float
    soh: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.temperature, self.c_rate, self.soc, self.dod, self.soh],
            dtype=float,
        )

    def clamped(self) -> "FeatureVector":
        """Clamp fraction features to their closed ranges (soh stays positive)."""
        return FeatureVector(
            temperature=self.temperature,
            c_rate=max(0.0, self.c_rate),
            soc=min(1.0, max(0.0, self.soc)),
            dod=min(1.0, max(0.0, self.dod)),
            soh=min(1.0, max(1e-9, self.soh)),
        )


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: ``pre = weights @ inputs + biases``."""

    weights: np.ndarray  # (out_width, in_width)
    biases: np.ndarray  # (out_width,)
    activation: str  # "relu" or "linear"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.biases, dtype=float)
        if w.ndim != 2 or b.ndim != 1:
            raise NetworkLoadError("layer weights must be 2-D and biases 1-D")
        if w.shape[0] != b.shape[0]:
            raise NetworkLoadError(
                f"bias length {b.shape[0]} does not match weight rows {w.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NetworkLoadError("layer contains non-finite weights or biases")
        if self.activation not in ("relu", "linear"):
            raise NetworkLoadError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class FeatureScaler:
    """Per-input affine map raw -> normalized: ``scaled = raw * scale + offset``."""

    scale: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scale, dtype=float)
        o = np.asarray(self.offset, dtype=float)
        if s.shape != o.shape or s.ndim != 1:
            raise NetworkLoadError("feature scaler scale/offset must be 1-D, same length")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(o))):
            raise NetworkLoadError("feature scaler contains non-finite entries")
        if np.any(s == 0.0):
            raise NetworkLoadError("feature scaler scale entries must be nonzero")
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "offset", o)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return raw * self.scale + self.offset

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        return (scaled - self.offset) / self.scale


@dataclass(frozen=True)
class OutputScaler:
    """Affine map from raw network output to physical degradation fraction per cycle."""

    scale: float
    offset: float

    def apply(self, raw):
        return raw * self.scale + self.offset


@dataclass(frozen=True)
class MlpNetwork:
    """An immutable trained network plus its input/output scaling.

    Invariants (checked at construction): layer widths chain, hidden
    activations are relu with a linear output layer, and everything is
    finite.  Instances are safe to share across threads.
    """

    layers: tuple[LayerSpec, ...]
    feature_scaler: FeatureScaler
    output_scaler: OutputScaler

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkLoadError("network has no layers")
        for i, layer in enumerate(layers):
            if i > 0 and layer.in_width != layers[i - 1].out_width:
                raise NetworkLoadError(
                    f"layer {i}: input width {layer.in_width} does not chain "
                    f"with previous output width {layers[i - 1].out_width}"
                )
            want = "linear" if i == len(layers) - 1 else "relu"
            if layer.activation != want:
                raise NetworkLoadError(
                    f"layer {i}: activation {layer.activation!r}, expected {want!r}"
                )
        if self.feature_scaler.scale.shape[0] != layers[0].in_width:
            raise NetworkLoadError(
                f"feature scaler length {self.feature_scaler.scale.shape[0]} "
                f"does not match input width {layers[0].in_width}"
            )
        object.__setattr__(self, "layers", layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_width

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(layer.out_width for layer in self.layers[:-1])


@dataclass(frozen=True)
class NeuronBoundTable:
    """Sound pre-activation intervals per hidden neuron, plus the raw output interval.

    ``hidden[k]`` is an ``(lb, ub)`` array pair for hidden layer ``k``.  Bounds
    are valid for every input inside the box they were propagated from.
    """

    hidden: tuple[tuple[np.ndarray, np.ndarray], ...]
    output: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        for lb, ub in list(self.hidden) + [self.output]:
            if np.any(lb > ub + 1e-12):
                raise ConfigurationError("bound table has lb > ub")

    def layer(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.hidden[k]


def forward(net: MlpNetwork, x: FeatureVector | np.ndarray) -> float:
    """Exact forward pass: feature scaling, dense layers, output scaling.

    This is the reference value every MILP encoding is measured against.
    """
    raw = x.as_array() if isinstance(x, FeatureVector) else np.asarray(x, dtype=float)
    if raw.shape != (net.input_width,):
        raise ConfigurationError(
            f"input has shape {raw.shape}, network expects ({net.input_width},)"
        )
    v = net.feature_scaler.apply(raw)
    for layer in net.layers:
        v = layer.weights @ v + layer.biases
        if layer.activation == "relu":
            v = np.maximum(v, 0.0)
    return float(net.output_scaler.apply(v[0]))


def forward_batch(net: MlpNetwork, raw: np.ndarray) -> np.ndarray:
    """Vectorized forward pass over rows of ``raw`` (n, input_width)."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != net.input_width:
        raise ConfigurationError(f"batch has shape {raw.shape}, expected (n, {net.input_width})")
    v = raw * net.feature_scaler.scale + net.feature_scaler.offset
    for layer in net.layers:
        v = v @ layer.weights.T + layer.biases
        if layer.activation == "relu":
            v = np.maximum(v, 0.0)
    return net.output_scaler.apply(v[:, 0])


def propagate_bounds(
    net: MlpNetwork, input_box: tuple[np.ndarray, np.ndarray] | None = None
) -> NeuronBoundTable:
    """Interval arithmetic layer by layer over a scaled-input box.

    ``input_box`` is an ``(lo, hi)`` pair in normalized feature space; the
    default is the unit box.  For each neuron the returned interval contains
    every pre-activation reachable from the box; hidden intervals are
    clamped by ReLU before feeding the next layer.
    """
    if input_box is None:
        lo = np.zeros(net.input_width)
        hi = np.ones(net.input_width)
    else:
        lo = np.asarray(input_box[0], dtype=float)
        hi = np.asarray(input_box[1], dtype=float)
    if lo.shape != (net.input_width,) or hi.shape != (net.input_width,):
        raise ConfigurationError("input box does not match network input width")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(lo > hi):
        raise ConfigurationError("input box must be finite with lo <= hi")

    hidden = []
    for layer in net.layers:
        w_pos = np.maximum(layer.weights, 0.0)
        w_neg = np.minimum(layer.weights, 0.0)
        lb = w_pos @ lo + w_neg @ hi + layer.biases
        ub = w_pos @ hi + w_neg @ lo + layer.biases
        if layer.activation == "relu":
            hidden.append((lb, ub))
            lo = np.maximum(lb, 0.0)
            hi = np.maximum(ub, 0.0)
        else:
            return NeuronBoundTable(hidden=tuple(hidden), output=(lb, ub))
    raise NetworkLoadError("network has no linear output layer")  # pragma: no cover


def save_network(net: MlpNetwork, path: str | Path) -> None:
    doc = {
        "format": NET_FORMAT,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "biases": layer.biases.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
        "feature_scaler": {
            "scale": net.feature_scaler.scale.tolist(),
            "offset": net.feature_scaler.offset.tolist(),
        },
        "output_scaler": {
            "scale": net.output_scaler.scale,
            "offset": net.output_scaler.offset,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_network(path: str | Path) -> MlpNetwork:
    """Load and fully validate a weight file (schema ``relumilp-net-v1``).

    Raises NetworkLoadError naming the offending layer on any malformed
    content: dimension chain breaks, bias/weight mismatches, non-finite
    numbers, bad activation tags.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise NetworkLoadError(f"cannot read weight file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != NET_FORMAT:
        raise NetworkLoadError(f"{path}: missing or unsupported format tag (want {NET_FORMAT!r})")
    try:
        layers = []
        for i, spec in enumerate(doc["layers"]):
            try:
                layers.append(
                    LayerSpec(
                        weights=np.array(spec["weights"], dtype=float),
                        biases=np.array(spec["biases"], dtype=float),
                        activation=spec["activation"],
                    )
                )
            except (NetworkLoadError, ValueError, KeyError) as exc:
                raise NetworkLoadError(f"{path}: layer {i}: {exc}") from exc
        fs = doc["feature_scaler"]
        os_ = doc["output_scaler"]
        net = MlpNetwork(
            layers=tuple(layers),
            feature_scaler=FeatureScaler(
                scale=np.array(fs["scale"], dtype=float),
                offset=np.array(fs["offset"], dtype=float),
            ),
            output_scaler=OutputScaler(scale=float(os_["scale"]), offset=float(os_["offset"])),
        )
    except KeyError as exc:
        raise NetworkLoadError(f"{path}: missing field {exc}") from exc
    return net


# Calibration targets for the synthetic generator: pre-activations from the
# unit input box stay inside [-TARGET, TARGET] per hidden layer, and the
# physical output over the box lands in [OUT_LO, OUT_HI] (fraction/cycle).
_PREACT_TARGET = 0.9
_OUT_LO = 2e-5
_OUT_HI = 8e-4

_DEFAULT_FEATURE_SCALE = np.array([1.0 / 40.0, 1.0 / 4.0, 1.0, 1.0, 1.0])
_DEFAULT_FEATURE_OFFSET = np.zeros(5)


def generate_synthetic_nnbd(seed: int, widths=(5, 20, 10, 1)) -> MlpNetwork:
    """Deterministic stand-in for a trained degradation predictor.

    Weights are drawn from a seeded normal and rescaled layer by layer so
    every hidden pre-activation bound from the unit input box lies within
    roughly [-1, 1]; the output scaler maps the raw output interval into a
    small nonnegative degradation fraction per cycle.  Same seed, same
    widths -> bit-identical network.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or widths[0] != 5 or widths[-1] != 1:
        raise ConfigurationError(f"widths must start at 5 and end at 1, got {widths}")
    if any(w <= 0 for w in widths):
        raise ConfigurationError(f"widths must be positive, got {widths}")

    rng = np.random.default_rng(seed)
    lo = np.zeros(widths[0])
    hi = np.ones(widths[0])
    layers = []
    for k in range(1, len(widths)):
        out_w, in_w = widths[k], widths[k - 1]
        is_last = k == len(widths) - 1
        w = rng.normal(0.0, 1.0, size=(out_w, in_w)) / np.sqrt(in_w)
        # center each neuron near its switching point at the box midpoint so
        # activations actually toggle over the box instead of sitting dead
        target = rng.uniform(-0.2, 0.35, size=out_w) if not is_last else rng.uniform(
            -0.1, 0.1, size=out_w
        )
        b = target - w @ ((lo + hi) / 2.0)
        w_pos, w_neg = np.maximum(w, 0.0), np.minimum(w, 0.0)
        lb = w_pos @ lo + w_neg @ hi + b
        ub = w_pos @ hi + w_neg @ lo + b
        mag = float(np.max(np.abs(np.concatenate([lb, ub]))))
        alpha = _PREACT_TARGET / mag if mag > 0 else 1.0
        w *= alpha
        b *= alpha
        lb *= alpha
        ub *= alpha
        layers.append(LayerSpec(weights=w, biases=b, activation="linear" if is_last else "relu"))
        if not is_last:
            lo = np.maximum(lb, 0.0)
            hi = np.maximum(ub, 0.0)
        else:
            out_lb, out_ub = float(lb[0]), float(ub[0])

    span = out_ub - out_lb
    scale = (_OUT_HI - _OUT_LO) / span if span > 0 else 1.0
    offset = _OUT_LO - scale * out_lb
    return MlpNetwork(
        layers=tuple(layers),
        feature_scaler=FeatureScaler(
            scale=_DEFAULT_FEATURE_SCALE.copy(), offset=_DEFAULT_FEATURE_OFFSET.copy()
        ),
        output_scaler=OutputScaler(scale=scale, offset=offset),
    )
