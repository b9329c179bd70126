"""Layered feed-forward network with tansig hidden units, trained by
back-propagation and minibatch SGD with validation early stopping."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (DimensionError, ModelFormatError, SplitError, TrainingError,
                     UnsupportedVersionError)

MODEL_VERSION = 1
ACTIVATIONS = ("tansig", "linear")


def tansig(x):
    """2/(1+exp(-2x)) - 1, evaluated as tanh for accuracy near zero."""
    return np.tanh(x)


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str = "tansig"

    @property
    def shape(self):
        return self.weight.shape


@dataclass(frozen=True)
class Normalization:
    """Raw reading r (degC) maps to (r - offset) / scale.

    The default centres inputs on the boundary between the afebrile ceiling
    and the fever threshold, so the sign of a tansig pre-activation carries
    the class from the first update on.
    """

    offset: float = 37.5
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.offset) and np.isfinite(self.scale) and self.scale > 0):
            raise ModelFormatError(f"bad normalization {self}")

    def apply(self, readings) -> np.ndarray:
        return (np.asarray(readings, dtype=float) - self.offset) / self.scale


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple
    normalization: Normalization = Normalization()

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("network needs at least one layer")
        for k, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise ModelFormatError(f"unknown activation {layer.activation!r}")
            w, b = layer.weight, layer.bias
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DimensionError(f"layer {k}: weight {w.shape} vs bias {b.shape}")
            if k and w.shape[1] != layers[k - 1].weight.shape[0]:
                raise DimensionError(f"layer {k} expects {w.shape[1]} inputs, "
                                     f"previous layer gives {layers[k - 1].weight.shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DimensionError(f"layer {k}: non-finite parameters")
        object.__setattr__(self, "layers", layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].weight.shape[1]] + [l.weight.shape[0] for l in self.layers]

    @property
    def n_inputs(self) -> int:
        return self.layers[0].weight.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.normalization == other.normalization
                and len(self.layers) == len(other.layers)
                and all(a.activation == b.activation
                        and np.array_equal(a.weight, b.weight)
                        and np.array_equal(a.bias, b.bias)
                        for a, b in zip(self.layers, other.layers)))


def init_weights(layer_dims: Sequence[int], seed: int = 0,
                 normalization: Normalization = Normalization()) -> Network:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    Every layer but the last is tansig; the head is linear.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise DimensionError(f"layer dims must be >= 1 and at least two entries, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        act = "linear" if k == len(dims) - 2 else "tansig"
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Network(tuple(layers), normalization)


def _activate(layer, z):
    return tansig(z) if layer.activation == "tansig" else z


def _trace(net: Network, x: np.ndarray):
    # returns the input to each layer plus the final output
    acts = [x]
    for layer in net.layers:
        acts.append(_activate(layer, acts[-1] @ layer.weight.T + layer.bias))
    return acts


def _as_batch(net, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != net.n_inputs:
        raise DimensionError(f"network expects {net.n_inputs} inputs, got shape {x.shape}")
    return x2, single


def forward(net: Network, x, *, return_activations: bool = False):
    """Evaluate the network on a normalised input vector or a batch of rows.

    With ``return_activations`` also returns the list of per-layer outputs
    (index 0 is the input itself).
    """
    x2, single = _as_batch(net, x)
    acts = _trace(net, x2)
    out = acts[-1][0] if single else acts[-1]
    if return_activations:
        return out, [a[0] for a in acts] if single else acts
    return out


def mse_loss(outputs, targets) -> float:
    o = np.asarray(outputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if o.shape != t.shape:
        raise DimensionError(f"shape mismatch {o.shape} vs {t.shape}")
    if o.size == 0:
        raise DimensionError("mse of empty input")
    return float(np.mean((o - t) ** 2))


def backprop_gradients(net: Network, x, target) -> list[tuple[np.ndarray, np.ndarray]]:
    """d(mse_loss)/d(params) for one sample or a batch.

    The loss is averaged over every output element of every row, so for a
    linear head the last bias gradient is ``2 * (out - target) / n``.
    Returns ``[(dW, db), ...]`` aligned with ``net.layers``.
    """
    x2, single = _as_batch(net, x)
    t = np.asarray(target, dtype=float)
    t2 = t[None, :] if single and t.ndim == 1 else t
    n_out = net.layers[-1].weight.shape[0]
    if t2.shape != (x2.shape[0], n_out):
        raise DimensionError(f"target shape {t.shape} does not match output ({n_out},)")
    acts = _trace(net, x2)
    delta = 2.0 * (acts[-1] - t2) / t2.size
    grads = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if layer.activation == "tansig":
            # acts[k+1] is tansig(z); its derivative is 1 - tansig(z)^2
            delta = delta * (1.0 - acts[k + 1] ** 2)
        grads[k] = (delta.T @ acts[k], delta.sum(axis=0))
        if k:
            delta = delta @ layer.weight
    return grads


def sgd_step(net: Network, grads, learning_rate: float) -> Network:
    if len(grads) != len(net.layers):
        raise DimensionError("gradient list does not match layer count")
    layers = []
    for layer, (gw, gb) in zip(net.layers, grads):
        gw, gb = np.asarray(gw), np.asarray(gb)
        if gw.shape != layer.weight.shape or gb.shape != layer.bias.shape:
            raise DimensionError(f"gradient shapes {gw.shape}/{gb.shape} do not match "
                                 f"layer {layer.weight.shape}")
        layers.append(Layer(layer.weight - learning_rate * gw,
                            layer.bias - learning_rate * gb, layer.activation))
    return Network(tuple(layers), net.normalization)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 11
    hidden_sizes: tuple = (8,)
    learning_rate: float = 0.05
    patience: int = 3
    batch_size: int = 16
    seed: int = 42
    # lower / upper clamp on training targets
    min_reference: float = -0.05
    max_plant_output: float = 2.0
    # Carried for completeness; no role in a pure detector.
    max_interval_per_sec: float = 2.0
    controller_output_delays: int = 1

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainingReport:
    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    test_mse: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_mse: float = float("inf")
    network: Optional[Network] = None
    stopped_early: bool = False

    @property
    def epochs(self) -> list[int]:
        return list(range(1, len(self.val_mse) + 1))

    def curve_rows(self):
        for e, tr, va, te in zip(self.epochs, self.train_mse, self.val_mse, self.test_mse):
            yield e, tr, va, te


def train(net: Network, dataset, config: TrainConfig = TrainConfig()) -> TrainingReport:
    """Minibatch SGD with early stopping on validation MSE.

    Epoch ``k`` in the report is the state after ``k`` passes over the
    training split. Training halts once validation MSE has failed to
    strictly improve for ``config.patience`` consecutive epochs and the
    returned network is the best-validation snapshot.
    """
    if dataset.split is None:
        raise SplitError("dataset must be split before training")
    if not dataset.split.train or not dataset.split.val:
        raise SplitError("train and validation splits must be non-empty")
    if dataset.window_length != net.n_inputs:
        raise DimensionError(f"network takes {net.n_inputs} inputs, dataset windows "
                             f"have {dataset.window_length}")

    def xy(name):
        feats, labels = dataset.subset(name)
        x = net.normalization.apply(feats)
        y = np.clip(labels.astype(float), config.min_reference, config.max_plant_output)
        return x, y[:, None]

    x_tr, y_tr = xy("train")
    x_va, y_va = xy("val")
    x_te, y_te = xy("test")
    rng = np.random.default_rng(config.seed)
    report = TrainingReport(network=net)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x_tr))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            grads = backprop_gradients(net, x_tr[batch], y_tr[batch])
            if not all(np.all(np.isfinite(g)) for pair in grads for g in pair):
                raise TrainingError(f"gradients diverged in epoch {epoch}; "
                                    "lower the learning rate")
            net = sgd_step(net, grads, config.learning_rate)
        report.train_mse.append(mse_loss(forward(net, x_tr), y_tr))
        val = mse_loss(forward(net, x_va), y_va)
        report.val_mse.append(val)
        report.test_mse.append(mse_loss(forward(net, x_te), y_te) if len(x_te) else float("nan"))
        if val < report.best_val_mse:
            report.best_val_mse, report.best_epoch, report.network = val, epoch, net
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                report.stopped_early = True
                break
    return report


def _hex_list(a):
    return [float(v).hex() for v in np.ravel(a)]


def model_to_json(net: Network) -> str:
    doc = {
        "version": MODEL_VERSION,
        "dims": net.dims,
        "activations": [l.activation for l in net.layers],
        "weights": [_hex_list(l.weight) for l in net.layers],
        "biases": [_hex_list(l.bias) for l in net.layers],
        "normalization": {
            "offset": float(net.normalization.offset).hex(),
            "scale": float(net.normalization.scale).hex(),
        },
    }
    return json.dumps(doc, indent=1) + "\n"


def model_fingerprint(net: Network) -> str:
    """SHA-256 of the canonical model file contents."""
    return hashlib.sha256(model_to_json(net).encode()).hexdigest()


def model_from_json(text: str) -> Network:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise ModelFormatError(f"model file is not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must hold a JSON object")
    for key in ("version", "dims", "activations", "weights", "biases", "normalization"):
        if key not in doc:
            raise ModelFormatError(f"missing field {key!r}")
    if doc["version"] != MODEL_VERSION:
        raise UnsupportedVersionError(f"unsupported model version {doc['version']!r}")
    try:
        dims = [int(d) for d in doc["dims"]]
        n_layers = len(dims) - 1
        if not (len(doc["activations"]) == len(doc["weights"]) == len(doc["biases"]) == n_layers):
            raise ModelFormatError("dims / activations / weights / biases disagree in length")
        layers = []
        for k in range(n_layers):
            w = np.array([float.fromhex(v) for v in doc["weights"][k]], dtype=float)
            b = np.array([float.fromhex(v) for v in doc["biases"][k]], dtype=float)
            if w.size != dims[k + 1] * dims[k] or b.size != dims[k + 1]:
                raise ModelFormatError(f"layer {k}: parameter count does not match dims")
            layers.append(Layer(w.reshape(dims[k + 1], dims[k]), b, doc["activations"][k]))
        nm = doc["normalization"]
        norm = Normalization(float.fromhex(nm["offset"]), float.fromhex(nm["scale"]))
    except ModelFormatError:
        raise
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise ModelFormatError(f"malformed model field ({exc})") from None
    try:
        return Network(tuple(layers), norm)
    except DimensionError as exc:
        raise ModelFormatError(str(exc)) from None


def save_model(net: Network, path) -> None:
    Path(path).write_text(model_to_json(net), encoding="utf-8")


def load_model(path) -> Network:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
