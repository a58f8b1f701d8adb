"""Minimal dense network stack: forward, exact backprop, Adam, JSON model IO.

Float64 throughout. Hidden activations are tanh; output is identity or tanh.
Inputs may be a single vector (d,) or a batch (n, d); gradients returned by
``backward`` are sums over the batch (callers divide for means).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

MODEL_FORMAT_VERSION = 1


class ShapeError(ValueError):
    """Input/parameter shape mismatch."""


class TrainingError(RuntimeError):
    """Non-finite loss or gradient during training."""


class ModelFileError(ValueError):
    """Unreadable or corrupt model file."""


class ModelVersionError(ModelFileError):
    """Model file written by an incompatible format version."""


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple         # input -> hidden... -> output
    output_activation: str = "identity"  # "identity" or "tanh"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("need >= 2 layers with positive sizes")
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError("output_activation must be 'identity' or 'tanh'")

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]


class NetworkParams:
    """Per-layer weights (in x out) and biases. Value-semantic via copy()."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]

    def copy(self):
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases])

    def flat(self):
        """All parameter arrays in a fixed order (w0, b0, w1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_params(spec: MlpSpec, seed) -> NetworkParams:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def forward(spec: MlpSpec, params: NetworkParams, x):
    """Returns (output, tape). Output shape matches the input's batchness."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != spec.input_dim:
        raise ShapeError(f"input dim {x.shape[1]} != spec input {spec.input_dim}")
    n_layers = len(params.weights)
    inputs = []   # layer inputs (post-activation of previous layer)
    zs = []       # pre-activations
    h = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        zs.append(z)
        if i < n_layers - 1:
            h = np.tanh(z)
        elif spec.output_activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
    tape = {"inputs": inputs, "zs": zs, "single": single}
    return (h[0] if single else h), tape


def backward(spec: MlpSpec, params: NetworkParams, tape, output_grad):
    """Exact gradients of sum(output * output_grad) w.r.t. parameters and the
    network input.

    Returns (grads, input_grad) where grads is a NetworkParams-shaped
    gradient holder; batch contributions are summed.
    """
    g = np.asarray(output_grad, dtype=np.float64)
    if tape["single"]:
        g = g[None, :]
    if g.shape != tape["zs"][-1].shape:
        raise ShapeError(f"output_grad shape {g.shape} != {tape['zs'][-1].shape}")
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1 or spec.output_activation == "tanh":
            dz = g * (1.0 - np.tanh(tape["zs"][i]) ** 2)
        else:
            dz = g
        gw[i] = tape["inputs"][i].T @ dz
        gb[i] = dz.sum(axis=0)
        g = dz @ params.weights[i].T
    input_grad = g[0] if tape["single"] else g
    return NetworkParams(gw, gb), input_grad


class AdamState:
    """Adam optimizer state for one NetworkParams."""

    def __init__(self, params: NetworkParams, learning_rate,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params.flat()]
        self.v = [np.zeros_like(p) for p in params.flat()]


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState):
    """In-place Adam update with bias correction. Raises on non-finite grads."""
    flat_p = params.flat()
    flat_g = grads.flat()
    if len(flat_p) != len(flat_g):
        raise ShapeError("parameter/gradient structure mismatch")
    state.step_count += 1
    t = state.step_count
    lr = state.learning_rate
    b1, b2 = state.beta1, state.beta2
    for i, (p, g) in enumerate(zip(flat_p, flat_g)):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient in Adam step")
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        m_hat = state.m[i] / (1 - b1 ** t)
        v_hat = state.v[i] / (1 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def save_model(path, spec: MlpSpec, params: NetworkParams):
    """Write the model as JSON; float64 values round-trip bit-exactly."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": {"layer_sizes": list(spec.layer_sizes),
                 "output_activation": spec.output_activation},
        "layers": [{"w": w.tolist(), "b": b.tolist()}
                   for w, b in zip(params.weights, params.biases)],
    }
    tmp_fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(tmp_fd, "w") as fh:
            json.dump(doc, fh)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_model(path):
    """Read a model file back as (spec, params), validating shapes."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFileError(f"not a model file: {path}")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format_version {doc['format_version']!r}")
    try:
        spec = MlpSpec(tuple(doc["spec"]["layer_sizes"]),
                       doc["spec"]["output_activation"])
        weights = [np.array(layer["w"], dtype=np.float64) for layer in doc["layers"]]
        biases = [np.array(layer["b"], dtype=np.float64) for layer in doc["layers"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file {path}: {exc}") from exc
    expected = list(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]))
    if len(weights) != len(expected):
        raise ModelFileError("layer count does not match spec")
    for w, b, (fi, fo) in zip(weights, biases, expected):
        if w.shape != (fi, fo) or b.shape != (fo,):
            raise ModelFileError(
                f"layer shape {w.shape}/{b.shape} does not match spec {(fi, fo)}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelFileError("non-finite values in model file")
    return spec, NetworkParams(weights, biases)
