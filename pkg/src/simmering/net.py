"""Dense feedforward networks on flat float64 parameter vectors.

Parameter layout is layer-major: for each layer, in input-to-output order,
the weight matrix with shape ``(fan_out, fan_in)`` in row-major (C) order,
immediately followed by the bias vector of length ``fan_out``.  Everything
downstream (integrator state, snapshots on disk, Hessian probes) shares this
single flat layout.

Losses, conventions:

- ``sse``  sums squared errors over all samples and outputs.
- ``mse``  is ``sse`` divided by the sample count (not by the output count),
  so ``sse == mse * n_samples`` holds exactly.
- ``categorical_cross_entropy`` consumes raw logits (no softmax layer in the
  network) together with one-hot target rows, stabilised via the log-sum-exp
  shift, averaged over samples.
- ``binary_cross_entropy_from_logits`` consumes a single logit column with
  {0,1} targets, computed in the standard overflow-safe form, averaged over
  samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding

ACTIVATIONS = ("tanh", "relu", "elu", "linear")
LOSSES = ("sse", "mse", "categorical_cross_entropy", "binary_cross_entropy_from_logits")

# Fixed ELU knee scale; exposed for tests.
ELU_ALPHA = 1.0


class NonFiniteError(ArithmeticError):
    """A numeric quantity that must be finite came out inf or nan."""


@dataclass(frozen=True)
class Topology:
    """Layer sizes plus one activation per connection.

    ``layer_sizes[0]`` is the input dimension, ``layer_sizes[-1]`` the output
    dimension; ``activations[i]`` acts on the output of connection ``i``.
    """

    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.layer_sizes) < 2:
            raise ValueError("topology needs at least an input and an output layer")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise ValueError(
                f"expected {len(self.layer_sizes) - 1} activations, got {len(self.activations)}"
            )
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def param_count(self) -> int:
        return sum(
            (fan_in + 1) * fan_out
            for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) per connection."""
        return [
            (fan_out, fan_in)
            for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        ]


def layer_views(topology: Topology, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Zero-copy (weights, biases) views into a flat parameter vector."""
    params = np.asarray(params)
    if params.ndim != 1 or params.shape[0] != topology.param_count:
        raise ValueError(
            f"parameter vector must have shape ({topology.param_count},), got {params.shape}"
        )
    views = []
    offset = 0
    for fan_out, fan_in in topology.layer_shapes():
        w = params[offset : offset + fan_out * fan_in].reshape(fan_out, fan_in)
        offset += fan_out * fan_in
        b = params[offset : offset + fan_out]
        offset += fan_out
        views.append((w, b))
    return views


def pack_layers(topology: Topology, layers) -> np.ndarray:
    """Inverse of :func:`layer_views`: flatten (weights, biases) pairs."""
    out = np.empty(topology.param_count, dtype=np.float64)
    for view, (w, b) in zip(layer_views(topology, out), layers):
        view[0][...] = w
        view[1][...] = b
    return out


# ---------------------------------------------------------------------------
# initialisers


def init_glorot_normal(topology: Topology, seed) -> np.ndarray:
    """Weights ~ N(0, 2/(fan_in+fan_out)) per layer, biases zero.

    Draw order is fixed (layers in order, weights row-major, then biases), so
    a seed pins the whole vector bit-for-bit.
    """
    rng = seeding.generator(seed)
    params = np.zeros(topology.param_count, dtype=np.float64)
    for w, b in layer_views(topology, params):
        fan_out, fan_in = w.shape
        sigma = np.sqrt(2.0 / (fan_in + fan_out))
        w[...] = rng.normal(0.0, sigma, size=w.shape)
        # biases stay zero
    return params


def init_stratified_glorot(topology: Topology, seed) -> np.ndarray:
    """Glorot-scale weights with input-node-stratified means.

    For a layer with ``n`` input nodes the interval [-2*sigma, 2*sigma]
    (sigma the Glorot normal scale) is cut into ``n`` equal segments; every
    weight fed by input node ``i`` is drawn from N(midpoint_i, sigma/2).  The
    segment midpoints are symmetric about zero, so the layer-wide mean is
    zero.  With ``n == 1`` this degenerates to a single centred normal.
    Biases are zero.
    """
    rng = seeding.generator(seed)
    params = np.zeros(topology.param_count, dtype=np.float64)
    for w, b in layer_views(topology, params):
        fan_out, fan_in = w.shape
        sigma = np.sqrt(2.0 / (fan_in + fan_out))
        width = 4.0 * sigma / fan_in
        midpoints = -2.0 * sigma + width * (np.arange(fan_in) + 0.5)
        w[...] = midpoints[np.newaxis, :] + rng.normal(0.0, sigma / 2.0, size=w.shape)
    return params


# ---------------------------------------------------------------------------
# forward pass


def _apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "elu":
        return np.where(z > 0.0, z, ELU_ALPHA * np.expm1(z))
    return z  # linear


def _activation_slope(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d(activation)/dz, reusing the already-computed activation ``a``."""
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "elu":
        # for z <= 0 the slope is alpha*exp(z) == a + alpha
        return np.where(z > 0.0, 1.0, a + ELU_ALPHA)
    return np.ones_like(z)


def _check_inputs(topology: Topology, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError(f"inputs must be 2-D (samples, features), got shape {inputs.shape}")
    if inputs.shape[1] != topology.layer_sizes[0]:
        raise ValueError(
            f"inputs have {inputs.shape[1]} features, topology expects {topology.layer_sizes[0]}"
        )
    if not np.all(np.isfinite(inputs)):
        raise NonFiniteError("non-finite values in network inputs")
    return inputs


def forward(topology: Topology, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Batched forward pass; rows are independent samples."""
    a = _check_inputs(topology, inputs)
    for (w, b), act in zip(layer_views(topology, params), topology.activations):
        z = a @ w.T + b
        a = _apply_activation(act, z)
    return a


def _forward_cached(topology, params, inputs):
    """Forward pass keeping pre-activations and activations for backprop."""
    a = inputs
    pre = []
    post = [a]
    for (w, b), act in zip(layer_views(topology, params), topology.activations):
        z = a @ w.T + b
        a = _apply_activation(act, z)
        pre.append(z)
        post.append(a)
    return pre, post


# ---------------------------------------------------------------------------
# losses


def _check_pair(topology_out: int | None, outputs, targets, kind):
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.ndim != 2 or targets.ndim != 2:
        raise ValueError("outputs and targets must be 2-D (samples, outputs)")
    if outputs.shape != targets.shape:
        raise ValueError(f"shape mismatch: outputs {outputs.shape} vs targets {targets.shape}")
    if outputs.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(outputs)) or not np.all(np.isfinite(targets)):
        raise NonFiniteError("non-finite values in outputs or targets")
    if kind == "categorical_cross_entropy":
        if outputs.shape[1] < 2:
            raise ValueError("categorical cross-entropy needs at least two output classes")
        _check_one_hot(targets)
    elif kind == "binary_cross_entropy_from_logits":
        if not np.all((targets == 0.0) | (targets == 1.0)):
            raise ValueError("binary cross-entropy targets must be 0 or 1")
    return outputs, targets


def _check_one_hot(targets: np.ndarray) -> None:
    if not np.all((targets == 0.0) | (targets == 1.0)) or not np.all(targets.sum(axis=1) == 1.0):
        raise ValueError("categorical cross-entropy targets must be one-hot rows")


def loss(kind: str, outputs: np.ndarray, targets: np.ndarray) -> float:
    if kind not in LOSSES:
        raise ValueError(f"unknown loss {kind!r}")
    outputs, targets = _check_pair(None, outputs, targets, kind)
    n = outputs.shape[0]
    if kind == "sse":
        diff = outputs - targets
        return float(np.sum(diff * diff))
    if kind == "mse":
        diff = outputs - targets
        return float(np.sum(diff * diff) / n)
    if kind == "categorical_cross_entropy":
        zmax = outputs.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.sum(np.exp(outputs - zmax), axis=1))
        picked = np.sum(targets * outputs, axis=1)
        return float(np.mean(lse - picked))
    # binary cross-entropy from logits: max(z,0) - z*t + log1p(exp(-|z|))
    z = outputs
    per_elem = np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(np.sum(per_elem, axis=1)))


def _loss_output_grad(kind: str, outputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """dL/d(outputs) for each loss kind."""
    n = outputs.shape[0]
    if kind == "sse":
        return 2.0 * (outputs - targets)
    if kind == "mse":
        return (2.0 / n) * (outputs - targets)
    if kind == "categorical_cross_entropy":
        zmax = outputs.max(axis=1, keepdims=True)
        ez = np.exp(outputs - zmax)
        softmax = ez / ez.sum(axis=1, keepdims=True)
        return (softmax - targets) / n
    # binary: sigmoid(z) - t, averaged over samples
    z = outputs
    sig = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))
    return (sig - targets) / n


def class_labels_from_outputs(outputs: np.ndarray) -> np.ndarray:
    """Predicted class indices: argmax over logits, or sign for one logit.

    A single-column output is the binary case (logit > 0 means class 1);
    otherwise the lowest index among tied maxima wins, matching the vote
    tie-break used for ensembles.
    """
    outputs = np.asarray(outputs)
    if outputs.ndim != 2:
        raise ValueError("outputs must be 2-D")
    if outputs.shape[1] == 1:
        return (outputs[:, 0] > 0.0).astype(np.int64)
    return np.argmax(outputs, axis=1)


# ---------------------------------------------------------------------------
# gradient


def loss_and_gradient(
    topology: Topology,
    params: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss_kind: str,
) -> tuple[float, np.ndarray]:
    """Full-batch loss and exact reverse-mode gradient d(loss)/d(params)."""
    if loss_kind not in LOSSES:
        raise ValueError(f"unknown loss {loss_kind!r}")
    inputs = _check_inputs(topology, inputs)
    pre, post = _forward_cached(topology, params, inputs)
    outputs, targets = _check_pair(None, post[-1], targets, loss_kind)
    value = loss(loss_kind, outputs, targets)

    grad = np.empty(topology.param_count, dtype=np.float64)
    grad_views = layer_views(topology, grad)
    weight_views = layer_views(topology, params)

    delta = _loss_output_grad(loss_kind, outputs, targets)
    for layer in range(topology.n_layers - 1, -1, -1):
        act = topology.activations[layer]
        dz = delta * _activation_slope(act, pre[layer], post[layer + 1])
        gw, gb = grad_views[layer]
        gw[...] = dz.T @ post[layer]
        gb[...] = dz.sum(axis=0)
        if layer > 0:
            delta = dz @ weight_views[layer][0]

    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite loss or gradient")
    return value, grad


def gradient(
    topology: Topology,
    params: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss_kind: str,
) -> np.ndarray:
    return loss_and_gradient(topology, params, inputs, targets, loss_kind)[1]
