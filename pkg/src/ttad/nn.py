"""Dense feedforward network core: forward pass, backprop, Adam, losses.

Everything here works on float64 numpy arrays and is deterministic given a
seed. The networks are deliberately minimal (dense layers with relu /
sigmoid / linear activations) -- just enough to train the autoencoder
detector and the Siamese towers.

Parameter flattening convention, used by gradients, Adam and the on-disk
format: layers in order; within a layer, the weight matrix in row-major
(out, in) order, then the bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "linear")
LOSSES = ("mse", "bce")

# Probabilities fed to the BCE loss are clamped to this range to avoid log(0).
BCE_EPS = 1e-7


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    @property
    def in_size(self) -> int:
        return self.weights.shape[1]

    @property
    def out_size(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseNetwork:
    layers: list[Layer] = field(default_factory=list)

    @property
    def input_size(self) -> int:
        return self.layers[0].in_size

    @property
    def output_size(self) -> int:
        return self.layers[-1].out_size

    @property
    def n_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)


def _validate_chain(layers: list[Layer]) -> None:
    for prev, cur in zip(layers, layers[1:]):
        if prev.out_size != cur.in_size:
            raise ValueError(
                f"layer sizes do not chain: {prev.out_size} -> {cur.in_size}"
            )
    for l in layers:
        if l.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {l.activation!r}")
        if not (np.isfinite(l.weights).all() and np.isfinite(l.bias).all()):
            raise ValueError("non-finite parameters")


def init_network(layer_sizes, activations, seed: int) -> DenseNetwork:
    """Build a network with Glorot-uniform weights and zero biases.

    layer_sizes is the full chain (input size first), so len(activations)
    must be len(layer_sizes) - 1. Deterministic per seed.
    """
    sizes = list(layer_sizes)
    acts = list(activations)
    if len(sizes) < 2 or len(acts) != len(sizes) - 1:
        raise ValueError("need n+1 sizes for n activations")
    if any(s < 1 for s in sizes):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], acts):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    _validate_chain(layers)
    return DenseNetwork(layers)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        # Split by sign so exp never overflows.
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activate_grad(z: np.ndarray, h: np.ndarray, kind: str) -> np.ndarray:
    """Derivative of the activation at pre-activation z (h = activation(z))."""
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "sigmoid":
        return h * (1.0 - h)
    return np.ones_like(z)


def _check_batch(net: DenseNetwork, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValueError("batch must be 2-d")
    if batch.shape[1] != net.input_size:
        raise ValueError(
            f"batch has {batch.shape[1]} columns, network expects {net.input_size}"
        )
    if not np.isfinite(batch).all():
        raise ValueError("non-finite input")
    return batch


def forward_cached(net: DenseNetwork, batch: np.ndarray):
    """Forward pass keeping per-layer inputs and pre-activations for backprop.

    Returns (output, inputs, pre_activations) where inputs[l] is what layer l
    consumed and pre_activations[l] its affine output before the activation.
    """
    h = _check_batch(net, batch)
    inputs, zs = [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        zs.append(z)
        h = _activate(z, layer.activation)
    return h, inputs, zs


def forward(net: DenseNetwork, batch: np.ndarray) -> np.ndarray:
    out, _, _ = forward_cached(net, batch)
    return out


def mse_loss(predicted: np.ndarray, target: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ValueError("shape mismatch")
    return float(np.mean((predicted - target) ** 2))


def bce_loss(predicted: np.ndarray, target: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if predicted.shape != target.shape:
        raise ValueError("length mismatch")
    p = np.clip(predicted, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log1p(-p)))


def loss_gradient(predicted: np.ndarray, target: np.ndarray, loss: str) -> np.ndarray:
    """Gradient of the loss w.r.t. the network output, same shape as output."""
    if loss == "mse":
        return 2.0 * (predicted - target) / predicted.size
    if loss == "bce":
        # Exact gradient of the clamped loss: zero where the clamp is active,
        # so finite differences of the implemented loss always agree.
        p = np.clip(predicted, BCE_EPS, 1.0 - BCE_EPS)
        inside = (predicted > BCE_EPS) & (predicted < 1.0 - BCE_EPS)
        g = -(target / p - (1.0 - target) / (1.0 - p)) / predicted.shape[0]
        return np.where(inside, g, 0.0)
    raise ValueError(f"unknown loss {loss!r}")


def backward(net: DenseNetwork, inputs, zs, grad_output: np.ndarray):
    """Backprop a gradient w.r.t. the output through the cached forward pass.

    Returns (flat parameter gradient, gradient w.r.t. the batch input).
    """
    grad_h = grad_output
    layer_grads = [None] * len(net.layers)
    for l in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[l]
        h = _activate(zs[l], layer.activation)
        delta = grad_h * _activate_grad(zs[l], h, layer.activation)
        g_w = delta.T @ inputs[l]
        g_b = delta.sum(axis=0)
        layer_grads[l] = (g_w, g_b)
        grad_h = delta @ layer.weights
    flat = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in layer_grads])
    return flat, grad_h


def gradients(net: DenseNetwork, batch, target, loss: str) -> np.ndarray:
    """Exact reverse-mode gradient of the stated loss, flattened."""
    target = np.asarray(target, dtype=np.float64)
    out, inputs, zs = forward_cached(net, batch)
    if loss == "bce":
        target = target.reshape(out.shape)
    grad_out = loss_gradient(out, target, loss)
    flat, _ = backward(net, inputs, zs, grad_out)
    return flat


def get_params(net: DenseNetwork) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([l.weights.ravel(), l.bias]) for l in net.layers]
    )


def set_params(net: DenseNetwork, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (net.n_params,):
        raise ValueError("parameter vector length mismatch")
    pos = 0
    for l in net.layers:
        n = l.weights.size
        l.weights = flat[pos : pos + n].reshape(l.weights.shape).copy()
        pos += n
        n = l.bias.size
        l.bias = flat[pos : pos + n].copy()
        pos += n


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    timestep: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_n_params(cls, n: int, learning_rate: float = 1e-3) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), learning_rate=learning_rate)

    @classmethod
    def for_network(cls, net: DenseNetwork, learning_rate: float = 1e-3) -> "AdamState":
        return cls.for_n_params(net.n_params, learning_rate)


def adam_update(params: np.ndarray, state: AdamState, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam step on a flat parameter vector."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape:
        raise ValueError("gradient length mismatch")
    if not np.isfinite(grads).all():
        raise ValueError("non-finite gradients")
    state.timestep += 1
    state.first_moment = state.beta1 * state.first_moment + (1 - state.beta1) * grads
    state.second_moment = (
        state.beta2 * state.second_moment + (1 - state.beta2) * grads**2
    )
    m_hat = state.first_moment / (1 - state.beta1**state.timestep)
    v_hat = state.second_moment / (1 - state.beta2**state.timestep)
    return params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def adam_step(net: DenseNetwork, state: AdamState, grads: np.ndarray) -> DenseNetwork:
    set_params(net, adam_update(get_params(net), state, grads))
    return net


def epoch_shuffle(n_items: int, seed: int, epoch: int) -> np.ndarray:
    """Deterministic per-epoch permutation, derived from (seed, epoch) only."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return rng.permutation(n_items)


def train(
    net: DenseNetwork,
    inputs: np.ndarray,
    targets: np.ndarray,
    loss: str,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
) -> DenseNetwork:
    """Mini-batch Adam training loop.

    Shuffles each epoch with a seed derived from (seed, epoch); the last
    partial batch is kept. Mutates and returns net.
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    state = AdamState.for_network(net, learning_rate)
    n = inputs.shape[0]
    for epoch in range(epochs):
        order = epoch_shuffle(n, seed, epoch)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            g = gradients(net, inputs[idx], targets[idx], loss)
            adam_step(net, state, g)
    return net


FORMAT_HEADER = "ttad-densenet 1"


def save_network(net: DenseNetwork, path) -> None:
    """Write the documented textual dump: header, layer shapes, then the
    flat parameter vector one value per line (full-precision repr)."""
    lines = [FORMAT_HEADER, f"layers {len(net.layers)}"]
    lines += [f"layer {l.in_size} {l.out_size} {l.activation}" for l in net.layers]
    params = get_params(net)
    lines.append(f"params {params.size}")
    lines += [repr(v) for v in params.tolist()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> DenseNetwork:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"{path}: not a network dump (bad header)")
    n_layers = int(lines[1].split()[1])
    layers = []
    for spec in lines[2 : 2 + n_layers]:
        _, in_s, out_s, act = spec.split()
        layers.append(Layer(np.zeros((int(out_s), int(in_s))), np.zeros(int(out_s)), act))
    net = DenseNetwork(layers)
    n_params = int(lines[2 + n_layers].split()[1])
    values = np.array([float(v) for v in lines[3 + n_layers : 3 + n_layers + n_params]])
    set_params(net, values)
    _validate_chain(net.layers)
    return net
