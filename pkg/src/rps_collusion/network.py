"""Dense feed-forward Q-network, backprop and optimizers in plain numpy.

Layers compute ``x @ W + b``; hidden layers use ReLU (or identity), the
output layer is always linear. Everything runs in float64.

Checkpoint layout (all integers little-endian)::

    bytes 0..7    magic  b"RPSQNET\\x00"
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..15  uint32 header length H
    next H bytes  UTF-8 JSON: {"layer_dims": [...], "activation": "relu",
                               "dtype": "<f8", "layout": "W0,b0,W1,b1,..."}
    rest          float64 LE arrays in layout order; W_l is row-major
                  with shape (layer_dims[l], layer_dims[l+1])
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "linear")
CHECKPOINT_MAGIC = b"RPSQNET\x00"
CHECKPOINT_VERSION = 1


class DivergenceError(FloatingPointError):
    """Raised when a training step produces a non-finite loss."""


class QNetwork:
    def __init__(self, layer_dims, activation: str = "relu", rng=None):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise ValueError(f"bad layer dims {layer_dims}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_dims = layer_dims
        self.activation = activation
        rng = np.random.default_rng(rng)
        self._allocate()
        for w, (fan_in, fan_out) in zip(self.weights, zip(layer_dims[:-1], layer_dims[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w[...] = rng.uniform(-limit, limit, size=(fan_in, fan_out))

    def _allocate(self) -> None:
        """All parameters live in one flat vector; weights/biases are views into it."""
        self.flat = np.zeros(self.n_params)
        self.weights, self.biases = self.unflatten(self.flat)

    @property
    def n_params(self) -> int:
        dims = self.layer_dims
        return sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))

    def unflatten(self, vec: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        weights, biases = [], []
        offset = 0
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            weights.append(vec[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out))
            offset += fan_in * fan_out
            biases.append(vec[offset:offset + fan_out])
            offset += fan_out
        return weights, biases

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in checkpoint order (W0, b0, W1, b1, ...)."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params += [w, b]
        return params

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim or x.ndim not in (1, 2):
            raise ValueError(f"expected input width {self.input_dim}, got shape {x.shape}")
        return x

    def _hidden(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return z

    def forward(self, x) -> np.ndarray:
        """Q-values for one observation (1-D) or a batch (2-D)."""
        a = self._check_input(x)
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i < last:
                a = self._hidden(a)
        return a

    __call__ = forward

    def forward_cached(self, x: np.ndarray):
        """Batch forward keeping layer inputs and pre-activations for backprop."""
        a = np.atleast_2d(self._check_input(x))
        inputs, pre = [], []
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w + b
            pre.append(z)
            a = self._hidden(z) if i < last else z
        return a, (inputs, pre)

    def backward(self, grad_out: np.ndarray, cache) -> np.ndarray:
        """Flat parameter gradient (same layout as :attr:`flat`) given dLoss/dOutput."""
        inputs, pre = cache
        grad = np.empty(self.n_params)
        gw, gb = self.unflatten(grad)
        delta = grad_out
        for i in reversed(range(self.n_layers)):
            np.matmul(inputs[i].T, delta, out=gw[i])
            np.sum(delta, axis=0, out=gb[i])
            if i > 0:
                delta = delta @ self.weights[i].T
                if self.activation == "relu":
                    delta *= pre[i - 1] > 0
        return grad

    def copy(self) -> "QNetwork":
        twin = QNetwork.__new__(QNetwork)
        twin.layer_dims = list(self.layer_dims)
        twin.activation = self.activation
        twin._allocate()
        twin.flat[...] = self.flat
        return twin

    def same_parameters(self, other: "QNetwork") -> bool:
        return self.layer_dims == other.layer_dims and np.array_equal(self.flat, other.flat)


@dataclass
class Optimizer:
    """SGD or Adam state for one network."""

    kind: str = "adam"
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def apply(self, params: np.ndarray, grad: np.ndarray) -> None:
        """Update the flat parameter vector ``params`` in place."""
        self.step_count += 1
        if self.kind == "sgd":
            params -= self.learning_rate * grad
            return
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
            self._tmp = np.empty_like(params)
        t = self.step_count
        lr_t = self.learning_rate * np.sqrt(1 - self.beta2 ** t) / (1 - self.beta1 ** t)
        m, v, tmp = self.m, self.v, self._tmp
        m *= self.beta1
        np.multiply(grad, 1 - self.beta1, out=tmp)
        m += tmp
        v *= self.beta2
        np.multiply(grad, grad, out=tmp)
        tmp *= 1 - self.beta2
        v += tmp
        np.sqrt(v, out=tmp)
        tmp += self.eps
        np.divide(m, tmp, out=tmp)
        tmp *= lr_t
        params -= tmp


@dataclass
class TrainBatch:
    """Regression targets; only entries where ``action_mask`` is true contribute."""

    inputs: np.ndarray
    target_q: np.ndarray
    action_mask: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.target_q = np.atleast_2d(np.asarray(self.target_q, dtype=np.float64))
        self.action_mask = np.atleast_2d(np.asarray(self.action_mask, dtype=bool))
        n = len(self.inputs)
        if n == 0:
            raise ValueError("empty batch")
        if len(self.target_q) != n or self.action_mask.shape != self.target_q.shape:
            raise ValueError("batch arrays disagree in shape")

    @classmethod
    def for_actions(cls, inputs, actions, targets, n_actions: int = 3) -> "TrainBatch":
        """One constrained Q-value per sample: ``targets[i]`` for ``actions[i]``."""
        actions = np.asarray(actions, dtype=np.int64)
        mask = np.zeros((len(actions), n_actions), dtype=bool)
        mask[np.arange(len(actions)), actions] = True
        target_q = np.zeros((len(actions), n_actions))
        target_q[mask] = np.asarray(targets, dtype=np.float64)
        return cls(inputs, target_q, mask)


def masked_loss_and_grad(net: QNetwork, batch: TrainBatch):
    """Mean squared error over masked entries and its parameter gradients."""
    if batch.inputs.shape[1] != net.input_dim:
        raise ValueError(f"batch width {batch.inputs.shape[1]} != network input {net.input_dim}")
    if batch.target_q.shape[1] != net.output_dim:
        raise ValueError("target width does not match network output")
    q, cache = net.forward_cached(batch.inputs)
    count = int(batch.action_mask.sum())
    if count == 0:
        raise ValueError("action mask selects nothing")
    err = np.where(batch.action_mask, q - batch.target_q, 0.0)
    loss = float(np.sum(err * err) / count)
    grads = net.backward(2.0 * err / count, cache)
    return loss, grads


def train_batch(net: QNetwork, opt: Optimizer, batch: TrainBatch) -> float:
    """One optimizer step on the masked MSE; returns the loss before the step."""
    loss, grads = masked_loss_and_grad(net, batch)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss!r}")
    opt.apply(net.flat, grads)
    return loss


def gradient_check(net: QNetwork, inputs, target, epsilon: float = 1e-5, mask=None) -> float:
    """Worst relative error between backprop and central finite differences.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-6)``; the floor keeps
    parameters whose true gradient is zero (dead units) from dividing
    round-off by round-off.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if mask is None:
        mask = np.ones(target.shape, dtype=bool)
    batch = TrainBatch(inputs, target, mask)
    _, analytic = masked_loss_and_grad(net, batch)
    flat = net.flat
    worst = 0.0
    for j in range(flat.size):
        saved = flat[j]
        flat[j] = saved + epsilon
        up, _ = masked_loss_and_grad(net, batch)
        flat[j] = saved - epsilon
        down, _ = masked_loss_and_grad(net, batch)
        flat[j] = saved
        numeric = (up - down) / (2 * epsilon)
        scale = max(abs(analytic[j]), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic[j] - numeric) / scale)
    return worst


def clone_into_target(online: QNetwork, target: QNetwork) -> None:
    if online.layer_dims != target.layer_dims:
        raise ValueError(f"layer dims differ: {online.layer_dims} vs {target.layer_dims}")
    target.activation = online.activation
    np.copyto(target.flat, online.flat)


def save_network(net: QNetwork, path) -> None:
    header = json.dumps(
        {
            "layer_dims": net.layer_dims,
            "activation": net.activation,
            "dtype": "<f8",
            "layout": ",".join(f"{k}{i}" for i in range(net.n_layers) for k in "Wb"),
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(net.flat, dtype="<f8").tobytes())


def load_network(path) -> QNetwork:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a Q-network checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    net = QNetwork(header["layer_dims"], header["activation"], rng=0)
    payload = data[16 + hlen:]
    if len(payload) != net.n_params * 8:
        raise ValueError(f"{path}: expected {net.n_params} parameters, found {len(payload) / 8:g}")
    net.flat[...] = np.frombuffer(payload, dtype="<f8")
    return net
