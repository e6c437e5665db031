"""Fixed-topology generator network with weight reinjection.

Every hidden layer sees the previous activations concatenated with the raw
input vector, ``Z_{l+1} = [g_l(Z_l), w]``, and the output layer is affine.
Gradients are computed by hand-written reverse-mode accumulation, and the
parameters are trained with RMSprop using a ``t**-0.3`` learning-rate decay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
ACTIVATIONS = ("relu", "sigmoid")


@dataclass
class GeneratorNetwork:
    """Parameters of the map ``G_phi: R^input_dim -> R^output_dim``.

    ``params`` is one flat vector. Layer ``l`` owns a weight block of shape
    ``(fan_in_l, fan_out_l)`` followed by a bias of length ``fan_out_l``, where
    ``fan_in_l`` is ``input_dim`` for the first layer and
    ``hidden_widths[l-1] + input_dim`` afterwards.
    """

    input_dim: int
    hidden_widths: list[int]
    output_dim: int
    activation: str = "relu"
    params: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        self.hidden_widths = [int(h) for h in self.hidden_widths]
        if any(h < 1 for h in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if self.params is None:
            self.params = np.zeros(self.param_count)
        else:
            self.params = np.asarray(self.params, dtype=float)
            if self.params.shape != (self.param_count,):
                raise ValueError(
                    f"expected {self.param_count} parameters, got {self.params.shape}"
                )

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        shapes = []
        prev = 0
        for width in [*self.hidden_widths, self.output_dim]:
            shapes.append((prev + self.input_dim, width))
            prev = width
        return shapes

    @property
    def param_count(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes)

    def layers(self, params: np.ndarray | None = None):
        """Return ``[(W, b), ...]`` as views into ``params``."""
        flat = self.params if params is None else params
        out = []
        pos = 0
        for fan_in, fan_out in self.layer_shapes:
            W = flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = flat[pos : pos + fan_out]
            pos += fan_out
            out.append((W, b))
        return out

    def initialize(self, rng: np.random.Generator) -> "GeneratorNetwork":
        """Glorot-uniform weights, zero biases. Modifies and returns self."""
        params = np.zeros(self.param_count)
        for W, _ in self.layers(params):
            fan_in, fan_out = W.shape
            a = np.sqrt(6.0 / (fan_in + fan_out))
            W[...] = rng.uniform(-a, a, size=W.shape)
        self.params = params
        return self

    def copy(self) -> "GeneratorNetwork":
        return replace(self, hidden_widths=list(self.hidden_widths), params=self.params.copy())


def _act(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return 1.0 / (1.0 + np.exp(-z))


def _act_grad(kind, z, h):
    if kind == "relu":
        # subgradient 0 at exactly 0
        return (z > 0.0).astype(z.dtype)
    return h * (1.0 - h)


def forward_batch(net: GeneratorNetwork, W_in: np.ndarray, return_cache: bool = False):
    """Evaluate the network on each row of ``W_in`` (shape ``(K, input_dim)``)."""
    W_in = np.asarray(W_in, dtype=float)
    if W_in.ndim != 2 or W_in.shape[1] != net.input_dim:
        raise ValueError(
            f"input must have shape (K, {net.input_dim}), got {W_in.shape}"
        )
    layers = net.layers()
    cache = []
    Z = W_in
    for i, (W, b) in enumerate(layers):
        pre = Z @ W + b
        if i == len(layers) - 1:
            cache.append((Z, pre, None))
            out = pre
            break
        h = _act(net.activation, pre)
        cache.append((Z, pre, h))
        Z = np.concatenate([h, W_in], axis=1)
    if return_cache:
        return out, cache
    return out


def backward_batch(net: GeneratorNetwork, W_in: np.ndarray, out_grad: np.ndarray, cache=None):
    """Gradient of ``sum_k out_grad[k] . G(W_in[k])`` with respect to ``params``."""
    W_in = np.asarray(W_in, dtype=float)
    out_grad = np.asarray(out_grad, dtype=float)
    if out_grad.shape != (W_in.shape[0], net.output_dim):
        raise ValueError(
            f"out_grad must have shape ({W_in.shape[0]}, {net.output_dim}), "
            f"got {out_grad.shape}"
        )
    if cache is None:
        _, cache = forward_batch(net, W_in, return_cache=True)
    layers = net.layers()
    grad = np.zeros(net.param_count)
    grad_layers = net.layers(grad)
    delta = out_grad
    for i in range(len(layers) - 1, -1, -1):
        Z, pre, h = cache[i]
        if h is not None:
            delta = delta * _act_grad(net.activation, pre, h)
        gW, gb = grad_layers[i]
        gW[...] = Z.T @ delta
        gb[...] = delta.sum(axis=0)
        if i > 0:
            W, _ = layers[i]
            prev_width = W.shape[0] - net.input_dim
            # only the hidden part of Z depends on earlier layers
            delta = delta @ W[:prev_width].T
    return grad


def forward(net: GeneratorNetwork, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (net.input_dim,):
        raise ValueError(f"expected input of length {net.input_dim}, got {w.shape}")
    return forward_batch(net, w[None, :])[0]


def backward(net: GeneratorNetwork, w: np.ndarray, out_grad: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    out_grad = np.asarray(out_grad, dtype=float)
    if w.shape != (net.input_dim,):
        raise ValueError(f"expected input of length {net.input_dim}, got {w.shape}")
    if out_grad.shape != (net.output_dim,):
        raise ValueError(f"expected out_grad of length {net.output_dim}, got {out_grad.shape}")
    return backward_batch(net, w[None, :], out_grad[None, :])


@dataclass
class RmspropState:
    sq_grad_avg: np.ndarray
    decay: float = 0.99
    epsilon: float = 1e-8
    base_lr: float = 3e-4
    lr_decay_exponent: float = 0.3
    epoch: int = 0

    @classmethod
    def for_params(cls, n_params: int, **kwargs) -> "RmspropState":
        return cls(sq_grad_avg=np.zeros(n_params), **kwargs)

    def lr_at(self, epoch: int) -> float:
        """Learning rate used at (1-based) ``epoch``."""
        return self.base_lr * float(epoch) ** (-self.lr_decay_exponent)


def rmsprop_step(state: RmspropState, params: np.ndarray, grad: np.ndarray):
    """One RMSprop update. Returns ``(new_params, new_state)``."""
    if params.shape != grad.shape or params.shape != state.sq_grad_avg.shape:
        raise ValueError("params, grad and optimizer state must have equal shapes")
    epoch = state.epoch + 1
    sq = state.decay * state.sq_grad_avg + (1.0 - state.decay) * grad * grad
    lr = state.lr_at(epoch)
    new_params = params - lr * grad / np.sqrt(sq + state.epsilon)
    return new_params, replace(state, sq_grad_avg=sq, epoch=epoch)


def save_checkpoint(path, net: GeneratorNetwork, state: RmspropState | None = None, extra=None):
    doc = {
        "version": CHECKPOINT_VERSION,
        "input_dim": net.input_dim,
        "hidden_widths": list(net.hidden_widths),
        "output_dim": net.output_dim,
        "activation": net.activation,
        # json writes floats with repr(), which round-trips exactly
        "params": [float(v) for v in net.params],
        "optimizer": None,
        "epoch": 0,
    }
    if state is not None:
        doc["optimizer"] = {
            "sq_grad_avg": [float(v) for v in state.sq_grad_avg],
            "decay": state.decay,
            "epsilon": state.epsilon,
            "base_lr": state.base_lr,
            "lr_decay_exponent": state.lr_decay_exponent,
        }
        doc["epoch"] = state.epoch
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path):
    """Return ``(net, state_or_None, extra)`` from a checkpoint file."""
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    net = GeneratorNetwork(
        input_dim=doc["input_dim"],
        hidden_widths=doc["hidden_widths"],
        output_dim=doc["output_dim"],
        activation=doc["activation"],
        params=np.array(doc["params"], dtype=float),
    )
    state = None
    if doc.get("optimizer") is not None:
        opt = doc["optimizer"]
        state = RmspropState(
            sq_grad_avg=np.array(opt["sq_grad_avg"], dtype=float),
            decay=opt["decay"],
            epsilon=opt["epsilon"],
            base_lr=opt["base_lr"],
            lr_decay_exponent=opt["lr_decay_exponent"],
            epoch=doc["epoch"],
        )
    return net, state, doc.get("extra", {})
