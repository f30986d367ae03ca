"""Dense feedforward networks with reverse-mode gradients and Adam.

Everything is float64. Hidden layers use relu, the output layer is
linear. Networks are plain parameter containers; `forward` is pure and
`backward` returns a GradientTape with exact analytic gradients.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


class DimensionError(ValueError):
    """Raised when an input or gradient shape does not match the network."""


class NonFiniteGradientError(ValueError):
    """Raised when an optimizer step receives a non-finite gradient."""


class DenseNet:
    """Fully connected network defined by `layer_dims`.

    `layer_dims` is [input, hidden..., output]; there is one weight
    matrix of shape (fan_in, fan_out) per consecutive pair. Activations
    default to relu on hidden layers and identity on the output layer.
    """

    def __init__(self, layer_dims, activations=None, rng=None):
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise DimensionError(f"invalid layer_dims {layer_dims}")
        self.layer_dims = list(layer_dims)
        n_layers = len(layer_dims) - 1
        if activations is None:
            activations = ["relu"] * (n_layers - 1) + ["identity"]
        if len(activations) != n_layers:
            raise DimensionError("one activation per weight layer required")
        for a in activations:
            if a not in ("relu", "identity"):
                raise ValueError(f"unknown activation {a!r}")
        self.activations = list(activations)
        rng = np.random.default_rng() if rng is None else rng
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            # Glorot-uniform weights, zero biases
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def in_dim(self):
        return self.layer_dims[0]

    @property
    def out_dim(self):
        return self.layer_dims[-1]

    def parameters(self):
        """Flat list of parameter arrays (weights then bias per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x):
        """Pure forward pass; accepts a vector (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x.reshape(1, -1) if single else x
        if h.shape[1] != self.in_dim:
            raise DimensionError(
                f"input dim {h.shape[1]} != expected {self.in_dim}")
        for w, b, act in zip(self.weights, self.biases, self.activations):
            h = h @ w + b
            if act == "relu":
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    def apply(self, x, param_tensors):
        """Graph forward pass on a Tensor input using shared param Tensors."""
        h = x
        n_layers = len(self.weights)
        for l in range(n_layers):
            w, b = param_tensors[2 * l], param_tensors[2 * l + 1]
            h = h @ w + b
            if self.activations[l] == "relu":
                h = h.relu()
        return h

    def param_tensors(self):
        """Fresh differentiable wrappers sharing the parameter arrays."""
        return [Tensor(p, requires_grad=True) for p in self.parameters()]

    # -- checkpointing -------------------------------------------------

    def to_dict(self):
        return {
            "layer_dims": self.layer_dims,
            "activations": self.activations,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        net = cls.__new__(cls)
        net.layer_dims = list(d["layer_dims"])
        net.activations = list(d["activations"])
        net.weights = [np.array(w, dtype=np.float64) for w in d["weights"]]
        net.biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        for w, (fi, fo) in zip(net.weights, zip(net.layer_dims[:-1], net.layer_dims[1:])):
            if w.shape != (fi, fo):
                raise DimensionError("checkpoint weights do not match layer_dims")
        return net

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class GradientTape:
    """Per-parameter gradients, in the order of `DenseNet.parameters()`."""

    grads: list

    def check_shapes(self, net):
        params = net.parameters()
        if len(self.grads) != len(params):
            raise DimensionError("tape length does not match network")
        for g, p in zip(self.grads, params):
            if g.shape != p.shape:
                raise DimensionError(
                    f"tape gradient shape {g.shape} != parameter shape {p.shape}")


def forward(net, x):
    return net.forward(x)


def backward(net, x, upstream_gradient):
    """Gradients of the scalar loss whose output-gradient is `upstream_gradient`."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream_gradient, dtype=np.float64)
    single = x.ndim == 1
    xb = x.reshape(1, -1) if single else x
    ub = upstream.reshape(1, -1) if single else upstream
    if xb.shape[1] != net.in_dim:
        raise DimensionError(f"input dim {xb.shape[1]} != expected {net.in_dim}")
    if ub.shape != (xb.shape[0], net.out_dim):
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match output dim {net.out_dim}")
    params = net.param_tensors()
    out = net.apply(Tensor(xb), params)
    out.backward(ub)
    return GradientTape([np.zeros_like(p.data) if p.grad is None else p.grad
                         for p in params])


@dataclass
class OptimizerState:
    """Adam state: step count plus first/second moment buffers."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


class Adam:
    """Bias-corrected adaptive-moment updates over a list of arrays."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = OptimizerState(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
            m=[np.zeros_like(p) for p in self.params],
            v=[np.zeros_like(p) for p in self.params],
        )

    def step(self, grads, maximize=False, names=None):
        s = self.state
        if len(grads) != len(self.params):
            raise DimensionError("gradient list does not match parameter list")
        for i, g in enumerate(grads):
            if not np.all(np.isfinite(g)):
                label = names[i] if names is not None else f"parameter {i}"
                raise NonFiniteGradientError(f"non-finite gradient in {label}")
        s.step_count += 1
        t = s.step_count
        for p, g, m, v in zip(self.params, grads, s.m, s.v):
            if maximize:
                g = -g
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * g ** 2
            m_hat = m / (1.0 - s.beta1 ** t)
            v_hat = v / (1.0 - s.beta2 ** t)
            p -= s.lr * m_hat / (np.sqrt(v_hat) + s.eps)


def adam_step(net, tape, optimizer, maximize=False):
    """Apply one Adam update to `net` from `tape` gradients, in place."""
    tape.check_shapes(net)
    names = []
    for l in range(len(net.weights)):
        names.append(f"layer {l} weights")
        names.append(f"layer {l} biases")
    optimizer.step(tape.grads, maximize=maximize, names=names)
