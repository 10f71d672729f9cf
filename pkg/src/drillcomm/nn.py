"""Minimal dense-network engine: layers, Adam, init, gradient verification.

Everything is float64.  The networks built here are small enough that 64-bit
math costs little and makes central finite-difference checks meaningful.

Layers follow the usual from-scratch pattern: ``forward`` caches whatever the
backward pass needs, ``backward`` takes the upstream gradient and returns the
gradient with respect to the layer input, stashing parameter gradients on the
layer.  Arrays are (batch, features).
"""

from __future__ import annotations

import numpy as np


def glorot_uniform(n_in: int, n_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init on +-sqrt(6/(n_in+n_out))."""
    if n_in < 1 or n_out < 1:
        raise ValueError("layer dimensions must be >= 1")
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Dense:
    """Affine layer y = x W + b with weights of shape (in, out)."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.asarray(weights, dtype=float)
        bias = np.asarray(bias, dtype=float)
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ValueError("weights must be (in, out) with matching bias")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ValueError("dense parameters must be finite")
        self.weights = weights
        self.bias = bias
        self.grad_weights = np.zeros_like(weights)
        self.grad_bias = np.zeros_like(bias)
        self._x = None

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "Dense":
        return cls(glorot_uniform(n_in, n_out, rng), np.zeros(n_out))

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.weights.shape[0]:
            raise ValueError(
                f"dense input shape {x.shape} does not match weights "
                f"{self.weights.shape}")
        self._x = x
        return x @ self.weights + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._x
        if x is None or grad_out.shape != (x.shape[0], self.weights.shape[1]):
            raise ValueError("backward called with mismatched gradient shape")
        self.grad_weights = x.T @ grad_out
        self.grad_bias = grad_out.sum(axis=0)
        return grad_out @ self.weights.T

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.grad_weights, self.grad_bias]


class Relu:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._mask

    def params(self):
        return []

    def grads(self):
        return []


class Sigmoid:
    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._y = sigmoid(x)
        return self._y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._y * (1.0 - self._y)

    def params(self):
        return []

    def grads(self):
        return []


class BatchNorm:
    """Per-feature batch normalization with learned gain/shift.

    Train mode normalizes by batch statistics and updates the running
    averages; infer mode normalizes by the running averages.  Variances are
    biased (1/B) everywhere.
    """

    def __init__(self, size: int, eps: float = 1e-5, momentum: float = 0.9):
        if not eps > 0:
            raise ValueError("eps must be > 0")
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        self.gamma = np.ones(size)
        self.beta = np.zeros(size)
        self.running_mean = np.zeros(size)
        self.running_var = np.ones(size)
        self.eps = eps
        self.momentum = momentum
        self.grad_gamma = np.zeros(size)
        self.grad_beta = np.zeros(size)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != len(self.gamma):
            raise ValueError(f"batch norm input shape {x.shape} mismatched")
        if train:
            if x.shape[0] < 2:
                raise ValueError("train-mode batch norm needs batch size >= 2")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train)
        return self.gamma * xhat + self.beta

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        xhat, inv_std, train = self._cache
        self.grad_gamma = (grad_out * xhat).sum(axis=0)
        self.grad_beta = grad_out.sum(axis=0)
        gxhat = grad_out * self.gamma
        if not train:
            return gxhat * inv_std
        b = grad_out.shape[0]
        return (inv_std / b) * (
            b * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.grad_gamma, self.grad_beta]


class Adam:
    """Bias-corrected Adam over a fixed list of parameter arrays."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        grads = list(grads)
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ValueError("gradient shape does not match parameter")
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# stack helpers

def forward_stack(layers, x: np.ndarray, train: bool = False) -> np.ndarray:
    for layer in layers:
        x = layer.forward(x, train=train)
    return x


def backward_stack(layers, grad_out: np.ndarray) -> np.ndarray:
    for layer in reversed(layers):
        grad_out = layer.backward(grad_out)
    return grad_out


def stack_params(layers):
    out = []
    for layer in layers:
        out.extend(layer.params())
    return out


def stack_grads(layers):
    out = []
    for layer in layers:
        out.extend(layer.grads())
    return out


def get_flat_params(layers) -> np.ndarray:
    parts = [p.ravel() for p in stack_params(layers)]
    return np.concatenate(parts) if parts else np.zeros(0)


def set_flat_params(layers, vec: np.ndarray) -> None:
    offset = 0
    for p in stack_params(layers):
        p.flat[:] = vec[offset:offset + p.size]
        offset += p.size
    if offset != len(vec):
        raise ValueError("flat parameter vector has wrong length")


def get_flat_grads(layers) -> np.ndarray:
    parts = [g.ravel() for g in stack_grads(layers)]
    return np.concatenate(parts) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# serialization

_FORMAT_VERSION = 1


def layer_to_dict(layer) -> dict:
    if isinstance(layer, Dense):
        return {"kind": "dense",
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist()}
    if isinstance(layer, Relu):
        return {"kind": "relu"}
    if isinstance(layer, Sigmoid):
        return {"kind": "sigmoid"}
    if isinstance(layer, BatchNorm):
        return {"kind": "batch_norm",
                "gamma": layer.gamma.tolist(),
                "beta": layer.beta.tolist(),
                "running_mean": layer.running_mean.tolist(),
                "running_var": layer.running_var.tolist(),
                "eps": layer.eps,
                "momentum": layer.momentum}
    raise TypeError(f"cannot serialize layer of type {type(layer).__name__}")


def layer_from_dict(d: dict):
    kind = d["kind"]
    if kind == "dense":
        return Dense(np.array(d["weights"], dtype=float),
                     np.array(d["bias"], dtype=float))
    if kind == "relu":
        return Relu()
    if kind == "sigmoid":
        return Sigmoid()
    if kind == "batch_norm":
        layer = BatchNorm(len(d["gamma"]), eps=d["eps"], momentum=d["momentum"])
        layer.gamma = np.array(d["gamma"], dtype=float)
        layer.beta = np.array(d["beta"], dtype=float)
        layer.running_mean = np.array(d["running_mean"], dtype=float)
        layer.running_var = np.array(d["running_var"], dtype=float)
        return layer
    raise ValueError(f"unknown layer kind {kind!r}")


def stack_to_dict(layers) -> dict:
    return {"format_version": _FORMAT_VERSION,
            "layers": [layer_to_dict(l) for l in layers]}


def stack_from_dict(d: dict):
    if d.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported stack format {d.get('format_version')!r}")
    return [layer_from_dict(ld) for ld in d["layers"]]


# ---------------------------------------------------------------------------
# gradient verification

def numeric_gradient(f, vec: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function over a flat vector."""
    vec = np.asarray(vec, dtype=float)
    grad = np.zeros_like(vec)
    for i in range(len(vec)):
        bumped = vec.copy()
        bumped[i] = vec[i] + step
        hi = f(bumped)
        bumped[i] = vec[i] - step
        lo = f(bumped)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Scale-free distance between two gradient vectors."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)


def check_param_gradients(layers, loss_fn, step: float = 1e-5) -> float:
    """Compare analytic parameter gradients of a stack against central FD.

    ``loss_fn()`` must run a full forward/backward over the stack (filling
    layer gradients) and return the scalar loss.  Returns the relative error.
    """
    loss_fn()
    analytic = get_flat_grads(layers).copy()
    base = get_flat_params(layers).copy()

    def eval_at(vec):
        set_flat_params(layers, vec)
        value = loss_fn()
        return value

    try:
        numeric = numeric_gradient(eval_at, base, step=step)
    finally:
        set_flat_params(layers, base)
    return relative_error(analytic, numeric)
