"""Minimal dense-network engine: forward pass, exact parameter and input
gradients, and an Adam optimizer.

Everything is float64 and numpy-only.  Networks are plain containers of
per-layer weight matrices/bias vectors; hidden layers share one activation,
the output layer is always linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "linear")


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_deriv(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "relu":
        # subgradient at exactly 0 is defined as 0
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


def _carve(flat: np.ndarray, layer_sizes: list[int]):
    """Slice a flat parameter vector into per-layer weight/bias views."""
    weights, biases = [], []
    offset = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(flat[offset:offset + fan_out * fan_in]
                       .reshape(fan_out, fan_in))
        offset += fan_out * fan_in
        biases.append(flat[offset:offset + fan_out])
        offset += fan_out
    return weights, biases


def param_count(layer_sizes) -> int:
    return sum((i + 1) * o for i, o in zip(layer_sizes[:-1], layer_sizes[1:]))


class DenseNetwork:
    """Fully-connected network with shared hidden activation, linear output.

    weights[l] has shape (layer_sizes[l+1], layer_sizes[l]); biases[l] has
    length layer_sizes[l+1].  All parameters live in one flat vector
    (`theta`); the per-layer arrays are views into it.
    """

    def __init__(self, layer_sizes, activation: str, theta: np.ndarray):
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.activation = activation
        if len(theta) != param_count(self.layer_sizes):
            raise ValueError("theta length does not match layer sizes")
        self.theta = theta
        self.weights, self.biases = _carve(theta, self.layer_sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...] (array views)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def flatten_grads(self, dws, dbs) -> np.ndarray:
        """Pack per-layer gradients into a theta-shaped flat vector."""
        flat = np.empty_like(self.theta)
        gws, gbs = _carve(flat, self.layer_sizes)
        for dst, src in zip(gws, dws):
            dst[...] = src
        for dst, src in zip(gbs, dbs):
            dst[...] = src
        return flat

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(list(self.layer_sizes), self.activation,
                            self.theta.copy())

    def load_from(self, other: "DenseNetwork") -> None:
        """Copy another network's parameter values into this one in place."""
        np.copyto(self.theta, other.theta)

    # -- forward ---------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Output vector for a single input vector.  Pure."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(
                f"input has shape {x.shape}, expected ({self.input_dim},)"
            )
        a = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = w @ a + b
            a = z if l == last else _act(z, self.activation)
        return a

    def forward_batch(self, xs: np.ndarray) -> np.ndarray:
        """(B, in) -> (B, out).  Row-wise identical to forward()."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ValueError(
                f"batch has shape {xs.shape}, expected (B, {self.input_dim})"
            )
        a = xs
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if l == last else _act(z, self.activation)
        return a

    def _forward_trace(self, xs: np.ndarray):
        """Forward over a batch keeping activations and pre-activations."""
        acts = [xs]
        zs = []
        a = xs
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            zs.append(z)
            a = z if l == last else _act(z, self.activation)
            acts.append(a)
        return acts, zs

    # -- gradients -------------------------------------------------------

    def grad_params(self, x: np.ndarray, upstream: np.ndarray):
        """Gradients of upstream . output w.r.t. all parameters.

        Returns (dweights, dbiases) shaped like (weights, biases).
        """
        dws, dbs, _ = self._backward(np.asarray(x, float)[None, :],
                                     np.asarray(upstream, float)[None, :])
        return dws, dbs

    def grad_input(self, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        """Gradient of upstream . output w.r.t. the input vector."""
        _, _, dx = self._backward(np.asarray(x, float)[None, :],
                                  np.asarray(upstream, float)[None, :],
                                  need_params=False)
        return dx[0]

    def grad_params_batch(self, xs: np.ndarray, upstream: np.ndarray):
        """Sum over the batch of per-sample grad_params with per-row upstream."""
        return self._backward(xs, upstream)[:2]

    def _backward(self, xs: np.ndarray, upstream: np.ndarray,
                  need_params: bool = True):
        xs = np.asarray(xs, dtype=np.float64)
        upstream = np.asarray(upstream, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ValueError(f"bad input batch shape {xs.shape}")
        if upstream.shape != (xs.shape[0], self.output_dim):
            raise ValueError(
                f"upstream has shape {upstream.shape}, expected "
                f"({xs.shape[0]}, {self.output_dim})"
            )
        acts, zs = self._forward_trace(xs)
        return self._backward_from_trace(acts, zs, upstream, need_params)

    def _backward_from_trace(self, acts, zs, upstream: np.ndarray,
                             need_params: bool = True):
        upstream = np.asarray(upstream, dtype=np.float64)
        n_layers = len(self.weights)
        dws = [None] * n_layers if need_params else None
        dbs = [None] * n_layers if need_params else None
        delta = upstream
        for l in range(n_layers - 1, -1, -1):
            if need_params:
                dws[l] = delta.T @ acts[l]
                dbs[l] = delta.sum(axis=0)
            delta = delta @ self.weights[l]
            if l > 0:
                delta = delta * _act_deriv(zs[l - 1], self.activation)
        return dws, dbs, delta


def init_network(layer_sizes, activation: str = "tanh",
                 seed: int | np.random.Generator = 0) -> DenseNetwork:
    """Build a network: uniform-Xavier hidden layers, zero hidden biases,
    output-layer weights and biases uniform in [-0.003, 0.003].

    Deterministic for a fixed seed.
    """
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2:
        raise ValueError("layer_sizes needs at least input and output sizes")
    if any(s <= 0 for s in layer_sizes):
        raise ValueError(f"layer_sizes must be positive, got {layer_sizes}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    net = DenseNetwork(layer_sizes, activation,
                       np.empty(param_count(layer_sizes)))
    n_layers = len(layer_sizes) - 1
    for l in range(n_layers):
        fan_in, fan_out = layer_sizes[l], layer_sizes[l + 1]
        if l == n_layers - 1:
            net.weights[l][...] = rng.uniform(-0.003, 0.003,
                                              size=(fan_out, fan_in))
            net.biases[l][...] = rng.uniform(-0.003, 0.003, size=fan_out)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            net.weights[l][...] = rng.uniform(-limit, limit,
                                              size=(fan_out, fan_in))
            net.biases[l][...] = 0.0
    return net


@dataclass
class Adam:
    """Adam with bias correction over a flat list of parameter arrays.

    Moments start at zero; step_count increments by exactly one per update.
    """

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """One in-place Adam update."""
        if not self.first_moment:
            self.first_moment = [np.zeros_like(p) for p in params]
            self.second_moment = [np.zeros_like(p) for p in params]
        if len(params) != len(self.first_moment):
            raise ValueError("parameter list length changed between steps")
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.first_moment, self.second_moment):
            if g.shape != p.shape:
                raise ValueError(f"grad shape {g.shape} != param shape {p.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: Adam) -> tuple[list[np.ndarray], Adam]:
    """Functional wrapper over Adam.step; returns the (mutated) params/state."""
    state.step(params, grads)
    return params, state
