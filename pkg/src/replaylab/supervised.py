"""Supervised regression with error-prioritized sampling.

Implements the L2 / cubic / power-4 objectives, uniform vs prioritized
mini-batch sampling (with partial or full priority refresh), the piecewise
sin dataset, and the exact-expectation machinery for checking that
prioritized-L2 gradients equal uniform cubic gradients up to the constant
c = mean absolute residual.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .net import Adam, DenseNetwork


class LossKind(enum.Enum):
    L2 = "l2"
    CUBIC = "cubic"
    POWER4 = "power4"


class SamplingScheme(enum.Enum):
    UNIFORM = "uniform"
    PRIORITIZED_PARTIAL = "prioritized_partial"
    PRIORITIZED_FULL = "prioritized_full"


@dataclass
class RegressionDataset:
    inputs: np.ndarray   # (n, d)
    targets: np.ndarray  # (n,)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal length")
        if len(self.targets) == 0:
            raise ValueError("dataset must be nonempty")

    @property
    def size(self) -> int:
        return len(self.targets)


def f_sin(x):
    """Piecewise target: sin(8*pi*x) on [-2, 0), sin(pi*x) on [0, 2]."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x < 0.0, np.sin(8.0 * np.pi * x), np.sin(np.pi * x))


def make_sin_dataset(n_train: int, noise_sigma: float,
                     seed: int | np.random.Generator = 0,
                     n_test: int = 1000):
    """Train set with Gaussian target noise, noise-free 1k-point test set.

    Inputs are drawn uniformly from [-2, 2] for both splits.
    """
    if n_train < 1:
        raise ValueError("n_train must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x_train = rng.uniform(-2.0, 2.0, size=n_train)
    y_train = f_sin(x_train) + noise_sigma * rng.standard_normal(n_train)
    x_test = rng.uniform(-2.0, 2.0, size=n_test)
    y_test = f_sin(x_test)
    train = RegressionDataset(x_train[:, None], y_train)
    test = RegressionDataset(x_test[:, None], y_test)
    return train, test


def residuals(net: DenseNetwork, data: RegressionDataset) -> np.ndarray:
    """f_theta(x_i) - y_i for every sample (batched forward pass)."""
    return net.forward_batch(data.inputs)[:, 0] - data.targets


def initial_priorities(net: DenseNetwork, data: RegressionDataset) -> np.ndarray:
    """Priority table computed from the (initial) network: |residual| per sample."""
    return np.abs(residuals(net, data))


def sampling_distribution(net: DenseNetwork, data: RegressionDataset):
    """Normalized |residual| distribution over the training set.

    Returns (q, uniform_fallback).  If every residual is exactly zero the
    distribution falls back to uniform and the flag is set.
    """
    r = np.abs(residuals(net, data))
    total = r.sum()
    if total == 0.0:
        n = data.size
        return np.full(n, 1.0 / n), True
    return r / total, False


def _grad_weights(r: np.ndarray, loss: LossKind) -> np.ndarray:
    """w_i such that the per-sample loss gradient is w_i * grad f(x_i).

    Per-sample losses: L2 = (1/2) r^2, Cubic = (1/3)|r|^3, Power4 = (1/4) r^4.
    """
    if loss is LossKind.L2:
        return r
    if loss is LossKind.CUBIC:
        return np.abs(r) * r
    if loss is LossKind.POWER4:
        return r ** 3
    raise ValueError(f"unknown loss {loss}")


def expected_gradient(net: DenseNetwork, data: RegressionDataset,
                      scheme: SamplingScheme, loss: LossKind,
                      q_override: np.ndarray | None = None):
    """Exact expectation over the sampling distribution of the per-sample
    loss gradient (full-dataset weighted sum, no sampling noise).

    q_override substitutes a (possibly stale) prioritized distribution.
    """
    r = residuals(net, data)
    if scheme is SamplingScheme.UNIFORM:
        probs = np.full(data.size, 1.0 / data.size)
    else:
        if q_override is not None:
            probs = np.asarray(q_override, dtype=np.float64)
        else:
            probs, _ = sampling_distribution(net, data)
    upstream = (probs * _grad_weights(r, loss))[:, None]
    return net.grad_params_batch(data.inputs, upstream)


def theorem1_residual(net: DenseNetwork, data: RegressionDataset,
                      q_override: np.ndarray | None = None) -> float:
    """Max-norm of c * E_prioritized[grad L2] - E_uniform[grad cubic] with
    c the mean absolute residual.  Zero (to rounding) when priorities are
    computed from the current parameters.
    """
    c = np.abs(residuals(net, data)).mean()
    dws_p, dbs_p = expected_gradient(net, data, SamplingScheme.PRIORITIZED_FULL,
                                     LossKind.L2, q_override=q_override)
    dws_u, dbs_u = expected_gradient(net, data, SamplingScheme.UNIFORM,
                                     LossKind.CUBIC)
    worst = 0.0
    for gp, gu in zip(dws_p + dbs_p, dws_u + dbs_u):
        gap = np.abs(c * gp - gu).max() if gp.size else 0.0
        worst = max(worst, gap)
    return worst


def evaluate_rmse(net: DenseNetwork, data: RegressionDataset) -> float:
    """Root mean squared residual over the dataset."""
    r = residuals(net, data)
    return float(np.sqrt(np.mean(r * r)))


def sgd_epoch(net: DenseNetwork, data: RegressionDataset,
              scheme: SamplingScheme, loss: LossKind, batch_size: int,
              optimizer: Adam, priority_table: np.ndarray,
              rng: np.random.Generator, updates: int = 1,
              cubic_match_scale: bool = False) -> None:
    """Run `updates` mini-batch Adam steps under the given sampling scheme.

    Uniform sampling ignores the priority table entirely.  Prioritized
    schemes draw proportionally to it (with replacement); the partial scheme
    refreshes only the sampled indices afterwards, the full scheme recomputes
    the whole table under the post-update parameters.  With
    cubic_match_scale the mini-batch gradient is divided by the current mean
    absolute residual (the equivalence constant).

    net, optimizer and priority_table are updated in place.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = data.size
    for _ in range(updates):
        if scheme is SamplingScheme.UNIFORM:
            idx = rng.integers(0, n, size=batch_size)
        else:
            total = priority_table.sum()
            if total <= 0.0:
                idx = rng.integers(0, n, size=batch_size)
            else:
                idx = rng.choice(n, size=batch_size, replace=True,
                                 p=priority_table / total)
        xs = data.inputs[idx]
        ys = data.targets[idx]
        r = net.forward_batch(xs)[:, 0] - ys
        upstream = (_grad_weights(r, loss) / batch_size)[:, None]
        if cubic_match_scale:
            c = np.abs(residuals(net, data)).mean()
            if c > 0.0:
                upstream = upstream / c
        dws, dbs = net.grad_params_batch(xs, upstream)
        optimizer.step([net.theta], [net.flatten_grads(dws, dbs)])
        if scheme is SamplingScheme.PRIORITIZED_FULL:
            priority_table[:] = np.abs(residuals(net, data))
        elif scheme is SamplingScheme.PRIORITIZED_PARTIAL:
            uniq = np.unique(idx)
            new_r = net.forward_batch(data.inputs[uniq])[:, 0] - data.targets[uniq]
            priority_table[uniq] = np.abs(new_r)
