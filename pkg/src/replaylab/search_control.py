"""SGLD search-control: Langevin hill-climbing on the log absolute TD error
of a state, with covariance-shaped noise, out-of-bounds restarts, an
EMA-driven acceptance threshold, and a FIFO state queue.

The chain update is s <- s + alpha_h * grad log(|y_hat - max_a Q(s,a)| + c)
+ X with X ~ N(0, noise_scale * Sigma_hat) and y_hat treated as a constant;
its stationary distribution concentrates on high-|TD-error| states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import DenseNetwork


@dataclass
class SGLDConfig:
    step_size: float = 0.1          # alpha_h
    noise_scale: float = 0.01       # multiplier on the empirical covariance
    states_per_harvest: int = 20    # m
    step_budget: int = 100          # k_b
    accept_ema_rate: float = 0.001  # beta
    log_smoothing: float = 1e-5

    def __post_init__(self):
        if min(self.step_size, self.noise_scale, self.accept_ema_rate,
               self.log_smoothing) <= 0:
            raise ValueError("SGLD scalars must be positive")
        if self.states_per_harvest < 0 or self.step_budget < 0:
            raise ValueError("counts must be nonnegative")
        if self.states_per_harvest > self.step_budget and self.step_budget > 0:
            raise ValueError("states_per_harvest must not exceed step_budget")


class EmpiricalCovariance:
    """Running covariance of the observed state stream.

    Identity before the first observation; afterwards
    Sigma = mean(s s^T) - mean(s) mean(s)^T.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.mean_outer = np.zeros((dim, dim))
        self.mean = np.zeros(dim)
        self.count = 0

    def update(self, state: np.ndarray) -> None:
        state = np.asarray(state, dtype=np.float64)
        self.count += 1
        self.mean_outer += (np.outer(state, state) - self.mean_outer) / self.count
        self.mean += (state - self.mean) / self.count

    @property
    def matrix(self) -> np.ndarray:
        if self.count == 0:
            return np.eye(self.dim)
        return self.mean_outer - np.outer(self.mean, self.mean)


@dataclass
class AcceptThreshold:
    """EMA of real-transition displacements; gates chain-state acceptance."""

    value: float = 0.0
    beta: float = 0.001

    def update(self, displacement: float) -> None:
        self.value = (1.0 - self.beta) * self.value + self.beta * displacement


class SearchControlQueue:
    """FIFO ring of states with O(1) uniform sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._count = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self._count

    def push(self, state: np.ndarray) -> None:
        self._states[self._cursor] = state
        self._cursor = (self._cursor + 1) % self.capacity
        self._count = min(self._count + 1, self.capacity)

    def push_many(self, states: np.ndarray) -> None:
        for s in np.atleast_2d(states):
            self.push(s)

    @property
    def states(self) -> np.ndarray:
        return self._states[:self._count]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self._count == 0:
            raise ValueError("search-control queue is empty")
        idx = rng.integers(0, self._count, size=n)
        return self._states[idx]


# -- objectives ------------------------------------------------------------


def td_objective_grad(qnet: DenseNetwork, model_oracle, state: np.ndarray,
                      gamma: float, log_smoothing: float = 1e-5):
    """Value and state-gradient of log(|y_hat - max_a Q(s,a)| + c).

    y_hat = r + gamma * max_a Q(s',a), with (s', r) from model_oracle(state,
    greedy_action); it is held constant, so only the Q(s, argmax) term is
    differentiated through the network input.
    """
    state = np.asarray(state, dtype=np.float64)
    acts, zs = qnet._forward_trace(state[None, :])
    q = acts[-1][0]
    a_star = int(np.argmax(q))
    next_state, reward = model_oracle(state, a_star)
    q_next = qnet.forward(np.asarray(next_state, dtype=np.float64))
    y_hat = reward + gamma * float(np.max(q_next))
    u = y_hat - q[a_star]
    value = float(np.log(abs(u) + log_smoothing))
    upstream = np.zeros((1, qnet.output_dim))
    upstream[0, a_star] = 1.0
    _, _, dx = qnet._backward_from_trace(acts, zs, upstream, need_params=False)
    grad = -np.sign(u) / (abs(u) + log_smoothing) * dx[0]
    return value, grad


def value_objective_grad(qnet: DenseNetwork, state: np.ndarray):
    """Value and state-gradient of max_a Q(s,a) (through the argmax action)."""
    state = np.asarray(state, dtype=np.float64)
    acts, zs = qnet._forward_trace(state[None, :])
    q = acts[-1][0]
    a_star = int(np.argmax(q))
    upstream = np.zeros((1, qnet.output_dim))
    upstream[0, a_star] = 1.0
    _, _, dx = qnet._backward_from_trace(acts, zs, upstream, need_params=False)
    return float(q[a_star]), dx[0]


def td_objective(qnet: DenseNetwork, model_oracle, gamma: float,
                 log_smoothing: float = 1e-5):
    """Objective callable state -> (value, grad) for harvesting."""
    def objective(state):
        return td_objective_grad(qnet, model_oracle, state, gamma, log_smoothing)
    return objective


def value_objective(qnet: DenseNetwork):
    def objective(state):
        return value_objective_grad(qnet, state)
    return objective


# -- chain machinery -------------------------------------------------------


def noise_factor(covariance: np.ndarray, noise_scale: float,
                 regularization: float = 1e-8) -> np.ndarray:
    """Square-root factor F with F F^T = noise_scale * (covariance + reg*I)."""
    cov = np.asarray(covariance, dtype=np.float64)
    sym = 0.5 * (cov + cov.T) + regularization * np.eye(len(cov))
    scaled = noise_scale * sym
    try:
        return np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(scaled)
        if vals.min() < -1e-10:
            raise RuntimeError(
                f"covariance not PSD after regularization (min eig {vals.min()})"
            )
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sgld_step(state: np.ndarray, grad: np.ndarray, config: SGLDConfig,
              covariance: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Langevin proposal: state + alpha_h * grad + N(0, scale * cov)."""
    factor = noise_factor(covariance, config.noise_scale)
    noise = factor @ rng.standard_normal(len(state))
    return np.asarray(state, dtype=np.float64) + config.step_size * grad + noise


def _harvest_core(objective, starts: np.ndarray, noise: np.ndarray,
                  step_size: float, eps_accept: float, m: int,
                  lower: np.ndarray, upper: np.ndarray) -> list[np.ndarray]:
    """Reference chain loop over pre-drawn restarts and noise rows.

    Every iteration (including out-of-bounds restarts) counts against the
    budget; acceptance requires ||anchor - s||_2 / sqrt(d) >= eps_accept.
    """
    k_b = len(noise)
    d = starts.shape[1]
    sqrt_d = np.sqrt(d)
    s = starts[0].copy()
    anchor = s.copy()
    restarts = 0
    out: list[np.ndarray] = []
    for i in range(k_b):
        if len(out) >= m:
            break
        _, grad = objective(s)
        proposal = s + step_size * grad + noise[i]
        if np.any(proposal < lower) or np.any(proposal > upper):
            restarts += 1
            s = starts[restarts].copy()
            anchor = s.copy()
            continue
        s = proposal
        if np.linalg.norm(anchor - s) / sqrt_d >= eps_accept:
            out.append(s.copy())
            anchor = s.copy()
    return out


def harvest_states(objective, start_sampler, config: SGLDConfig,
                   covariance: EmpiricalCovariance, accept: AcceptThreshold,
                   bounds, rng: np.random.Generator) -> list[np.ndarray]:
    """Run one SGLD chain and return up to m accepted in-bounds states.

    start_sampler(rng, size) supplies chain (re)start states drawn from the
    replay buffer; a None return means no states are available.  All
    randomness (restart states and noise) is pre-drawn so jitted and
    reference paths consume the rng identically.
    """
    lower, upper = (np.asarray(b, dtype=np.float64) for b in bounds)
    k_b = config.step_budget
    if k_b == 0:
        return []
    starts = start_sampler(rng, k_b + 1)
    if starts is None:
        return []
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    factor = noise_factor(covariance.matrix, config.noise_scale)
    noise = rng.standard_normal((k_b, len(lower))) @ factor.T
    return _harvest_core(objective, starts, noise, config.step_size,
                         accept.value, config.states_per_harvest, lower, upper)


def sgld_chain(grad_fn, start: np.ndarray, config: SGLDConfig, bounds,
               n_steps: int, rng: np.random.Generator,
               covariance: np.ndarray | None = None) -> np.ndarray:
    """Plain SGLD chain for stationarity studies: out-of-bounds proposals are
    rejected (the chain stays put).  Returns the (n_steps, d) state history."""
    lower, upper = (np.asarray(b, dtype=np.float64) for b in bounds)
    d = len(lower)
    if covariance is None:
        covariance = np.eye(d)
    factor = noise_factor(covariance, config.noise_scale)
    s = np.asarray(start, dtype=np.float64).copy()
    history = np.empty((n_steps, d))
    noise = rng.standard_normal((n_steps, d)) @ factor.T
    alpha = config.step_size
    for i in range(n_steps):
        _, grad = grad_fn(s)
        proposal = s + alpha * grad + noise[i]
        if not (np.any(proposal < lower) or np.any(proposal > upper)):
            s = proposal
        history[i] = s
    return history
