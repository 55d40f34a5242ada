"""Distribution analytics over a discretized 2-D state space: the ideal
|TD-error| distribution computed with a true model, empirical state
histograms, weighted L1 distances, entropy, and the finite-MDP checker for
the model-error bound on sampling distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import DenseNetwork


@dataclass
class GridDistribution:
    """Probabilities over resolution^2 cells, flat index = ix * res + iy."""

    resolution: int
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if len(self.probs) != self.resolution ** 2:
            raise ValueError("probs length must equal resolution^2")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = self.probs.sum()
        if not np.isclose(total, 1.0, atol=1e-9):
            raise ValueError(f"probabilities sum to {total}, expected 1")

    def as_matrix(self) -> np.ndarray:
        return self.probs.reshape(self.resolution, self.resolution)


def cell_indices(states: np.ndarray, resolution: int, lower, upper) -> np.ndarray:
    """Map states to flat cell indices: floor along each axis, clamped."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    rel = (states - lower) / (upper - lower)
    ij = np.clip(np.floor(rel * resolution).astype(np.int64), 0, resolution - 1)
    return ij[:, 0] * resolution + ij[:, 1]


def empirical_distribution(states, resolution: int, lower=(0.0, 0.0),
                           upper=(1.0, 1.0)) -> GridDistribution:
    """Normalized visit histogram of the given states."""
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if len(states) == 0:
        raise ValueError("empty state list")
    idx = cell_indices(states, resolution, lower, upper)
    counts = np.bincount(idx, minlength=resolution ** 2).astype(np.float64)
    return GridDistribution(resolution, counts / counts.sum())


def ideal_distribution(qnet: DenseNetwork, env, resolution: int = 50):
    """Brute-force |TD error| over the grid, normalized.

    Each cell is represented by its left-bottom vertex; the TD error uses the
    greedy action and the environment's true model:
    |r + gamma * max_a Q(s', a) - max_a Q(s, a)|.

    Returns (GridDistribution, uniform_fallback_flag).
    """
    lower, upper = env.state_bounds()
    k = np.arange(resolution) / resolution
    xs = lower[0] + k * (upper[0] - lower[0])
    ys = lower[1] + k * (upper[1] - lower[1])
    reps = np.stack([np.repeat(xs, resolution), np.tile(ys, resolution)], axis=1)
    q = qnet.forward_batch(reps)
    greedy = np.argmax(q, axis=1)
    v = q[np.arange(len(reps)), greedy]
    next_states = np.empty_like(reps)
    rewards = np.empty(len(reps))
    for i, (s, a) in enumerate(zip(reps, greedy)):
        ns, r = env.true_model(s, int(a))
        next_states[i] = ns
        rewards[i] = r
    v_next = qnet.forward_batch(next_states).max(axis=1)
    delta = np.abs(rewards + env.gamma * v_next - v)
    total = delta.sum()
    if total == 0.0:
        n = resolution ** 2
        return GridDistribution(resolution, np.full(n, 1.0 / n)), True
    return GridDistribution(resolution, delta / total), False


def weighted_distance(p: GridDistribution, p_star: GridDistribution,
                      weighting: str = "uniform",
                      d_pi: GridDistribution | None = None) -> float:
    """Weighted L1 discrepancy between two grid distributions.

    uniform: (1/res^2) * sum |p - p*|;  on_policy: sum d_pi * |p - p*|.
    """
    if p.resolution != p_star.resolution:
        raise ValueError("resolution mismatch")
    diff = np.abs(p.probs - p_star.probs)
    if weighting == "uniform":
        return float(diff.mean())
    if weighting == "on_policy":
        if d_pi is None or d_pi.resolution != p.resolution:
            raise ValueError("on_policy weighting needs a matching d_pi")
        return float(np.dot(d_pi.probs, diff))
    raise ValueError(f"unknown weighting {weighting!r}")


def entropy(p: GridDistribution) -> float:
    """Shannon entropy (natural log) with 0 * ln 0 = 0."""
    probs = p.probs[p.probs > 0]
    return float(-(probs * np.log(probs)).sum())


def tv_distance(p: GridDistribution, q: GridDistribution) -> float:
    """Total variation distance (half L1) between grid distributions."""
    if p.resolution != q.resolution:
        raise ValueError("resolution mismatch")
    return float(0.5 * np.abs(p.probs - q.probs).sum())


# -- finite-MDP sampling-distribution error bound ---------------------------


@dataclass
class BoundInputs:
    """Exact finite-MDP quantities for the model-error bound check.

    transition / transition_hat are row-stochastic state-to-state kernels
    (policy folded in); rewards[s, s'] is the deterministic reward of the
    transition; values is the fixed state-value vector used by both TD
    errors.  eps_s is the per-state L1 kernel distance (the proof's
    total-variation integral), eps its sum, v_max = r_max / (1 - gamma).
    """

    transition: np.ndarray
    transition_hat: np.ndarray
    rewards: np.ndarray
    gamma: float
    values: np.ndarray
    r_max: float

    def __post_init__(self):
        t, th = self.transition, self.transition_hat
        n = len(self.values)
        if t.shape != (n, n) or th.shape != (n, n) or self.rewards.shape != (n, n):
            raise ValueError("kernel/reward shapes must be (n, n)")
        for name, kernel in (("transition", t), ("transition_hat", th)):
            if np.any(kernel < 0) or not np.allclose(kernel.sum(axis=1), 1.0,
                                                     atol=1e-9):
                raise ValueError(f"{name} must be row-stochastic")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if np.abs(self.rewards).max() > self.r_max + 1e-12:
            raise ValueError("rewards exceed r_max")
        if np.abs(self.values).max() > self.v_max + 1e-12:
            raise ValueError("values exceed v_max")

    @property
    def v_max(self) -> float:
        return self.r_max / (1.0 - self.gamma)

    @property
    def eps_s(self) -> np.ndarray:
        return np.abs(self.transition - self.transition_hat).sum(axis=1)

    @property
    def eps(self) -> float:
        return float(self.eps_s.sum())


def expected_abs_td(kernel: np.ndarray, rewards: np.ndarray, gamma: float,
                    values: np.ndarray) -> np.ndarray:
    """u(s) = |E_{s'~kernel}[r + gamma v(s')] - v(s)| per state."""
    y = (kernel * (rewards + gamma * values[None, :])).sum(axis=1)
    return np.abs(y - values)


def theorem4_check(inputs: BoundInputs):
    """Verify |p - p_hat| <= min(Vmax(p*eps + eps_s)/Z_hat, Vmax(p_hat*eps + eps_s)/Z).

    Returns (max_violation, per_state_violations); nonpositive violations
    mean the bound holds.
    """
    u = expected_abs_td(inputs.transition, inputs.rewards, inputs.gamma,
                        inputs.values)
    u_hat = expected_abs_td(inputs.transition_hat, inputs.rewards,
                            inputs.gamma, inputs.values)
    z, z_hat = u.sum(), u_hat.sum()
    if z == 0.0 or z_hat == 0.0:
        raise ValueError("degenerate normalizer: all TD errors are zero")
    p, p_hat = u / z, u_hat / z_hat
    eps_s, eps, v_max = inputs.eps_s, inputs.eps, inputs.v_max
    bound = np.minimum(v_max * (p * eps + eps_s) / z_hat,
                       v_max * (p_hat * eps + eps_s) / z)
    violations = np.abs(p - p_hat) - bound
    return float(violations.max()), violations


def random_bound_inputs(n_states: int, gamma: float, mix: float,
                        rng: np.random.Generator,
                        r_max: float = 1.0) -> BoundInputs:
    """Random finite MDP plus a perturbed kernel: T_hat mixes T with an
    independent random kernel at rate `mix` (per-state L1 error <= 2*mix)."""
    t = rng.dirichlet(np.ones(n_states), size=n_states)
    other = rng.dirichlet(np.ones(n_states), size=n_states)
    t_hat = (1.0 - mix) * t + mix * other
    rewards = rng.uniform(-r_max, r_max, size=(n_states, n_states))
    v_max = r_max / (1.0 - gamma)
    values = rng.uniform(-v_max, v_max, size=n_states)
    return BoundInputs(t, t_hat, rewards, gamma, values, r_max)
