"""Gradient-flow hitting-time analysis for L2 vs cubic objectives.

Per-sample absolute errors evolve as d/dt delta = -eta * delta (L2 flow) and
d/dt delta = -eta' * delta^2 (cubic flow), giving closed-form hitting times
t = (1/eta) ln(delta0/eps) and t = (1/eta') (1/eps - 1/delta0).  The speedup
condition compares the mean reciprocal initial error against
(eta/eta') ln(delta0/eps) / (delta0/eps - 1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class FlowLoss(enum.Enum):
    L2 = "l2"
    CUBIC = "cubic"


@dataclass
class FlowState:
    """Target estimates and per-flow step sizes; t advances with integration."""
    estimates: np.ndarray
    targets: np.ndarray
    eta: float = 1.0
    eta_prime: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=np.float64).ravel()
        self.targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if self.estimates.shape != self.targets.shape:
            raise ValueError("estimates and targets must have the same length")
        if self.eta <= 0 or self.eta_prime <= 0:
            raise ValueError("step sizes must be positive")


@dataclass
class FlowTrajectory:
    times: np.ndarray        # (T,)
    per_sample: np.ndarray   # (T, n) absolute errors
    total: np.ndarray        # (T,)


@dataclass
class HittingTimeReport:
    epsilon: float
    t_l2: float
    t_cubic: float
    condition_holds: bool
    h0_inverse: float
    condition_rhs: float = field(default=float("nan"))


def _check_times_args(delta0: float, epsilon: float, rate: float) -> None:
    if delta0 <= 0 or epsilon <= 0 or rate <= 0:
        raise ValueError("delta0, epsilon and the step size must be positive")
    if epsilon > delta0:
        raise ValueError(f"epsilon={epsilon} exceeds delta0={delta0}")


def closed_form_l2_time(delta0: float, epsilon: float, eta: float) -> float:
    """First time the L2-flow error drops from delta0 to epsilon."""
    _check_times_args(delta0, epsilon, eta)
    return np.log(delta0 / epsilon) / eta


def closed_form_cubic_time(delta0: float, epsilon: float, eta_prime: float) -> float:
    """First time the cubic-flow error drops from delta0 to epsilon."""
    _check_times_args(delta0, epsilon, eta_prime)
    return (1.0 / epsilon - 1.0 / delta0) / eta_prime


def speedup_condition(delta0_per_sample, epsilon: float, eta: float,
                      eta_prime: float) -> tuple[bool, float, float]:
    """(holds, lhs, rhs) where lhs is the mean reciprocal initial error and
    rhs = (eta/eta') ln(delta0/eps) / (delta0/eps - 1) with delta0 the total.

    lhs <= rhs guarantees the cubic flow reaches total error epsilon no later
    than the L2 flow.
    """
    d0 = np.asarray(delta0_per_sample, dtype=np.float64).ravel()
    if len(d0) == 0 or np.any(d0 <= 0):
        raise ValueError("per-sample initial errors must be positive")
    if eta <= 0 or eta_prime <= 0:
        raise ValueError("step sizes must be positive")
    total = d0.sum()
    if not (0 < epsilon <= total):
        raise ValueError(f"need 0 < epsilon <= total initial error {total}")
    lhs = float(np.mean(1.0 / d0))
    ratio = total / epsilon
    if ratio == 1.0:
        # limit of ln(r)/(r-1) as r -> 1
        rhs = eta / eta_prime
    else:
        rhs = (eta / eta_prime) * np.log(ratio) / (ratio - 1.0)
    return lhs <= rhs, lhs, float(rhs)


def integrate_flow(state: FlowState, loss: FlowLoss, dt: float, t_end: float,
                   record_every: int = 1) -> FlowTrajectory:
    """Forward-Euler integration of the chosen flow, sampling the trajectory
    every `record_every` steps (plus the initial and final points)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    x = state.estimates.copy()
    y = state.targets
    n_steps = int(round(t_end / dt))
    times = [state.t]
    per_sample = [np.abs(x - y)]
    for k in range(1, n_steps + 1):
        diff = x - y
        if loss is FlowLoss.L2:
            x = x - dt * state.eta * diff
        else:
            x = x - dt * state.eta_prime * np.abs(diff) * diff
        if k % record_every == 0 or k == n_steps:
            times.append(state.t + k * dt)
            per_sample.append(np.abs(x - y))
    per_sample = np.asarray(per_sample)
    return FlowTrajectory(np.asarray(times), per_sample, per_sample.sum(axis=1))


def euler_hitting_time(delta0_per_sample, loss: FlowLoss, rate: float,
                       epsilon: float, dt: float,
                       max_time: float = 1e6) -> float:
    """First-passage time of the total absolute error below epsilon, by
    forward Euler with linear interpolation between steps."""
    d = np.asarray(delta0_per_sample, dtype=np.float64).ravel().copy()
    if np.any(d < 0):
        raise ValueError("initial errors must be nonnegative")
    total = d.sum()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if total <= epsilon:
        return 0.0
    t = 0.0
    while t < max_time:
        if loss is FlowLoss.L2:
            d_new = d - dt * rate * d
        else:
            d_new = d - dt * rate * d * d
        new_total = d_new.sum()
        if new_total <= epsilon:
            frac = (total - epsilon) / (total - new_total)
            return t + frac * dt
        d, total, t = d_new, new_total, t + dt
    raise RuntimeError(f"no crossing of {epsilon} within t={max_time}")


def epsilon0_root(delta0: float, eta: float, eta_prime: float,
                  tol: float = 1e-12) -> float:
    """Crossing threshold for the per-sample comparison: the eps0 in
    (0, eta/eta') with f(eps0) = f(delta0) for f(x) = ln(1/x) - (eta/eta')/x.

    For eps in (eps0, delta0) the cubic flow hits eps first; below eps0 the
    L2 flow does.  Requires delta0 > eta/eta'.  Found by bisection (no real
    closed form exists).
    """
    r = eta / eta_prime
    if delta0 <= r:
        raise ValueError(f"delta0 must exceed eta/eta'={r}")

    def f(x: float) -> float:
        return np.log(1.0 / x) - r / x

    target = f(delta0)
    lo, hi = tol, r
    # f is increasing on (0, r]; f(lo) -> -inf, f(r) is the maximum > target
    while f(lo) > target:
        lo /= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hitting_ratio_table(delta0_grid, epsilon_grid, eta: float) -> np.ndarray:
    """Matrix of t_l2 / t_cubic over the (delta0, epsilon) grid with equal
    step sizes (eta = eta')."""
    d0 = np.asarray(delta0_grid, dtype=np.float64).ravel()
    eps = np.asarray(epsilon_grid, dtype=np.float64).ravel()
    if np.any(d0 <= 0) or np.any(eps <= 0):
        raise ValueError("grids must be positive")
    if np.any(eps[None, :] >= d0[:, None]):
        raise ValueError("every epsilon must be below every delta0")
    out = np.empty((len(d0), len(eps)))
    for i, d in enumerate(d0):
        for j, e in enumerate(eps):
            out[i, j] = (closed_form_l2_time(d, e, eta)
                         / closed_form_cubic_time(d, e, eta))
    return out
