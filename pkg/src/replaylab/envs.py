"""Deterministic benchmark environments: continuous-state GridWorld and
MountainCar.

Both expose episodic interaction (reset/step with termination bookkeeping)
and a pure generative model `true_model(state, action)` queryable at any
in-bounds state regardless of episode history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BOUNDS_SLACK = 1e-9


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    num_actions: int
    state_lower: np.ndarray
    state_upper: np.ndarray
    max_episode_steps: int
    gamma: float


class GridWorld:
    """Unit-square world: start bottom-left, goal region [0.95,1]^2, a wall
    band across the middle with a single hole.

    Actions are {0: up, 1: down, 2: right, 3: left}, each moving step_size
    (clipped to the box).  A move whose straight-line displacement would
    cross the open interior of the wall band outside the hole is clipped at
    the band edge.  Reward is +1 on transitioning into the goal region, else
    0; episodes end on goal entry or after max_episode_steps.
    """

    STEP_SIZE = 0.05
    BAND_LO = 0.45
    BAND_HI = 0.50
    HOLE_LO = 0.65
    HOLE_HI = 0.80
    GOAL_LO = 0.95
    START = (0.0, 0.0)

    def __init__(self, max_episode_steps: int = 500, gamma: float = 0.99):
        self.max_episode_steps = max_episode_steps
        self.gamma = gamma
        self._t = 0

    @property
    def state_dim(self) -> int:
        return 2

    @property
    def num_actions(self) -> int:
        return 4

    def spec(self) -> EnvSpec:
        lo, hi = self.state_bounds()
        return EnvSpec(2, 4, lo, hi, self.max_episode_steps, self.gamma)

    def state_bounds(self):
        return np.zeros(2), np.ones(2)

    def in_goal(self, state) -> bool:
        return bool(state[0] >= self.GOAL_LO and state[1] >= self.GOAL_LO)

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        self._t = 0
        return np.array(self.START)

    def true_model(self, state, action: int):
        """Pure one-step dynamics; callable anywhere in bounds."""
        if not 0 <= action < 4:
            raise ValueError(f"action {action} out of range")
        x, y = float(state[0]), float(state[1])
        if not (-_BOUNDS_SLACK <= x <= 1.0 + _BOUNDS_SLACK
                and -_BOUNDS_SLACK <= y <= 1.0 + _BOUNDS_SLACK):
            raise ValueError(f"state {state} outside [0,1]^2")
        x = min(max(x, 0.0), 1.0)
        y = min(max(y, 0.0), 1.0)
        dx = self.STEP_SIZE * (1.0 if action == 2 else -1.0 if action == 3 else 0.0)
        dy = self.STEP_SIZE * (1.0 if action == 0 else -1.0 if action == 1 else 0.0)
        nx = min(max(x + dx, 0.0), 1.0)
        ny = min(max(y + dy, 0.0), 1.0)
        in_hole = self.HOLE_LO <= x <= self.HOLE_HI
        if dy != 0.0 and not in_hole:
            if y <= self.BAND_LO < ny:
                ny = self.BAND_LO
            elif y >= self.BAND_HI > ny:
                ny = self.BAND_HI
        if dx != 0.0 and self.BAND_LO < y < self.BAND_HI and in_hole:
            nx = min(max(nx, self.HOLE_LO), self.HOLE_HI)
        reward = 1.0 if (nx >= self.GOAL_LO and ny >= self.GOAL_LO) else 0.0
        return np.array((nx, ny)), reward

    def true_model_batch(self, states: np.ndarray, actions: np.ndarray):
        """Vectorized true_model over (n, 2) states and (n,) actions."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.asarray(actions, dtype=np.int64)
        x, y = states[:, 0], states[:, 1]
        dx = self.STEP_SIZE * ((actions == 2).astype(float)
                               - (actions == 3).astype(float))
        dy = self.STEP_SIZE * ((actions == 0).astype(float)
                               - (actions == 1).astype(float))
        nx = np.clip(x + dx, 0.0, 1.0)
        ny = np.clip(y + dy, 0.0, 1.0)
        in_hole = (x >= self.HOLE_LO) & (x <= self.HOLE_HI)
        up_block = (dy != 0) & ~in_hole & (y <= self.BAND_LO) & (ny > self.BAND_LO)
        dn_block = (dy != 0) & ~in_hole & (y >= self.BAND_HI) & (ny < self.BAND_HI)
        ny = np.where(up_block, self.BAND_LO, ny)
        ny = np.where(dn_block, self.BAND_HI, ny)
        lateral = (dx != 0) & (y > self.BAND_LO) & (y < self.BAND_HI) & in_hole
        nx = np.where(lateral, np.clip(nx, self.HOLE_LO, self.HOLE_HI), nx)
        next_states = np.stack([nx, ny], axis=1)
        rewards = ((nx >= self.GOAL_LO) & (ny >= self.GOAL_LO)).astype(np.float64)
        return next_states, rewards

    def step(self, state, action: int):
        next_state, reward = self.true_model(state, action)
        self._t += 1
        done = self.in_goal(next_state) or self._t >= self.max_episode_steps
        return next_state, reward, done


class MountainCar:
    """Canonical under-powered car: position in [-1.2, 0.6], velocity in
    [-0.07, 0.07], actions {0: push left, 1: coast, 2: push right}.

    Reward is -1 per step; the goal is position >= 0.5.
    """

    FORCE = 0.001
    GRAVITY = 0.0025
    MIN_POS, MAX_POS = -1.2, 0.6
    MAX_VEL = 0.07
    GOAL_POS = 0.5

    def __init__(self, max_episode_steps: int = 2000, gamma: float = 0.99):
        self.max_episode_steps = max_episode_steps
        self.gamma = gamma
        self._t = 0

    @property
    def state_dim(self) -> int:
        return 2

    @property
    def num_actions(self) -> int:
        return 3

    def spec(self) -> EnvSpec:
        lo, hi = self.state_bounds()
        return EnvSpec(2, 3, lo, hi, self.max_episode_steps, self.gamma)

    def state_bounds(self):
        return (np.array((self.MIN_POS, -self.MAX_VEL)),
                np.array((self.MAX_POS, self.MAX_VEL)))

    def in_goal(self, state) -> bool:
        return bool(state[0] >= self.GOAL_POS)

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        self._t = 0
        if rng is None:
            rng = np.random.default_rng(0)
        return np.array((rng.uniform(-0.6, -0.4), 0.0))

    def true_model(self, state, action: int):
        if not 0 <= action < 3:
            raise ValueError(f"action {action} out of range")
        pos, vel = float(state[0]), float(state[1])
        if not (self.MIN_POS - _BOUNDS_SLACK <= pos <= self.MAX_POS + _BOUNDS_SLACK
                and -self.MAX_VEL - _BOUNDS_SLACK <= vel
                <= self.MAX_VEL + _BOUNDS_SLACK):
            raise ValueError(f"state {state} outside bounds")
        pos = min(max(pos, self.MIN_POS), self.MAX_POS)
        vel = min(max(vel, -self.MAX_VEL), self.MAX_VEL)
        vel = vel + (action - 1) * self.FORCE - self.GRAVITY * math.cos(3.0 * pos)
        vel = min(max(vel, -self.MAX_VEL), self.MAX_VEL)
        pos = min(max(pos + vel, self.MIN_POS), self.MAX_POS)
        if pos <= self.MIN_POS and vel < 0.0:
            vel = 0.0
        return np.array((pos, vel)), -1.0

    def step(self, state, action: int):
        next_state, reward = self.true_model(state, action)
        self._t += 1
        done = self.in_goal(next_state) or self._t >= self.max_episode_steps
        return next_state, reward, done


def make_env(name: str, **kwargs) -> GridWorld | MountainCar:
    if name == "gridworld":
        return GridWorld(**kwargs)
    if name == "mountain_car":
        return MountainCar(**kwargs)
    raise ValueError(f"unknown environment {name!r}")
