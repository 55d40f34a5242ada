"""DQN and its replay variants (ER, PrioritizedER, Full-PrioritizedER) plus
Dyna agents with SGLD search-control (TD-error or value objectives), and the
episodic training loops that drive them.

All loops split the seed into independent rng streams (env/exploration,
batch sampling, search-control, evaluation) so variants that skip a
subsystem stay bit-comparable with ones that use it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _sc_fast
from .envs import GridWorld
from .model import LearnedModel
from .net import Adam, init_network
from .replay import EmptyBufferError, SumTreeBuffer, Transition, UniformReplay
from .search_control import (AcceptThreshold, EmpiricalCovariance, SGLDConfig,
                             SearchControlQueue, _harvest_core, noise_factor,
                             td_objective, value_objective)

DQN_VARIANTS = ("er", "prioritized_er", "full_prioritized_er")
DYNA_VARIANTS = ("dyna_td", "dyna_td_long", "dyna_value", "dyna_td_learned")


@dataclass
class AgentConfig:
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    learning_rate: float = 1e-3
    gamma: float = 0.99
    epsilon_greedy: float = 0.1
    batch_size: int = 32
    buffer_capacity: int = 50000
    warmup_steps: int = 5000
    target_sync_period: int = 1000
    updates_per_step: int = 1          # n planning / mini-batch updates
    eval_every: int = 1000
    mixing_rate: float = 0.5           # rho, Dyna mixed mini-batches
    sc_queue_capacity: int = 10000
    recency_capacity: int = 3000


@dataclass
class LogRow:
    env_step: int
    eval_return: float
    train_mean_abs_td: float
    wall_clock_seconds: float
    extras: dict = field(default_factory=dict)


class DQNAgent:
    """Q network + target snapshot + Adam, with epsilon-greedy action policy."""

    def __init__(self, state_dim: int, num_actions: int, config: AgentConfig,
                 seed: int | np.random.Generator = 0):
        self.config = config
        self.num_actions = num_actions
        sizes = [state_dim, *config.hidden, num_actions]
        self.qnet = init_network(sizes, config.activation, seed)
        self.target_net = self.qnet.copy()
        self.optimizer = Adam(config.learning_rate)
        self.updates_done = 0
        self.env_steps = 0

    def greedy_action(self, state) -> int:
        return int(np.argmax(self.qnet.forward(np.asarray(state, float))))

    def act(self, state, rng: np.random.Generator) -> int:
        """Epsilon-greedy; purely uniform during warmup."""
        if self.env_steps < self.config.warmup_steps:
            return int(rng.integers(self.num_actions))
        if rng.uniform() < self.config.epsilon_greedy:
            return int(rng.integers(self.num_actions))
        return self.greedy_action(state)

    def sync_target(self) -> None:
        self.target_net.load_from(self.qnet)

    def td_targets(self, rewards, next_states, dones) -> np.ndarray:
        boot = self.target_net.forward_batch(next_states).max(axis=1)
        return np.where(dones, rewards, rewards + self.config.gamma * boot)

    def compute_priorities(self, states, actions, rewards, next_states,
                           dones) -> np.ndarray:
        """|TD error| with the live network on both terms (the priority
        signal is the current Bellman residual, not the training loss against
        the frozen target)."""
        q_sa = self.qnet.forward_batch(states)[np.arange(len(states)), actions]
        boot = self.qnet.forward_batch(next_states).max(axis=1)
        target = np.where(dones, rewards, rewards + self.config.gamma * boot)
        return np.abs(target - q_sa)

    def q_update(self, states, actions, rewards, next_states, dones) -> np.ndarray:
        """One semi-gradient Adam step on the batch; returns per-transition |delta|."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        n = len(states)
        if n == 0:
            raise ValueError("empty batch")
        actions = np.asarray(actions, dtype=np.int64)
        acts, zs = self.qnet._forward_trace(states)
        q_sa = acts[-1][np.arange(n), actions]
        delta = self.td_targets(np.asarray(rewards, float), next_states,
                                np.asarray(dones, bool)) - q_sa
        upstream = np.zeros((n, self.num_actions))
        upstream[np.arange(n), actions] = -delta / n
        dws, dbs, _ = self.qnet._backward_from_trace(acts, zs, upstream)
        self.optimizer.step([self.qnet.theta],
                            [self.qnet.flatten_grads(dws, dbs)])
        self.updates_done += 1
        if self.updates_done % self.config.target_sync_period == 0:
            self.sync_target()
        return np.abs(delta)


def greedy_episode(env, agent: DQNAgent, rng: np.random.Generator) -> float:
    """One greedy (epsilon = 0) evaluation episode; returns the episodic return."""
    state = env.reset(rng)
    total = 0.0
    done = False
    while not done:
        action = agent.greedy_action(state)
        state, reward, done = env.step(state, action)
        total += reward
    return total


def _gather(storage, idx: np.ndarray):
    return (storage.states[idx], storage.actions[idx], storage.rewards[idx],
            storage.next_states[idx], storage.dones[idx])


class _FullRefreshCache:
    """Per-update full-sweep priority recomputation: |TD error| of every
    stored transition under the current live network (both terms).

    Two fused forward passes over the buffer when the jitted kernels are
    available; bit-identical to refresh_all_priorities with the agent's
    priority function (differentially tested)."""

    def __init__(self, agent: DQNAgent, buffer: SumTreeBuffer):
        self.agent = agent
        self.buffer = buffer

    def on_push(self, slot: int) -> None:
        pass  # insertion priority handled by the caller (max-priority rule)

    def refresh(self) -> None:
        st = self.buffer.storage
        c = self.buffer.count
        if c == 0:
            return
        qnet = self.agent.qnet
        if _sc_fast.HAVE_NUMBA and len(qnet.weights) == 3 and \
                qnet.activation in ("tanh", "relu"):
            act_id = (_sc_fast.ACT_TANH if qnet.activation == "tanh"
                      else _sc_fast.ACT_RELU)
            w, b = qnet.weights, qnet.biases
            q_sa = np.empty(c)
            _sc_fast.q_selected_batch(w[0], b[0], w[1], b[1], w[2], b[2],
                                      act_id, st.states[:c], st.actions[:c],
                                      q_sa)
            boot = np.empty(c)
            _sc_fast.q_max_batch(w[0], b[0], w[1], b[1], w[2], b[2], act_id,
                                 st.next_states[:c], boot)
        else:
            q_sa = qnet.forward_batch(st.states[:c])[np.arange(c),
                                                     st.actions[:c]]
            boot = qnet.forward_batch(st.next_states[:c]).max(axis=1)
        gamma = self.agent.config.gamma
        target = np.where(st.dones[:c], st.rewards[:c],
                          st.rewards[:c] + gamma * boot)
        self.buffer.set_all_priorities(np.abs(target - q_sa))


def run_dqn_loop(env, variant: str, config: AgentConfig, total_steps: int,
                 seed: int, analysis_hook: Callable | None = None,
                 eval_env=None, row_callback: Callable | None = None) -> list[LogRow]:
    """Model-free DQN loop; variant picks the replay/priority scheme."""
    if variant not in DQN_VARIANTS:
        raise ValueError(f"unknown DQN variant {variant!r}")
    rng_env, rng_batch, _, rng_eval = np.random.default_rng(seed).spawn(4)
    agent = DQNAgent(env.state_dim, env.num_actions, config,
                     np.random.default_rng(seed + 777))
    prioritized = variant != "er"
    if prioritized:
        buffer = SumTreeBuffer(config.buffer_capacity, env.state_dim)
    else:
        buffer = UniformReplay(config.buffer_capacity, env.state_dim)
    cache = _FullRefreshCache(agent, buffer) if variant == "full_prioritized_er" else None
    eval_env = eval_env if eval_env is not None else type(env)(
        max_episode_steps=env.max_episode_steps, gamma=env.gamma)

    rows: list[LogRow] = []
    td_sum, td_count = 0.0, 0
    hook_time = 0.0
    t0 = time.perf_counter()
    state = env.reset(rng_env)
    for step in range(1, total_steps + 1):
        action = agent.act(state, rng_env)
        next_state, reward, done = env.step(state, action)
        # step-cap endings are truncations, not terminal states: only goal
        # entry stops the bootstrap
        tr = Transition(state, action, next_state, reward,
                        env.in_goal(next_state))
        if prioritized:
            slot = buffer.push(tr, buffer.max_priority())
        else:
            slot = buffer.push(tr)
        if cache is not None:
            cache.on_push(slot)
        agent.env_steps = step
        if step > config.warmup_steps:
            for _ in range(config.updates_per_step):
                abs_td = _dqn_update(agent, buffer, variant, config, rng_batch,
                                     cache)
                td_sum += abs_td.sum()
                td_count += len(abs_td)
        state = env.reset(rng_env) if done else next_state
        if step % config.eval_every == 0:
            ret = greedy_episode(eval_env, agent, rng_eval)
            extras = {}
            if analysis_hook is not None:
                h0 = time.perf_counter()
                extras = analysis_hook(step=step, agent=agent, env=env,
                                       buffer=buffer, queue=None, recency=None)
                hook_time += time.perf_counter() - h0
            rows.append(LogRow(step, ret,
                               td_sum / td_count if td_count else float("nan"),
                               time.perf_counter() - t0 - hook_time, extras))
            if row_callback is not None:
                row_callback(rows[-1])
            td_sum, td_count = 0.0, 0
    return rows


def _dqn_update(agent: DQNAgent, buffer, variant: str, config: AgentConfig,
                rng: np.random.Generator, cache) -> np.ndarray:
    b = config.batch_size
    if variant == "er":
        idx = buffer.sample_uniform_indices(b, rng)
    else:
        # bias correction: half uniform, half proportional, no importance weights
        half = b // 2
        try:
            idx_p = buffer.sample_proportional_indices(half, rng)
        except EmptyBufferError:
            idx_p = buffer.sample_uniform_indices(half, rng)
        idx_u = buffer.sample_uniform_indices(b - half, rng)
        idx = np.concatenate([idx_p, idx_u])
    batch = _gather(buffer.storage, idx)
    abs_td = agent.q_update(*batch)
    if variant == "prioritized_er":
        # only the sampled indices get refreshed, and with the in-update TD
        # error (the stale-priority scheme under study); repeated indices
        # keep the last write
        buffer.update_priorities(idx, abs_td)
    elif variant == "full_prioritized_er":
        cache.refresh()
    return abs_td


class ModelOracle:
    """Callable (state, action) -> (next_state, reward) with an optional
    vectorized `.batch(states, actions)` sibling."""

    def __init__(self, fn: Callable, batch: Callable | None = None):
        self.fn = fn
        self.batch = batch

    def __call__(self, state, action):
        return self.fn(state, action)


class _RecencyBuffer:
    """Ring of the most recent real states (d-pi estimate source)."""

    def __init__(self, capacity: int, state_dim: int):
        self._states = np.zeros((capacity, state_dim))
        self.capacity = capacity
        self.count = 0
        self.cursor = 0

    def push(self, state) -> None:
        self._states[self.cursor] = state
        self.cursor = (self.cursor + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    @property
    def states(self) -> np.ndarray:
        return self._states[:self.count]


def _harvest(agent: DQNAgent, env, buffer: UniformReplay,
             queue: SearchControlQueue, cov: EmpiricalCovariance,
             accept: AcceptThreshold, sgld: SGLDConfig, objective_kind: str,
             model_oracle, rng: np.random.Generator, use_fast: bool) -> None:
    """One harvest: pre-draw randomness, run the chain (jitted when possible),
    push accepted states into the queue."""
    k_b = sgld.step_budget
    if k_b == 0 or buffer.count == 0:
        return
    idx = rng.integers(0, buffer.count, size=k_b + 1)
    starts = buffer.storage.states[idx]
    factor = noise_factor(cov.matrix, sgld.noise_scale)
    noise = rng.standard_normal((k_b, env.state_dim)) @ factor.T
    fast_ok = (use_fast and _sc_fast.HAVE_NUMBA and isinstance(env, GridWorld)
               and len(agent.qnet.weights) == 3
               and agent.qnet.activation in ("tanh", "relu"))
    if fast_ok:
        w = agent.qnet.weights
        bvec = agent.qnet.biases
        out = np.empty((sgld.states_per_harvest, env.state_dim))
        n_acc = _sc_fast.harvest_chain_gridworld(
            w[0], bvec[0], w[1], bvec[1], w[2], bvec[2],
            _sc_fast.ACT_TANH if agent.qnet.activation == "tanh" else _sc_fast.ACT_RELU,
            _sc_fast.OBJECTIVE_TD if objective_kind == "td" else _sc_fast.OBJECTIVE_VALUE,
            agent.config.gamma, sgld.step_size, sgld.log_smoothing,
            env.STEP_SIZE, env.BAND_LO, env.BAND_HI, env.HOLE_LO, env.HOLE_HI,
            env.GOAL_LO, starts, noise, accept.value,
            sgld.states_per_harvest, out)
        accepted = out[:n_acc]
    else:
        if objective_kind == "td":
            objective = td_objective(agent.qnet, model_oracle,
                                     agent.config.gamma, sgld.log_smoothing)
        else:
            objective = value_objective(agent.qnet)
        lower, upper = env.state_bounds()
        accepted = _harvest_core(objective, starts, noise, sgld.step_size,
                                 accept.value, sgld.states_per_harvest,
                                 lower, upper)
    for s in accepted:
        queue.push(s)


def run_dyna_loop(env, config: AgentConfig, sgld: SGLDConfig,
                  objective_kind: str, model_kind: str, total_steps: int,
                  seed: int, analysis_hook: Callable | None = None,
                  use_fast: bool = True,
                  row_callback: Callable | None = None) -> list[LogRow]:
    """Dyna loop: real steps feed the ER buffer, SGLD harvests feed the
    search-control queue, planning updates train on rho-mixed mini-batches.

    objective_kind: 'td' (TD-error objective) or 'value' (value objective).
    model_kind: 'true' (environment model) or 'learned' (online model).
    """
    if objective_kind not in ("td", "value"):
        raise ValueError(f"bad objective {objective_kind!r}")
    if model_kind not in ("true", "learned"):
        raise ValueError(f"bad model kind {model_kind!r}")
    rng_env, rng_batch, rng_sc, rng_eval = np.random.default_rng(seed).spawn(4)
    agent = DQNAgent(env.state_dim, env.num_actions, config,
                     np.random.default_rng(seed + 777))
    buffer = UniformReplay(config.buffer_capacity, env.state_dim)
    queue = SearchControlQueue(config.sc_queue_capacity, env.state_dim)
    recency = _RecencyBuffer(config.recency_capacity, env.state_dim)
    cov = EmpiricalCovariance(env.state_dim)
    accept = AcceptThreshold(0.0, sgld.accept_ema_rate)
    learned = None
    if model_kind == "learned":
        lower, upper = env.state_bounds()
        learned = LearnedModel(env.state_dim, env.num_actions, (lower, upper),
                               seed=np.random.default_rng(seed + 555))
        model_oracle = ModelOracle(learned.predict, learned.predict_batch)
    else:
        model_oracle = ModelOracle(env.true_model,
                                   getattr(env, "true_model_batch", None))
    eval_env = type(env)(max_episode_steps=env.max_episode_steps, gamma=env.gamma)

    rows: list[LogRow] = []
    td_sum, td_count = 0.0, 0
    hook_time = 0.0
    t0 = time.perf_counter()
    state = env.reset(rng_env)
    for step in range(1, total_steps + 1):
        action = agent.act(state, rng_env)
        next_state, reward, done = env.step(state, action)
        buffer.push(Transition(state, action, next_state, reward,
                               env.in_goal(next_state)))
        recency.push(state)
        cov.update(state)
        accept.update(float(np.linalg.norm(next_state - state)))
        if learned is not None and buffer.count >= learned.train_batch_size:
            midx = buffer.sample_uniform_indices(learned.train_batch_size, rng_batch)
            st = buffer.storage
            learned.model_train_step(st.states[midx], st.actions[midx],
                                     st.next_states[midx], st.rewards[midx])
        agent.env_steps = step
        if step > config.warmup_steps:
            _harvest(agent, env, buffer, queue, cov, accept, sgld,
                     objective_kind, model_oracle, rng_sc, use_fast)
            for _ in range(config.updates_per_step):
                abs_td = _planning_update(agent, env, buffer, queue, config,
                                          model_oracle, rng_batch)
                td_sum += abs_td.sum()
                td_count += len(abs_td)
        state = env.reset(rng_env) if done else next_state
        if step % config.eval_every == 0:
            ret = greedy_episode(eval_env, agent, rng_eval)
            extras = {}
            if analysis_hook is not None:
                h0 = time.perf_counter()
                extras = analysis_hook(step=step, agent=agent, env=env,
                                       buffer=buffer, queue=queue,
                                       recency=recency)
                hook_time += time.perf_counter() - h0
            rows.append(LogRow(step, ret,
                               td_sum / td_count if td_count else float("nan"),
                               time.perf_counter() - t0 - hook_time, extras))
            if row_callback is not None:
                row_callback(rows[-1])
            td_sum, td_count = 0.0, 0
    return rows


def _planning_update(agent: DQNAgent, env, buffer: UniformReplay,
                     queue: SearchControlQueue, config: AgentConfig,
                     model_oracle, rng: np.random.Generator) -> np.ndarray:
    """One mixed mini-batch update: round(rho*b) hypothetical + rest real.

    Falls back to all-real when the SC queue is empty (plain ER update).
    """
    b = config.batch_size
    n_hypo = int(round(config.mixing_rate * b)) if len(queue) > 0 else 0
    idx = buffer.sample_uniform_indices(b - n_hypo, rng)
    states, actions, rewards, next_states, dones = (
        arr.copy() for arr in _gather(buffer.storage, idx))
    if n_hypo > 0:
        sc_states = queue.sample(n_hypo, rng)
        # on-policy (epsilon-greedy) action pairing, vectorized
        greedy = np.argmax(agent.qnet.forward_batch(sc_states), axis=1)
        explore = rng.uniform(size=n_hypo) < config.epsilon_greedy
        randoms = rng.integers(agent.num_actions, size=n_hypo)
        sc_actions = np.where(explore, randoms, greedy)
        batch_model = getattr(model_oracle, "batch", None)
        if batch_model is not None:
            sc_next, sc_rewards = batch_model(sc_states, sc_actions)
        else:
            sc_next = np.empty_like(sc_states)
            sc_rewards = np.empty(n_hypo)
            for i, (s, a) in enumerate(zip(sc_states, sc_actions)):
                sc_next[i], sc_rewards[i] = model_oracle(s, int(a))
        sc_dones = np.fromiter((env.in_goal(ns) for ns in sc_next),
                               dtype=bool, count=n_hypo)
        states = np.concatenate([sc_states, states])
        actions = np.concatenate([sc_actions, actions])
        rewards = np.concatenate([sc_rewards, rewards])
        next_states = np.concatenate([sc_next, next_states])
        dones = np.concatenate([sc_dones, dones])
    return agent.q_update(states, actions, rewards, next_states, dones)
