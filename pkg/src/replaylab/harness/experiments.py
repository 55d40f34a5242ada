"""The experiment implementations behind the CLI subcommands."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from ..agents import (DQN_VARIANTS, DYNA_VARIANTS, AgentConfig, run_dqn_loop,
                      run_dyna_loop)
from ..analysis import (empirical_distribution, entropy, ideal_distribution,
                        random_bound_inputs, theorem4_check,
                        weighted_distance)
from ..envs import make_env
from ..flow import (closed_form_cubic_time, closed_form_l2_time,
                    speedup_condition)
from ..net import Adam, init_network
from ..replay import SumTreeBuffer
from ..supervised import (LossKind, SamplingScheme, evaluate_rmse,
                          initial_priorities, make_sin_dataset, sgd_epoch,
                          theorem1_residual)
from .config import ConfigError, ExperimentConfig
from .runner import CheckpointWriter, fmt, run_seeds, wall_clock_report

SUPERVISED_VARIANTS = {
    "l2": (SamplingScheme.UNIFORM, LossKind.L2, False),
    "prioritized_l2": (SamplingScheme.PRIORITIZED_PARTIAL, LossKind.L2, False),
    "full_prioritized_l2": (SamplingScheme.PRIORITIZED_FULL, LossKind.L2, False),
    "cubic": (SamplingScheme.UNIFORM, LossKind.CUBIC, False),
    "cubic_scaled": (SamplingScheme.UNIFORM, LossKind.CUBIC, True),
    "power4": (SamplingScheme.UNIFORM, LossKind.POWER4, False),
}


# -- supervised -------------------------------------------------------------


def supervised_worker(config: ExperimentConfig, seed: int, path: Path) -> None:
    scheme, loss, match_scale = SUPERVISED_VARIANTS[config.variant]
    rng = np.random.default_rng(seed)
    rng_data, rng_init, rng_batch = rng.spawn(3)
    train, test = make_sin_dataset(config.n_train, config.noise_sigma, rng_data)
    net = init_network([1, *config.hidden, 1], config.activation, rng_init)
    adam = Adam(config.learning_rate)
    priorities = initial_priorities(net, train)
    writer = CheckpointWriter(path, ["step", "train_rmse", "test_rmse"])
    writer.write_row({"step": 0, "train_rmse": evaluate_rmse(net, train),
                      "test_rmse": evaluate_rmse(net, test)})
    done = 0
    while done < config.updates:
        block = min(config.sup_eval_every, config.updates - done)
        sgd_epoch(net, train, scheme, loss, config.batch_size, adam,
                  priorities, rng_batch, updates=block,
                  cubic_match_scale=match_scale)
        done += block
        writer.write_row({"step": done, "train_rmse": evaluate_rmse(net, train),
                          "test_rmse": evaluate_rmse(net, test)})
    writer.close()


def run_supervised(config: ExperimentConfig) -> Path:
    if config.variant not in SUPERVISED_VARIANTS:
        raise ConfigError(f"unknown supervised variant: {config.variant}")
    out_dir = config.resolve_out_dir(f"supervised/{config.variant}")
    run_seeds(supervised_worker, config, out_dir, config.updates)
    return out_dir


# -- verify-thm1 (prioritized-L2 vs scaled cubic, growing batch) -------------


def thm1_residual_sweep(config: ExperimentConfig, path: Path) -> None:
    """Residual of the gradient identity over random (net, dataset) pairs."""
    writer = CheckpointWriter(path, ["pair", "n_samples", "residual"])
    rng = np.random.default_rng(12345)
    sizes = (1, 10, 100)
    for k in range(config.thm1_pairs):
        n = sizes[k % len(sizes)]
        train, _ = make_sin_dataset(n, config.noise_sigma, rng.spawn(1)[0])
        net = init_network([1, 32, 32, 1], "tanh", rng.spawn(1)[0])
        writer.write_row({"pair": k, "n_samples": n,
                          "residual": theorem1_residual(net, train)})
    writer.close()


def run_verify_thm1(config: ExperimentConfig) -> Path:
    out_dir = config.resolve_out_dir("verify_thm1")
    out_dir.mkdir(parents=True, exist_ok=True)
    thm1_residual_sweep(config, out_dir / "residuals.csv")
    for batch in config.thm1_batch_sizes:
        for variant in ("full_prioritized_l2", "cubic_scaled"):
            sub = dataclasses.replace(config, variant=variant,
                                      batch_size=int(batch),
                                      out_dir=str(out_dir / f"{variant}_b{batch}"))
            run_seeds(supervised_worker, sub, sub.out_dir, sub.updates)
    return out_dir


# -- flow simulation ---------------------------------------------------------


def flow_sim_worker(config: ExperimentConfig, seed: int, path: Path) -> None:
    delta0s = [float(v) for v in config.flow_delta0_grid.split(",")]
    epsilons = [float(v) for v in config.flow_epsilon_grid.split(",")]
    eta, eta_p = config.flow_eta, config.flow_eta_prime
    writer = CheckpointWriter(path, [
        "row", "delta0", "epsilon", "eta", "eta_prime", "t_l2", "t_cubic",
        "ratio", "condition_lhs", "condition_rhs", "condition_holds"])
    k = 0
    for d0 in delta0s:
        for eps in epsilons:
            if eps >= d0:
                continue
            k += 1
            t2 = closed_form_l2_time(d0, eps, eta)
            t3 = closed_form_cubic_time(d0, eps, eta_p)
            holds, lhs, rhs = speedup_condition([d0], eps, eta, eta_p)
            writer.write_row({
                "row": k, "delta0": d0, "epsilon": eps, "eta": eta,
                "eta_prime": eta_p, "t_l2": t2, "t_cubic": t3,
                "ratio": t2 / t3, "condition_lhs": lhs,
                "condition_rhs": rhs, "condition_holds": holds})
    writer.close()


def run_flow_sim(config: ExperimentConfig) -> Path:
    out_dir = config.resolve_out_dir("flow_sim")
    delta0s = [float(v) for v in config.flow_delta0_grid.split(",")]
    epsilons = [float(v) for v in config.flow_epsilon_grid.split(",")]
    n_rows = sum(1 for d in delta0s for e in epsilons if e < d)
    run_seeds(flow_sim_worker, config, out_dir, n_rows)
    return out_dir


# -- reinforcement learning ---------------------------------------------------


def _agent_config(config: ExperimentConfig) -> AgentConfig:
    return AgentConfig(
        hidden=tuple(config.hidden), activation=config.activation,
        learning_rate=config.learning_rate, gamma=config.gamma,
        epsilon_greedy=config.epsilon_greedy, batch_size=config.batch_size,
        buffer_capacity=config.buffer_capacity,
        warmup_steps=config.warmup_steps,
        target_sync_period=config.target_sync_period,
        updates_per_step=config.planning_updates,
        eval_every=config.eval_every, mixing_rate=config.mixing_rate)


def _sgld_config(config: ExperimentConfig):
    from ..search_control import SGLDConfig
    if config.variant == "dyna_td_long":
        budget, m = 1000, 1000
    else:
        budget, m = config.sgld_step_budget, config.sgld_m
    return SGLDConfig(step_size=config.sgld_step_size,
                      noise_scale=config.sgld_noise_scale,
                      states_per_harvest=m, step_budget=budget,
                      accept_ema_rate=config.sgld_accept_beta,
                      log_smoothing=config.sgld_log_smoothing)


def _run_variant(config: ExperimentConfig, seed: int, analysis_hook,
                 row_callback):
    env = make_env(config.env, gamma=config.gamma)
    agent_cfg = _agent_config(config)
    if config.variant in DQN_VARIANTS:
        return run_dqn_loop(env, config.variant, agent_cfg,
                            config.total_steps, seed,
                            analysis_hook=analysis_hook,
                            row_callback=row_callback)
    if config.variant in DYNA_VARIANTS:
        objective = "value" if config.variant == "dyna_value" else "td"
        model_kind = "learned" if config.variant == "dyna_td_learned" else "true"
        return run_dyna_loop(env, agent_cfg, _sgld_config(config), objective,
                             model_kind, config.total_steps, seed,
                             analysis_hook=analysis_hook,
                             row_callback=row_callback)
    raise ConfigError(f"unknown rl variant: {config.variant}")


RL_COLUMNS = ["env_step", "eval_return", "train_mean_abs_td",
              "wall_clock_seconds"]


def rl_worker(config: ExperimentConfig, seed: int, path: Path) -> None:
    writer = CheckpointWriter(path, RL_COLUMNS)
    _run_variant(config, seed, None, lambda row: writer.write_row({
        "env_step": row.env_step, "eval_return": row.eval_return,
        "train_mean_abs_td": row.train_mean_abs_td,
        "wall_clock_seconds": row.wall_clock_seconds}))
    writer.close()


def run_rl(config: ExperimentConfig) -> Path:
    out_dir = config.resolve_out_dir(f"rl/{config.env}/{config.variant}")
    run_seeds(rl_worker, config, out_dir, config.total_steps)
    return out_dir


# -- distribution analysis ----------------------------------------------------


def _dump_grid(path: Path, resolution: int, probs: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("ix,iy,prob\n")
        for ix in range(resolution):
            for iy in range(resolution):
                fh.write(f"{ix},{iy},{fmt(probs[ix * resolution + iy])}\n")


def make_distribution_hook(config: ExperimentConfig, seed: int, out_dir: Path):
    """Per-checkpoint distances of the agent's sampling distribution to the
    brute-force ideal one, plus its entropy; dumps heatmap grids for seed 0
    at the final checkpoint."""
    res = config.grid_resolution
    n_draw = config.analysis_samples
    hook_rng = np.random.default_rng(seed + 999_001)

    def hook(step, agent, env, buffer, queue, recency):
        p_star, _ = ideal_distribution(agent.qnet, env, res)
        if queue is not None and len(queue) > 0:
            states = queue.sample(n_draw, hook_rng)
        elif isinstance(buffer, SumTreeBuffer) and buffer.count > 0:
            idx = buffer.sample_proportional_indices(n_draw, hook_rng)
            states = buffer.storage.states[idx]
        else:
            return {"dist_onpolicy": float("nan"),
                    "dist_uniform": float("nan"), "entropy": float("nan")}
        p = empirical_distribution(states, res)
        if recency is not None and recency.count > 0:
            d_pi = empirical_distribution(recency.states, res)
        else:
            d_pi = None
        extras = {
            "dist_onpolicy": (weighted_distance(p, p_star, "on_policy", d_pi)
                              if d_pi is not None else float("nan")),
            "dist_uniform": weighted_distance(p, p_star, "uniform"),
            "entropy": entropy(p),
        }
        if seed == config.seeds[0] and step == config.total_steps:
            gdir = out_dir / "gridmaps"
            _dump_grid(gdir / "p.csv", res, p.probs)
            _dump_grid(gdir / "p_star.csv", res, p_star.probs)
            if d_pi is not None:
                _dump_grid(gdir / "d_pi.csv", res, d_pi.probs)
        return extras

    return hook


DIST_COLUMNS = RL_COLUMNS + ["dist_onpolicy", "dist_uniform", "entropy"]


def dist_worker(config: ExperimentConfig, seed: int, path: Path) -> None:
    out_dir = Path(path).parent
    writer = CheckpointWriter(path, DIST_COLUMNS)
    hook = make_distribution_hook(config, seed, out_dir)
    _run_variant(config, seed, hook, lambda row: writer.write_row({
        "env_step": row.env_step, "eval_return": row.eval_return,
        "train_mean_abs_td": row.train_mean_abs_td,
        "wall_clock_seconds": row.wall_clock_seconds, **row.extras}))
    writer.close()


def run_dist_analysis(config: ExperimentConfig) -> Path:
    out_dir = config.resolve_out_dir(f"dist_analysis/{config.variant}")
    run_seeds(dist_worker, config, out_dir, config.total_steps)
    return out_dir


# -- bound check ---------------------------------------------------------------


def bound_check_worker(config: ExperimentConfig, seed: int, path: Path) -> None:
    rng = np.random.default_rng(seed)
    writer = CheckpointWriter(path, ["mdp", "n_states", "gamma",
                                     "max_violation"])
    for k in range(1, config.n_mdps + 1):
        n_states = int(rng.integers(2, config.max_states + 1))
        gamma = float(rng.uniform(0.5, 0.99))
        inputs = random_bound_inputs(n_states, gamma, config.kernel_mix, rng)
        violation, _ = theorem4_check(inputs)
        writer.write_row({"mdp": k, "n_states": n_states, "gamma": gamma,
                          "max_violation": violation})
    writer.close()


def run_bound_check(config: ExperimentConfig) -> Path:
    out_dir = config.resolve_out_dir("bound_check")
    run_seeds(bound_check_worker, config, out_dir, config.n_mdps)
    return out_dir


# -- report ---------------------------------------------------------------------


def run_report(config: ExperimentConfig) -> Path:
    """Re-aggregate every raw-CSV directory under out_dir and emit wall-clock
    reports where timing columns exist."""
    from .runner import aggregate
    base = config.resolve_out_dir()
    if not base.exists():
        raise ConfigError(f"report directory does not exist: {base}")
    run_dirs = sorted({p.parent for p in base.rglob("raw_seed*.csv")})
    if not run_dirs:
        raise ConfigError(f"no raw CSVs under {base}")
    for run_dir in run_dirs:
        seeds = sorted(int(p.stem.replace("raw_seed", ""))
                       for p in run_dir.glob("raw_seed*.csv"))
        aggregate(run_dir, seeds)
        cols = open(next(iter(run_dir.glob("raw_seed*.csv")))).readline()
        if "wall_clock_seconds" in cols and "eval_return" in cols:
            wall_clock_report(run_dir)
    return base


def run_experiment(config: ExperimentConfig):
    """Dispatch a parsed config to its experiment implementation."""
    dispatch = {
        "supervised": run_supervised,
        "verify-thm1": run_verify_thm1,
        "flow-sim": run_flow_sim,
        "rl": run_rl,
        "dist-analysis": run_dist_analysis,
        "bound-check": run_bound_check,
        "report": run_report,
    }
    return dispatch[config.experiment](config)
