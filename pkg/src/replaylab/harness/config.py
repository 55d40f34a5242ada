"""Experiment configuration: a flat dataclass parsed from key=value files
and --key value CLI overrides, with type coercion driven by field types."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

EXPERIMENT_KINDS = ("verify-thm1", "flow-sim", "supervised", "rl",
                    "dist-analysis", "bound-check", "report")


class ConfigError(Exception):
    """Bad experiment configuration; carries the offending key."""


@dataclass
class ExperimentConfig:
    experiment: str = "supervised"
    out_dir: str = ""
    seeds: tuple[int, ...] = (0,)
    workers: int = 0                 # 0 -> cpu count

    # environment / agent
    env: str = "gridworld"
    variant: str = "er"
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    learning_rate: float = 1e-3
    gamma: float = 0.99
    epsilon_greedy: float = 0.1
    batch_size: int = 32
    buffer_capacity: int = 50000
    warmup_steps: int = 5000
    target_sync_period: int = 1000
    planning_updates: int = 1
    total_steps: int = 100000
    eval_every: int = 1000
    mixing_rate: float = 0.5

    # supervised regression
    n_train: int = 4000
    noise_sigma: float = 0.5
    updates: int = 10000
    sup_eval_every: int = 500

    # search control
    sgld_step_size: float = 0.1
    sgld_noise_scale: float = 0.01
    sgld_m: int = 20
    sgld_step_budget: int = 100
    sgld_accept_beta: float = 0.001
    sgld_log_smoothing: float = 1e-5

    # distribution analysis
    grid_resolution: int = 50
    analysis_samples: int = 3000

    # flow simulation
    flow_delta0_grid: str = "0.5,1,2,4,8,10"
    flow_epsilon_grid: str = "0.05,0.1,0.5,1,2"
    flow_eta: float = 1.0
    flow_eta_prime: float = 1.0

    # bound check
    n_mdps: int = 1000
    max_states: int = 20
    kernel_mix: float = 0.05

    # verify-thm1
    thm1_batch_sizes: tuple[int, ...] = (128, 512)
    thm1_pairs: int = 100

    smoothing_window: int = 30

    def resolve_out_dir(self, default_leaf: str = "") -> Path:
        base = self.out_dir or os.environ.get("REPLAYLAB_OUT", "") or "results"
        path = Path(base)
        if default_leaf and not self.out_dir:
            path = path / default_leaf
        return path


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) == 2:
            return tuple(range(parts[0], parts[1]))
        if len(parts) == 3:
            return tuple(range(parts[0], parts[1], parts[2]))
        raise ValueError(f"bad range {text!r}")
    return tuple(int(p) for p in text.split(",") if p.strip())


def coerce(key: str, value: str):
    """Coerce a string value to the declared field type."""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key: {key}")
    default = getattr(ExperimentConfig(), key)
    if isinstance(default, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {value}")
    if isinstance(default, tuple):
        try:
            return _parse_int_tuple(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value} ({exc})") from exc
    caster = type(default)
    try:
        return caster(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value} ({exc})") from exc


def parse_config_file(path: str | Path) -> dict:
    """key=value lines; # starts a comment; blank lines ignored."""
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    overrides = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        overrides[key] = coerce(key, value)
    return overrides


def build_config(experiment: str, file_path: str | None = None,
                 cli_overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Defaults <- config file <- CLI overrides, validated."""
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind: {experiment}")
    values: dict = {"experiment": experiment}
    if file_path:
        if not Path(file_path).exists():
            raise ConfigError(f"config file not found: {file_path}")
        values.update(parse_config_file(file_path))
    for key, raw in (cli_overrides or {}).items():
        values[key] = coerce(key, raw)
    values["experiment"] = experiment
    config = ExperimentConfig(**values)
    if not config.seeds:
        raise ConfigError("seeds must be nonempty")
    return config
