"""Command-line entry point.

Usage: replaylab <subcommand> [--config FILE] [--key value ...]

Subcommands: verify-thm1, flow-sim, supervised, rl, dist-analysis,
bound-check, report.  Any configuration field can be overridden with
--key value; REPLAYLAB_OUT overrides the output directory.  Exit codes:
0 success, 2 configuration error, 1 runtime failure.
"""

from __future__ import annotations

import os
import sys

# tiny-matrix workloads: BLAS threading only causes contention across the
# seed worker processes (must be set before numpy loads)
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from .config import EXPERIMENT_KINDS, ConfigError, build_config
from .experiments import run_experiment


def _parse_argv(argv: list[str]):
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        raise SystemExit(0)
    experiment = argv[0]
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown subcommand: {experiment}; "
                          f"expected one of {', '.join(EXPERIMENT_KINDS)}")
    config_file = None
    overrides: dict[str, str] = {}
    i = 1
    while i < len(argv):
        arg = argv[i]
        if not arg.startswith("--"):
            raise ConfigError(f"expected --key value, got {arg!r}")
        key = arg[2:].replace("-", "_")
        if i + 1 >= len(argv):
            raise ConfigError(f"missing value for --{arg[2:]}")
        value = argv[i + 1]
        if key == "config":
            config_file = value
        else:
            overrides[key] = value
        i += 2
    return experiment, config_file, overrides


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        experiment, config_file, overrides = _parse_argv(argv)
        config = build_config(experiment, config_file, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        out = run_experiment(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
