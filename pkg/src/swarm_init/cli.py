"""Command-line entry point: ``swarm-init validate|sweep|montecarlo``.

Exit codes: 0 success, 1 analysis gate failed, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, SwarmInitError
from .montecarlo import TrialConfig, run_trials
from .safety import release_policy_nominal, sweep_interval

EXIT_OK, EXIT_GATE, EXIT_INPUT = 0, 1, 2
THREADS_ENV = "SWARM_INIT_THREADS"

SWEEP_COLUMNS = ("dt_s", "N", "allowable_factor", "worst_stage", "mean_budget_Akmu_m", "mean_budget_Bkmu_m",
                 "diagnostic")
TRACE_COLUMNS = ("time_s", "worst_trial_distance_m", "mean_worstq_distance_m")


def fmt(x) -> str:
    """12 significant digits, locale independent."""
    if isinstance(x, int):
        return str(x)
    return format(float(x) + 0.0, ".12g")  # folds -0.0


def _write_csv(path: Path, cfg: ExperimentConfig, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config: {cfg.resolved_json()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in r])


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None
    return 1


def cmd_validate(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    m = cfg.model
    dt0 = cfg.dt_grid[0]
    nom = release_policy_nominal(cfg.policy, m, dt0, cfg.craft)
    echo = {
        "s_J2": m.s_J2, "omega_xy": m.omega_xy, "epsilon_2": m.epsilon_2, "k_0": m.k_0,
        "k_air": cfg.craft.k_air_for(m), "dt_s": dt0, "nu": nom.nu,
        "C1_air": nom.increments.C1_air, "C4_air": nom.increments.C4_air,
        "C1p": nom.corrected.C1p, "C4p": nom.corrected.C4p,
    }
    for k, v in echo.items():
        print(f"{k} = {fmt(v)}", file=out)
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out_path: Path, threads: int) -> int:
    rows = sweep_interval(cfg.problem(), cfg.N, cfg.dt_grid, cfg.search_tol, cfg.f_max, threads)
    _write_csv(out_path, cfg, SWEEP_COLUMNS,
               [(r.dt, r.N, r.factor, r.worst_stage, r.budget_A, r.budget_B, r.diagnostic) for r in rows])
    return EXIT_OK


def cmd_montecarlo(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    mc = cfg.mc
    tc = TrialConfig(n_trials=mc["n_trials"], seed=mc["seed"], N=max(cfg.N), dt=cfg.dt_grid[0],
                     factor=mc["variance_factor"], worst_q=mc["worst_q"], trace_step=mc["trace_step"],
                     sample_phase=mc["sample_phase"])
    rep = run_trials(cfg.problem(), tc, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "failures": rep.failures,
        "n_trials": rep.n_trials,
        "empirical_rate": rep.empirical_rate,
        "beta": cfg.safety.beta,
        "gate_passed": rep.empirical_rate <= cfg.safety.beta,
        "failed_trials": rep.failed_trials,
        "max_activation_distance_m": float(rep.activation_max.max()),
        "worst_trials": rep.worst_trials,
        "config": cfg.raw,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    _write_csv(out_dir / "trace.csv", cfg, TRACE_COLUMNS, zip(rep.time, rep.worst_trace, rep.mean_trace))
    return EXIT_OK if summary["gate_passed"] else EXIT_GATE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarm-init", description="Chance-constrained swarm release design.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("validate", "check a config and echo derived coefficients"),
                        ("sweep", "allowable variance factor over the dt grid"),
                        ("montecarlo", "Monte Carlo validation of one design")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="experiment config (JSON)")
        if name != "validate":
            sp.add_argument("--out", help="output CSV (sweep) or directory (montecarlo)")
            sp.add_argument("--threads", type=int, default=None, help=f"worker threads (env {THREADS_ENV})")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            return cmd_validate(cfg)
        threads = _threads(args.threads)
        if args.command == "sweep":
            return cmd_sweep(cfg, Path(args.out or "sweep.csv"), threads)
        return cmd_montecarlo(cfg, Path(args.out or "montecarlo_out"), threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SwarmInitError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
