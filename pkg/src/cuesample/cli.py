"""Command-line front end.

    cuesample SUBCOMMAND [--preset NAME] [--config PATH] [--seed N] [--out DIR] [--jobs N]

Each subcommand starts from its own preset unless
``--preset`` names another one; ``--config`` is layered on top and
``--seed`` overrides both. Exit codes: 0 success, 1 usage, 2 config,
3 runtime.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import PRESETS, ConfigError, ExperimentConfig, parse_config, preset_text
from .models import ModelError
from .tables import ResultTable

SUBCOMMANDS = PRESETS

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    config_path: Path | None
    seed: int | None
    out_dir: Path
    jobs: int
    preset: str


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cuesample", description="Sampling-based causal inference in cue combination.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="config file layered over the preset")
    p.add_argument("--preset", choices=PRESETS, help="base preset (default: the subcommand's own)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return p


def load_config(run: RunConfig) -> ExperimentConfig:
    cfg = parse_config(preset_text(run.preset))
    if run.config_path is not None:
        try:
            text = run.config_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {run.config_path}: {exc.strerror}") from None
        cfg = parse_config(text, base=cfg)
    if run.seed is not None:
        cfg = cfg.replace(seed=run.seed)
    return cfg


def _write(table: ResultTable, out_dir: Path, name: str) -> Path:
    path = out_dir / f"{name}.csv"
    table.to_csv(path)
    return path


def execute(run: RunConfig, cfg: ExperimentConfig) -> str:
    """Run one subcommand, write its CSV files, return the summary line."""
    out = run.out_dir
    stem = cfg.output_path or run.subcommand
    sub, jobs = run.subcommand, run.jobs

    if sub == "infer":
        t = ex.infer_table(cfg)
        path = _write(t, out, stem)
        return f"p_c1={t.rows[0][0]:.6f} N={t.rows[0][1]} -> {path}"
    if sub == "exact":
        t = ex.exact_table(cfg)
        path = _write(t, out, stem)
        return f"p_c1={t.rows[0][0]:.6f} -> {path}"
    if sub == "exp1":
        t = ex.exp1_population(cfg)
        path = _write(t, out, stem)
        _write(ex.strided(t, cfg.stride), out, f"{stem}_strided")
        return f"mean|rate-likelihood|={np.mean(ex.exp1_deviation(t)):.3g} -> {path}"
    if sub == "exp2":
        t = ex.exp2_convergence(cfg, jobs)
        _write(t, out, f"{stem}_repetitions")
        s = ex.summarize_repetitions(t, ["n_samples"])
        path = _write(s, out, stem)
        return f"error_rate@N={s.rows[-1][0]}={s.column('error_rate')[-1]:.4f} -> {path}"
    if sub == "exp3":
        t = ex.exp3_sweep(cfg, jobs)
        path = _write(t, out, stem)
        return f"max_error_rate={np.max(t.column('error_rate')):.4f} -> {path}"
    if sub == "exp4":
        t = ex.exp4_disparity(cfg, jobs)
        path = _write(t, out, stem)
        ok = t.column("low_count") == 0
        n = cfg.sample_sizes[-1]
        dev = np.max(np.abs(t.column(f"p_common_is_{n}") - t.column("p_common_oracle"))[ok]) if ok.any() else float("nan")
        return f"max_bin_deviation@N={n}={dev:.4f} -> {path}"
    if sub in ("multi", "samediff"):
        fn = ex.exp_multi if sub == "multi" else ex.exp_samediff
        t = fn(cfg, jobs)
        _write(t, out, f"{stem}_repetitions")
        s = ex.summarize_repetitions(t, ["n_cues", "n_samples"])
        path = _write(s, out, stem)
        return f"max_error_rate@N={cfg.sample_sizes[-1]}={np.max(s.where(n_samples=cfg.sample_sizes[-1]).column('error_rate')):.4f} -> {path}"
    if sub == "theorem1":
        t = ex.theorem1_check(cfg, jobs)
        path = _write(t, out, stem)
        first = t.where(epsilon=cfg.epsilons[0])
        slope = ex.loglog_slope(first.column("n_samples"), first.column("mean_abs_error")) if len(first) > 1 else float("nan")
        return f"loglog_slope={slope:.3f} -> {path}"
    if sub == "lemma1":
        t = ex.lemma1_check(cfg)
        path = _write(t, out, stem)
        return f"bound_violations={int(np.sum(t.column('holds') == 0))} -> {path}"
    raise UsageError(f"unknown subcommand {sub!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise UsageError("--seed must be non-negative")
    except UsageError as exc:
        print(f"cuesample: usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    run = RunConfig(args.subcommand, args.config, args.seed, args.out, args.jobs, args.preset or args.subcommand)
    try:
        cfg = load_config(run)
        if run.subcommand in ("infer", "exact", "exp1", "theorem1"):
            cfg.model()
    except (ConfigError, ModelError) as exc:
        print(f"cuesample: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        run.out_dir.mkdir(parents=True, exist_ok=True)
        print(execute(run, cfg))
    except Exception as exc:
        print(f"cuesample: {run.subcommand} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
