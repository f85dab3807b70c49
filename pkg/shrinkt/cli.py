#!/usr/bin/env python3
"""
shrinkt Command Line Interface

Fits the EB t-means pipelines to summary-statistic tables, generates
simulated datasets, runs the simulation bench and writes plot-ready tables.

Settings come from three layers: command-line flags override a JSON
``--config`` file, which overrides the built-in defaults (and the
``SHRINKT_WORKERS`` environment variable for the worker count).
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .core import DEFAULT_PENALTY, alpha_profile
from .exceptions import (
    AcceptanceError,
    ConfigError,
    DataError,
    EstimationError,
    LikelihoodError,
    ShrinktError,
)
from .models import SCENARIO_NAMES
from .pipelines import PipelineId, run_pipeline
from .simulation import (
    BENCH_NS,
    MODES,
    SCALE_PRESETS,
    BenchConfig,
    aggregate,
    check_acceptance,
    counts_mode_generate,
    gaussian_mode_generate,
    load_count_matrix,
    make_scenario,
    run_bench,
)
from .stats_core import spawn_rng
from .utils import (
    configure_logging,
    ensure_dir,
    env_settings,
    read_json,
    read_summary_csv,
    read_table,
    to_json,
    write_json,
    write_table,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ACCEPTANCE = 3

COMMANDS = ("fit", "simulate", "bench", "reproduce")
COVERAGE_STRATA = (("all", "coverage_all"), ("negative", "coverage_neg"),
                   ("positive", "coverage_pos"))


@dataclass
class RunConfig:
    """Resolved settings of one command invocation."""

    command: str
    input: Optional[str] = None
    out: Optional[str] = None
    pipeline: str = "two_step"
    alpha: float = 0.0
    penalty: float = DEFAULT_PENALTY
    seed: Optional[int] = None
    compare_alpha: bool = False
    scenario: str = "spiky"
    scenarios: List[str] = field(default_factory=lambda: list(SCENARIO_NAMES))
    n: int = 4
    ns: List[int] = field(default_factory=lambda: list(BENCH_NS))
    pi0: Optional[float] = None
    n_genes: int = SCALE_PRESETS["desk"]["n_genes"]
    replicates: int = SCALE_PRESETS["desk"]["replicates"]
    scale: str = "desk"
    mode: str = "gaussian"
    counts: Optional[str] = None
    workers: int = 1
    check: bool = False
    bench: Optional[str] = None
    verbose: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.scale not in SCALE_PRESETS:
            raise ConfigError(f"scale must be one of {sorted(SCALE_PRESETS)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.penalty < 1:
            raise ConfigError("penalty must be >= 1")
        if self.alpha not in (0, 1):
            raise ConfigError("alpha must be 0 or 1")
        if self.command in ("simulate", "bench") and self.seed is None:
            raise ConfigError(f"--seed is required for {self.command}")
        if self.pi0 is not None and not 0 <= self.pi0 <= 1:
            raise ConfigError("pi0 must lie in [0, 1]")

    def bench_config(self) -> BenchConfig:
        return BenchConfig(
            scenarios=self.scenarios, ns=self.ns, replicates=self.replicates,
            n_genes=self.n_genes, seed=int(self.seed), mode=self.mode,
            penalty=self.penalty, workers=self.workers, counts_path=self.counts,
        )


def _split_list(value, cast=str) -> List:
    if isinstance(value, str):
        items = [v.strip() for v in value.split(",") if v.strip()]
    else:
        items = list(value)
    return [cast(v) for v in items]


def resolve_config(command: str, flags: Dict[str, Any],
                   config_path: Optional[str] = None) -> RunConfig:
    """
    Merge settings: flags > JSON config file > scale preset > environment > defaults.
    """
    known = {f.name for f in fields(RunConfig)} - {"command"}
    from_file: Dict[str, Any] = {}
    if config_path:
        from_file = read_json(config_path)
        if not isinstance(from_file, dict):
            raise ConfigError(f"{config_path}: top-level JSON value must be an object")
        from_file = {k.replace("-", "_"): v for k, v in from_file.items()}
        unknown = sorted(set(from_file) - known)
        if unknown:
            raise ConfigError(f"{config_path}: unknown settings {unknown}")
    given = {k: v for k, v in flags.items() if k in known and v is not None}

    layered = {**from_file, **given}
    scale = layered.get("scale", "desk")
    if scale not in SCALE_PRESETS:
        raise ConfigError(f"scale must be one of {sorted(SCALE_PRESETS)}")
    merged: Dict[str, Any] = {"scale": scale, **SCALE_PRESETS[scale], **env_settings(), **layered}

    if "scenarios" in merged:
        scenarios = _split_list(merged["scenarios"])
        merged["scenarios"] = list(SCENARIO_NAMES) if scenarios == ["all"] else scenarios
        unknown = [s for s in merged["scenarios"] if s not in SCENARIO_NAMES]
        if unknown:
            raise ConfigError(f"unknown scenarios {unknown} (choose from {', '.join(SCENARIO_NAMES)})")
    if "ns" in merged:
        try:
            merged["ns"] = _split_list(merged["ns"], int)
        except ValueError:
            raise ConfigError("--n must be a comma-separated list of integers") from None
    try:
        return RunConfig(command=command, **merged)
    except TypeError as e:
        raise ConfigError(str(e)) from None


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_fit(cfg: RunConfig) -> Dict[str, Any]:
    """Fit one pipeline to a summary table and write per-unit results."""
    if cfg.input is None:
        raise ConfigError("fit requires --input")
    if not Path(cfg.input).is_file():
        raise DataError(f"input file not found: {cfg.input}")
    out = Path(cfg.out) if cfg.out else Path(cfg.input).with_suffix(".shrinkt.csv")

    data = read_summary_csv(cfg.input)
    try:
        pipeline = PipelineId.parse(cfg.pipeline, cfg.alpha)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    result = run_pipeline(pipeline, data, penalty=cfg.penalty)
    write_table(result.to_frame(), out)

    report = result.report()
    report["output"] = str(out)
    if cfg.compare_alpha:
        fit_data = data.with_se(result.se_moderated, result.df_moderated)
        fit_data = fit_data.subset(fit_data.se > 0)
        profile = alpha_profile(fit_data, (0.0, 1.0), penalty=cfg.penalty)
        report["alpha_log_likelihood"] = {
            f"{row.alpha:g}": float(row.log_likelihood) for row in profile.itertuples()
        }
    return report


def cmd_simulate(cfg: RunConfig) -> Dict[str, Any]:
    """Write one simulated dataset (summary.csv and truth.csv)."""
    out = ensure_dir(cfg.out)
    spec = make_scenario(cfg.scenario, cfg.n, n_genes=cfg.n_genes, pi0=cfg.pi0, seed=cfg.seed)
    rng = spawn_rng(cfg.seed, SCENARIO_NAMES.index(cfg.scenario), cfg.n, 0)
    if cfg.mode == "gaussian":
        data, truth = gaussian_mode_generate(spec, None, rng)
    else:
        null_counts = load_count_matrix(cfg.counts) if cfg.counts else None
        data, truth = counts_mode_generate(spec, rng, null_counts=null_counts)
    write_table(data.to_frame(), out / "summary.csv")
    write_table(truth.to_frame(data.ids), out / "truth.csv")
    return {"scenario": cfg.scenario, "n": cfg.n, "mode": cfg.mode, "n_genes": len(data),
            "pi0_true": truth.pi0_true, "output": str(out)}


def cmd_bench(cfg: RunConfig) -> Dict[str, Any]:
    """Run the bench grid; with ``check`` enforce the acceptance thresholds."""
    out = ensure_dir(cfg.out)
    bench_cfg = cfg.bench_config()
    rows = run_bench(bench_cfg)
    write_table(rows, out / "bench.csv")
    write_table(aggregate(rows), out / "aggregate.csv")
    write_json(bench_cfg.to_dict(), out / "config.json")

    summary = {"rows": len(rows), "failed": int((rows["status"] != "ok").sum()),
               "output": str(out)}
    if cfg.check:
        acceptance = check_acceptance(rows)
        write_json(acceptance.to_dict(), out / "acceptance.json")
        summary["acceptance"] = acceptance.to_dict()
        if not acceptance.passed:
            raise AcceptanceError(acceptance.failures)
    return summary


def _tidy(ok: pd.DataFrame, metric: str, extra: Sequence[str] = ()) -> pd.DataFrame:
    cols = ["scenario", "n", "replicate", "pipeline", *extra, metric]
    return ok[cols].reset_index(drop=True)


def cmd_reproduce(cfg: RunConfig) -> Dict[str, Any]:
    """Plot-ready tables from bench output (generated first when missing and a seed is set)."""
    bench_dir = Path(cfg.bench or cfg.out or ".")
    bench_file = bench_dir / "bench.csv"
    if not bench_file.is_file():
        if cfg.seed is None:
            raise DataError(f"no bench results at {bench_file}; run "
                            f"`shrinkt bench --seed S --out {bench_dir}` first or pass --seed")
        ensure_dir(str(bench_dir))
        write_table(run_bench(cfg.bench_config()), bench_file)
    rows = read_table(bench_file)
    if "status" not in rows.columns:
        raise DataError(f"{bench_file}: not a bench results table")
    ok = rows[rows["status"] == "ok"]
    out = ensure_dir(cfg.out or str(bench_dir))

    written = {
        "pi0": write_table(_tidy(ok, "pi0_hat", ["pi0_true"]), out / "pi0.csv"),
        "fdp": write_table(_tidy(ok, "fdp", ["pi0_true"]), out / "fdp.csv"),
        "power": write_table(_tidy(ok, "power", ["pi0_true"]), out / "power.csv"),
        "rrmse": write_table(_tidy(ok, "rrmse", ["pi0_true"]), out / "rrmse.csv"),
    }
    keys = ["scenario", "n", "pipeline"]
    means = ok.groupby(keys, sort=False)[[c for _, c in COVERAGE_STRATA]].mean().reset_index()
    coverage = []
    for stratum, col in COVERAGE_STRATA:
        part = means[keys].copy()
        part["stratum"] = stratum
        part["coverage"] = means[col].to_numpy()
        coverage.append(part)
    coverage = pd.concat(coverage, ignore_index=True).sort_values(keys, kind="mergesort")
    written["coverage"] = write_table(coverage.reset_index(drop=True), out / "coverage.csv")
    return {name: str(path) for name, path in written.items()}


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default settings (flags take precedence)")
    p.add_argument("--workers", type=int, help="Worker processes (default: $SHRINKT_WORKERS or up to 4)")
    p.add_argument("-v", "--verbose", action="store_true", default=None, help="Verbose logging")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="shrinkt",
        description="shrinkt: empirical Bayes shrinkage of effect estimates with t-distributed errors",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  shrinkt fit --input stats.csv --pipeline two-step --alpha 0 --out results.csv
  shrinkt simulate --scenario spiky --n 4 --seed 1 --out sim/
  shrinkt bench --scenarios all --n 2,4,10 --replicates 10 --genes 2000 --seed 1 --out bench/ --check
  shrinkt reproduce --bench bench/ --out figures/
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    fit = subparsers.add_parser("fit", help="Fit a pipeline to a summary-statistics CSV")
    fit.add_argument("--input", help="CSV with columns beta_hat, se_hat, df (optional id)")
    fit.add_argument("--out", help="Output CSV (default: <input>.shrinkt.csv)")
    fit.add_argument("--pipeline", help="naive | two-step | adhoc | qvalue, or a pipeline id")
    fit.add_argument("--alpha", type=float, help="Alpha for the two-step pipeline (0 or 1)")
    fit.add_argument("--penalty", type=float, help=f"Null-weight penalty (default: {DEFAULT_PENALTY:g})")
    fit.add_argument("--seed", type=int, help="Accepted for symmetry; fitting is deterministic")
    fit.add_argument("--compare-alpha", action="store_true", default=None,
                     help="Report log-likelihoods for alpha = 0 and 1")
    _common(fit)

    sim = subparsers.add_parser("simulate", help="Write one simulated dataset")
    sim.add_argument("--scenario", choices=SCENARIO_NAMES)
    sim.add_argument("--n", type=int, help="Samples per group")
    sim.add_argument("--genes", dest="n_genes", type=int)
    sim.add_argument("--pi0", type=float, help="Null proportion (default: drawn from U[0, 1])")
    sim.add_argument("--mode", choices=MODES)
    sim.add_argument("--counts", help="Genes x samples count CSV used as the null pool")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", help="Output directory")
    _common(sim)

    bench = subparsers.add_parser("bench", help="Run the simulation bench")
    bench.add_argument("--scenarios", help="Comma-separated scenarios or 'all'")
    bench.add_argument("--n", dest="ns", help="Comma-separated samples per group (default: 2,4,10)")
    bench.add_argument("--replicates", type=int)
    bench.add_argument("--genes", dest="n_genes", type=int)
    bench.add_argument("--scale", choices=sorted(SCALE_PRESETS))
    bench.add_argument("--mode", choices=MODES)
    bench.add_argument("--counts", help="Genes x samples count CSV used as the null pool")
    bench.add_argument("--penalty", type=float)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--out", help="Output directory")
    bench.add_argument("--check", action="store_true", default=None,
                       help="Exit with status 3 unless the acceptance checks pass")
    _common(bench)

    rep = subparsers.add_parser("reproduce", help="Write plot-ready tables from bench results")
    rep.add_argument("--bench", help="Directory holding bench.csv")
    rep.add_argument("--out", help="Output directory (default: the bench directory)")
    rep.add_argument("--seed", type=int, help="Run the bench first when results are missing")
    rep.add_argument("--scenarios")
    rep.add_argument("--n", dest="ns")
    rep.add_argument("--replicates", type=int)
    rep.add_argument("--genes", dest="n_genes", type=int)
    rep.add_argument("--scale", choices=sorted(SCALE_PRESETS))
    rep.add_argument("--mode", choices=MODES)
    _common(rep)
    return parser


HANDLERS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "reproduce": cmd_reproduce,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    flags = vars(args).copy()
    command = flags.pop("command")
    config_path = flags.pop("config", None)
    try:
        cfg = resolve_config(command, flags, config_path)
        configure_logging(cfg.verbose)
        report = HANDLERS[command](cfg)
    except AcceptanceError as e:
        print(f"❌ Acceptance checks failed: {e}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    except ConfigError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, EstimationError, LikelihoodError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ShrinktError, ValueError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_DATA
    print(to_json(report))
    return EXIT_OK


def main():
    """Main CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
