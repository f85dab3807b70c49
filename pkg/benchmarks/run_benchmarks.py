"""
Benchmark harness for shrinkt.

Outputs:
- Reproducibility report (SHA256 equality of two runs of every pipeline).
- Throughput metrics (units/sec per pipeline and dataset size).
- Selection quality (FDP, power, RRMSE) of each EB pipeline against the
  Storey/BH q-value baseline on the same simulated data.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence

import sys

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))

from shrinkt.pipelines import ALL_PIPELINES, PipelineId, run_pipeline
from shrinkt.simulation import evaluate, gaussian_mode_generate, make_scenario
from shrinkt.stats_core import spawn_rng

BASELINE = PipelineId.QVALUE_BASELINE.value


@dataclass
class Case:
    label: str
    scenario: str
    n: int
    n_genes: int
    pi0: float


CASES: Sequence[Case] = [
    Case(label="spiky_n2", scenario="spiky", n=2, n_genes=2000, pi0=0.8),
    Case(label="near_normal_n4", scenario="near-normal", n=4, n_genes=2000, pi0=0.5),
    Case(label="bimodal_n10", scenario="bimodal", n=10, n_genes=2000, pi0=0.5),
    Case(label="flat_top_large", scenario="flat-top", n=4, n_genes=10000, pi0=0.7),
]


def sha256_frame(frame) -> str:
    return hashlib.sha256(frame.to_csv(index=False, lineterminator="\n").encode("utf-8")).hexdigest()


def run_case(case: Case, index: int, seed: int, repeats: int) -> Dict[str, Any]:
    spec = make_scenario(case.scenario, case.n, n_genes=case.n_genes, pi0=case.pi0, seed=seed)
    data, truth = gaussian_mode_generate(spec, None, spawn_rng(seed, index))

    results = {}
    timings: Dict[str, float] = {}
    mismatches: List[str] = []
    for pipeline in ALL_PIPELINES:
        name = pipeline.value
        start = time.time()
        for _ in range(repeats):
            result = run_pipeline(pipeline, data)
        elapsed = (time.time() - start) / repeats
        timings[name] = elapsed
        if sha256_frame(result.to_frame()) != sha256_frame(run_pipeline(pipeline, data).to_frame()):
            mismatches.append(name)
        results[name] = result

    report = evaluate(truth, results)
    quality = {}
    for name in results:
        row = report.row(name)
        quality[name] = {
            "pi0_hat": float(row["pi0_hat"]),
            "fdp": float(row["fdp"]),
            "power": float(row["power"]),
            "rrmse": float(row["rrmse"]),
        }
    return {
        "units": len(data),
        "pi0_true": truth.pi0_true,
        "nondeterministic": mismatches,
        "seconds": timings,
        "units_per_second": {k: (len(data) / v if v > 0 else 0.0) for k, v in timings.items()},
        "quality": quality,
        "power_gain_vs_baseline": {
            k: v["power"] - quality[BASELINE]["power"] for k, v in quality.items() if k != BASELINE
        },
    }


def run_benchmark(args: argparse.Namespace) -> Dict[str, Any]:
    selected = [c for c in CASES if not args.cases or c.label in args.cases]
    if not selected:
        raise SystemExit(f"no benchmark cases match {args.cases}; known: {[c.label for c in CASES]}")

    start = time.time()
    cases = {case.label: run_case(case, CASES.index(case), args.seed, args.repeats) for case in selected}
    result = {
        "seed": args.seed,
        "repeats": args.repeats,
        "total_seconds": time.time() - start,
        "nondeterministic": sorted({p for c in cases.values() for p in c["nondeterministic"]}),
        "cases": cases,
    }
    output_path = Path(args.output)
    output_path.write_text(json.dumps(result, indent=2))
    return result


def main():
    parser = argparse.ArgumentParser(description="Run shrinkt benchmarks.")
    parser.add_argument("--output", default="benchmark_report.json", help="Where to write the JSON report.")
    parser.add_argument("--seed", type=int, default=1, help="Master seed for the simulated datasets.")
    parser.add_argument("--repeats", type=int, default=1, help="Timed runs per pipeline (the mean is reported).")
    parser.add_argument("--cases", nargs="*", help="Subset of case labels to run.")
    args = parser.parse_args()

    result = run_benchmark(args)
    print(json.dumps(result, indent=2))


if __name__ == "__main__":
    main()
