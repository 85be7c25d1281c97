"""Configuration-driven experiment runner.

Subcommands:
    run <config> [--jobs K] [--seed S] [--out DIR]   execute an experiment file
    plot <dir>                                       render convergence SVGs
    bench-list                                       list registered benchmarks

Experiment files are TOML (simple key/value with nested tables) or JSON.
Traces are written one CSV per (algorithm, repetition); a summary JSON
collects medians, quartiles, final gaps, and wall time per algorithm.
The SPARTANBO_OUT environment variable overrides the output directory.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .acquisition import AcquisitionConfig
from .benchmarks import Benchmark, get_benchmark, list_benchmarks, optimality_gap
from .exceptions import ConfigError
from .strategies import (ALGORITHMS, HboConfig, RunConfig, SpboConfig, Trace,
                         TraceRecord, run_algorithm)

ENV_OUT = "SPARTANBO_OUT"


@dataclass
class ExperimentFile:
    benchmark: str
    algorithms: List[str]
    repetitions: int = 1
    output_dir: str = "results"
    base_seed: int = 0
    run_config: RunConfig = field(default_factory=RunConfig)


_TOP_KEYS = {"benchmark", "algorithms", "repetitions", "output_dir", "base_seed",
             "n_init", "n_iter", "m", "burn_in", "kernel", "noise_variance",
             "slice_width", "acquisition", "spbo", "hbo"}
_ACQ_KEYS = {"kind", "alpha", "ig_mode", "candidates", "refinements"}
_SPBO_KEYS = {"c", "gamma", "T"}
_HBO_KEYS = {"N_c", "N_d", "reevaluate"}


def _check_keys(table: dict, allowed: set, context: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(
            f"unknown {context} key(s): {', '.join(sorted(unknown))}; "
            f"valid: {', '.join(sorted(allowed))}")


def parse_experiment(path) -> ExperimentFile:
    """Load and validate an experiment file (TOML or JSON), applying the
    default run configuration for absent keys."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"experiment file not found: {path}")
    raw = path.read_bytes()
    if path.suffix == ".json":
        doc = json.loads(raw)
    else:
        try:
            doc = tomllib.loads(raw.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    _check_keys(doc, _TOP_KEYS, "experiment")
    try:
        benchmark = doc["benchmark"]
        algorithms = doc["algorithms"]
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from exc
    if isinstance(algorithms, str):
        algorithms = [algorithms]
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {alg!r}; valid: {', '.join(ALGORITHMS)}")
    get_benchmark(benchmark)  # raises KeyError for unknown names
    repetitions = int(doc.get("repetitions", 1))
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")

    try:
        acq_tbl = dict(doc.get("acquisition", {}))
        _check_keys(acq_tbl, _ACQ_KEYS, "acquisition")
        spbo_tbl = dict(doc.get("spbo", {}))
        _check_keys(spbo_tbl, _SPBO_KEYS, "spbo")
        hbo_tbl = dict(doc.get("hbo", {}))
        _check_keys(hbo_tbl, _HBO_KEYS, "hbo")
        cfg = RunConfig(
            n_init=int(doc.get("n_init", 10)),
            n_iter=int(doc.get("n_iter", 20)),
            m=int(doc.get("m", 10)),
            burn_in=int(doc.get("burn_in", 100)),
            kernel=doc.get("kernel", "matern52"),
            noise_variance=float(doc.get("noise_variance", 1e-6)),
            slice_width=float(doc.get("slice_width", 1.0)),
            acquisition=AcquisitionConfig(**acq_tbl),
            spbo=SpboConfig(**spbo_tbl),
            hbo=HboConfig(**hbo_tbl),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentFile(
        benchmark=benchmark, algorithms=list(algorithms), repetitions=repetitions,
        output_dir=str(doc.get("output_dir", "results")),
        base_seed=int(doc.get("base_seed", 0)), run_config=cfg)


# ---------------------------------------------------------------------------
# trace CSV serialization
# ---------------------------------------------------------------------------

def trace_header(d: int, n_cat: int) -> List[str]:
    return (["iteration", "phase", "algorithm", "seed"]
            + [f"x{k}" for k in range(d)] + [f"cat{k}" for k in range(n_cat)]
            + ["y", "best_y", "wall_ms"])


def write_trace(trace: Trace, path) -> None:
    d = trace.records[0].x.shape[0]
    n_cat = len(trace.records[0].cats)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(d, n_cat))
        for r in trace.records:
            w.writerow([r.iteration, r.phase, trace.algorithm, trace.seed]
                       + [repr(float(v)) for v in r.x]
                       + list(r.cats)
                       + [repr(float(r.y)), repr(float(r.best_y)),
                          repr(float(r.wall_ms))])


def read_trace(path) -> Trace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:4] != ["iteration", "phase", "algorithm", "seed"]:
        raise ConfigError(f"malformed trace file {path}: bad header")
    header = rows[0]
    x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
    cat_cols = [i for i, h in enumerate(header) if h.startswith("cat")]
    iy = header.index("y")
    ib = header.index("best_y")
    iw = header.index("wall_ms")
    records = []
    algorithm, seed = "", 0
    for row in rows[1:]:
        if len(row) != len(header):
            raise ConfigError(f"malformed trace file {path}: ragged row")
        algorithm, seed = row[2], int(row[3])
        records.append(TraceRecord(
            iteration=int(row[0]), phase=row[1],
            x=np.array([float(row[i]) for i in x_cols]),
            cats=tuple(int(row[i]) for i in cat_cols),
            y=float(row[iy]), best_y=float(row[ib]), wall_ms=float(row[iw])))
    return Trace(algorithm=algorithm, seed=seed, records=records)


def _trace_filename(benchmark: str, algorithm: str, rep: int) -> str:
    return f"{benchmark}__{algorithm}__rep{rep:03d}.csv"


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _run_one(args) -> Tuple[str, int, Trace]:
    bench_name, alg, cfg, seed, rep = args
    bench = get_benchmark(bench_name)
    trace = run_algorithm(alg, bench.evaluator, bench.space, cfg, rng=seed)
    trace.validate()
    return alg, rep, trace


def cmd_run(experiment: ExperimentFile, jobs: int = 1,
            out_dir: Optional[str] = None, base_seed: Optional[int] = None) -> int:
    """Execute an experiment: all (algorithm, repetition) runs, trace CSVs,
    and a summary JSON. Returns the process exit code."""
    bench = get_benchmark(experiment.benchmark)
    seed0 = experiment.base_seed if base_seed is None else base_seed
    out = Path(os.environ.get(ENV_OUT) or out_dir or experiment.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    tasks = [(bench.name, alg, experiment.run_config, seed0 + r, r)
             for alg in experiment.algorithms
             for r in range(experiment.repetitions)]
    results: Dict[Tuple[str, int], Trace] = {}
    failed = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for (alg, rep, trace) in pool.map(_run_one, tasks):
                results[(alg, rep)] = trace
    else:
        for task in tasks:
            try:
                alg, rep, trace = _run_one(task)
                results[(alg, rep)] = trace
            except Exception as exc:
                failed += 1
                print(f"run failed ({task[1]} rep {task[4]}): {exc}", file=sys.stderr)

    summary: dict = {"benchmark": bench.name,
                     "repetitions": experiment.repetitions,
                     "base_seed": seed0, "algorithms": {}}
    for alg in experiment.algorithms:
        gap_rows = []
        finals = []
        seconds = 0.0
        for r in range(experiment.repetitions):
            trace = results.get((alg, r))
            if trace is None:
                continue
            write_trace(trace, out / _trace_filename(bench.name, alg, r))
            gaps = optimality_gap(trace, bench.known_minimum)
            gap_rows.append(gaps)
            finals.append(float(gaps[-1]))
            seconds += trace.records[-1].wall_ms / 1e3
        entry = {"final_gaps": finals, "total_seconds": seconds,
                 "completed": len(finals)}
        if gap_rows:
            G = np.array(gap_rows)
            entry["median_gap"] = np.median(G, axis=0).tolist()
            entry["q25_gap"] = np.quantile(G, 0.25, axis=0).tolist()
            entry["q75_gap"] = np.quantile(G, 0.75, axis=0).tolist()
        summary["algorithms"][alg] = entry
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if failed == 0 else 2


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

GAP_FLOOR = 1e-8

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _svg_convergence(series: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]],
                     title: str) -> str:
    """Median line plus interquartile band per algorithm, log10 gap axis."""
    W, H, ML, MR, MT, MB = 640, 420, 70, 20, 40, 50
    n_iter = max(len(med) for med, _, _ in series.values())
    all_vals = np.concatenate([np.concatenate(v) for v in series.values()])
    lo = math.floor(math.log10(max(float(np.min(all_vals)), GAP_FLOOR)))
    hi = math.ceil(math.log10(max(float(np.max(all_vals)), GAP_FLOOR * 10)))
    if hi <= lo:
        hi = lo + 1

    def sx(i):
        return ML + (W - ML - MR) * (i / max(n_iter - 1, 1))

    def sy(v):
        lv = math.log10(max(float(v), GAP_FLOOR))
        return MT + (H - MT - MB) * (hi - lv) / (hi - lo)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="{W/2:.0f}" y="20" text-anchor="middle" font-size="15">{title}</text>']
    # axes and ticks
    parts.append(f'<line x1="{ML}" y1="{H-MB}" x2="{W-MR}" y2="{H-MB}" stroke="black"/>')
    parts.append(f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H-MB}" stroke="black"/>')
    for e in range(lo, hi + 1):
        y = sy(10.0 ** e)
        parts.append(f'<line x1="{ML-4}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ML-8}" y="{y+4:.1f}" text-anchor="end" font-size="11">1e{e}</text>')
    for i in range(0, n_iter, max(n_iter // 8, 1)):
        x = sx(i)
        parts.append(f'<line x1="{x:.1f}" y1="{H-MB}" x2="{x:.1f}" y2="{H-MB+4}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{H-MB+18}" text-anchor="middle" font-size="11">{i+1}</text>')
    parts.append(f'<text x="{(ML+W-MR)/2:.0f}" y="{H-12}" text-anchor="middle" font-size="12">evaluation</text>')
    parts.append(f'<text x="16" y="{(MT+H-MB)/2:.0f}" font-size="12" '
                 f'transform="rotate(-90 16 {(MT+H-MB)/2:.0f})" text-anchor="middle">optimality gap</text>')
    for ci, (alg, (med, q25, q75)) in enumerate(sorted(series.items())):
        color = _COLORS[ci % len(_COLORS)]
        n = len(med)
        band = " ".join(f"{sx(i):.1f},{sy(q75[i]):.1f}" for i in range(n))
        band += " " + " ".join(f"{sx(i):.1f},{sy(q25[i]):.1f}" for i in reversed(range(n)))
        parts.append(f'<polygon points="{band}" fill="{color}" opacity="0.15"/>')
        line = " ".join(f"{sx(i):.1f},{sy(med[i]):.1f}" for i in range(n))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MT + 16 * (ci + 1)
        parts.append(f'<line x1="{W-MR-110}" y1="{ly}" x2="{W-MR-86}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{W-MR-80}" y="{ly+4}" font-size="12">{alg}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_plot(trace_dir) -> int:
    """Render one convergence SVG per benchmark found in `trace_dir` and
    write a plain-text table of final gaps."""
    trace_dir = Path(trace_dir)
    files = sorted(trace_dir.glob("*__*__rep*.csv"))
    if not files:
        print(f"no trace files in {trace_dir}", file=sys.stderr)
        return 2
    grouped: Dict[str, Dict[str, List[Trace]]] = {}
    for f in files:
        bench_name, alg, _ = f.name.split("__", 2)
        grouped.setdefault(bench_name, {}).setdefault(alg, []).append(read_trace(f))
    table_lines = [f"{'benchmark':<16} {'algorithm':<10} {'reps':>4} {'median final gap':>18}"]
    for bench_name, by_alg in sorted(grouped.items()):
        f_star = get_benchmark(bench_name).known_minimum
        series = {}
        for alg, tr_list in by_alg.items():
            G = np.array([optimality_gap(t, f_star) for t in tr_list])
            series[alg] = (np.median(G, axis=0), np.quantile(G, 0.25, axis=0),
                           np.quantile(G, 0.75, axis=0))
            table_lines.append(f"{bench_name:<16} {alg:<10} {len(tr_list):>4} "
                               f"{float(np.median(G[:, -1])):>18.6g}")
        svg = _svg_convergence(series, f"{bench_name}: median optimality gap")
        (trace_dir / f"{bench_name}.svg").write_text(svg)
    table = "\n".join(table_lines) + "\n"
    (trace_dir / "final_gaps.txt").write_text(table)
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spartanbo",
                                description="benchmark runner for nonstationary Bayesian optimization")
    sub = p.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config", help="TOML or JSON experiment file")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel repetitions")
    run_p.add_argument("--seed", type=int, default=None, help="override base_seed")
    run_p.add_argument("--out", default=None, help="override output directory")
    plot_p = sub.add_parser("plot", help="render convergence plots from a trace directory")
    plot_p.add_argument("trace_dir")
    sub.add_parser("bench-list", help="list registered benchmarks")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            experiment = parse_experiment(args.config)
            return cmd_run(experiment, jobs=args.jobs, out_dir=args.out,
                           base_seed=args.seed)
        if args.command == "plot":
            return cmd_plot(args.trace_dir)
        if args.command == "bench-list":
            for name in list_benchmarks():
                print(name)
            return 0
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
