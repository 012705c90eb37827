"""Command line front end.

Subcommands:

* ``list``: show the benchmark catalog.
* ``gen-data``: export one instance's dataset as CSV.
* ``run``: execute seeded searches across instances and algorithms, write
  per-run rows and convergence logs, print and write summary tables.
* ``report``: recompute the summary from a previously written runs CSV.

Everything the subcommands do is factored into plain functions driven by an
``ExperimentSpec``, so tests can run experiments without a terminal.  Runs
inside a batch are independent: one failing run is reported and skipped, the
rest still complete (the process then exits nonzero).
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .bench import catalog, dataset_to_csv, generate_dataset, instance_by_name
from .expr import to_string
from .genetics import GpConfig
from .moea import ALGORITHMS, MoeaConfig, RunResult, run

RUN_FIELDS = (
    "instance",
    "algorithm",
    "seed",
    "train_nmse",
    "test_nmse",
    "penalties",
    "feasible",
    "runtime_s",
    "evaluations",
    "model",
    "reference_divisions",
)

SUMMARY_FIELDS = ("instance", "algorithm", "median_test_nmse", "median_runtime_s")

DEFAULT_REPETITIONS = 10
DEFAULT_POPULATION = 1000
DEFAULT_EVALUATIONS = 500_000


@dataclass(slots=True)
class ExperimentSpec:
    """One batch: instances x algorithms x repetitions, seeds base_seed + i."""

    instances: tuple[str, ...]
    algorithms: tuple[str, ...] = ALGORITHMS
    repetitions: int = DEFAULT_REPETITIONS
    base_seed: int = 0
    population: int = DEFAULT_POPULATION
    evaluations: int = DEFAULT_EVALUATIONS
    threads: int = 1
    gp_overrides: dict = field(default_factory=dict)
    moea_overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.instances:
            raise ValueError("no instances given")
        if not self.algorithms:
            raise ValueError("no algorithms given")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolved_instances(self) -> list[str]:
        if list(self.instances) == ["all"]:
            return [inst.name for inst in catalog()]
        for n in self.instances:
            instance_by_name(n)  # raises KeyError listing the known names
        return list(self.instances)


# --- experiment core ---------------------------------------------------------


def run_single(
    name: str,
    algorithm: str,
    seed: int,
    population: int,
    evaluations: int,
    gp_overrides: dict | None = None,
    moea_overrides: dict | None = None,
) -> RunResult:
    """One full search; module-level so worker processes can import it."""
    return run(
        instance_by_name(name),
        GpConfig(**(gp_overrides or {})),
        MoeaConfig(
            algorithm=algorithm,
            population_size=population,
            max_evaluations=evaluations,
            **(moea_overrides or {}),
        ),
        seed=seed,
    )


def run_experiment(
    spec: ExperimentSpec,
    on_result: Callable[[RunResult], None] | None = None,
) -> tuple[list[RunResult], list[tuple[tuple[str, str, int], str]]]:
    """Run the batch in a fixed order (instance, algorithm, repetition).

    Returns (results, errors).  A failed run lands in ``errors`` as
    ((instance, algorithm, seed), message) and does not stop the batch.
    ``threads > 1`` fans runs out to worker processes; results still come
    back in task order, so output is the same either way.
    """
    tasks = [
        (n, a, spec.base_seed + i)
        for n in spec.resolved_instances()
        for a in spec.algorithms
        for i in range(spec.repetitions)
    ]
    args = [
        (n, a, s, spec.population, spec.evaluations, spec.gp_overrides, spec.moea_overrides)
        for n, a, s in tasks
    ]
    results: list[RunResult] = []
    errors: list[tuple[tuple[str, str, int], str]] = []

    def collect(task: tuple[str, str, int], fetch: Callable[[], RunResult]) -> None:
        try:
            res = fetch()
        except Exception as exc:
            errors.append((task, f"{type(exc).__name__}: {exc}"))
            return
        results.append(res)
        if on_result is not None:
            on_result(res)

    if spec.threads <= 1:
        for task, a in zip(tasks, args):
            collect(task, lambda a=a: run_single(*a))
        return results, errors
    with ProcessPoolExecutor(max_workers=spec.threads) as pool:
        futures = [pool.submit(run_single, *a) for a in args]
        for task, f in zip(tasks, futures):
            collect(task, f.result)
    return results, errors


def result_record(res: RunResult) -> dict[str, str]:
    return {
        "instance": res.instance_name,
        "algorithm": res.algorithm,
        "seed": str(res.seed),
        "train_nmse": repr(res.train_nmse),
        "test_nmse": repr(res.test_nmse),
        "penalties": ";".join(repr(float(p)) for p in res.champion.objectives[1:]),
        "feasible": "1" if res.feasible else "0",
        "runtime_s": f"{res.runtime_s:.3f}",
        "evaluations": str(res.evaluations),
        "model": to_string(res.champion.tree),
        # empty for nsga2, which uses no reference lattice
        "reference_divisions": "" if res.reference_divisions is None else str(res.reference_divisions),
    }


def write_runs_csv(records: Iterable[dict[str, str]], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RUN_FIELDS)
        writer.writeheader()
        writer.writerows(records)


def read_runs_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_history_csv(res: RunResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["generation", "evaluations", "best_feasible_nmse", "min_penalty_sum", "front0_size"]
        )
        for gen, evals, best, penalty, front0 in res.history:
            writer.writerow([gen, evals, repr(best), repr(penalty), front0])


def summarize(records: Sequence[dict[str, str]]) -> list[dict[str, str]]:
    """Median test error and runtime per (instance, algorithm).

    The lowest median test error per instance is marked ``*``; an exact tie
    marks every tied algorithm.
    """
    groups: dict[tuple[str, str], list[dict[str, str]]] = {}
    for r in records:
        groups.setdefault((r["instance"], r["algorithm"]), []).append(r)
    rows = []
    for (inst, alg), rs in groups.items():
        rows.append(
            {
                "instance": inst,
                "algorithm": alg,
                "runs": str(len(rs)),
                "median_test_nmse": repr(
                    statistics.median(float(r["test_nmse"]) for r in rs)
                ),
                "median_runtime_s": repr(
                    statistics.median(float(r["runtime_s"]) for r in rs)
                ),
                "feasible_rate": f"{sum(r['feasible'] == '1' for r in rs) / len(rs):.2f}",
                "best": "",
            }
        )
    by_instance: dict[str, list[dict[str, str]]] = {}
    for row in rows:
        by_instance.setdefault(row["instance"], []).append(row)
    for inst_rows in by_instance.values():
        if len(inst_rows) < 2:
            continue
        medians = [float(r["median_test_nmse"]) for r in inst_rows]
        lo = min(medians)
        for r, m in zip(inst_rows, medians):
            if m == lo:
                r["best"] = "*"
    return rows


def write_summary_csv(rows: Sequence[dict[str, str]], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def format_summary(rows: Sequence[dict[str, str]]) -> str:
    cols = (
        "instance",
        "algorithm",
        "runs",
        "median_test_nmse",
        "median_runtime_s",
        "feasible_rate",
        "best",
    )
    widths = {c: max(len(c), *(len(r[c]) for r in rows)) if rows else len(c) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for r in rows:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in cols))
    return "\n".join(lines)


# --- subcommands -------------------------------------------------------------


def cmd_list(args: argparse.Namespace) -> int:
    for inst in catalog():
        print(
            f"{inst.name:11s} vars={inst.box.arity} "
            f"constraints={len(inst.constraints)} protocol={inst.data_protocol} "
            f"({', '.join(inst.variable_names)})"
        )
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    inst = instance_by_name(args.instance)
    text = dataset_to_csv(generate_dataset(inst, args.seed), inst)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def _spec_from_args(args: argparse.Namespace) -> tuple[ExperimentSpec, str | None]:
    """Merge precedence: explicit flag > config file > default."""
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return config.get(key, default)

    spec = ExperimentSpec(
        instances=tuple(pick(args.instance, "instances", ())),
        algorithms=tuple(pick(args.algorithm, "algorithms", ALGORITHMS)),
        repetitions=pick(args.reps, "reps", DEFAULT_REPETITIONS),
        base_seed=pick(args.seed, "seed", 0),
        population=pick(args.pop, "pop", DEFAULT_POPULATION),
        evaluations=pick(args.evals, "evals", DEFAULT_EVALUATIONS),
        threads=pick(args.threads, "threads", 1),
        gp_overrides=config.get("gp", {}),
        moea_overrides=config.get("moea", {}),
    )
    out = pick(args.out, "out", None)
    return spec, out


def cmd_run(args: argparse.Namespace) -> int:
    spec, out = _spec_from_args(args)
    spec.resolved_instances()  # fail fast on unknown names
    out_dir = Path(out) if out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    def on_result(res: RunResult) -> None:
        if not args.quiet:
            print(
                f"{res.instance_name} {res.algorithm} seed={res.seed} "
                f"train={res.train_nmse:.4f} test={res.test_nmse:.4f} "
                f"feasible={'yes' if res.feasible else 'no'} "
                f"gens={res.generations} t={res.runtime_s:.1f}s"
            )
        if out_dir is not None:
            write_history_csv(
                res,
                out_dir / f"history_{res.instance_name}_{res.algorithm}_s{res.seed}.csv",
            )

    results, errors = run_experiment(spec, on_result=on_result)
    for (name, alg, seed), message in errors:
        print(f"error: {name} {alg} seed={seed}: {message}", file=sys.stderr)
    records = [result_record(r) for r in results]
    rows = summarize(records)
    if out_dir is not None:
        write_runs_csv(records, out_dir / "runs.csv")
        write_summary_csv(rows, out_dir / "summary.csv")
    if records:
        print(format_summary(rows))
    return 1 if errors else 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        records = read_runs_csv(Path(args.runs_csv))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not records:
        print("error: no runs in file", file=sys.stderr)
        return 1
    rows = summarize(records)
    print(format_summary(rows))
    if args.csv:
        write_summary_csv(rows, Path(args.csv))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapesr",
        description="Symbolic regression with shape constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="show the benchmark catalog").set_defaults(
        func=cmd_list
    )

    gen = sub.add_parser("gen-data", help="export an instance's dataset as CSV")
    gen.add_argument("instance")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="-", help="output file, '-' for stdout")
    gen.set_defaults(func=cmd_gen_data)

    runp = sub.add_parser("run", help="run searches and summarize")
    runp.add_argument(
        "--instance",
        action="append",
        help="instance name, repeatable; 'all' for the whole catalog",
    )
    runp.add_argument(
        "--algorithm", action="append", choices=ALGORITHMS, help="repeatable; default both"
    )
    runp.add_argument("--reps", type=int, help=f"runs per cell (default {DEFAULT_REPETITIONS})")
    runp.add_argument("--seed", type=int, help="base seed; run i uses seed+i (default 0)")
    runp.add_argument("--pop", type=int, help=f"population size (default {DEFAULT_POPULATION})")
    runp.add_argument(
        "--evals", type=int, help=f"evaluation budget per run (default {DEFAULT_EVALUATIONS})"
    )
    runp.add_argument("--out", help="directory for runs.csv, summary.csv, and logs")
    runp.add_argument("--threads", type=int, help="worker processes (default 1)")
    runp.add_argument("--config", help="JSON file with the same keys as the flags")
    runp.add_argument("--quiet", action="store_true")
    runp.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summary table from a runs CSV")
    rep.add_argument("runs_csv")
    rep.add_argument("--csv", help="also write the summary as CSV to this path")
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
