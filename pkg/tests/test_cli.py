import csv
import json
import statistics

import numpy as np
import pytest

import shapesr.cli as cli
from shapesr.cli import (
    RUN_FIELDS,
    SUMMARY_FIELDS,
    ExperimentSpec,
    format_summary,
    main,
    read_runs_csv,
    result_record,
    run_experiment,
    summarize,
    write_history_csv,
    write_runs_csv,
    write_summary_csv,
)

TINY = dict(population=20, evaluations=60)


def tiny_spec(**overrides):
    kwargs = dict(
        instances=("I.6.20",),
        algorithms=("nsga2",),
        repetitions=1,
        **TINY,
    )
    kwargs.update(overrides)
    return ExperimentSpec(**kwargs)


def tiny_records(**overrides):
    base = {
        "instance": "I.6.20",
        "algorithm": "nsga2",
        "seed": "0",
        "train_nmse": "10.0",
        "test_nmse": "12.0",
        "penalties": "0.0;0.0",
        "feasible": "1",
        "runtime_s": "0.100",
        "evaluations": "100",
        "model": "(x0 + 1.0)",
        "reference_divisions": "",
    }
    base.update({k: str(v) for k, v in overrides.items()})
    return base


class TestExperimentSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(instances=())
        with pytest.raises(ValueError):
            ExperimentSpec(instances=("I.6.20",), algorithms=("annealing",))
        with pytest.raises(ValueError):
            ExperimentSpec(instances=("I.6.20",), repetitions=0)
        with pytest.raises(ValueError):
            ExperimentSpec(instances=("I.6.20",), threads=0)

    def test_all_expands_to_catalog(self):
        assert len(tiny_spec(instances=("all",)).resolved_instances()) == 10

    def test_unknown_instance(self):
        with pytest.raises(KeyError):
            tiny_spec(instances=("I.0.0",)).resolved_instances()


class TestRunExperiment:
    def test_single_run_record(self):
        results, errors = run_experiment(tiny_spec())
        assert errors == []
        (res,) = results
        rec = result_record(res)
        assert tuple(rec) == RUN_FIELDS
        assert rec["instance"] == "I.6.20"
        assert int(rec["seed"]) == 0
        assert float(rec["train_nmse"]) == res.train_nmse
        assert rec["feasible"] in ("0", "1")
        penalties = [float(p) for p in rec["penalties"].split(";")]
        assert penalties == list(res.champion.objectives[1:])
        assert rec["reference_divisions"] == ""  # nsga2 uses no lattice
        # the model column round-trips through the expression grammar
        from shapesr.expr import from_string, to_string

        assert to_string(from_string(rec["model"])) == rec["model"]

    def test_seeds_are_base_plus_index(self):
        results, _ = run_experiment(tiny_spec(repetitions=3, base_seed=7))
        assert [r.seed for r in results] == [7, 8, 9]

    def test_rerun_is_identical_except_runtime(self):
        spec = tiny_spec(algorithms=("nsga2", "nsga3"), repetitions=2, evaluations=80)
        a, _ = run_experiment(spec)
        b, _ = run_experiment(spec)
        assert len(a) == len(b) == 4
        for ra, rb in zip(a, b):
            da, db = result_record(ra), result_record(rb)
            da.pop("runtime_s"), db.pop("runtime_s")
            assert da == db

    def test_parallel_matches_serial(self):
        serial, _ = run_experiment(tiny_spec(repetitions=2, population=16, evaluations=48))
        parallel, _ = run_experiment(
            tiny_spec(repetitions=2, population=16, evaluations=48, threads=2)
        )
        for rs, rp in zip(serial, parallel):
            ds, dp = result_record(rs), result_record(rp)
            ds.pop("runtime_s"), dp.pop("runtime_s")
            assert ds == dp

    def test_failed_run_does_not_abort_the_batch(self, monkeypatch):
        real = cli.run_single

        def flaky(name, algorithm, seed, *a, **k):
            if seed == 1:
                raise RuntimeError("boom")
            return real(name, algorithm, seed, *a, **k)

        monkeypatch.setattr(cli, "run_single", flaky)
        results, errors = run_experiment(tiny_spec(repetitions=3))
        assert [r.seed for r in results] == [0, 2]
        assert errors == [(("I.6.20", "nsga2", 1), "RuntimeError: boom")]

    def test_gp_and_moea_overrides_reach_the_run(self):
        spec = tiny_spec(moea_overrides={"tournament_size": 2})
        results, errors = run_experiment(spec)
        assert errors == [] and len(results) == 1
        bad = tiny_spec(moea_overrides={"tournament_size": 0})
        results, errors = run_experiment(bad)
        assert results == []
        assert len(errors) == 1 and "ValueError" in errors[0][1]


class TestSummarize:
    def test_median_odd_count(self):
        records = [
            tiny_records(seed=0, test_nmse=30.0),
            tiny_records(seed=1, test_nmse=10.0),
            tiny_records(seed=2, test_nmse=20.0),
        ]
        (row,) = summarize(records)
        assert float(row["median_test_nmse"]) == 20.0
        assert row["runs"] == "3"

    def test_median_runtime(self):
        records = [tiny_records(seed=s, runtime_s=f"{t:.3f}") for s, t in enumerate((3.0, 1.0, 2.0))]
        (row,) = summarize(records)
        assert float(row["median_runtime_s"]) == 2.0

    def test_feasible_rate(self):
        records = [tiny_records(seed=s, feasible=int(s != 1)) for s in range(4)]
        (row,) = summarize(records)
        assert row["feasible_rate"] == "0.75"

    def test_marks_strictly_better_algorithm(self):
        records = [
            tiny_records(algorithm="nsga2", test_nmse=50.0),
            tiny_records(algorithm="nsga3", test_nmse=20.0),
        ]
        rows = {r["algorithm"]: r for r in summarize(records)}
        assert rows["nsga3"]["best"] == "*"
        assert rows["nsga2"]["best"] == ""

    def test_tie_marks_both(self):
        records = [
            tiny_records(algorithm="nsga2", test_nmse=20.0),
            tiny_records(algorithm="nsga3", test_nmse=20.0),
        ]
        for row in summarize(records):
            assert row["best"] == "*"

    def test_single_algorithm_unmarked(self):
        (row,) = summarize([tiny_records()])
        assert row["best"] == ""

    def test_summary_csv_matches_independent_recomputation(self, tmp_path):
        rng = np.random.default_rng(3)
        records = [
            tiny_records(algorithm=alg, seed=s, test_nmse=rng.uniform(5, 50), runtime_s=f"{rng.uniform(1, 9):.3f}")
            for alg in ("nsga2", "nsga3")
            for s in range(5)
        ]
        path = tmp_path / "summary.csv"
        write_summary_csv(summarize(records), path)
        rows = list(csv.DictReader(path.open()))
        assert list(rows[0]) == list(SUMMARY_FIELDS)
        for row in rows:
            mine = [
                float(r["test_nmse"])
                for r in records
                if r["algorithm"] == row["algorithm"]
            ]
            times = [
                float(r["runtime_s"])
                for r in records
                if r["algorithm"] == row["algorithm"]
            ]
            assert float(row["median_test_nmse"]) == statistics.median(mine)
            assert float(row["median_runtime_s"]) == statistics.median(times)


class TestFiles:
    def test_runs_csv_round_trip(self, tmp_path):
        records = [tiny_records(seed=s, test_nmse=10.0 + s) for s in range(3)]
        path = tmp_path / "runs.csv"
        write_runs_csv(records, path)
        assert read_runs_csv(path) == records

    def test_history_csv(self, tmp_path):
        (res,), _ = run_experiment(tiny_spec())
        path = tmp_path / "h.csv"
        write_history_csv(res, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == [
            "generation",
            "evaluations",
            "best_feasible_nmse",
            "min_penalty_sum",
            "front0_size",
        ]
        assert len(rows) - 1 == res.generations + 1  # initial state plus one per generation
        assert rows[1][:2] == ["0", "20"]  # first log is the freshly seeded population
        # the infinite sentinel (no feasible member yet) must survive the round trip
        assert all(float(r[2]) >= 0.0 for r in rows[1:])
        assert all(float(r[3]) >= 0.0 for r in rows[1:])

    def test_format_summary_has_columns(self):
        text = format_summary(summarize([tiny_records()]))
        head = text.splitlines()[0]
        for col in ("instance", "algorithm", "median_test_nmse", "median_runtime_s"):
            assert col in head


class TestMain:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        assert "I.6.20" in out and "Pagie-1" in out
        assert len(out.strip().splitlines()) == 10

    def test_gen_data(self, tmp_path):
        out_file = tmp_path / "data.csv"
        assert main(["gen-data", "I.48.20", "--seed", "3", "--out", str(out_file)]) == 0
        rows = list(csv.reader(out_file.open()))
        assert rows[0] == ["m", "v", "c", "target", "split"]
        assert len(rows) == 301

    def test_run_writes_outputs(self, tmp_path, capsys):
        code = main(
            [
                "run",
                "--instance", "I.6.20",
                "--algorithm", "nsga2",
                "--reps", "2",
                "--pop", "20",
                "--evals", "60",
                "--out", str(tmp_path),
                "--quiet",
            ]
        )
        assert code == 0
        records = read_runs_csv(tmp_path / "runs.csv")
        assert len(records) == 2
        assert {r["seed"] for r in records} == {"0", "1"}
        for r in records:
            assert (tmp_path / f"history_I.6.20_nsga2_s{r['seed']}.csv").exists()
        summary = list(csv.DictReader((tmp_path / "summary.csv").open()))
        assert list(summary[0]) == list(SUMMARY_FIELDS)
        assert "median_test_nmse" in capsys.readouterr().out

    def test_run_config_file_with_flag_precedence(self, tmp_path, capsys):
        config = tmp_path / "exp.json"
        config.write_text(
            json.dumps(
                {
                    "instances": ["I.6.20"],
                    "algorithms": ["nsga2"],
                    "reps": 3,
                    "pop": 20,
                    "evals": 60,
                    "out": str(tmp_path / "results"),
                }
            )
        )
        # --reps on the command line beats the config's 3
        assert main(["run", "--config", str(config), "--reps", "1", "--quiet"]) == 0
        records = read_runs_csv(tmp_path / "results" / "runs.csv")
        assert len(records) == 1

    def test_run_exit_code_on_errors(self, tmp_path, capsys):
        config = tmp_path / "exp.json"
        config.write_text(
            json.dumps(
                {
                    "instances": ["I.6.20"],
                    "algorithms": ["nsga2"],
                    "reps": 1,
                    "pop": 20,
                    "evals": 60,
                    "moea": {"tournament_size": 0},
                }
            )
        )
        assert main(["run", "--config", str(config), "--quiet"]) == 1
        assert "ValueError" in capsys.readouterr().err

    def test_report(self, tmp_path, capsys):
        path = tmp_path / "runs.csv"
        write_runs_csv([tiny_records()], path)
        summary_csv = tmp_path / "summary.csv"
        assert main(["report", str(path), "--csv", str(summary_csv)]) == 0
        assert "I.6.20" in capsys.readouterr().out
        assert summary_csv.exists()

    def test_report_missing_file(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "nope.csv")]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_instance(self, capsys):
        assert main(["run", "--instance", "I.0.0", "--pop", "10", "--evals", "10"]) == 1
        assert "no instance named" in capsys.readouterr().err
