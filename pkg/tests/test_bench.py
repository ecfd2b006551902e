"""Harness tests: config loading, seeding, CSV I/O, the run matrix, the CLI."""

from __future__ import annotations

import dataclasses
import json
from fractions import Fraction
from pathlib import Path

import pytest

from srcpsp import bench
from srcpsp.bench import (
    CSV_HEADER,
    BenchConfig,
    ResultRow,
    ResultsTable,
    assert_acyclic,
    derive_seed,
    feasibility_csv,
    feasibility_grid,
    feasibility_ratio,
    ordering_to_dot,
    run_bench,
)
from srcpsp.instances import ProjectInstance, serialize_psplib
from srcpsp.methods import PROACTIVE_Q, STNU, MethodRun
from srcpsp.stats import STRONG, WEAK, PartialOrdering

DATA = Path(__file__).resolve().parent.parent / "data"
EXAMPLE = DATA / "example.sch"

UNSATISFIABLE = ProjectInstance(
    activity_count=1,
    durations=(0, 1, 0),
    demands=((0, 1, 0),),
    capacities=(1,),
    # window [5, 1] is empty, so no duration vector admits a schedule
    temporal_constraints=((0, 1, 5), (1, 0, -1), (0, 2, 0), (1, 2, 1)),
)


def make_row(**overrides) -> ResultRow:
    base = dict(
        instance_set="j10",
        instance="j10_01",
        epsilon=1.0,
        sample=0,
        method=PROACTIVE_Q,
        feasible=True,
        makespan=20,
        time_offline_ms=12.5,
        time_online_ms=0.25,
        failure_reason=None,
        seed=42,
    )
    base.update(overrides)
    return ResultRow(**base)


# -- seed derivation -------------------------------------------------------


def test_derive_seed_is_stable_and_in_range():
    seed = derive_seed(1, "psp01", 1.0, 0)
    assert seed == derive_seed(1, "psp01", 1.0, 0)
    assert 0 <= seed < 2**63


def test_derive_seed_treats_integral_epsilon_canonically():
    assert derive_seed(5, "x", 1, 3) == derive_seed(5, "x", 1.0, 3)
    assert derive_seed(5, "x", 0.5, 3) != derive_seed(5, "x", 1.0, 3)


def test_derive_seed_separates_cells():
    seeds = {
        derive_seed(master, inst, eps, k)
        for master in (1, 2)
        for inst in ("a", "b")
        for eps in (1.0, 2.0)
        for k in range(3)
    }
    assert len(seeds) == 24


# -- configuration ---------------------------------------------------------


def test_config_defaults_from_minimal_mapping():
    cfg = BenchConfig.from_mapping({"instance_sets": {"j10": "data/j10/*.sch"}})
    assert cfg.instance_sets == (("j10", ("data/j10/*.sch",)),)
    assert cfg.instances_per_set == 50
    assert cfg.epsilons == (1.0, 2.0)
    assert cfg.samples_per_instance == 10
    assert set(cfg.methods) == set(bench.DEFAULT_METHODS)
    assert cfg.alpha == 0.05
    assert cfg.config_for(STNU).gamma == 1.0
    assert cfg.config_for("proactive_saa").time_limit_offline == 300.0
    assert cfg.config_for("reactive").time_limit_reschedule == 2.0


def test_config_merges_method_overrides():
    cfg = BenchConfig.from_mapping(
        {
            "instance_sets": {"s": ["a*.sch", "b*.sch"]},
            "method_configs": {
                "stnu": {"gamma": 0.5},
                "proactive_saa": {"saa_gammas": [0.5, 1.0]},
            },
        }
    )
    assert cfg.config_for("stnu").gamma == 0.5
    # untouched settings keep their defaults
    assert cfg.config_for("stnu").time_limit_offline == 60.0
    assert cfg.config_for("proactive_saa").saa_gammas == (0.5, 1.0)
    assert cfg.config_for("proactive_q").gamma == 0.9


@pytest.mark.parametrize(
    "mapping",
    [
        {},
        {"instance_sets": {}},
        {"instance_sets": {"s": "*.sch"}, "bogus_key": 1},
        {"instance_sets": {"s": "*.sch"}, "instances_per_set": 0},
        {"instance_sets": {"s": "*.sch"}, "samples_per_instance": 0},
        {"instance_sets": {"s": "*.sch"}, "epsilons": []},
        {"instance_sets": {"s": "*.sch"}, "epsilons": [-1]},
        {"instance_sets": {"s": "*.sch"}, "methods": []},
        {"instance_sets": {"s": "*.sch"}, "methods": ["warlock"]},
        {"instance_sets": {"s": "*.sch"}, "methods": ["stnu", "stnu"]},
        {"instance_sets": {"s": "*.sch"}, "method_configs": {"warlock": {}}},
        {"instance_sets": {"s": "*.sch"}, "method_configs": {"stnu": {"bogus": 1}}},
        {"instance_sets": {"s": "*.sch"}, "alpha": 0},
        {"instance_sets": {"s": "*.sch"}, "alpha": 1},
        {"instance_sets": {"s": "*.sch"}, "parallelism": 0},
    ],
)
def test_config_rejects_bad_mappings(mapping):
    with pytest.raises(ValueError):
        BenchConfig.from_mapping(mapping)


def test_config_jobs_prefers_explicit_setting(monkeypatch):
    monkeypatch.setenv(bench.ENV_PARALLELISM, "8")
    cfg = BenchConfig.from_mapping(
        {"instance_sets": {"s": "*.sch"}, "parallelism": 2}
    )
    assert cfg.jobs() == 2


def test_config_jobs_reads_environment(monkeypatch):
    cfg = BenchConfig.from_mapping({"instance_sets": {"s": "*.sch"}})
    monkeypatch.delenv(bench.ENV_PARALLELISM, raising=False)
    assert cfg.jobs() == 1
    monkeypatch.setenv(bench.ENV_PARALLELISM, "4")
    assert cfg.jobs() == 4
    monkeypatch.setenv(bench.ENV_PARALLELISM, "many")
    with pytest.raises(ValueError):
        cfg.jobs()


def test_config_from_json_reports_bad_documents(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ValueError, match="invalid JSON"):
        BenchConfig.from_json(path)
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError, match="JSON object"):
        BenchConfig.from_json(path)


# -- results table ---------------------------------------------------------


def test_results_csv_round_trip():
    rows = (
        make_row(sample=0, makespan=20),
        make_row(sample=1, feasible=False, makespan=None, failure_reason="not_dc"),
    )
    table = ResultsTable(rows=rows)
    text = table.to_csv()
    assert text.splitlines()[0] == CSV_HEADER
    again = ResultsTable.from_csv(text)
    assert again.rows == rows


def test_results_table_rejects_duplicate_cells():
    row = make_row()
    with pytest.raises(ValueError, match="duplicate"):
        ResultsTable(rows=(row, dataclasses.replace(row, seed=7)))


def test_results_csv_rejects_foreign_headers():
    with pytest.raises(ValueError, match="header"):
        ResultsTable.from_csv("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="empty"):
        ResultsTable.from_csv("")


def test_results_csv_reports_offending_line():
    text = CSV_HEADER + "\nj10,i,1,0,stnu,maybe,3,1.0,1.0,,5\n"
    with pytest.raises(ValueError, match="line 2"):
        ResultsTable.from_csv(text)
    text = CSV_HEADER + "\nj10,i,1,0\n"
    with pytest.raises(ValueError, match="line 2"):
        ResultsTable.from_csv(text)


def test_to_method_runs_converts_and_filters():
    rows = (
        make_row(epsilon=1.0, method="stnu", makespan=11),
        make_row(epsilon=2.0, method="stnu", sample=1, seed=43),
        make_row(epsilon=1.0, method="reactive", instance_set="ubo", seed=44),
    )
    table = ResultsTable(rows=rows)
    runs = table.to_method_runs()
    assert len(runs) == 3
    assert all(isinstance(r, MethodRun) for r in runs)
    assert runs[0].time_offline == pytest.approx(0.0125)
    assert runs[0].time_online == pytest.approx(0.00025)
    only_eps1 = table.to_method_runs(epsilon=1.0)
    assert {r.method for r in only_eps1} == {"stnu", "reactive"}
    only_ubo = table.to_method_runs(instance_set="ubo")
    assert [r.method for r in only_ubo] == ["reactive"]


def test_feasibility_ratio_is_exact_or_absent():
    rows = tuple(
        make_row(sample=k, feasible=k < 7, makespan=20 if k < 7 else None,
                 failure_reason=None if k < 7 else "execution_violation")
        for k in range(10)
    )
    table = ResultsTable(rows=rows)
    assert feasibility_ratio(table, PROACTIVE_Q, "j10", 1.0) == Fraction(7, 10)
    assert feasibility_ratio(table, PROACTIVE_Q, "j10", 2.0) is None
    assert feasibility_ratio(table, "stnu", "j10", 1.0) is None
    grid = feasibility_grid(table)
    assert "epsilon=1" in grid and "0.70" in grid
    csv_text = feasibility_csv(table)
    assert "1,j10,proactive_q,7/10" in csv_text


# -- run matrix ------------------------------------------------------------


def small_config(tmp_path, **overrides) -> BenchConfig:
    mapping = {
        "instance_sets": {"demo": str(EXAMPLE)},
        "instances_per_set": 1,
        "epsilons": [1],
        "samples_per_instance": 3,
        "methods": [PROACTIVE_Q, STNU],
        "output_dir": str(tmp_path / "out"),
        "master_seed": 11,
    }
    mapping.update(overrides)
    return BenchConfig.from_mapping(mapping)


def test_run_bench_produces_sorted_complete_table(tmp_path):
    table, excluded = run_bench(small_config(tmp_path))
    assert excluded == 0
    assert len(table) == 6  # 3 samples x 2 methods
    assert [r.sort_key() for r in table.rows] == sorted(
        r.sort_key() for r in table.rows
    )
    assert {r.method for r in table.rows} == {PROACTIVE_Q, STNU}
    # both methods on one sample share the realized scenario
    seeds = {(r.sample, r.seed) for r in table.rows}
    assert len(seeds) == 3


def test_run_bench_is_deterministic_modulo_wall_time(tmp_path):
    def stripped(table):
        return [
            dataclasses.replace(row, time_offline_ms=0.0, time_online_ms=0.0)
            for row in table.rows
        ]

    first, _ = run_bench(small_config(tmp_path))
    second, _ = run_bench(small_config(tmp_path))
    assert stripped(first) == stripped(second)


def test_run_bench_parallel_matches_serial(tmp_path):
    serial, excluded_s = run_bench(small_config(tmp_path))
    parallel, excluded_p = run_bench(small_config(tmp_path, parallelism=2))
    assert excluded_s == excluded_p
    strip = lambda t: [
        dataclasses.replace(r, time_offline_ms=0.0, time_online_ms=0.0)
        for r in t.rows
    ]
    assert strip(serial) == strip(parallel)


def test_run_bench_sink_sees_every_row(tmp_path):
    seen = []
    table, _ = run_bench(small_config(tmp_path), sink=seen.append)
    assert sorted(r.sort_key() for r in seen) == [r.sort_key() for r in table.rows]


def test_run_bench_excludes_inherently_infeasible_cells(tmp_path):
    path = tmp_path / "unsat.sch"
    path.write_text(serialize_psplib(UNSATISFIABLE), encoding="utf-8")
    cfg = small_config(tmp_path, instance_sets={"bad": str(path)})
    table, excluded = run_bench(cfg)
    assert excluded == 3
    assert len(table) == 0


def test_run_bench_rejects_empty_instance_sets(tmp_path):
    cfg = small_config(tmp_path, instance_sets={"ghost": str(tmp_path / "*.none")})
    with pytest.raises(ValueError, match="matched no files"):
        run_bench(cfg)


def test_audit_stops_methods_that_misreport_feasibility(tmp_path, monkeypatch):
    def lying_runner(stoch, cfg, sample):
        total = stoch.base.n_activities
        return MethodRun(
            method=PROACTIVE_Q,
            instance="",
            seed=sample.seed,
            feasible=True,
            makespan=1,
            time_offline=0.0,
            time_online=0.0,
            failure_reason=None,
            starts=tuple([0] * total),  # everything at once: resource overload
        )

    monkeypatch.setitem(bench._RUNNERS, PROACTIVE_Q, lying_runner)
    cfg = small_config(tmp_path, methods=[PROACTIVE_Q])
    with pytest.raises(RuntimeError, match="audit"):
        run_bench(cfg)


# -- reporting -------------------------------------------------------------


def test_ordering_to_dot_styles_edge_strengths():
    ordering = PartialOrdering(
        methods=("a", "b", "c"),
        metric="quality",
        edges=(("a", "b", STRONG), ("b", "c", WEAK)),
        annotations={},
    )
    dot = ordering_to_dot(ordering)
    assert dot.startswith('digraph "quality" {')
    assert '"a" -> "b" [style=solid];' in dot
    assert '"b" -> "c" [style=dashed];' in dot
    assert '  "c";' in dot
    assert dot.rstrip().endswith("}")


def test_assert_acyclic_accepts_dags_and_rejects_cycles():
    good = PartialOrdering(
        methods=("a", "b", "c"),
        metric="quality",
        edges=(("a", "b", STRONG), ("a", "c", WEAK), ("b", "c", STRONG)),
        annotations={},
    )
    assert_acyclic(good)
    bad = PartialOrdering(
        methods=("a", "b", "c"),
        metric="quality",
        edges=(("a", "b", STRONG), ("b", "c", STRONG), ("c", "a", STRONG)),
        annotations={},
    )
    with pytest.raises(ValueError, match="cycle"):
        assert_acyclic(bad)


# -- command line ----------------------------------------------------------


def test_cli_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as info:
        bench.main([])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        bench.main(["simulate", "--instance", str(EXAMPLE)])
    assert info.value.code == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_cli_data_errors_exit_two(tmp_path, capsys):
    assert bench.main(["solve", str(tmp_path / "missing.sch")]) == 2
    bad = tmp_path / "bad.sch"
    bad.write_text("gibberish\n", encoding="utf-8")
    assert bench.main(["solve", str(bad)]) == 2
    assert (
        bench.main(
            ["check", "--instance", str(EXAMPLE), "--schedule", "1,2,3"]
        )
        == 2
    )
    err = capsys.readouterr().err
    assert "error" in err


def test_cli_rejects_out_of_range_numerics(tmp_path, capsys):
    simulate = ["simulate", "--instance", str(EXAMPLE), "--method", "stnu"]
    assert bench.main([*simulate, "--epsilon", "1", "--samples", "0"]) == 2
    assert bench.main([*simulate, "--epsilon", "-1"]) == 2
    results = tmp_path / "results.csv"
    results.write_text(
        CSV_HEADER + "\n"
        "j10,j10_01,1,0,stnu,true,40,1.000,1.000,,7\n",
        encoding="utf-8",
    )
    stats = ["stats", "--results", str(results), "--metric", "quality"]
    assert bench.main([*stats, "--alpha", "0"]) == 2
    assert bench.main([*stats, "--alpha", "1.5"]) == 2
    err = capsys.readouterr().err
    assert "--samples" in err
    assert "--alpha" in err


def test_cli_solve_prints_schedule(capsys):
    assert bench.main(["solve", str(EXAMPLE), "--time-limit", "10"]) == 0
    out = capsys.readouterr().out
    assert "status: Optimal" in out
    assert "makespan: 8" in out
    assert "starts: 0,1,3,5,0,3,7" in out


def test_cli_check_reports_both_verdicts(capsys):
    good = "0,1,3,5,0,3,7"
    assert bench.main(["check", "--instance", str(EXAMPLE), "--schedule", good]) == 0
    assert "feasible" in capsys.readouterr().out
    bad = "0,0,0,0,0,0,0"
    assert bench.main(["check", "--instance", str(EXAMPLE), "--schedule", bad]) == 0
    out = capsys.readouterr().out
    assert "infeasible" in out
    assert "violated" in out or "exceeds capacity" in out


def test_cli_simulate_appends_csv(tmp_path, capsys):
    out_file = tmp_path / "runs.csv"
    argv = [
        "simulate",
        "--instance", str(EXAMPLE),
        "--method", "stnu",
        "--epsilon", "1",
        "--samples", "2",
        "--seed", "3",
        "--out", str(out_file),
    ]
    assert bench.main(argv) == 0
    assert bench.main(argv) == 0
    lines = out_file.read_text(encoding="utf-8").splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 5  # one header, two appended batches of two
    assert all(",stnu," in line for line in lines[1:])


def test_cli_simulate_prints_csv_without_out(capsys):
    argv = [
        "simulate",
        "--instance", str(EXAMPLE),
        "--method", "proactive_q",
        "--epsilon", "0",
        "--samples", "1",
    ]
    assert bench.main(argv) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == CSV_HEADER
    assert out[1].split(",")[4] == "proactive_q"


def test_cli_bench_writes_results_and_feasibility(tmp_path, capsys):
    config = {
        "instance_sets": {"demo": str(EXAMPLE)},
        "instances_per_set": 1,
        "epsilons": [1],
        "samples_per_instance": 2,
        "methods": ["proactive_q", "stnu"],
        "output_dir": str(tmp_path / "out"),
        "master_seed": 5,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config), encoding="utf-8")
    assert bench.main(["bench", "--config", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "4 rows" in out
    results = (tmp_path / "out" / "results.csv").read_text(encoding="utf-8")
    assert results.splitlines()[0] == CSV_HEADER
    table = ResultsTable.from_csv(results)
    assert len(table) == 4
    feas = (tmp_path / "out" / "feasibility.csv").read_text(encoding="utf-8")
    assert feas.splitlines()[0] == "epsilon,instance_set,method,feasible_ratio"


def test_cli_stats_emits_report_and_dot(tmp_path, capsys):
    rows = []
    for k in range(30):
        rows.append(
            make_row(
                instance=f"i{k:02d}", method="alpha", makespan=10, seed=k,
                time_offline_ms=1.0, time_online_ms=1.0,
            )
        )
        rows.append(
            make_row(
                instance=f"i{k:02d}", method="beta", makespan=20 + k, seed=k,
                time_offline_ms=1.0, time_online_ms=1.0,
            )
        )
    csv_path = tmp_path / "results.csv"
    csv_path.write_text(ResultsTable(rows=tuple(rows)).to_csv(), encoding="utf-8")
    dot_path = tmp_path / "quality.dot"
    argv = [
        "stats",
        "--results", str(csv_path),
        "--metric", "quality",
        "--out", str(dot_path),
    ]
    assert bench.main(argv) == 0
    out = capsys.readouterr().out
    assert "alpha vs beta" in out
    assert "alpha -> beta [strong]" in out
    assert '"alpha" -> "beta" [style=solid];' in dot_path.read_text(encoding="utf-8")


def test_cli_stats_rejects_empty_selection(tmp_path, capsys):
    csv_path = tmp_path / "results.csv"
    csv_path.write_text(
        ResultsTable(rows=(make_row(),)).to_csv(), encoding="utf-8"
    )
    code = bench.main(
        ["stats", "--results", str(csv_path), "--metric", "quality",
         "--epsilon", "9"]
    )
    assert code == 2
    assert "no rows" in capsys.readouterr().err
