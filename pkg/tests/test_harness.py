import json

import pytest

from tepcuts.cli import main
from tepcuts.harness import (BASELINE, HEADERS, SWEEP, ExperimentConfig, emit_report,
                             parse_subset, report_from_records, resolve_instance, run_pipeline,
                             run_sweep, subset_label)
from tepcuts.oracle import enumerate_feasible

SWEEP_LABELS = ["TR", "HR", "LR", "TR⊕HR", "TR⊕LR", "HR⊕LR", "TR⊕HR⊕LR", "N/A"]


def test_parse_subset_forms():
    assert parse_subset("HR,TR") == ("TR", "HR")
    assert parse_subset("TR+LR") == parse_subset("TR⊕LR") == ("TR", "LR")
    assert parse_subset("N/A") == ()
    with pytest.raises(ValueError):
        parse_subset("XR")
    assert subset_label(("TR", "HR", "LR")) == "TR⊕HR⊕LR" and subset_label(()) == BASELINE


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("fig2_toy", relaxations=())
    with pytest.raises(ValueError):
        ExperimentConfig("fig2_toy", reps=0)
    with pytest.raises(ValueError):
        ExperimentConfig("fig2_toy", mode="eager")
    with pytest.raises(ValueError):
        ExperimentConfig("fig2_toy", families=("lemma3",))
    assert ExperimentConfig("fig2_toy", relaxations="LR,TR").relaxations == ("TR", "LR")


def test_resolve_instance(tmp_path):
    assert resolve_instance("fig2_toy").name == "fig2_toy"
    with pytest.raises(FileNotFoundError):
        resolve_instance(str(tmp_path / "nope.json"))


def test_baseline_only_report():
    report = run_pipeline(ExperimentConfig("fig1_variant", relaxations=(), cuts=False))
    assert report.ok and [r.label for r in report.rows] == ["N/A"]
    assert report.rows[0].n_cuts == 0


def test_fig2_pipeline_matches_oracle(fig2):
    report = run_pipeline(ExperimentConfig("fig2_toy", baseline=True))
    assert report.ok
    row = report.row("TR⊕HR⊕LR")
    assert row.n_cuts > 0
    best = enumerate_feasible(fig2).optimum().objective
    assert row.objective == pytest.approx(best, rel=1e-6)
    assert report.row("N/A").objective == pytest.approx(best, rel=1e-6)


def test_hr_and_lr_agree_on_objective():
    hr = run_pipeline(ExperimentConfig("garver6", relaxations=("HR",))).rows[0]
    lr = run_pipeline(ExperimentConfig("garver6", relaxations=("LR",))).rows[0]
    assert hr.objective == pytest.approx(lr.objective, rel=1e-6)
    assert hr.cut_counts != lr.cut_counts


def test_sweep_order_and_invariance():
    report = run_sweep(ExperimentConfig("fig2_toy", mode="usercut"))
    assert [r.label for r in report.rows] == SWEEP_LABELS and len(SWEEP) == 7
    objs = [r.objective for r in report.rows]
    assert max(objs) - min(objs) <= 1e-6 * abs(objs[0])


def test_totals_additive_and_reps():
    report = run_pipeline(ExperimentConfig("fig1_variant", reps=3))
    (row,) = report.rows
    assert len(row.repetitions) == 3
    for rep in row.repetitions:
        assert rep.total == pytest.approx(rep.relax_time + rep.path_search_time + rep.solution_time,
                                          abs=1e-9)
    assert row.total_min <= row.total <= row.total_max
    assert len({rep.objective for rep in row.repetitions}) == 1


def test_concurrent_reps_marked():
    report = run_pipeline(ExperimentConfig("fig1_variant", reps=2, concurrent=True))
    assert not report.rows[0].comparable
    assert json.loads(emit_report(report, "records").splitlines()[0])["comparable"] is False


def test_seeded_runs_repeat():
    cfg = dict(instance="garver6", seed=11, mode="usercut", relaxations=("LR",))
    a, b = run_pipeline(ExperimentConfig(**cfg)), run_pipeline(ExperimentConfig(**cfg))
    assert a.rows[0].node_counts == b.rows[0].node_counts
    assert a.rows[0].cut_counts == b.rows[0].cut_counts


def test_emit_table_and_round_trip():
    report = run_pipeline(ExperimentConfig("fig1_variant", baseline=True, reps=2))
    table = emit_report(report)
    lines = table.splitlines()
    assert lines[0].split("\t") == list(HEADERS)
    assert [ln.split("\t")[0] for ln in lines[1:]] == ["TR⊕HR⊕LR", "N/A"]
    again = report_from_records(emit_report(report, "records"))
    assert emit_report(again) == table
    assert emit_report(report, delimiter=",").splitlines()[0].startswith("Relaxation Models,")
    with pytest.raises(ValueError):
        emit_report(report, "xml")


def test_unknown_instance_marks_parse_stage():
    report = run_pipeline(ExperimentConfig("no_such_case"))
    assert not report.ok and report.failed_stage == "parse" and report.rows == []


def test_node_limit_failure_keeps_going():
    report = run_pipeline(ExperimentConfig("garver6", relaxations=(), cuts=False, node_limit=1))
    assert report.ok and report.rows[0].repetitions[0].status == "limit"


# -- command line ------------------------------------------------------------

def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_solve(capsys, tmp_path):
    log = tmp_path / "nodes.jsonl"
    code, out, _ = run_cli(capsys, "solve", "--instance", "fig2_toy", "--subsets", "TR,HR",
                           "--mode", "lazy", "--node-log", str(log))
    rec = json.loads(out)
    assert code == 0 and rec["objective"] == pytest.approx(15.71) and rec["cuts"] > 0
    assert rec["built"] == ["y_2_3_1"]
    assert all("event" in json.loads(ln) for ln in log.read_text().splitlines())


def test_cli_relax(capsys):
    code, out, _ = run_cli(capsys, "relax", "--instance", "fig1", "--kind", "transportation")
    lines = [json.loads(ln) for ln in out.splitlines()]
    assert code == 0 and lines[0]["objective"] == pytest.approx(1.5)
    assert {(r["from"], r["to"]) for r in lines[1:]} >= {(0, 1), (0, 2)}


def test_cli_gencuts(capsys):
    code, out, err = run_cli(capsys, "gencuts", "--instance", "fig1_variant")
    cuts = [json.loads(ln) for ln in out.splitlines()]
    assert code == 0 and len(cuts) == json.loads(err)["total"] > 0
    assert {"provenance", "path", "lower", "upper", "coeffs"} <= set(cuts[0])


def test_cli_verify(capsys):
    code, out, _ = run_cli(capsys, "verify", "--instance", "fig2_toy", "--all-assignments")
    last = json.loads(out.splitlines()[-1])
    assert code == 0 and last["match"] and last["assignments"] == 8


def test_cli_bench_sweep(capsys):
    code, out, _ = run_cli(capsys, "bench", "--instance", "fig1_variant", "--sweep",
                           "--delimiter", ",")
    lines = out.splitlines()
    assert code == 0 and [ln.split(",")[0] for ln in lines[1:]] == SWEEP_LABELS


def test_cli_export(capsys, tmp_path):
    target = tmp_path / "m.lp"
    code, _, _ = run_cli(capsys, "export", "--instance", "fig1_variant", "--subsets", "LR",
                         "--output", str(target))
    text = target.read_text()
    assert code == 0 and "Binaries" in text and "theorem1" in text
    assert text.rstrip().endswith("End")


def test_cli_errors(capsys):
    code, _, err = run_cli(capsys, "solve", "--instance", "nope")
    assert code == 1 and err.startswith("error:")
    with pytest.raises(SystemExit):
        main(["solve", "--instance", "fig1", "--families", "bogus"])
