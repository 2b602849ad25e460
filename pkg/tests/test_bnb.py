import json

import pytest
from hypothesis import given, settings

from tepcuts.backbone import layered_overlay
from tepcuts.bnb import BnbConfig, CutPool, solve_milp
from tepcuts.cuts import PathVi, generate_cut_pool
from tepcuts.fixtures import load_fixture
from tepcuts.lp import OPTIMAL, solve_lp
from tepcuts.model import (add_symmetry_breaking, build_full_model, build_relaxation,
                           compute_big_m, theta, y)
from tepcuts.oracle import enumerate_feasible

from conftest import DESK_FIXTURES, instances


def full(inst):
    return add_symmetry_breaking(build_full_model(inst, compute_big_m(inst)), inst)


def pool_for(inst, mode):
    return generate_cut_pool(inst, layered_overlay(inst, include_candidates=True),
                             injection_mode=mode)


def test_no_binaries_single_node(fig1):
    res = solve_milp(build_full_model(fig1))
    assert res.node_count == 1 and res.objective == pytest.approx(
        solve_lp(build_full_model(fig1)).objective)


def test_linear_relaxation_label_rejected(fig1v):
    with pytest.raises(ValueError, match="linear_relax"):
        solve_milp(build_relaxation(fig1v, None, "linear"))


def test_fig1_variant_matches_oracle(fig1v):
    res = solve_milp(full(fig1v))
    assert res.objective == pytest.approx(enumerate_feasible(fig1v).optimum().objective, rel=1e-6)
    assert res.values[y(1, 2)] == pytest.approx(1.0)


@pytest.mark.parametrize("name", DESK_FIXTURES)
def test_modes_agree(name):
    inst = load_fixture(name)
    objs = {mode: solve_milp(full(inst), pool_for(inst, mode)).objective
            for mode in ("upfront", "usercut", "lazy")}
    base = solve_milp(full(inst)).objective
    assert max(objs.values()) - min(objs.values()) <= 1e-6 * max(1.0, abs(base))
    assert objs["upfront"] == pytest.approx(base, rel=1e-6)


@pytest.mark.parametrize("name", DESK_FIXTURES)
def test_result_invariants(name):
    inst = load_fixture(name)
    res = solve_milp(full(inst), pool_for(inst, "usercut"))
    assert res.status == OPTIMAL
    assert abs(res.objective - res.bound) <= 1e-6 * max(1.0, abs(res.objective))
    assert res.lp_solve_count >= res.node_count >= 1
    for v in full(inst).binaries:
        assert min(abs(res.values[v]), abs(res.values[v] - 1)) <= 1e-5
    bounds = [rec["best_bound"] for rec in res.node_log if rec["best_bound"] is not None]
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(bounds, bounds[1:]))


def test_node_log_records(garver):
    res = solve_milp(full(garver))
    lines = res.node_log_lines().splitlines()
    assert len(lines) == len(res.node_log) >= 1
    rec = json.loads(lines[0])
    assert set(rec) >= {"node", "depth", "bound", "fractional", "cuts_added", "event"}
    assert rec["depth"] == 0


def test_node_limit_reports_bound(garver):
    res = solve_milp(full(garver), config=BnbConfig(node_limit=2))
    assert res.status == "limit"
    assert res.bound <= solve_milp(full(garver)).objective + 1e-9


def test_cut_pool_dedup_and_counts():
    cut = PathVi("lemma1", {theta(1): 1.0, theta(0): -1.0}, 0.3, path=(0, 1))
    flipped = PathVi("lemma2", {theta(1): -1.0, theta(0): 1.0}, 0.3, path=(1, 0))
    other = PathVi("lemma1", {theta(1): 1.0, theta(0): -1.0}, 0.4, path=(0, 1))
    pool = CutPool([cut, flipped, other])
    assert len(pool) == 2 and pool.counts() == {"lemma1": 2}
    assert len(pool.rows()) == 4
    with pytest.raises(ValueError):
        CutPool([], "eager")


def test_usercut_adds_violated_cuts(fig1v):
    res = solve_milp(full(fig1v), pool_for(fig1v, "usercut"))
    assert res.cuts_applied_count >= 1
    assert sum(rec["cuts_added"] for rec in res.node_log) == res.cuts_applied_count


def test_lazy_rejects_on_hybrid_probe():
    inst = load_fixture("lazy_probe")
    model = build_relaxation(inst, compute_big_m(inst), "hybrid")
    res = solve_milp(model, pool_for(inst, "lazy"))
    assert res.lazy_rejections >= 1
    assert any(rec["lazy_rejections"] for rec in res.node_log)
    assert res.objective == pytest.approx(solve_milp(model, pool_for(inst, "upfront")).objective)


@settings(max_examples=20)
@given(instances(max_binaries=4))
def test_oracle_equivalence_property(inst):
    res = solve_milp(full(inst))
    best = enumerate_feasible(inst).optimum()
    assert res.objective == pytest.approx(best.objective, rel=1e-6, abs=1e-9)


@settings(max_examples=10)
@given(instances(max_binaries=4))
def test_modes_agree_property(inst):
    objs = [solve_milp(full(inst), pool_for(inst, mode)).objective
            for mode in ("upfront", "usercut", "lazy")]
    assert max(objs) - min(objs) <= 1e-6 * max(1.0, abs(objs[0]))
