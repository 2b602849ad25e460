import math

import pytest
from hypothesis import given, settings

from tepcuts.backbone import (DirectedPath, FlowOverlay, ParallelFamily, enumerate_paths,
                              layered_overlay)
from tepcuts.cuts import (CutScopeError, PathVi, cr_product, generate_cut_pool, lemma1_cut,
                          lemma2_cuts, line_paths, theorem1_cut, theorem2_cut)
from tepcuts.instance import Bus, Corridor, Line, TepInstance, established_subgraph
from tepcuts.model import AngleBounds, longest_simple_path, theta
from tepcuts.oracle import enumerate_feasible, verify_cut_validity, verify_cuts

from conftest import instances

RHO1, RHO2 = DirectedPath((0, 1, 2, 5)), DirectedPath((0, 4, 5))
RHO5 = DirectedPath((0, 1, 2, 3))


def coeff_names(cut):
    return {v.name: pytest.approx(a) for v, a in cut.coeffs.items()}


def test_cr_products(fig1):
    assert cr_product(DirectedPath((0, 1, 2)), fig1).value == pytest.approx(0.2)
    assert cr_product(DirectedPath((0, 2)), fig1).value == pytest.approx(0.3)
    assert cr_product(DirectedPath((0, 1)), fig1).value < cr_product(
        DirectedPath((0, 1, 2)), fig1).value


def test_cr_bad_selection(fig1):
    with pytest.raises(ValueError):
        cr_product(DirectedPath((0, 1)), fig1, [("existing", 2)])
    with pytest.raises(ValueError):
        cr_product(DirectedPath((0, 1, 2)), fig1, [("existing", 1)])


def test_lemma1_rho2(fig2):
    cut = lemma1_cut(RHO2, fig2)
    assert cut.rhs == pytest.approx(0.15 + 0.15)
    assert coeff_names(cut) == {"p0_0_4_1": -0.1, "p0_4_5_1": -0.1}
    assert len(cut.rows()) == 2 and cut.lower == -cut.upper


def test_lemma1_rho1_three_terms(fig2):
    cut = lemma1_cut(RHO1, fig2)
    assert cut.rhs == pytest.approx(0.4)
    assert coeff_names(cut) == {"p0_0_1_1": -0.1, "p0_1_2_1": -0.1, "p0_2_5_1": -0.1}


def test_lemma1_reverse_direction_flips_signs(fig2):
    cut = lemma1_cut(DirectedPath((5, 4, 0)), fig2)
    assert coeff_names(cut) == {"p0_0_4_1": 0.1, "p0_4_5_1": 0.1}


def test_lemma1_single_corridor_is_line_bound(fig1):
    assert lemma1_cut(DirectedPath((0, 2)), fig1).rhs == pytest.approx(0.3 * 1.0)


def test_lemma1_refuses_expansion_corridor(fig1v):
    with pytest.raises(CutScopeError):
        lemma1_cut(DirectedPath((0, 1, 2)), fig1v)


def test_lemma2_bounds_rho1_by_rho2(fig2):
    cuts = lemma2_cuts(ParallelFamily(0, 5, (RHO1, RHO2)), fig2)
    assert [c.rhs for c in cuts] == pytest.approx([0.3, 0.3])
    assert cuts[0].rhs == min(lemma1_cut(RHO1, fig2).rhs, lemma1_cut(RHO2, fig2).rhs)
    sols = enumerate_feasible(fig2)
    assert all(v.valid for v in verify_cuts(cuts, sols, fig2))


def test_lemma2_refuses_expansion_member(fig2):
    fam = ParallelFamily(0, 5, (DirectedPath((0, 1, 5)), RHO2))
    with pytest.raises(CutScopeError):
        lemma2_cuts(fam, fig2)


def three_parallel():
    # three two-hop routes 0 -> 4 with CR 0.2, 0.4 and 0.4
    buses = (Bus(0, 0, 4, 1), Bus(1, 0, 0, 0), Bus(2, 0, 0, 0), Bus(3, 0, 0, 0),
             Bus(4, 3.0, 3.0, 10))
    lines = {1: Line(0.1, 1.0), 2: Line(0.2, 1.0), 3: Line(0.1, 2.0)}
    corridors = []
    for mid, ln in lines.items():
        corridors += [Corridor(0, mid, (ln,), (), 1.0), Corridor(mid, 4, (ln,), (), 1.0)]
    corridors.append(Corridor(0, 4, (), (Line(0.1, 1.0, 1.0),), 1.0))
    return TepInstance(buses, tuple(corridors), 1.0, 1.0, "three_parallel")


def test_lemma2_three_member_family():
    inst = three_parallel()
    fam = ParallelFamily(0, 4, tuple(DirectedPath((0, m, 4)) for m in (1, 2, 3)))
    cuts = lemma2_cuts(fam, inst)
    assert [c.rhs for c in cuts] == pytest.approx([0.2] * 3)
    sols = enumerate_feasible(inst)
    assert all(v.valid for v in verify_cuts(cuts, sols, inst))
    # the shared bound is tight: shaving it makes the widest member's cut fail
    tighter = PathVi("lemma2", cuts[1].coeffs, 0.19, path=cuts[1].path)
    assert not verify_cut_validity(tighter, sols, inst).valid


def test_lemma2_equal_crs_match_lemma1(fig2):
    inst = three_parallel()
    fam = ParallelFamily(0, 4, (DirectedPath((0, 2, 4)), DirectedPath((0, 3, 4))))
    assert [c.rhs for c in lemma2_cuts(fam, inst)] == [
        lemma1_cut(m, inst).rhs for m in fam.members]


def test_theorem1_fig1_variant(fig1v):
    bounds = AngleBounds(fig1v)
    cuts = theorem1_cut(DirectedPath((0, 1, 2)), fig1v, bounds(0, 2), bounds.established_cr(0, 2))
    assert len(cuts) == 2
    for cut in cuts:
        # |theta_2 - theta_0| <= 2xP + xP (1 - y)
        assert cut.rhs == pytest.approx(0.3)
        assert {v.name: a for v, a in cut.build_coeffs.items()} == {"y_1_2_1": pytest.approx(0.1)}
        assert coeff_names(cut) == {"theta_2": 1.0, "theta_0": -1.0}
    assert verify_cut_validity(cuts[0], enumerate_feasible(fig1v), fig1v).valid


def test_theorem1_rho5(fig2):
    bounds = AngleBounds(fig2)
    # the established routes 0..3 are rho3 (CR 0.8) and rho4 (CR 0.7)
    assert bounds.established_cr(0, 3) == pytest.approx(0.7)
    cuts = theorem1_cut(RHO5, fig2, bounds(0, 3), bounds.established_cr(0, 3))
    assert cuts
    for cut in cuts:
        assert cut.rhs == pytest.approx(0.45 + 0.25)
        assert {v.name: a for v, a in cut.build_coeffs.items()} == {"y_2_3_1": pytest.approx(0.25)}
    assert all(v.valid for v in verify_cuts(cuts, enumerate_feasible(fig2), fig2))


def test_theorem1_rhs_collapses_when_built(fig2):
    cut = theorem1_cut(RHO5, fig2, 0.7)[0]
    built = cut.rhs - sum(cut.build_coeffs.values())
    assert built == pytest.approx(cr_product(RHO5, fig2).value)


def test_theorem1_refuses_established_path(fig2):
    with pytest.raises(CutScopeError):
        theorem1_cut(RHO1, fig2, 1.0)


def test_theorem1_skipped_when_bound_below_cr(fig2):
    assert theorem1_cut(RHO5, fig2, 0.3) == []


def test_theorem2_existing_only_equals_lemma_bound(fig2):
    (cut,) = theorem2_cut(RHO1, [("existing", 1)] * 3, fig2, 1.0)
    assert cut.rhs == pytest.approx(lemma1_cut(RHO1, fig2).rhs) and not cut.build_coeffs
    assert coeff_names(cut) == {"theta_5": 1.0, "theta_0": -1.0}


def test_theorem2_second_identical_candidate():
    inst = TepInstance((Bus(0, 0, 2, 1), Bus(1, 0.5, 0.5, 5), Bus(2, 0, 0, 0)),
                       (Corridor(0, 1, (), (Line(0.1, 1, 1),) * 2, 1.0),
                        Corridor(0, 2, (Line(0.2, 1),), (), 1.0),
                        Corridor(1, 2, (Line(0.2, 1),), (), 1.0)), 1.0, 1.0, "two_cands")
    cuts = theorem2_cut(DirectedPath((0, 1)), [("candidate", 2)], inst, 0.4)
    assert [v.name for c in cuts for v in c.build_coeffs] == ["y_0_1_2"]
    with pytest.raises(ValueError):
        theorem2_cut(DirectedPath((0, 1)), [("candidate", 3)], inst, 0.4)
    assert len(line_paths(DirectedPath((0, 1)), inst)) == 2


def test_theorem2_through_parallel_candidate(fig2):
    # longest established 0..2 route is 0-4-5-2, an upper bound on |theta_2 - theta_0|
    upper = longest_simple_path(established_subgraph(fig2), 0, 2)
    assert upper == pytest.approx(0.4)
    path = DirectedPath((0, 1, 2))
    (cut,) = theorem2_cut(path, [("existing", 1), ("candidate", 1)], fig2, upper)
    assert {v.name: a for v, a in cut.build_coeffs.items()} == {"y_1_2_1": pytest.approx(0.1)}
    assert cut.rhs == pytest.approx(0.4)
    assert verify_cut_validity(cut, enumerate_feasible(fig2), fig2).valid


def test_pool_contains_worked_examples(fig2):
    pool = generate_cut_pool(fig2, layered_overlay(fig2, include_candidates=True))
    keys = {c.canonical_key() for c in pool}
    bounds = AngleBounds(fig2)
    expected = [lemma1_cut(RHO1, fig2), lemma1_cut(RHO2, fig2)]
    expected += lemma2_cuts(ParallelFamily(0, 5, (RHO2, RHO1)), fig2)
    expected += theorem1_cut(RHO5, fig2, bounds(0, 3), bounds.established_cr(0, 3))
    for cut in expected:
        assert cut.canonical_key() in keys, cut.record()
    assert set(pool.counts()) <= {"lemma1", "lemma2", "theorem1", "theorem1_strengthened",
                                  "theorem2"}


def test_empty_overlay_empty_pool(fig2):
    assert len(generate_cut_pool(fig2, FlowOverlay(frozenset()))) == 0


def test_unknown_family_rejected(fig2):
    with pytest.raises(ValueError, match="bogus"):
        generate_cut_pool(fig2, layered_overlay(fig2), families=["bogus"])


def test_symmetry_off_switches_to_line_paths(fig2):
    pool = generate_cut_pool(fig2, layered_overlay(fig2, include_candidates=True),
                             symmetry=False)
    assert "theorem1" not in pool.counts() and pool.counts().get("theorem2", 0) > 0


def test_seeded_shuffle_keeps_content(fig2):
    ov = layered_overlay(fig2, include_candidates=True)
    plain = generate_cut_pool(fig2, ov)
    a, b = generate_cut_pool(fig2, ov, seed=3), generate_cut_pool(fig2, ov, seed=3)
    assert [c.canonical_key() for c in a] == [c.canonical_key() for c in b]
    assert sorted(c.canonical_key() for c in a) == sorted(c.canonical_key() for c in plain)
    assert a.counts() == plain.counts()


def test_lemma_cuts_touch_flows_theorem_cuts_angles(garver):
    pool = generate_cut_pool(garver, layered_overlay(garver, include_candidates=True))
    for cut in pool:
        kinds = {v.kind for v in cut.coeffs}
        assert kinds == ({"p0"} if cut.provenance.startswith("lemma") else {"theta"})
        assert math.isfinite(cut.rhs)
        assert all(v.kind == "y" for v in cut.build_coeffs)


@settings(max_examples=15)
@given(instances(max_binaries=4, limits=(1.0, 0.4)))
def test_generated_cuts_valid(inst):
    pool = generate_cut_pool(inst, layered_overlay(inst, include_candidates=True),
                             max_len=5, max_per_start=30)
    if len(pool) == 0:
        return
    verdicts = verify_cuts(list(pool), enumerate_feasible(inst), inst)
    bad = [(c.record(), v.max_violation) for c, v in zip(pool, verdicts) if not v.valid]
    assert not bad


@settings(max_examples=15)
@given(instances(max_binaries=3, connected=True))
def test_lemma_flow_sum_telescopes(inst):
    sols = enumerate_feasible(inst)
    overlay = layered_overlay(inst)
    paths = [pth for pth in enumerate_paths(overlay, 4, 20)]
    for entry in sols.feasible:
        for pth in paths:
            cut = lemma1_cut(pth, inst)
            lhs = sum(a * entry.point[v] for v, a in cut.coeffs.items())
            assert lhs == pytest.approx(entry.point[theta(pth.end)] - entry.point[theta(pth.start)],
                                        abs=1e-8)


@given(instances(max_binaries=2, connected=True))
def test_lemma2_bound_is_min_of_lemma1(inst):
    from tepcuts.backbone import group_parallel
    paths = enumerate_paths(layered_overlay(inst), 5, 50)
    for fam in group_parallel(paths):
        bounds = [lemma1_cut(m, inst).rhs for m in fam.members]
        assert all(c.rhs == min(bounds) for c in lemma2_cuts(fam, inst))
