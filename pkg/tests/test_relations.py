import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extprob import (Kind, MCConfig, ProbVector, SolveConfig, SubsetSpec, Window,
                     check_family_conditions, compare_extinction_vectors, explicit, finite_spec,
                     mc_relation_check, ratio_infimum, single_type, singleton_test, solve_q, union)
from extprob.examples import (Example1Params, build_example1, build_example1_phase_family,
                              build_example2, example2_order, phase_family_cotail)
from extprob.relations import ADV_FAIL, FAIL, PASS

from conftest import CUBIC

BIG = SolveConfig(window_schedule=tuple(16 * 2 ** m for m in range(12)))
W3 = Window(["a", "b", "c"])


def vec(*v):
    return ProbVector(W3, list(v))


def ex1(r):
    return build_example1(Example1Params(0.1, 0.5, r))


def selfish_pair():
    return finite_spec({"x": explicit([(0.5, {}), (0.5, {"x": 3})]),
                        "y": explicit([(0.5, {}), (0.5, {"x": 1})])})


def test_compare_examples():
    assert compare_extinction_vectors(vec(.5, .5, .5), vec(.5, .5, .5)).kind is Kind.EQUIVALENT
    assert compare_extinction_vectors(vec(.6, .5, .5), vec(.5, .5, .5)).kind is Kind.IMPLIES
    assert compare_extinction_vectors(vec(.5, .5, .5), vec(.6, .5, .5)).kind is Kind.IMPLIED_BY
    assert compare_extinction_vectors(vec(.6, .4, .5), vec(.5, .5, .5)).kind is Kind.INCOMPARABLE
    r = compare_extinction_vectors(vec(.5, .5, .5), vec(.5, .5, .50005))
    assert r.kind is Kind.EQUIVALENT and r.evidence["max_qB_minus_qA"] == pytest.approx(5e-5)
    with pytest.raises(Exception):
        compare_extinction_vectors(vec(.5, .5, .5), ProbVector(Window(["a"]), [.5]))


def test_indeterminate_needs_uncertainty():
    a, b = vec(.5, .5, .5), vec(.5, .5, .5003)
    assert compare_extinction_vectors(a, b, tol=1e-4).kind is Kind.IMPLIED_BY
    assert compare_extinction_vectors(a, b, tol=1e-4, uncertainty=1e-3).kind is Kind.INDETERMINATE


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.floats(0, 1e-2))
def test_compare_antisymmetric(a, b, unc):
    x, y = vec(*a), vec(*b)
    assert compare_extinction_vectors(x, y, 1e-4, unc).kind is \
        compare_extinction_vectors(y, x, 1e-4, unc).kind.swap()


def test_ratio_infimum_examples():
    a = vec(.3, .5, 1.0)
    r = ratio_infimum(a, a)
    assert r.value == pytest.approx(1.0) and r.eligible == 2
    assert ratio_infimum(a, vec(1, 1, 1)).value == 0.0
    assert ratio_infimum(vec(1, 1, 1), a).value is None


def test_ratio_infimum_shrinks_with_window_at_r1():
    spec, L, _ = ex1(1.0)
    q1, q2 = solve_q(spec, L[1], BIG).vector, solve_q(spec, L[2], BIG).vector
    vals = [ratio_infimum(q1, q2, n).value for n in (16, 32, 64)]
    assert vals[0] >= vals[1] >= vals[2]


def test_singleton_examples(cubic):
    assert singleton_test(cubic, SubsetSpec.everything(), None).singleton
    res = singleton_test(selfish_pair(), SubsetSpec.of(["y"]), None)
    assert not res.singleton and res.gap == pytest.approx(1 - CUBIC, abs=1e-9) and res.argmax == "x"
    sub = single_type({0: 0.6, 1: 0.2, 2: 0.2})
    assert singleton_test(sub, SubsetSpec.empty(), None).singleton


def test_mc_same_set_is_zero():
    spec, L, _ = ex1(1.0)
    for seed in (0, 1, 2):
        est = mc_relation_check(spec, (0, 0), L[1], L[1], MCConfig(trials=500, seed=seed))
        assert est.point == 0.0 and est.successes == 0


def test_mc_small_r_no_survival_avoiding_lower_level():
    spec, L, _ = ex1(0.5)
    est = mc_relation_check(spec, (0, 0), L[2], L[1], MCConfig(trials=20_000, horizon=40, seed=3))
    assert est.ci_high < 0.01


def test_level_relations_by_regime():
    expect = {0.05: Kind.EQUIVALENT, 0.5: Kind.IMPLIED_BY, 1.0: Kind.IMPLIED_BY, 1.5: Kind.INCOMPARABLE}
    for r, kind in expect.items():
        spec, L, _ = ex1(r)
        a, b = solve_q(spec, L[1], BIG), solve_q(spec, L[2], BIG)
        assert a.converged and b.converged
        assert compare_extinction_vectors(a.report, b.report).kind is kind, r


def test_example2_relations_match_order():
    spec = build_example2()[0]
    cells = [(i, j) for i in range(3) for j in range(3)]
    q = {c: solve_q(spec, SubsetSpec.of([c]), BIG) for c in cells}
    assert all(v.converged for v in q.values())
    for a in cells:
        for b in cells:
            if a == b:
                continue
            rel = compare_extinction_vectors(q[a].report, q[b].report)
            assert (rel.kind is Kind.IMPLIES) == example2_order(a, b), (a, b)
            assert rel.kind is not Kind.EQUIVALENT


def _levels_union_solver(spec, fam):
    return lambda idx, tail: solve_q(spec, union([fam[i] for i in idx]), BIG)


def test_levels_family_regular_up_to_advisory():
    spec, L, _ = ex1(1.0)
    fam = L[1:5]
    solved = [solve_q(spec, A, BIG) for A in fam]
    rep = check_family_conditions(fam, solved, union_solver=_levels_union_solver(spec, fam))
    assert [rep.verdicts[c] for c in ("C1", "C2", "C3")] == [PASS] * 3
    assert rep.regular_up_to_advisory


def test_duplicate_member_fails_C1_and_C3():
    spec, L, _ = ex1(1.0)
    fam = [L[1], L[2], L[1]]
    rep = check_family_conditions(fam, [solve_q(spec, A, BIG) for A in fam])
    assert rep.verdicts["C1"] == FAIL and rep.verdicts["C3"] == FAIL
    assert rep.verdicts["C4"] == "not checked"


def test_phase_family_fails_C5():
    spec, _, _ = ex1(1.5)
    # q(L'_0) is 1 to within the truncation tolerance here, so L'_0 is left out
    fam = build_example1_phase_family(spec, 5)[1:]
    solved = [solve_q(spec, A, BIG) for A in fam]
    assert all(s.converged for s in solved)

    def us(idx, tail):
        missing = [i for i in range(len(fam)) if i not in idx]
        if tail and len(missing) == 1:
            return solve_q(spec, phase_family_cotail(missing[0] + 1), BIG)
        return solve_q(spec, union([fam[i] for i in idx]), BIG)

    rep = check_family_conditions(fam, solved, union_solver=us, infinite_tail=True)
    assert rep.verdicts["C1"] == PASS and rep.verdicts["C2"] == PASS and rep.verdicts["C3"] == PASS
    assert rep.verdicts["C5"] == ADV_FAIL
    assert "L'1" in rep.details["C5"]["members_implying_their_cotail"]
