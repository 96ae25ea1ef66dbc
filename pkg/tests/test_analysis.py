from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from exmut.analysis import (
    average_ranks,
    build_engine_report,
    classify_function,
    compute_score,
    correlate,
    format_score,
    intersect_reports,
    round_score,
    spearman_p_exact,
    spearman_p_value,
    spearman_rho,
    with_correlation,
)
from exmut.errors import DegenerateInput, InvalidCounts, MismatchedSnapshot
from exmut.model import (
    Classification,
    Engine,
    FunctionSite,
    Mutant,
    MutantOutcome,
    MutantStatus,
    ReturnCategory,
    SiteFlag,
    Span,
)


def test_compute_score_examples():
    assert compute_score(246, 256) == Decimal("96.09")
    assert compute_score(3775, 4686) == Decimal("80.56")
    assert compute_score(1, 1) == Decimal("100.00")
    assert compute_score(0, 7) == Decimal("0.00")
    assert compute_score(0, 0) is None
    # exact half-way values round up: 100 * 1 / 800 = 0.125
    assert compute_score(1, 800) == Decimal("0.13")
    assert compute_score(1, 3) == Decimal("33.33")
    assert compute_score(2, 3) == Decimal("66.67")
    for bad in [(3, 2), (-1, 2), (0, -1)]:
        with pytest.raises(InvalidCounts):
            compute_score(*bad)


def test_round_score_is_exact():
    # a value just below a half-cent must not be pushed up by float noise
    assert round_score(Fraction(1249999999, 100000000) / 1000) == Decimal("0.01")
    assert round_score(Fraction(125, 10000)) == Decimal("0.01")
    assert format_score(Fraction(1, 3)) == "0.33"
    assert format_score(None) == "n/a"
    assert format_score(96.0) == "96.00"


def _site(i, flags=frozenset()):
    return FunctionSite(f"m.f{i}", "m.py", Span(10 * i + 5, 10 * i + 9), Span(10 * i, 10 * i + 5),
                        ReturnCategory.BOOLEAN, flags, line=i + 1, first_line=i + 1)


def _outcomes(*statuses):
    return [MutantOutcome(f"o{i}", s, ("t::x",) if s is MutantStatus.KILLED else ()) for i, s in enumerate(statuses)]


S = MutantStatus


@pytest.mark.parametrize("statuses, expected", [
    ((), Classification.EXCLUDED),
    ((S.NOT_COVERED, S.NOT_COVERED), Classification.NOT_COVERED),
    ((S.SURVIVED, S.SURVIVED), Classification.PSEUDO_TESTED),
    ((S.SURVIVED, S.NOT_COVERED), Classification.PSEUDO_TESTED),
    ((S.KILLED, S.SURVIVED), Classification.PARTIALLY_TESTED),
    ((S.TIMED_OUT, S.CRASHED), Classification.FULLY_TESTED),
    ((S.BUILD_ERROR, S.NOT_COVERED), Classification.FULLY_TESTED),
])
def test_classify_function(statuses, expected):
    assert classify_function(_site(0), _outcomes(*statuses)) is expected


def test_classify_excluded_wins():
    assert classify_function(_site(0), _outcomes(S.SURVIVED), excluded=True) is Classification.EXCLUDED
    ctor = _site(0, frozenset({SiteFlag.CONSTRUCTOR}))
    assert classify_function(ctor, _outcomes(S.SURVIVED)) is Classification.EXCLUDED


def _report(engine, plan, digest="d"):
    """``plan`` maps site index -> statuses."""
    sites = [_site(i) for i in range(4)]
    mutants, outcomes = [], []
    for i, statuses in plan.items():
        for k, s in enumerate(statuses):
            mid = f"{engine.value}-{i}-{k}"
            mutants.append(Mutant(mid, sites[i], "op", "x", sites[i].body_span))
            outcomes.append(MutantOutcome(mid, s, ("t::x",) if s is S.KILLED else ()))
    return build_engine_report(engine, digest, sites, [], mutants, outcomes)


def test_intersect_reports_restricts_to_common_functions():
    ext = _report(Engine.EXTREME, {0: [S.KILLED, S.SURVIVED], 1: [S.KILLED], 3: [S.SURVIVED]})
    trad = _report(Engine.TRADITIONAL_LITE, {0: [S.KILLED] * 3, 1: [S.SURVIVED, S.NOT_COVERED], 2: [S.KILLED]})
    cmp = intersect_reports(ext, trad)
    assert cmp.intersected_function_ids == {"m.f0", "m.f1"}
    assert (cmp.extreme.created, cmp.extreme.covered, cmp.extreme.killed) == (3, 3, 2)
    assert (cmp.traditional.created, cmp.traditional.covered, cmp.traditional.killed) == (5, 4, 3)
    assert cmp.extreme.score == Fraction(200, 3)
    with pytest.raises(MismatchedSnapshot):
        intersect_reports(ext, _report(Engine.TRADITIONAL_LITE, {0: [S.KILLED]}, digest="other"))


def test_average_ranks_ties():
    assert average_ranks([10, 20, 20, 5]) == [2.0, 3.5, 3.5, 1.0]
    assert average_ranks([1, 1, 1]) == [2.0, 2.0, 2.0]


pairs_strategy = st.lists(
    st.tuples(st.integers(0, 6), st.floats(0, 100, allow_nan=False)), min_size=3, max_size=30,
).filter(lambda ps: len({x for x, _ in ps}) > 1 and len({y for _, y in ps}) > 1)


@settings(max_examples=200, deadline=None)
@given(pairs_strategy)
def test_spearman_matches_scipy(pairs):
    xs, ys = zip(*pairs)
    oracle = scipy.stats.spearmanr(xs, ys)
    assert spearman_rho(pairs) == pytest.approx(oracle.statistic, abs=1e-9)
    if len(pairs) >= 4:
        assert spearman_p_value(spearman_rho(pairs), len(pairs)) == pytest.approx(oracle.pvalue, abs=1e-9)


def test_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        spearman_rho([(1, 2)])
    with pytest.raises(DegenerateInput):
        spearman_rho([(1, 2), (1, 3), (1, 4)])
    assert spearman_p_value(0.5, 3) is None
    assert spearman_p_value(1.0, 10) == 0.0
    assert spearman_p_value(0.0, 10) == 1.0


def test_exact_p_small_cases():
    # perfectly ordered n=4: 2 of 24 pairings reach |rho| = 1
    assert spearman_p_exact([(i, i) for i in range(4)]) == pytest.approx(2 / 24)
    with pytest.raises(ValueError):
        spearman_p_exact([(i, i) for i in range(11)])
    rho, p = correlate([(1, 2), (2, 1), (3, 4), (4, 3), (5, 5)], exact=True)
    assert rho == pytest.approx(0.8)
    assert p == pytest.approx(spearman_p_exact([(1, 2), (2, 1), (3, 4), (4, 3), (5, 5)]))


def test_with_correlation():
    ext = _report(Engine.EXTREME, {0: [S.KILLED]})
    trad = _report(Engine.TRADITIONAL_LITE, {0: [S.KILLED]})
    cmp = intersect_reports(ext, trad)
    rows = [("a", 10.0, 20.0), ("b", 30.0, 10.0), ("c", 70.0, 60.0), ("d", 50.0, 18.0)]
    out = with_correlation(cmp, rows)
    assert out.spearman_rho == pytest.approx(0.4)
    assert out.p_value == pytest.approx(scipy.stats.spearmanr([10, 30, 70, 50], [20, 10, 60, 18]).pvalue)
    assert with_correlation(cmp, rows[:1]).spearman_rho is None
    assert with_correlation(cmp, rows + [("e", None, 5.0)]).per_project_pairs[-1] == ("e", None, 5.0)
