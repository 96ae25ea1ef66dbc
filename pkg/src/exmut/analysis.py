"""Scores, per-function classification, engine comparison and rank correlation."""

from __future__ import annotations

import itertools
import math
from dataclasses import replace
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import DegenerateInput, InvalidCounts, MismatchedSnapshot
from .model import (
    Classification,
    ComparisonReport,
    Engine,
    EngineReport,
    EngineTotals,
    FunctionSite,
    FunctionSummary,
    Mutant,
    MutantOutcome,
    MutantStatus,
    SiteFlag,
    check_counts,
)

EXACT_P_MAX_N = 10

_CENT = Decimal("0.01")


def compute_score(killed: int, covered: int) -> Optional[Decimal]:
    """``100 * killed / covered`` rounded half-up to two decimals.

    >>> compute_score(246, 256)
    Decimal('96.09')
    >>> compute_score(0, 0) is None
    True
    """
    if killed < 0 or covered < 0 or killed > covered:
        raise InvalidCounts(f"need 0 <= killed <= covered, got killed={killed} covered={covered}")
    if covered == 0:
        return None
    return round_score(Fraction(100 * killed, covered))


def round_score(value: Fraction) -> Decimal:
    # exact: Decimal(numerator) / Decimal(denominator) would round at 28 digits first
    scaled = value * 100
    whole, rem = divmod(scaled.numerator, scaled.denominator)
    if 2 * rem >= scaled.denominator:
        whole += 1
    return (Decimal(whole) * _CENT).quantize(_CENT, rounding=ROUND_HALF_UP)


def format_score(value: Union[Fraction, Decimal, float, None]) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, Fraction):
        return str(round_score(value))
    return str(Decimal(str(value)).quantize(_CENT, rounding=ROUND_HALF_UP))


def classify_function(site: FunctionSite, outcomes: Sequence[MutantOutcome], *,
                      excluded: bool = False) -> Classification:
    """Classify one function from the outcomes of its mutants.

    A function is pseudo-tested when at least one of its mutants is covered
    and none is detected.
    """
    if excluded or site.is_constructor or not outcomes:
        return Classification.EXCLUDED
    covered = [o for o in outcomes if o.status.covered]
    if not covered:
        return Classification.NOT_COVERED
    detected = sum(1 for o in covered if o.detected)
    if detected == 0:
        return Classification.PSEUDO_TESTED
    if detected == len(covered):
        return Classification.FULLY_TESTED
    return Classification.PARTIALLY_TESTED


def build_engine_report(engine: Engine, digest: str, sites: Sequence[FunctionSite],
                        excluded: Iterable[tuple[FunctionSite, SiteFlag]], mutants: Sequence[Mutant],
                        outcomes: Sequence[MutantOutcome], *, total_wall_time_ms: int = 0,
                        baseline_wall_time_ms: int = 0, coverage_precision: str = "per-test",
                        parse_failures: Sequence[str] = ()) -> EngineReport:
    by_id = {o.mutant_id: o for o in outcomes}
    if [m.mutant_id for m in mutants] != [o.mutant_id for o in outcomes]:
        outcomes = [by_id[m.mutant_id] for m in mutants]
    excluded_map = {site.id: reason for site, reason in excluded}

    per_site: dict[str, list[MutantOutcome]] = {s.id: [] for s in sites}
    for m, o in zip(mutants, outcomes):
        per_site.setdefault(m.site.id, []).append(o)

    per_function: dict[str, FunctionSummary] = {}
    for site in sites:
        outs = per_site[site.id]
        covered = sum(1 for o in outs if o.status.covered)
        killed = sum(1 for o in outs if o.detected)
        per_function[site.id] = FunctionSummary(
            len(outs), covered, killed, classify_function(site, outs, excluded=site.id in excluded_map)
        )

    created = len(mutants)
    covered = sum(1 for o in outcomes if o.status.covered)
    killed = sum(1 for o in outcomes if o.detected)
    return EngineReport(
        engine=Engine(engine),
        project_digest=digest,
        sites=tuple(sites),
        excluded=excluded_map,
        mutants=tuple(mutants),
        outcomes=tuple(outcomes),
        per_function=per_function,
        mutants_created=created,
        mutants_covered=covered,
        mutants_killed=killed,
        total_wall_time_ms=total_wall_time_ms,
        baseline_wall_time_ms=baseline_wall_time_ms,
        coverage_precision=coverage_precision,
        parse_failures=tuple(parse_failures),
    )


def _restricted_totals(report: EngineReport, ids: frozenset[str]) -> EngineTotals:
    created = covered = killed = 0
    for m, o in zip(report.mutants, report.outcomes):
        if m.site.id not in ids:
            continue
        created += 1
        covered += o.status.covered
        killed += o.detected
    return EngineTotals(created, covered, killed)


def intersect_reports(a: EngineReport, b: EngineReport) -> ComparisonReport:
    """Restrict both reports to the functions both of them mutated.

    ``a`` fills the ``extreme`` slot and ``b`` the ``traditional`` slot.
    """
    if a.project_digest != b.project_digest:
        raise MismatchedSnapshot(f"reports come from different snapshots: {a.project_digest[:12]} vs {b.project_digest[:12]}")
    ids = a.mutated_function_ids & b.mutated_function_ids
    return ComparisonReport(
        project_digest=a.project_digest,
        intersected_function_ids=ids,
        extreme=_restricted_totals(a, ids),
        traditional=_restricted_totals(b, ids),
    )


# --------------------------------------------------------------------------
# rank correlation

def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the positions they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _columns(pairs: Sequence[tuple[float, float]]) -> tuple[list[float], list[float]]:
    pairs = list(pairs)
    if len(pairs) < 2:
        raise DegenerateInput(f"need at least 2 pairs, got {len(pairs)}")
    xs = [float(p[0]) for p in pairs]
    ys = [float(p[1]) for p in pairs]
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise DegenerateInput("a column is constant; rank correlation is undefined")
    return xs, ys


def spearman_rho(pairs: Sequence[tuple[float, float]]) -> float:
    """Spearman's rank correlation: Pearson correlation of mid-ranks."""
    xs, ys = _columns(pairs)
    return _pearson(average_ranks(xs), average_ranks(ys))


def spearman_p_value(rho: float, n: int) -> Optional[float]:
    """Two-sided p-value from the t approximation with ``n - 2`` degrees of freedom.

    ``None`` when ``n < 4``.
    """
    if n < 4:
        return None
    if abs(rho) >= 1.0:
        return 0.0
    if rho == 0.0:
        return 1.0
    from scipy import stats

    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2)))


def spearman_p_exact(pairs: Sequence[tuple[float, float]]) -> float:
    """Two-sided permutation p-value, enumerating every pairing (``n <= 10``)."""
    import numpy as np

    xs, ys = _columns(pairs)
    n = len(xs)
    if n > EXACT_P_MAX_N:
        raise ValueError(f"exact permutation p-value limited to n <= {EXACT_P_MAX_N}, got {n}")
    rx = np.asarray(average_ranks(xs))
    ry = np.asarray(average_ranks(ys))
    rx = (rx - rx.mean()) / np.sqrt(((rx - rx.mean()) ** 2).sum())
    ry = (ry - ry.mean()) / np.sqrt(((ry - ry.mean()) ** 2).sum())
    observed = abs(float(rx @ ry))
    hits = total = 0
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.fromiter(itertools.chain.from_iterable(itertools.islice(perms, 200_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        idx = chunk.reshape(-1, n)
        r = np.abs(ry[idx] @ rx)
        hits += int(np.count_nonzero(r >= observed - 1e-12))
        total += idx.shape[0]
    return hits / total


def correlate(pairs: Sequence[tuple[float, float]], *, exact: bool = False) -> tuple[float, Optional[float]]:
    """``(rho, p)``; ``exact`` switches to the permutation p-value when ``n <= 10``."""
    rho = spearman_rho(pairs)
    n = len(pairs)
    if exact and 4 <= n <= EXACT_P_MAX_N:
        return rho, spearman_p_exact(pairs)
    return rho, spearman_p_value(rho, n)


def with_correlation(cmp: ComparisonReport, pairs: Sequence[tuple[str, float, float]], *,
                     exact: bool = False) -> ComparisonReport:
    """Attach cross-project pairs and, when defined, their rank correlation."""
    rho = p = None
    usable = [(x, y) for _, x, y in pairs if x is not None and y is not None]
    try:
        rho, p = correlate(usable, exact=exact)
    except DegenerateInput:
        pass
    return replace(cmp, per_project_pairs=tuple(pairs), spearman_rho=rho, p_value=p)


def totals_of(report: EngineReport) -> EngineTotals:
    check_counts(report.mutants_created, report.mutants_covered, report.mutants_killed)
    return EngineTotals(report.mutants_created, report.mutants_covered, report.mutants_killed)


def status_histogram(outcomes: Iterable[MutantOutcome]) -> dict[MutantStatus, int]:
    hist = {s: 0 for s in MutantStatus}
    for o in outcomes:
        hist[o.status] += 1
    return hist
