"""Core value types shared by discovery, mutation, execution and reporting.

Everything here is an immutable value once constructed, so instances can be
handed between worker threads freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional


class ReturnCategory(str, Enum):
    """Return-type family of a function; selects its extreme operators."""

    VOID = "VOID"
    BOOLEAN = "BOOLEAN"
    INTEGRAL_NUMERIC = "INTEGRAL_NUMERIC"
    FLOATING_NUMERIC = "FLOATING_NUMERIC"
    CHARACTER = "CHARACTER"
    TEXT_STRING = "TEXT_STRING"
    EMPTYABLE_SEQUENCE = "EMPTYABLE_SEQUENCE"
    REFERENCE = "REFERENCE"
    UNSUPPORTED = "UNSUPPORTED"


class SiteFlag(str, Enum):
    CONSTRUCTOR = "CONSTRUCTOR"
    EMPTY_VOID_BODY = "EMPTY_VOID_BODY"
    SOLE_CONSTANT_RETURN = "SOLE_CONSTANT_RETURN"
    # Python has no compiler-emitted methods in source; this flag marks
    # declaration-only stubs (@overload, @abstractmethod) instead.
    COMPILER_GENERATED = "COMPILER_GENERATED"
    EXPLICITLY_EXCLUDED = "EXPLICITLY_EXCLUDED"


class OperatorKind(str, Enum):
    EXTREME = "EXTREME"
    TRADITIONAL = "TRADITIONAL"


class Engine(str, Enum):
    EXTREME = "extreme"
    TRADITIONAL_LITE = "traditional"


class MutantStatus(str, Enum):
    KILLED = "KILLED"
    SURVIVED = "SURVIVED"
    TIMED_OUT = "TIMED_OUT"
    CRASHED = "CRASHED"
    BUILD_ERROR = "BUILD_ERROR"
    NOT_COVERED = "NOT_COVERED"

    @property
    def detected(self) -> bool:
        """Timeouts, crashes and build errors count as detections."""
        return self in _DETECTED

    @property
    def covered(self) -> bool:
        return self is not MutantStatus.NOT_COVERED


_DETECTED = frozenset(
    {MutantStatus.KILLED, MutantStatus.TIMED_OUT, MutantStatus.CRASHED, MutantStatus.BUILD_ERROR}
)


class Classification(str, Enum):
    PSEUDO_TESTED = "PSEUDO_TESTED"
    PARTIALLY_TESTED = "PARTIALLY_TESTED"
    FULLY_TESTED = "FULLY_TESTED"
    NOT_COVERED = "NOT_COVERED"
    EXCLUDED = "EXCLUDED"


@dataclass(frozen=True, order=True)
class Span:
    """Half-open byte range ``[start, end)`` into a source file."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def overlaps(self, other: Span) -> bool:
        return self.start < other.end and other.start < self.end

    def contains(self, other: Span) -> bool:
        return self.start <= other.start and other.end <= self.end

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class FunctionSite:
    """A function definition found during discovery.

    ``line`` is the 1-based line of the ``def`` keyword; ``first_line`` is the
    line the interpreter reports for the code object (the first decorator,
    when there is one) and is what the coverage probe keys on.
    """

    id: str
    file: str
    body_span: Span
    signature_span: Span
    category: ReturnCategory
    flags: frozenset[SiteFlag] = frozenset()
    line: int = 1
    first_line: int = 1
    return_annotation: Optional[str] = None

    def __post_init__(self) -> None:
        if self.body_span.start >= self.body_span.end:
            raise ValueError(f"{self.id}: empty body span")
        if self.body_span.overlaps(self.signature_span):
            raise ValueError(f"{self.id}: body and signature spans overlap")

    @property
    def is_constructor(self) -> bool:
        return SiteFlag.CONSTRUCTOR in self.flags


@dataclass(frozen=True)
class MutationOperator:
    """A transformation template.

    Extreme operators carry the ``category`` they apply to and a literal
    ``payload`` (``None`` for the empty-sequence operator, whose literal is
    chosen from the site's annotation).  Traditional operators carry a
    syntactic ``pattern`` name instead.
    """

    op_id: str
    kind: OperatorKind
    description: str
    category: Optional[ReturnCategory] = None
    pattern: Optional[str] = None
    payload: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is OperatorKind.EXTREME and (self.category is None or self.pattern is not None):
            raise ValueError(f"{self.op_id}: extreme operators are keyed by category only")
        if self.kind is OperatorKind.TRADITIONAL and (self.pattern is None or self.category is not None):
            raise ValueError(f"{self.op_id}: traditional operators are keyed by pattern only")


@dataclass(frozen=True)
class Mutant:
    mutant_id: str
    site: FunctionSite
    op_id: str
    replacement: str
    affected_span: Span
    line: int = 1

    @property
    def kind(self) -> OperatorKind:
        return OperatorKind.EXTREME if self.op_id.startswith("extreme.") else OperatorKind.TRADITIONAL


@dataclass(frozen=True)
class MutantOutcome:
    mutant_id: str
    status: MutantStatus
    killing_tests: tuple[str, ...] = ()
    wall_time_ms: int = 0

    def __post_init__(self) -> None:
        if (self.status is MutantStatus.KILLED) != bool(self.killing_tests):
            raise ValueError(
                f"{self.mutant_id}: killing_tests must be non-empty exactly when status is KILLED"
            )
        if self.wall_time_ms < 0:
            raise ValueError("wall_time_ms must be non-negative")

    @property
    def detected(self) -> bool:
        return self.status.detected


@dataclass(frozen=True)
class FunctionSummary:
    created: int
    covered: int
    killed: int
    classification: Classification


def ratio_percent(killed: int, covered: int) -> Optional[Fraction]:
    """Exact ``100 * killed / covered``; ``None`` stands for an undefined score."""
    if covered == 0:
        return None
    return Fraction(100 * killed, covered)


def check_counts(created: int, covered: int, killed: int) -> None:
    if not 0 <= killed <= covered <= created:
        raise ValueError(f"count invariant violated: killed={killed} covered={covered} created={created}")


@dataclass(frozen=True)
class EngineReport:
    """Outcome of one engine on one project snapshot."""

    engine: Engine
    project_digest: str
    sites: tuple[FunctionSite, ...]
    excluded: dict[str, SiteFlag]
    mutants: tuple[Mutant, ...]
    outcomes: tuple[MutantOutcome, ...]
    per_function: dict[str, FunctionSummary]
    mutants_created: int
    mutants_covered: int
    mutants_killed: int
    total_wall_time_ms: int = 0
    baseline_wall_time_ms: int = 0
    coverage_precision: str = "per-test"
    parse_failures: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        check_counts(self.mutants_created, self.mutants_covered, self.mutants_killed)
        if len(self.mutants) != len(self.outcomes):
            raise ValueError("every mutant needs exactly one outcome")

    @property
    def score_percent(self) -> Optional[Fraction]:
        return ratio_percent(self.mutants_killed, self.mutants_covered)

    def outcome_for(self, mutant_id: str) -> MutantOutcome:
        return self._outcome_index()[mutant_id]

    def _outcome_index(self) -> dict[str, MutantOutcome]:
        return {o.mutant_id: o for o in self.outcomes}

    def mutants_for(self, site_id: str) -> list[tuple[Mutant, MutantOutcome]]:
        index = self._outcome_index()
        return [(m, index[m.mutant_id]) for m in self.mutants if m.site.id == site_id]

    def functions_with(self, classification: Classification) -> list[str]:
        return sorted(k for k, v in self.per_function.items() if v.classification is classification)

    @property
    def mutated_function_ids(self) -> frozenset[str]:
        return frozenset(k for k, v in self.per_function.items() if v.created > 0)


@dataclass(frozen=True)
class EngineTotals:
    created: int
    covered: int
    killed: int

    def __post_init__(self) -> None:
        check_counts(self.created, self.covered, self.killed)

    @property
    def score(self) -> Optional[Fraction]:
        return ratio_percent(self.killed, self.covered)


@dataclass(frozen=True)
class ComparisonReport:
    """Dual-engine scores restricted to functions both engines mutated."""

    project_digest: str
    intersected_function_ids: frozenset[str]
    extreme: EngineTotals
    traditional: EngineTotals
    spearman_rho: Optional[float] = None
    p_value: Optional[float] = None
    per_project_pairs: tuple[tuple[str, float, float], ...] = field(default_factory=tuple)
