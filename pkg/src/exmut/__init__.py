"""Extreme mutation analysis for Python projects.

Replaces whole function bodies with constant-returning stubs, runs the
project's pytest suite against each stub, and reports functions whose tests
execute them without noticing the change (pseudo-tested functions).  A small
instruction-level engine is included for comparison.
"""

from .analysis import (
    classify_function,
    compute_score,
    correlate,
    intersect_reports,
    spearman_p_exact,
    spearman_p_value,
    spearman_rho,
)
from .discovery import DiscoveryConfig, apply_structural_filters, categorize_return, scan_project
from .executor import EngineConfig, PytestRunner, TimeoutPolicy, collect_coverage, evaluate_mutant, run_engine, select_tests
from .model import (
    Classification,
    ComparisonReport,
    Engine,
    EngineReport,
    FunctionSite,
    Mutant,
    MutantOutcome,
    MutantStatus,
    ReturnCategory,
    SiteFlag,
)
from .mutator import apply_mutant, generate_mutants, materialize_workspace
from .operators import OperatorCatalog, extreme_operators_for, traditional_operators_for

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "ComparisonReport",
    "DiscoveryConfig",
    "Engine",
    "EngineConfig",
    "EngineReport",
    "FunctionSite",
    "Mutant",
    "MutantOutcome",
    "MutantStatus",
    "OperatorCatalog",
    "PytestRunner",
    "ReturnCategory",
    "SiteFlag",
    "TimeoutPolicy",
    "apply_mutant",
    "apply_structural_filters",
    "categorize_return",
    "classify_function",
    "collect_coverage",
    "compute_score",
    "correlate",
    "evaluate_mutant",
    "extreme_operators_for",
    "generate_mutants",
    "intersect_reports",
    "materialize_workspace",
    "run_engine",
    "scan_project",
    "select_tests",
    "spearman_p_exact",
    "spearman_p_value",
    "spearman_rho",
    "traditional_operators_for",
]
