"""Operator catalogs.

Extreme operators replace a whole body and are keyed by return category.
The traditional-lite set covers three instruction-level families: negating
comparisons, swapping arithmetic operators, and incrementing numeric return
values.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .discovery import SourceText, empty_literal_for
from .model import FunctionSite, MutationOperator, OperatorKind, ReturnCategory, Span

RC = ReturnCategory


def _extreme(op_id: str, category: ReturnCategory, payload: Optional[str], description: str) -> MutationOperator:
    return MutationOperator(op_id, OperatorKind.EXTREME, description, category=category, payload=payload)


EXTREME_OPERATORS: tuple[MutationOperator, ...] = (
    _extreme("extreme.empty-body", RC.VOID, "", "empties the function"),
    _extreme("extreme.return-true", RC.BOOLEAN, "True", "returns True"),
    _extreme("extreme.return-false", RC.BOOLEAN, "False", "returns False"),
    _extreme("extreme.return-zero", RC.INTEGRAL_NUMERIC, "0", "returns 0"),
    _extreme("extreme.return-one", RC.INTEGRAL_NUMERIC, "1", "returns 1"),
    _extreme("extreme.return-float-zero", RC.FLOATING_NUMERIC, "0.0", "returns 0.0"),
    _extreme("extreme.return-float-tenth", RC.FLOATING_NUMERIC, "0.1", "returns 0.1"),
    _extreme("extreme.return-space-char", RC.CHARACTER, "' '", "returns ' '"),
    _extreme("extreme.return-char-a", RC.CHARACTER, "'A'", "returns 'A'"),
    _extreme("extreme.return-empty-string", RC.TEXT_STRING, "''", "returns ''"),
    _extreme("extreme.return-string-a", RC.TEXT_STRING, "'A'", "returns 'A'"),
    _extreme("extreme.return-empty-sequence", RC.EMPTYABLE_SEQUENCE, None, "returns an empty collection"),
    _extreme("extreme.return-none", RC.REFERENCE, "None", "returns None"),
)

NEGATE_CONDITIONAL = MutationOperator(
    "traditional.negate-conditional", OperatorKind.TRADITIONAL,
    "negates a comparison (== <-> !=, < <-> >=, > <-> <=)", pattern="comparison",
)
ARITHMETIC_REPLACE = MutationOperator(
    "traditional.arithmetic-replace", OperatorKind.TRADITIONAL,
    "swaps + with - and * with /", pattern="binary-arithmetic",
)
RETURN_VALUE_INCREMENT = MutationOperator(
    "traditional.return-increment", OperatorKind.TRADITIONAL,
    "rewrites a numeric `return e` as `return e + 1`", pattern="numeric-return",
)

TRADITIONAL_OPERATORS: tuple[MutationOperator, ...] = (NEGATE_CONDITIONAL, ARITHMETIC_REPLACE, RETURN_VALUE_INCREMENT)

ALL_OPERATOR_IDS = frozenset(op.op_id for op in EXTREME_OPERATORS + TRADITIONAL_OPERATORS)


@dataclass(frozen=True)
class OperatorCatalog:
    kind: OperatorKind
    operators: tuple[MutationOperator, ...]
    enabled_ids: frozenset[str]

    def __post_init__(self) -> None:
        known = {op.op_id for op in self.operators}
        unknown = set(self.enabled_ids) - known
        if unknown:
            raise ValueError(f"unknown operator ids for {self.kind.value} catalog: {sorted(unknown)}")
        if any(op.kind is not self.kind for op in self.operators):
            raise ValueError("catalog mixes operator kinds")

    @classmethod
    def extreme(cls, enabled: Optional[Iterable[str]] = None) -> OperatorCatalog:
        return cls._build(OperatorKind.EXTREME, EXTREME_OPERATORS, enabled)

    @classmethod
    def traditional(cls, enabled: Optional[Iterable[str]] = None) -> OperatorCatalog:
        return cls._build(OperatorKind.TRADITIONAL, TRADITIONAL_OPERATORS, enabled)

    @classmethod
    def _build(cls, kind, operators, enabled):
        ids = {op.op_id for op in operators}
        chosen = ids if enabled is None else ids & set(enabled)
        return cls(kind, operators, frozenset(chosen))

    def enabled(self) -> list[MutationOperator]:
        return [op for op in self.operators if op.op_id in self.enabled_ids]

    def is_enabled(self, op_id: str) -> bool:
        return op_id in self.enabled_ids


def extreme_operators_for(category: ReturnCategory, catalog: Optional[OperatorCatalog] = None) -> list[MutationOperator]:
    catalog = catalog or OperatorCatalog.extreme()
    return [op for op in catalog.enabled() if op.category is category]


def render_extreme_body(op: MutationOperator, site: FunctionSite) -> Optional[str]:
    """Replacement body text, or ``None`` if no literal fits the site."""
    if op.category is ReturnCategory.VOID:
        return "pass"
    payload = op.payload
    if payload is None:
        payload = empty_literal_for(site.return_annotation)
        if payload is None:
            return None
    return f"return {payload}"


# --------------------------------------------------------------------------
# traditional instances

_NEGATED = {ast.Eq: "!=", ast.NotEq: "==", ast.Lt: ">=", ast.GtE: "<", ast.Gt: "<=", ast.LtE: ">"}
_CMP_TOKEN = {ast.Eq: "==", ast.NotEq: "!=", ast.Lt: "<", ast.GtE: ">=", ast.Gt: ">", ast.LtE: "<="}
_ARITH = {ast.Add: ("+", "-"), ast.Sub: ("-", "+"), ast.Mult: ("*", "/"), ast.Div: ("/", "*")}
_NUMERIC = {ReturnCategory.INTEGRAL_NUMERIC, ReturnCategory.FLOATING_NUMERIC}

# expressions that can take a trailing "+ 1" without parentheses
_TIGHT_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv, ast.Mod, ast.Pow, ast.MatMult)
_ATOMS = (ast.Name, ast.Constant, ast.Attribute, ast.Call, ast.Subscript, ast.Await)


@dataclass(frozen=True)
class TraditionalInstance:
    operator: MutationOperator
    span: Span
    replacement: str


def _walk_site(func: ast.AST) -> Iterator[ast.AST]:
    """Nodes belonging to this site: skips nested defs and f-string internals."""
    stack = list(reversed(getattr(func, "body", [])))
    while stack:
        node = stack.pop()
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.JoinedStr)):
            continue
        yield node
        stack.extend(reversed(list(ast.iter_child_nodes(node))))


def _is_textual(node: ast.expr) -> bool:
    if isinstance(node, ast.Constant):
        return isinstance(node.value, (str, bytes))
    return isinstance(node, (ast.JoinedStr, ast.List, ast.Tuple, ast.ListComp, ast.Dict, ast.Set))


def _increment(node: ast.expr, text: str) -> str:
    if isinstance(node, _ATOMS) or isinstance(node, ast.UnaryOp) and not isinstance(node.op, ast.Not):
        return f"{text} + 1"
    if isinstance(node, ast.BinOp) and isinstance(node.op, _TIGHT_BINOPS):
        return f"{text} + 1"
    return f"({text}) + 1"


def traditional_operators_for(site: FunctionSite, func: ast.AST, src: SourceText, catalog: Optional[OperatorCatalog] = None) -> list[TraditionalInstance]:
    """Every applicable traditional-lite instance in ``func``'s own body.

    ``src`` is the file ``func`` was parsed from.  Results are ordered by
    span start.
    """
    catalog = catalog or OperatorCatalog.traditional()
    found: list[TraditionalInstance] = []
    negate = catalog.is_enabled(NEGATE_CONDITIONAL.op_id)
    arith = catalog.is_enabled(ARITHMETIC_REPLACE.op_id)
    incr = catalog.is_enabled(RETURN_VALUE_INCREMENT.op_id) and site.category in _NUMERIC

    for node in _walk_site(func):
        if negate and isinstance(node, ast.Compare):
            left = node.left
            for op, right in zip(node.ops, node.comparators):
                if type(op) in _NEGATED:
                    span = src.find_operator(src.node_span(left).end, src.node_span(right).start, _CMP_TOKEN[type(op)])
                    if span is not None:
                        found.append(TraditionalInstance(NEGATE_CONDITIONAL, span, _NEGATED[type(op)]))
                left = right
        elif arith and isinstance(node, ast.BinOp) and type(node.op) in _ARITH:
            if _is_textual(node.left) or _is_textual(node.right):
                continue
            old, new = _ARITH[type(node.op)]
            span = src.find_operator(src.node_span(node.left).end, src.node_span(node.right).start, old)
            if span is not None:
                found.append(TraditionalInstance(ARITHMETIC_REPLACE, span, new))
        elif arith and isinstance(node, ast.AugAssign) and type(node.op) in _ARITH:
            if _is_textual(node.value):
                continue
            old, new = _ARITH[type(node.op)]
            span = src.find_operator(src.node_span(node.target).end, src.node_span(node.value).start, old + "=")
            if span is not None:
                found.append(TraditionalInstance(ARITHMETIC_REPLACE, span, new + "="))
        if incr and isinstance(node, ast.Return) and node.value is not None:
            span = src.node_span(node.value)
            found.append(TraditionalInstance(RETURN_VALUE_INCREMENT, span, _increment(node.value, src.segment(span))))
    found.sort(key=lambda inst: (inst.span.start, inst.operator.op_id))
    return found
