"""Find mutable functions in a Python source tree.

Parsing uses :mod:`ast`, whose column offsets are UTF-8 byte offsets, so all
spans produced here index the raw file bytes directly.
"""

from __future__ import annotations

import ast
import bisect
import fnmatch
import io
import logging
import os
import tokenize
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .errors import ParseFailure, UnreadableRoot
from .model import FunctionSite, ReturnCategory, SiteFlag, Span

log = logging.getLogger(__name__)

FunctionNode = Union[ast.FunctionDef, ast.AsyncFunctionDef]


class StructuralFilter(str, Enum):
    SKIP_CONSTRUCTORS = "SkipConstructors"
    SKIP_EMPTY_VOID = "SkipEmptyVoid"
    SKIP_SOLE_CONSTANT_RETURN = "SkipSoleConstantReturn"
    SKIP_COMPILER_GENERATED = "SkipCompilerGenerated"


ALL_FILTERS = frozenset(StructuralFilter)

DEFAULT_EXCLUDE_GLOBS = (
    "tests/**",
    "test/**",
    "**/tests/**",
    "**/test_*.py",
    "**/*_test.py",
    "**/conftest.py",
    "setup.py",
    "docs/**",
)

_SKIPPED_DIRS = {"__pycache__", "node_modules", "build", "dist", "venv", "site-packages"}

CONSTRUCTOR_NAMES = {"__init__", "__new__", "__post_init__"}

# Filter evaluation order; decides the reported reason when several apply.
_FILTER_FLAGS = (
    (StructuralFilter.SKIP_CONSTRUCTORS, SiteFlag.CONSTRUCTOR),
    (StructuralFilter.SKIP_COMPILER_GENERATED, SiteFlag.COMPILER_GENERATED),
    (None, SiteFlag.EXPLICITLY_EXCLUDED),
    (StructuralFilter.SKIP_EMPTY_VOID, SiteFlag.EMPTY_VOID_BODY),
    (StructuralFilter.SKIP_SOLE_CONSTANT_RETURN, SiteFlag.SOLE_CONSTANT_RETURN),
)


@dataclass(frozen=True)
class DiscoveryConfig:
    """What to scan and which functions to leave alone.

    ``roots`` are relative to ``project_root``; module names are computed
    relative to the root that contains each file.  Constructor skipping is
    forced on even if omitted from ``structural_filters``.
    """

    project_root: Path = Path(".")
    roots: tuple[str, ...] = (".",)
    include_globs: tuple[str, ...] = ("**/*.py",)
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS
    excluded_function_patterns: tuple[str, ...] = ()
    structural_filters: frozenset[StructuralFilter] = ALL_FILTERS

    def __post_init__(self) -> None:
        object.__setattr__(self, "project_root", Path(self.project_root))
        filters = frozenset(StructuralFilter(f) for f in self.structural_filters)
        object.__setattr__(self, "structural_filters", filters | {StructuralFilter.SKIP_CONSTRUCTORS})


@dataclass
class DiscoveryResult:
    sites: list[FunctionSite] = field(default_factory=list)
    parse_failures: list[ParseFailure] = field(default_factory=list)
    files: list[str] = field(default_factory=list)


class SourceText:
    """Raw file bytes plus the offset/line bookkeeping spans need."""

    def __init__(self, data: bytes) -> None:
        self.data = data
        self.line_starts = [0]
        for line in data.splitlines(keepends=True):
            self.line_starts.append(self.line_starts[-1] + len(line))
        self._tokens: Optional[dict[int, tokenize.TokenInfo]] = None
        self._token_starts: list[int] = []

    @property
    def text(self) -> str:
        return self.data.decode("utf-8")

    def offset(self, lineno: int, col: int) -> int:
        return self.line_starts[lineno - 1] + col

    def node_span(self, node: ast.AST) -> Span:
        return Span(
            self.offset(node.lineno, node.col_offset),  # type: ignore[attr-defined]
            self.offset(node.end_lineno, node.end_col_offset),  # type: ignore[attr-defined]
        )

    def line_of(self, offset: int) -> int:
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1

    def segment(self, span: Span) -> str:
        return self.data[span.start : span.end].decode("utf-8")

    def operator_tokens(self) -> dict[int, tokenize.TokenInfo]:
        """OP tokens keyed by their starting byte offset."""
        if self._tokens is None:
            lines = self.data.splitlines(keepends=True)
            result = {}
            for tok in tokenize.tokenize(io.BytesIO(self.data).readline):
                if tok.type != tokenize.OP:
                    continue
                row, col = tok.start
                # tokenize columns count characters, not bytes
                prefix = lines[row - 1].decode("utf-8")[:col].encode("utf-8")
                result[self.line_starts[row - 1] + len(prefix)] = tok
            self._tokens = result
            self._token_starts = sorted(result)
        return self._tokens

    def find_operator(self, lo: int, hi: int, text: str) -> Optional[Span]:
        """First OP token spelled ``text`` starting within ``[lo, hi)``."""
        tokens = self.operator_tokens()
        for start in self._token_starts[bisect.bisect_left(self._token_starts, lo):]:
            if start >= hi:
                break
            if tokens[start].string == text:
                return Span(start, start + len(text.encode("utf-8")))
        return None


# --------------------------------------------------------------------------
# return-type categorisation

_BOOLEAN = {"bool", "bool_"}
_INTEGRAL = {
    "int", "int8", "int16", "int32", "int64", "uint8", "uint16", "uint32", "uint64",
    "intp", "uintp", "integer", "signedinteger", "unsignedinteger", "SupportsInt",
}
_FLOATING = {"float", "float16", "float32", "float64", "double", "floating", "longdouble", "SupportsFloat"}
_CHARACTER = {"char", "Char"}
_TEXT = {"str", "Text", "LiteralString"}
_NO_VALUE = {"NoReturn", "Never"}

EMPTY_LITERALS = {
    "list": "[]", "List": "[]", "Sequence": "[]", "MutableSequence": "[]",
    "Iterable": "[]", "Collection": "[]", "Container": "[]", "Reversible": "[]",
    "tuple": "()", "Tuple": "()",
    "dict": "{}", "Dict": "{}", "Mapping": "{}", "MutableMapping": "{}",
    "set": "set()", "Set": "set()", "AbstractSet": "set()", "MutableSet": "set()",
    "frozenset": "frozenset()", "FrozenSet": "frozenset()",
    "bytes": "b''", "ByteString": "b''",
    "bytearray": "bytearray()",
    "Iterator": "iter(())",
}


def _outer_name(node: ast.expr) -> Optional[str]:
    """Erasure-like outermost name: ``typing.List[int]`` -> ``List``."""
    if isinstance(node, ast.Subscript):
        return _outer_name(node.value)
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    return None


def _annotation_node(annotation: Union[str, ast.expr, None]) -> Optional[ast.expr]:
    if annotation is None or isinstance(annotation, ast.expr):
        if isinstance(annotation, ast.Constant) and isinstance(annotation.value, str):
            return _annotation_node(annotation.value)
        return annotation
    try:
        return ast.parse(annotation.strip(), mode="eval").body
    except SyntaxError:
        return None


def categorize_annotation(annotation: Union[str, ast.expr, None]) -> ReturnCategory:
    """Map a declared return annotation onto a :class:`ReturnCategory`.

    Unknown named types fall back to ``REFERENCE`` since any Python function
    may return ``None``; annotations that cannot be read at all, and the
    bottom types ``NoReturn``/``Never``, are ``UNSUPPORTED``.
    """
    node = _annotation_node(annotation)
    if node is None:
        return ReturnCategory.UNSUPPORTED
    if isinstance(node, ast.Constant) and node.value is None:
        return ReturnCategory.VOID
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
        return ReturnCategory.REFERENCE
    name = _outer_name(node)
    if name is None:
        return ReturnCategory.UNSUPPORTED
    if name == "None":
        return ReturnCategory.VOID
    if name in _NO_VALUE:
        return ReturnCategory.UNSUPPORTED
    if name in _BOOLEAN:
        return ReturnCategory.BOOLEAN
    if name in _INTEGRAL:
        return ReturnCategory.INTEGRAL_NUMERIC
    if name in _FLOATING:
        return ReturnCategory.FLOATING_NUMERIC
    if name in _CHARACTER:
        return ReturnCategory.CHARACTER
    if name in _TEXT:
        return ReturnCategory.TEXT_STRING
    if name in EMPTY_LITERALS:
        return ReturnCategory.EMPTYABLE_SEQUENCE
    return ReturnCategory.REFERENCE


def empty_literal_for(annotation: Optional[str]) -> Optional[str]:
    """Source literal for an empty value of a sequence-like annotation."""
    node = _annotation_node(annotation)
    name = _outer_name(node) if node is not None else None
    return EMPTY_LITERALS.get(name) if name else None


def own_nodes(func: FunctionNode) -> Iterator[ast.AST]:
    """Nodes of ``func``'s body, not descending into nested functions or lambdas."""
    stack: list[ast.AST] = list(reversed(func.body))
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        for child in reversed(list(ast.iter_child_nodes(node))):
            if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda)):
                if not isinstance(child, ast.Lambda):
                    yield child
                continue
            stack.append(child)


def _is_generator(func: FunctionNode) -> bool:
    for node in own_nodes(func):
        if isinstance(node, (ast.Yield, ast.YieldFrom)):
            return True
    return False


def _returns_value(func: FunctionNode) -> bool:
    for node in own_nodes(func):
        if isinstance(node, ast.Return) and node.value is not None:
            if not (isinstance(node.value, ast.Constant) and node.value.value is None):
                return True
    return False


def categorize_return(signature: Union[FunctionNode, str]) -> ReturnCategory:
    """Categorise a function from its definition node or ``def`` source text.

    Generators get ``UNSUPPORTED``: a constant ``return`` would silently turn
    them into ordinary functions.  Unannotated functions are ``VOID`` when no
    ``return`` carries a value and ``REFERENCE`` otherwise.
    """
    func = _parse_def(signature) if isinstance(signature, str) else signature
    if _is_generator(func):
        return ReturnCategory.UNSUPPORTED
    if func.returns is None:
        return ReturnCategory.REFERENCE if _returns_value(func) else ReturnCategory.VOID
    return categorize_annotation(func.returns)


def _parse_def(text: str) -> FunctionNode:
    text = text.strip()
    candidates = [text]
    if text.endswith(":"):
        candidates.append(text + " pass")
    for candidate in candidates:
        try:
            tree = ast.parse(candidate)
        except SyntaxError:
            continue
        for node in ast.walk(tree):
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                return node
    raise ValueError(f"not a function definition: {text!r}")


# --------------------------------------------------------------------------
# structural flags

def _strip_docstring(body: list[ast.stmt]) -> list[ast.stmt]:
    if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant):
        if isinstance(body[0].value.value, str):
            return body[1:]
    return body


def _is_literal(node: ast.expr) -> bool:
    if isinstance(node, ast.Constant):
        return node.value is not Ellipsis
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return isinstance(node.operand, ast.Constant) and isinstance(node.operand.value, (int, float))
    if isinstance(node, (ast.List, ast.Tuple, ast.Set)):
        return not node.elts
    if isinstance(node, ast.Dict):
        return not node.keys
    return False


def _is_empty_body(body: list[ast.stmt]) -> bool:
    for stmt in _strip_docstring(body):
        if isinstance(stmt, ast.Pass):
            continue
        if isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Constant) and stmt.value.value is Ellipsis:
            continue
        if isinstance(stmt, ast.Return) and stmt.value is None:
            continue
        return False
    return True


def _is_sole_constant_return(body: list[ast.stmt]) -> bool:
    stmts = _strip_docstring(body)
    return (
        len(stmts) == 1
        and isinstance(stmts[0], ast.Return)
        and stmts[0].value is not None
        and _is_literal(stmts[0].value)
    )


_STUB_DECORATORS = {"overload", "abstractmethod", "abstractproperty", "abstractclassmethod", "abstractstaticmethod"}


def _is_declaration_stub(func: FunctionNode) -> bool:
    return any(_outer_name(d if not isinstance(d, ast.Call) else d.func) in _STUB_DECORATORS
               for d in func.decorator_list)


def matches_any(site_id: str, patterns: Iterable[str]) -> bool:
    return any(fnmatch.fnmatchcase(site_id, p) for p in patterns)


def site_flags(func: FunctionNode, category: ReturnCategory, *, in_class: bool) -> set[SiteFlag]:
    flags: set[SiteFlag] = set()
    if in_class and func.name in CONSTRUCTOR_NAMES:
        flags.add(SiteFlag.CONSTRUCTOR)
    if _is_declaration_stub(func):
        flags.add(SiteFlag.COMPILER_GENERATED)
    if category is ReturnCategory.VOID and _is_empty_body(func.body):
        flags.add(SiteFlag.EMPTY_VOID_BODY)
    if _is_sole_constant_return(func.body):
        flags.add(SiteFlag.SOLE_CONSTANT_RETURN)
    return flags


# --------------------------------------------------------------------------
# scanning

def _glob_match(rel: str, pattern: str) -> bool:
    if fnmatch.fnmatchcase(rel, pattern):
        return True
    return pattern.startswith("**/") and fnmatch.fnmatchcase(rel, pattern[3:])


def _skip_dir(name: str) -> bool:
    return name.startswith(".") or name in _SKIPPED_DIRS or name.endswith(".egg-info")


def iter_source_files(config: DiscoveryConfig) -> list[tuple[str, str]]:
    """``(root, path relative to project root)`` pairs of files to scan, sorted."""
    project = config.project_root
    found: dict[str, str] = {}
    for root in config.roots:
        base = (project / root).resolve()
        if not base.is_dir() or not os.access(base, os.R_OK | os.X_OK):
            raise UnreadableRoot(f"source root not readable: {project / root}")
        for dirpath, dirnames, filenames in os.walk(base):
            dirnames[:] = sorted(d for d in dirnames if not _skip_dir(d))
            for name in sorted(filenames):
                full = Path(dirpath) / name
                rel = full.relative_to(project.resolve()).as_posix()
                if not any(_glob_match(rel, g) for g in config.include_globs):
                    continue
                if any(_glob_match(rel, g) for g in config.exclude_globs):
                    continue
                found.setdefault(rel, root)
    return sorted(((root, rel) for rel, root in found.items()), key=lambda p: p[1])


def module_name(rel: str, root: str) -> str:
    path = Path(rel)
    if root not in (".", ""):
        path = path.relative_to(Path(root))
    parts = list(path.with_suffix("").parts)
    if parts and parts[-1] == "__init__":
        parts.pop()
    return ".".join(parts) or "__main__"


def scan_source(data: bytes, rel: str, module: str) -> list[FunctionSite]:
    """All function sites of one file, in byte-offset order."""
    src = SourceText(data)
    try:
        tree = ast.parse(data, filename=rel)
    except SyntaxError as exc:
        raise ParseFailure(rel, exc.lineno, exc.msg) from None
    except ValueError as exc:
        raise ParseFailure(rel, None, str(exc)) from None

    sites: list[FunctionSite] = []
    seen: dict[str, int] = {}

    def visit(node: ast.AST, qual: list[str], in_class: bool) -> None:
        for child in ast.iter_child_nodes(node):
            if isinstance(child, ast.ClassDef):
                visit(child, qual + [child.name], True)
            elif isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)):
                sites.append(_make_site(child, src, rel, ".".join([module] + qual + [child.name]), in_class, seen))
                visit(child, qual + [child.name, "<locals>"], False)
            elif not isinstance(child, ast.Lambda):
                visit(child, qual, in_class)

    visit(tree, [], False)
    sites.sort(key=lambda s: s.signature_span.start)
    return sites


def _make_site(func: FunctionNode, src: SourceText, rel: str, qualname: str,
               in_class: bool, seen: dict[str, int]) -> FunctionSite:
    count = seen.get(qualname, 0) + 1
    seen[qualname] = count
    site_id = qualname if count == 1 else f"{qualname}#{count}"
    body = Span(src.offset(func.body[0].lineno, func.body[0].col_offset),
                src.offset(func.body[-1].end_lineno, func.body[-1].end_col_offset))
    signature = Span(src.offset(func.lineno, func.col_offset), body.start)
    category = categorize_return(func)
    first_line = min([func.lineno] + [d.lineno for d in func.decorator_list])
    annotation = ast.get_source_segment(src.text, func.returns) if func.returns is not None else None
    return FunctionSite(
        id=site_id,
        file=rel,
        body_span=body,
        signature_span=signature,
        category=category,
        flags=frozenset(site_flags(func, category, in_class=in_class)),
        line=func.lineno,
        first_line=first_line,
        return_annotation=annotation,
    )


def discover(config: DiscoveryConfig) -> DiscoveryResult:
    result = DiscoveryResult()
    for root, rel in iter_source_files(config):
        result.files.append(rel)
        data = (config.project_root / rel).read_bytes()
        try:
            file_sites = scan_source(data, rel, module_name(rel, root))
        except ParseFailure as exc:
            log.warning("skipping unparsable file %s", exc)
            result.parse_failures.append(exc)
            continue
        for site in file_sites:
            if config.excluded_function_patterns and matches_any(site.id, config.excluded_function_patterns):
                site = _with_flag(site, SiteFlag.EXPLICITLY_EXCLUDED)
            result.sites.append(site)
    return result


def _with_flag(site: FunctionSite, flag: SiteFlag) -> FunctionSite:
    return replace(site, flags=site.flags | {flag})


def scan_project(config: DiscoveryConfig) -> list[FunctionSite]:
    """Every function under the configured roots, sorted by file then offset.

    Unparsable files are logged and skipped; use :func:`discover` to get them.
    """
    return discover(config).sites


def apply_structural_filters(
    sites: list[FunctionSite], config: DiscoveryConfig
) -> tuple[list[FunctionSite], list[tuple[FunctionSite, SiteFlag]]]:
    included: list[FunctionSite] = []
    excluded: list[tuple[FunctionSite, SiteFlag]] = []
    for site in sites:
        reason = exclusion_reason(site, config)
        if reason is None:
            included.append(site)
        else:
            excluded.append((site, reason))
    return included, excluded


def exclusion_reason(site: FunctionSite, config: DiscoveryConfig) -> Optional[SiteFlag]:
    flags = set(site.flags)
    if config.excluded_function_patterns and matches_any(site.id, config.excluded_function_patterns):
        flags.add(SiteFlag.EXPLICITLY_EXCLUDED)
    for filt, flag in _FILTER_FLAGS:
        if flag in flags and (filt is None or filt in config.structural_filters):
            return flag
    return None
