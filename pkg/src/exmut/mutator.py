"""Turn operators into concrete source edits and isolated project copies."""

from __future__ import annotations

import ast
import hashlib
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from .discovery import SourceText, _skip_dir
from .errors import SpanOutOfRange, SyntaxBreak
from .model import FunctionSite, Mutant, OperatorKind, ReturnCategory, Span
from .operators import OperatorCatalog, extreme_operators_for, render_extreme_body, traditional_operators_for

SCRATCH_ENV = "EXMUT_SCRATCH_DIR"


class ParsedSource:
    """A parsed file with its function nodes indexed by ``def`` offset."""

    def __init__(self, data: bytes, filename: str = "<source>") -> None:
        self.src = SourceText(data)
        self.tree = ast.parse(data, filename=filename)
        self._defs: dict[int, ast.AST] = {}
        for node in ast.walk(self.tree):
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
                self._defs[self.src.offset(node.lineno, node.col_offset)] = node

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> ParsedSource:
        path = Path(path)
        return cls(path.read_bytes(), str(path))

    @property
    def data(self) -> bytes:
        return self.src.data

    def function_at(self, site: FunctionSite) -> ast.AST:
        try:
            return self._defs[site.signature_span.start]
        except KeyError:
            raise LookupError(f"no function definition at offset {site.signature_span.start} for {site.id}") from None


def mutant_id(site: FunctionSite, op_id: str, span: Span) -> str:
    digest = hashlib.sha1(f"{site.id}|{op_id}|{span.start}:{span.end}".encode()).hexdigest()
    return "m" + digest[:12]


def generate_mutants(site: FunctionSite, catalog: OperatorCatalog, parsed: ParsedSource) -> list[Mutant]:
    """All mutants of ``site`` under ``catalog``, skipping identity edits."""
    if site.category is ReturnCategory.UNSUPPORTED and catalog.kind is OperatorKind.EXTREME:
        return []
    src = parsed.src
    mutants: list[Mutant] = []

    def add(op_id: str, span: Span, replacement: str) -> None:
        if src.segment(span) == replacement:
            return
        mutants.append(Mutant(mutant_id(site, op_id, span), site, op_id, replacement, span, src.line_of(span.start)))

    if catalog.kind is OperatorKind.EXTREME:
        for op in extreme_operators_for(site.category, catalog):
            body = render_extreme_body(op, site)
            if body is not None:
                add(op.op_id, site.body_span, body)
    else:
        func = parsed.function_at(site)
        for inst in traditional_operators_for(site, func, src, catalog):
            add(inst.operator.op_id, inst.span, inst.replacement)
    return mutants


def splice(data: bytes, span: Span, replacement: bytes) -> bytes:
    if span.end > len(data):
        raise SpanOutOfRange(f"span [{span.start}, {span.end}) exceeds source length {len(data)}")
    return data[: span.start] + replacement + data[span.end :]


def apply_mutant(original_source: Union[str, bytes], mutant: Mutant) -> Union[str, bytes]:
    """Replace exactly ``mutant.affected_span``; the result must still parse.

    Returns the same type it was given.
    """
    as_text = isinstance(original_source, str)
    data = original_source.encode("utf-8") if as_text else original_source
    mutated = splice(data, mutant.affected_span, mutant.replacement.encode("utf-8"))
    try:
        compile(mutated, mutant.site.file, "exec", dont_inherit=True)
    except (SyntaxError, ValueError) as exc:
        raise SyntaxBreak(f"{mutant.mutant_id} ({mutant.op_id}) breaks {mutant.site.file}: {exc}") from None
    return mutated.decode("utf-8") if as_text else mutated


# --------------------------------------------------------------------------
# workspaces

def scratch_root(explicit: Optional[Union[str, Path]] = None) -> Path:
    base = explicit or os.environ.get(SCRATCH_ENV) or tempfile.gettempdir()
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _copy_ignore(extra: frozenset[str]):
    def ignore(directory: str, names: list[str]) -> set[str]:
        skipped = set()
        for name in names:
            full = Path(directory) / name
            if full.resolve() in extra:
                skipped.add(name)
            elif full.is_dir() and _skip_dir(name):
                skipped.add(name)
            elif name.endswith((".pyc", ".pyo")):
                skipped.add(name)
        return skipped

    return ignore


def copy_project(project_root: Path, dest: Path, ignore_paths: tuple[Path, ...] = ()) -> Path:
    extra = frozenset(Path(p).resolve() for p in ignore_paths)
    shutil.copytree(project_root, dest, ignore=_copy_ignore(extra), symlinks=True)
    return dest


class Workspace:
    """A private copy of the project that mutants are applied to in turn.

    Only the mutated file is rewritten, and it is restored byte-for-byte
    after each evaluation.  Files the tests themselves create are not rolled
    back.
    """

    def __init__(self, path: Path, keep: bool = False) -> None:
        self.path = path
        self.keep = keep

    @classmethod
    def create(cls, project_root: Union[str, Path], *, scratch: Optional[Union[str, Path]] = None,
               ignore_paths: tuple[Path, ...] = (), keep: bool = False) -> Workspace:
        parent = Path(tempfile.mkdtemp(prefix="exmut-ws-", dir=scratch_root(scratch)))
        path = copy_project(Path(project_root), parent / "project", ignore_paths)
        return cls(path, keep)

    @contextmanager
    def applied(self, mutant: Mutant, original: bytes) -> Iterator[Path]:
        """Write the mutated file for the duration of the block.

        Raises :class:`SyntaxBreak` before touching disk if the mutant does
        not parse.
        """
        target = self.path / mutant.site.file
        mutated = apply_mutant(original, mutant)
        target.write_bytes(mutated)
        try:
            yield target
        finally:
            target.write_bytes(original)

    def cleanup(self) -> None:
        if not self.keep:
            shutil.rmtree(self.path.parent, ignore_errors=True)


def materialize_workspace(project_root: Union[str, Path], mutant: Mutant, *,
                          scratch: Optional[Union[str, Path]] = None) -> Path:
    """Standalone copy of ``project_root`` with only ``mutant``'s file changed."""
    ws = Workspace.create(project_root, scratch=scratch, keep=True)
    target = ws.path / mutant.site.file
    target.write_bytes(apply_mutant(target.read_bytes(), mutant))
    return ws.path


def tree_digest(root: Union[str, Path], suffixes: tuple[str, ...] = (".py",)) -> str:
    """SHA-256 over the relative paths and contents of matching files."""
    root = Path(root)
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if not _skip_dir(d))
        for name in sorted(filenames):
            if suffixes and not name.endswith(suffixes):
                continue
            full = Path(dirpath) / name
            h.update(full.relative_to(root).as_posix().encode())
            h.update(b"\0")
            h.update(full.read_bytes())
            h.update(b"\0")
    return h.hexdigest()
