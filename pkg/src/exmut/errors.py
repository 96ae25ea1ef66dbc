"""Exception hierarchy."""

from __future__ import annotations


class ExmutError(Exception):
    """Base class for all errors raised by exmut."""


class UnreadableRoot(ExmutError):
    pass


class ParseFailure(ExmutError):
    def __init__(self, file: str, line: int | None, message: str) -> None:
        self.file = file
        self.line = line
        self.message = message
        where = f"{file}:{line}" if line is not None else file
        super().__init__(f"{where}: {message}")


class SpanOutOfRange(ExmutError):
    pass


class SyntaxBreak(ExmutError):
    """The mutated source no longer parses."""


class BaselineRedTests(ExmutError):
    def __init__(self, failing: list[str], detail: str = "") -> None:
        self.failing = failing
        msg = "baseline tests failing"
        if failing:
            msg += ": " + ", ".join(failing[:5])
        if detail:
            msg += "\n" + detail
        super().__init__(msg)


class InvalidCounts(ExmutError, ValueError):
    pass


class DegenerateInput(ExmutError, ValueError):
    pass


class MismatchedSnapshot(ExmutError):
    pass


class ConfigError(ExmutError):
    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}")
