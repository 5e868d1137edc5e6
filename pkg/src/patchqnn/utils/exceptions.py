"""
patchqnn.utils.exceptions
=========================

Exception hierarchy shared by the library and the command line.

Every class derives from :pyclass:`PatchQNNError`; the mixed-in builtin
(:pyclass:`ValueError`, :pyclass:`ArithmeticError`) keeps ``except
ValueError`` call sites working. :pydata:`EXIT_CODES` maps each family to
the process exit status used by :pymod:`patchqnn.cli`.
"""

from __future__ import annotations

from typing import Iterable, Optional


class PatchQNNError(Exception):
    """Base class of all package errors."""


class ConfigError(PatchQNNError, ValueError):
    """Invalid run configuration; :pyattr:`violations` lists every problem found."""

    def __init__(self, violations: Iterable[str]):
        self.violations = list(violations)
        lines = "\n  - ".join(self.violations)
        super().__init__(f"{len(self.violations)} configuration error(s):\n  - {lines}")


class DataFormatError(PatchQNNError, ValueError):
    """Malformed input file. *offset* is the byte offset where parsing failed."""

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        self.path = path
        self.offset = offset
        where = ""
        if path is not None:
            where = f" [{path}" + (f" @ byte {offset}" if offset is not None else "") + "]"
        super().__init__(message + where)


class MagicNumberError(DataFormatError):
    pass


class TruncatedPayloadError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class NumericalError(PatchQNNError, ArithmeticError):
    """Non-finite loss or gradient, or a degenerate linear-algebra step."""


class ArtifactMismatchError(PatchQNNError):
    """A run artifact is missing, incomplete, or stamped with another configuration hash."""


EXIT_CODES = {
    ConfigError: 2,
    DataFormatError: 3,
    NumericalError: 4,
    ArtifactMismatchError: 5,
}
