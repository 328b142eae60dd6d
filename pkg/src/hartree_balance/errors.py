"""Exception hierarchy with the process exit code attached to each class."""

from __future__ import annotations


class HartreeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(HartreeError):
    """Invalid parameters or configuration. May carry several messages."""

    exit_code = 2

    def __init__(self, messages: str | list[str]):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class UsageError(HartreeError):
    """Objects combined in an unsupported way (e.g. mismatched grids)."""

    exit_code = 2


class UnsupportedError(HartreeError):
    exit_code = 2


class FormatError(HartreeError):
    """Corrupt or incompatible checkpoint file."""

    exit_code = 2


class DomainError(HartreeError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 2


class RegimeError(DomainError):
    """Field or parameters outside the admissible regime of an operation."""


class SolverError(HartreeError):
    """An iterative solver failed to converge."""

    exit_code = 3


class NumericError(SolverError):
    """A numerical sub-step (quadrature, root bracketing) failed."""


class IntegrationError(HartreeError):
    """Time integration produced non-finite values or lost mass."""

    exit_code = 4
