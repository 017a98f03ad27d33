"""Exception hierarchy. Every error carries a stable machine-readable code."""

from __future__ import annotations

from typing import Any


class ReqQaError(Exception):
    """Base error with a machine-readable ``code`` and optional context."""

    def __init__(self, code: str, message: str, **context: Any) -> None:
        super().__init__(message)
        self.code = code
        self.context = context

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


class PromptError(ReqQaError):
    """Invalid prompt construction input or broken template file."""


class GatewayError(ReqQaError):
    """Completion backend failure (network, timeout, cassette miss, config)."""

    def __init__(self, code: str, message: str, *, transient: bool = False, **context: Any) -> None:
        super().__init__(code, message, **context)
        self.transient = transient


class ParseError(ReqQaError):
    """Model response could not be interpreted; keeps the raw text for audit."""

    def __init__(self, code: str, message: str, raw: str, **context: Any) -> None:
        super().__init__(code, message, **context)
        self.raw = raw


class PipelineError(ReqQaError):
    """Evaluation-run failure; may carry the partial result."""


class ProtocolError(ReqQaError):
    """Review-protocol rule violation (phases, votes, coverage)."""


class MetricsError(ReqQaError):
    """Invalid input to an agreement or summary computation."""


class StoreError(ReqQaError):
    """Persistence or import failure."""
