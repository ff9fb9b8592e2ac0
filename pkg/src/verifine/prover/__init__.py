"""Prover backends: a live Isabelle server or a local ground oracle."""

from dataclasses import dataclass
from typing import Union

from ..theory import TheoryDoc
from .messages import (
    CheckReport,
    ErrorClass,
    ProverError,
    ProverMessage,
    Span,
    SpanUnmapped,
    SYNTAX_CLASSES,
    build_report,
    classify_error,
    load_error_patterns,
    locate_failed_step,
    pick_first_error,
    syntax_error_count,
)
from .oracle import OracleSession, UnsupportedCheck, entails
from .isabelle import (
    AuthFailed,
    ConnectFailed,
    IsabelleSession,
    SessionBuildFailed,
    SessionDead,
    TheoryLoadFailed,
)


@dataclass(frozen=True)
class IsabelleServer:
    host: str
    port: int
    password: str
    session_name: str = "HOL"


@dataclass(frozen=True)
class GroundOracle:
    domain_bound: int = 3

    def __post_init__(self):
        if self.domain_bound < 1:
            raise ValueError("domain_bound must be >= 1")


ProverBackend = Union[IsabelleServer, GroundOracle]

SessionHandle = Union[IsabelleSession, OracleSession]


def start_session(backend: ProverBackend) -> SessionHandle:
    """Open a prover session for the given backend.

    Isabelle sessions connect, authenticate, build and start the prover
    session eagerly, so the errors (ConnectFailed, AuthFailed,
    SessionBuildFailed) surface here rather than at first check.
    """
    if isinstance(backend, GroundOracle):
        return OracleSession(backend.domain_bound)
    if isinstance(backend, IsabelleServer):
        return IsabelleSession(
            backend.host, backend.port, backend.password, backend.session_name
        )
    raise TypeError("unknown backend: %r" % (backend,))


def check_theory(
    handle: SessionHandle, doc: TheoryDoc, timeout_s: float = 65.0
) -> CheckReport:
    """Check one theory document, enforcing the wall-clock budget."""
    return handle.check_document(doc, timeout_s)


__all__ = [
    "AuthFailed",
    "CheckReport",
    "ConnectFailed",
    "ErrorClass",
    "GroundOracle",
    "IsabelleServer",
    "IsabelleSession",
    "OracleSession",
    "ProverBackend",
    "ProverError",
    "ProverMessage",
    "SessionBuildFailed",
    "SessionDead",
    "SessionHandle",
    "Span",
    "SpanUnmapped",
    "SYNTAX_CLASSES",
    "TheoryLoadFailed",
    "UnsupportedCheck",
    "build_report",
    "check_theory",
    "classify_error",
    "entails",
    "load_error_patterns",
    "locate_failed_step",
    "pick_first_error",
    "start_session",
    "syntax_error_count",
]
