"""TCP client for an Isabelle server.

Wire protocol: the client connects, sends the server password as a bare
line, and receives `OK {...}`.  Every subsequent exchange is a line of
the form `NAME {json argument}`.  Replies arrive either as one physical
line or, when the payload is long, as a line holding a decimal byte
count followed by exactly that many bytes.  Asynchronous commands are
acknowledged with `OK {"task": id}` and settle later with `FINISHED` or
`FAILED` carrying the same task id; `NOTE` lines report progress and are
ignored here.

Each proof check writes the theory file into a fresh scratch directory,
so the server sees a new node every time and stale results are never
replayed across the repeated checks a refinement round performs.
"""

import json
import logging
import os
import shutil
import socket
import tempfile
import time
from typing import Dict, List, Optional, Tuple

from ..theory import TheoryDoc
from .messages import (
    CheckReport,
    ProverError,
    ProverMessage,
    Span,
    build_report,
)

log = logging.getLogger(__name__)


class ConnectFailed(ProverError):
    """TCP connection to the server could not be established."""


class AuthFailed(ProverError):
    """The server rejected the password."""


class SessionBuildFailed(ProverError):
    """session_build finished unsuccessfully."""


class SessionDead(ProverError):
    """The session is unusable (closed, timed out, or server gone)."""


class TheoryLoadFailed(ProverError):
    """use_theories failed outright rather than reporting messages."""


class _Deadline(Exception):
    pass


def _encode_args(args: Optional[dict]) -> str:
    if args is None:
        return ""
    return " " + json.dumps(args, separators=(",", ":"), sort_keys=True)


class IsabelleSession:
    """One server connection owning one prover session."""

    def __init__(
        self,
        host: str,
        port: int,
        password: str,
        session_name: str = "HOL",
        connect_timeout: float = 10.0,
        build_timeout: float = 600.0,
    ):
        self.session_name = session_name
        self.session_id: Optional[str] = None
        self._buf = b""
        self._dead = False
        self._check_counter = 0
        self._workdir = tempfile.mkdtemp(prefix="verifine_thy_")
        try:
            self._sock = socket.create_connection((host, port), connect_timeout)
        except OSError as exc:
            raise ConnectFailed("cannot connect to %s:%d: %s" % (host, port, exc))
        self._sock.settimeout(0.25)
        try:
            self._write_line(password)
            kind, _payload = self._read_reply(time.monotonic() + connect_timeout)
        except (_Deadline, SessionDead) as exc:
            self._sock.close()
            raise AuthFailed("no handshake reply: %s" % exc)
        if kind != "OK":
            self._sock.close()
            raise AuthFailed("server refused password: %s" % kind)
        self._start(build_timeout)

    # -- low-level framing

    def _write_line(self, line: str):
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            self._dead = True
            raise SessionDead("send failed: %s" % exc)

    def _recv_chunk(self, deadline: Optional[float]) -> bytes:
        while True:
            if deadline is not None and time.monotonic() > deadline:
                raise _Deadline()
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout:
                continue
            except OSError as exc:
                self._dead = True
                raise SessionDead("recv failed: %s" % exc)
            if not chunk:
                self._dead = True
                raise SessionDead("server closed the connection")
            return chunk

    def _read_line(self, deadline: Optional[float]) -> str:
        while True:
            pos = self._buf.find(b"\n")
            if pos >= 0:
                line = self._buf[:pos]
                self._buf = self._buf[pos + 1:]
                return line.decode("utf-8")
            self._buf += self._recv_chunk(deadline)

    def _read_exact(self, count: int, deadline: Optional[float]) -> str:
        while len(self._buf) < count:
            self._buf += self._recv_chunk(deadline)
        data = self._buf[:count]
        self._buf = self._buf[count:]
        return data.decode("utf-8")

    def _read_message(self, deadline: Optional[float]) -> str:
        line = self._read_line(deadline)
        if line and line.isdigit():
            return self._read_exact(int(line), deadline)
        return line

    def _read_reply(self, deadline: Optional[float]) -> Tuple[str, dict]:
        message = self._read_message(deadline)
        head, _, rest = message.partition(" ")
        payload: dict = {}
        rest = rest.strip()
        if rest:
            try:
                decoded = json.loads(rest)
                if isinstance(decoded, dict):
                    payload = decoded
                else:
                    payload = {"value": decoded}
            except ValueError:
                payload = {"raw": rest}
        return head, payload

    # -- command plumbing

    def _run_async(self, name: str, args: dict, deadline: Optional[float]) -> dict:
        """Send an asynchronous command and wait for its FINISHED payload."""
        self._write_line(name + _encode_args(args))
        kind, payload = self._read_reply(deadline)
        if kind == "ERROR":
            raise ProverError("%s rejected: %s" % (name, payload))
        if kind != "OK":
            raise ProverError("unexpected reply to %s: %s" % (name, kind))
        task = payload.get("task")
        while True:
            kind, payload = self._read_reply(deadline)
            if kind == "NOTE":
                continue
            if task is not None and payload.get("task") not in (None, task):
                continue
            if kind == "FINISHED":
                return payload
            if kind == "FAILED":
                raise ProverError("%s failed: %s" % (name, payload))
            if kind == "ERROR":
                raise ProverError("%s error: %s" % (name, payload))

    def _start(self, build_timeout: float):
        deadline = time.monotonic() + build_timeout
        try:
            build = self._run_async(
                "session_build", {"session": self.session_name}, deadline
            )
            if build.get("ok") is False:
                raise SessionBuildFailed("build of %r failed" % self.session_name)
            started = self._run_async(
                "session_start", {"session": self.session_name}, deadline
            )
        except _Deadline:
            raise SessionBuildFailed(
                "session %r did not come up within %.0fs"
                % (self.session_name, build_timeout)
            )
        except ProverError as exc:
            if isinstance(exc, SessionBuildFailed):
                raise
            raise SessionBuildFailed(str(exc))
        self.session_id = started.get("session_id")
        if not self.session_id:
            raise SessionBuildFailed("session_start returned no session_id")

    # -- checking

    def check_document(self, doc: TheoryDoc, timeout_s: float = 65.0) -> CheckReport:
        return self._check(doc.rendered, doc.name, timeout_s, doc)

    def check_source(
        self, text: str, name: str, timeout_s: float = 65.0
    ) -> CheckReport:
        return self._check(text, name, timeout_s, None)

    def _check(
        self,
        text: str,
        name: str,
        timeout_s: float,
        doc: Optional[TheoryDoc],
    ) -> CheckReport:
        if self._dead or self.session_id is None:
            raise SessionDead("session is not usable")
        started = time.monotonic()
        deadline = started + timeout_s
        self._check_counter += 1
        scratch = os.path.join(self._workdir, "c%d" % self._check_counter)
        os.makedirs(scratch, exist_ok=True)
        with open(os.path.join(scratch, name + ".thy"), "w", encoding="utf-8") as fh:
            fh.write(text)
        args = {
            "session_id": self.session_id,
            "theories": [name],
            "master_dir": scratch,
        }
        try:
            payload = self._run_async("use_theories", args, deadline)
        except _Deadline:
            # The task may still be running server-side; this session is
            # done regardless, the caller owns session-per-problem anyway.
            self._dead = True
            elapsed = time.monotonic() - started
            message = ProverMessage(
                "error", "Timeout: prover gave no verdict within %.1fs" % timeout_s
            )
            return build_report("timeout", [message], elapsed, doc)
        except (SessionDead, ProverError):
            raise
        elapsed = time.monotonic() - started
        return self._report_from_payload(payload, elapsed, doc)

    @staticmethod
    def _severity(kind: str) -> str:
        if kind == "error":
            return "error"
        if kind in ("warning", "legacy"):
            return "warning"
        return "info"

    @staticmethod
    def _span(pos: dict) -> Optional[Span]:
        if not pos:
            return None
        line = pos.get("line")
        offset = pos.get("offset")
        if line is None or offset is None:
            return None
        return Span(int(line), int(offset), int(pos.get("end_offset", offset)))

    def _report_from_payload(
        self, payload: dict, elapsed: float, doc: Optional[TheoryDoc]
    ) -> CheckReport:
        messages: List[ProverMessage] = []
        seen = set()

        def add(kind: str, text: str, pos: dict):
            severity = self._severity(kind)
            span = self._span(pos or {})
            key = (severity, text, span)
            if key in seen:
                return
            seen.add(key)
            messages.append(ProverMessage(severity, text, span))

        for node in payload.get("nodes", []):
            for msg in node.get("messages", []):
                add(msg.get("kind", "writeln"), msg.get("message", ""), msg.get("pos"))
        for msg in payload.get("errors", []):
            add("error", msg.get("message", ""), msg.get("pos"))
        has_error = any(m.severity == "error" for m in messages)
        ok = bool(payload.get("ok", not has_error)) and not has_error
        status = "valid" if ok else "failed"
        if status == "failed" and not has_error:
            messages.append(
                ProverMessage("error", "Theory processing failed without messages")
            )
        return build_report(status, messages, elapsed, doc)

    # -- lifecycle

    def close(self):
        if self._dead:
            self._cleanup()
            return
        try:
            if self.session_id is not None:
                self._run_async(
                    "session_stop",
                    {"session_id": self.session_id},
                    time.monotonic() + 10.0,
                )
        except (ProverError, _Deadline):
            pass
        finally:
            self._cleanup()

    def shutdown_server(self):
        """Stop the remote server process itself."""
        try:
            self._write_line("shutdown")
        except SessionDead:
            pass
        finally:
            self._cleanup()

    def _cleanup(self):
        self._dead = True
        try:
            self._sock.close()
        except OSError:
            pass
        shutil.rmtree(self._workdir, ignore_errors=True)
