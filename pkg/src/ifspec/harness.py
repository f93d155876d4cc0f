"""Conformance test runner speaking the adapter protocol (see :mod:`ifspec.wire`)."""

from __future__ import annotations

import logging
import os
import selectors
import shlex
import shutil
import socket
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import HarnessError
from .testgen import CoverageReport, StateGraph, TestCase, TestSuite, coverage
from .wire import GroundStimulus, MalformedMessage, Notify, Ready, Reply, encode_call, \
    parse_adapter_line

log = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
TIMEOUT, CONNECTION_LOST, MALFORMED = "timeout", "connection-lost", "malformed-message"


@dataclass(frozen=True)
class Endpoint:
    transport: str  # "tcp" or "stdio"
    host: str = "127.0.0.1"
    port: int = 0
    command: tuple[str, ...] = ()
    timeout_ms: int = 5000

    def __post_init__(self):
        if self.transport not in ("tcp", "stdio"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")
        object.__setattr__(self, "command", tuple(self.command))

    @classmethod
    def tcp(cls, host, port, timeout_ms=5000):
        return cls("tcp", host=host, port=int(port), timeout_ms=timeout_ms)

    @classmethod
    def stdio(cls, command, timeout_ms=5000):
        if isinstance(command, str):
            command = shlex.split(command)
        return cls("stdio", command=tuple(command), timeout_ms=timeout_ms)

    @classmethod
    def parse(cls, text: str, timeout_ms: int = 5000) -> "Endpoint":
        """``tcp://host:port``, ``host:port`` or ``stdio:<command line>``."""
        if text.startswith("stdio:"):
            command = shlex.split(text[len("stdio:"):])
            if not command:
                raise ValueError("stdio endpoint needs a command")
            return cls.stdio(command, timeout_ms)
        rest = text[len("tcp://"):] if text.startswith("tcp://") else text
        host, sep, port = rest.rpartition(":")
        if not sep or not port.isdigit():
            raise ValueError(f"bad endpoint {text!r}; expected tcp://host:port or stdio:<command>")
        return cls.tcp(host or "127.0.0.1", int(port), timeout_ms)

    def __str__(self):
        if self.transport == "tcp":
            return f"tcp://{self.host}:{self.port}"
        return "stdio:" + shlex.join(self.command)


class _ConnectionLost(Exception):
    pass


class _Connection:
    """Line reader/writer over a socket or a child process's pipes."""

    def __init__(self, endpoint: Endpoint):
        self.proc = None
        self.sock = None
        if endpoint.transport == "tcp":
            self.sock = socket.create_connection(
                (endpoint.host, endpoint.port), timeout=endpoint.timeout_ms / 1000)
            self.sock.setblocking(False)
            self._rfd = self.sock.fileno()
        else:
            self.proc = subprocess.Popen(
                endpoint.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)
            self._rfd = self.proc.stdout.fileno()
        self._buf = b""
        self._eof = False
        self._sel = selectors.DefaultSelector()
        self._sel.register(self._rfd, selectors.EVENT_READ)

    def send(self, line: str):
        data = line.encode("utf-8")
        try:
            if self.sock is not None:
                self.sock.setblocking(True)
                try:
                    self.sock.sendall(data)
                finally:
                    self.sock.setblocking(False)
            else:
                self.proc.stdin.write(data)
                self.proc.stdin.flush()
        except OSError as exc:
            raise _ConnectionLost(str(exc)) from None

    def _fill(self, timeout):
        if not self._sel.select(timeout):
            return False
        try:
            chunk = self.sock.recv(65536) if self.sock is not None else os.read(self._rfd, 65536)
        except BlockingIOError:
            return True
        except OSError as exc:
            raise _ConnectionLost(str(exc)) from None
        if not chunk:
            self._eof = True
        self._buf += chunk
        return True

    def readline(self, deadline):
        """Next line (without LF), or None once ``deadline`` passes."""
        while b"\n" not in self._buf:
            if self._eof:
                raise _ConnectionLost("end of stream")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            self._fill(remaining)
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode("utf-8", errors="replace")

    def pending(self):
        """Lines that are already available, without blocking."""
        lines = []
        while not self._eof and self._fill(0):
            pass
        while b"\n" in self._buf:
            line, _, self._buf = self._buf.partition(b"\n")
            lines.append(line.decode("utf-8", errors="replace"))
        return lines

    def close(self):
        self._sel.close()
        if self.sock is not None:
            self.sock.close()
        if self.proc is not None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=1)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
            self.proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True)
class StepResult:
    index: int
    sent: GroundStimulus | str
    observed_notify: tuple[str, ...]
    observed_reply: str | None
    verdict: str
    detail: str = ""


@dataclass(frozen=True)
class CaseResult:
    case_id: int
    steps: tuple[StepResult, ...]

    @property
    def verdict(self):
        for s in self.steps:
            if s.verdict != PASS:
                return s.verdict
        return PASS

    @property
    def first_failure(self) -> StepResult | None:
        return next((s for s in self.steps if s.verdict != PASS), None)


@dataclass(frozen=True)
class SuiteReport:
    model: str
    strategy: str
    endpoint: str
    results: tuple[CaseResult, ...]
    duration: float
    coverage: CoverageReport | None = None

    def count(self, verdict):
        return sum(r.verdict == verdict for r in self.results)

    @property
    def passed(self):
        return self.count(PASS)

    @property
    def failed(self):
        return self.count(FAIL)

    @property
    def inconclusive(self):
        return self.count(INCONCLUSIVE)

    @property
    def ok(self):
        return self.passed == len(self.results)


def _mismatch(expected_notify, notify, expected_reply, reply):
    problems = []
    if tuple(notify) != tuple(expected_notify):
        want = ", ".join(f"NOTIFY {n}" for n in expected_notify) or "no NOTIFY"
        got = ", ".join(f"NOTIFY {n}" for n in notify) or "none"
        problems.append(f"expected {want}, got {got}")
    if reply != expected_reply:
        problems.append(f"expected REPLY {expected_reply}, got REPLY {reply}")
    return "; ".join(problems)


def _inconclusive(index, sent, notify, detail, case_id):
    log.info("case %s step %s inconclusive: %s", case_id, index, detail)
    return StepResult(index, sent, tuple(notify), None, INCONCLUSIVE, detail)


def _await_ready(conn, deadline, case_id):
    while True:
        line = conn.readline(deadline)
        if line is None:
            return TIMEOUT
        try:
            msg = parse_adapter_line(line)
        except MalformedMessage:
            log.warning("case %s: malformed line after RESET: %r", case_id, line)
            return MALFORMED
        if isinstance(msg, Ready):
            return None
        log.warning("case %s: ignoring %r while waiting for READY", case_id, line)


def run_case(e: Endpoint, c: TestCase) -> CaseResult:
    """Run one case on a fresh connection, stopping at the first non-pass step."""
    timeout = e.timeout_ms / 1000
    results = []
    try:
        conn = _Connection(e)
    except OSError as exc:
        log.warning("case %s: cannot connect to %s: %s", c.id, e, exc)
        return CaseResult(c.id, (_inconclusive(0, "RESET", (), CONNECTION_LOST, c.id),))
    with conn:
        try:
            conn.send("RESET\n")
            problem = _await_ready(conn, time.monotonic() + timeout, c.id)
        except _ConnectionLost:
            problem = CONNECTION_LOST
        if problem:
            return CaseResult(c.id, (_inconclusive(0, "RESET", (), problem, c.id),))

        for index, step in enumerate(c.steps, start=1):
            notify = []
            try:
                for extra in conn.pending():
                    log.warning("case %s: unexpected line before step %s ignored: %r",
                                c.id, index, extra)
                conn.send(encode_call(step.stimulus))
                deadline = time.monotonic() + timeout
                reply = None
                while reply is None:
                    line = conn.readline(deadline)
                    if line is None:
                        results.append(_inconclusive(index, step.stimulus, notify, TIMEOUT, c.id))
                        return CaseResult(c.id, tuple(results))
                    msg = parse_adapter_line(line)
                    if isinstance(msg, Notify):
                        notify.append(msg.event)
                    elif isinstance(msg, Reply):
                        reply = msg.event
                    else:
                        raise MalformedMessage(line)
            except _ConnectionLost:
                results.append(_inconclusive(index, step.stimulus, notify, CONNECTION_LOST, c.id))
                return CaseResult(c.id, tuple(results))
            except MalformedMessage as exc:
                log.warning("case %s step %s: malformed line %r", c.id, index, exc.line)
                results.append(_inconclusive(index, step.stimulus, notify, MALFORMED, c.id))
                return CaseResult(c.id, tuple(results))

            detail = _mismatch(step.expect_notify, notify, step.expect_reply, reply)
            verdict = FAIL if detail else PASS
            results.append(StepResult(index, step.stimulus, tuple(notify), reply, verdict, detail))
            if verdict == FAIL:
                break
    return CaseResult(c.id, tuple(results))


def check_reachable(e: Endpoint):
    """Raise HarnessError(endpoint-unreachable) unless ``e`` can be contacted."""
    if e.transport == "tcp":
        try:
            socket.create_connection((e.host, e.port), timeout=e.timeout_ms / 1000).close()
        except OSError as exc:
            raise HarnessError("endpoint-unreachable", f"{e}: {exc}", endpoint=str(e)) from None
    else:
        exe = e.command[0]
        if shutil.which(exe) is None and not os.access(exe, os.X_OK):
            raise HarnessError("endpoint-unreachable", f"{e}: {exe} is not executable",
                               endpoint=str(e))


def run_suite(e: Endpoint, s: TestSuite, parallelism: int = 1,
              graph: StateGraph | None = None) -> SuiteReport:
    """Run every case (each on its own connection); results ordered by case id."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    check_reachable(e)
    started = time.monotonic()
    if parallelism == 1:
        results = [run_case(e, c) for c in s.cases]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda c: run_case(e, c), s.cases))
    results.sort(key=lambda r: r.case_id)
    cov = coverage(s, graph) if graph is not None else None
    return SuiteReport(s.model, s.strategy, str(e), tuple(results),
                       time.monotonic() - started, cov)


def format_report(report: SuiteReport) -> str:
    """Plain-text summary followed by a ``key=value`` section."""
    lines = [f"suite {report.model} strategy={report.strategy} endpoint={report.endpoint}"]
    for r in report.results:
        bad = r.first_failure
        if bad is None:
            lines.append(f"  test {r.case_id}: pass ({len(r.steps)} steps)")
        else:
            lines.append(f"  test {r.case_id}: {bad.verdict} at step {bad.index} "
                         f"(CALL {bad.sent}): {bad.detail}")
    lines.append(f"{report.passed} passed, {report.failed} failed, "
                 f"{report.inconclusive} inconclusive in {report.duration:.3f}s")
    lines.append("")
    lines.append("[report]")
    lines.append(f"model={report.model}")
    lines.append(f"strategy={report.strategy}")
    lines.append(f"endpoint={report.endpoint}")
    lines.append(f"cases={len(report.results)}")
    lines.append(f"pass={report.passed}")
    lines.append(f"fail={report.failed}")
    lines.append(f"inconclusive={report.inconclusive}")
    lines.append(f"duration_s={report.duration:.3f}")
    if report.coverage is not None:
        lines.append(f"transitions_total={report.coverage.transitions_total}")
        lines.append(f"transitions_covered={report.coverage.transitions_covered}")
    for r in report.results:
        bad = r.first_failure
        where = f" step={bad.index}" if bad else ""
        lines.append(f"case.{r.case_id}={r.verdict}{where}")
    return "\n".join(lines) + "\n"
