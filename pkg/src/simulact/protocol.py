"""Line-delimited JSON protocol between a session driver and an external agent.

The driver owns the source and the session state. It reveals a source word
only after the agent asked for it with READ, validates every decision with
:func:`simulact.simulation.step`, and aborts the session on any attempt to
rewrite emitted output. See ``docs/protocol.md`` for the message grammar.
"""
from __future__ import annotations

import json
import queue
import socket
import subprocess
import sys
import threading
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, TextIO

from .corpus_io import SourceTranscript
from .errors import (
    MonotonicityViolation,
    ParseError,
    ProtocolError,
    SessionTimeout,
    SimulationError,
    VIOLATION_MARKER,
)
from .simulation import Action, ActionKind, Policy, SessionState, SessionTrace, run_policy, step

DEFAULT_TIMEOUT_MS = 30_000

# driver -> agent
SESSION_INIT = "session_init"
SOURCE_WORD = "source_word"
SOURCE_END = "source_end"
CONTINUE = "continue"
ABORT = "abort"
# agent -> driver
DECISION = "decision"
FINISH = "finish"

_FIELDS = {
    SESSION_INIT: {"lang_pair": str, "prompt": str},
    SOURCE_WORD: {"index": int, "text": str},
    SOURCE_END: {"length": int},
    CONTINUE: {},
    ABORT: {"reason": str},
    DECISION: {"action": str},
    FINISH: {},
}
_OPTIONAL = {SESSION_INIT: {"session"}, SOURCE_WORD: {"final"}, DECISION: {"emission", "span", "position", "index"}}

# messages after which the driver waits for exactly one decision
REQUESTS = frozenset({SOURCE_WORD, SOURCE_END, CONTINUE})


# ---------------------------------------------------------------- messages

def _check(msg: dict, payload: str) -> dict:
    if not isinstance(msg, dict):
        raise ProtocolError("message is not an object", payload)
    kind = msg.get("type")
    if kind not in _FIELDS:
        raise ProtocolError(f"unknown message type {kind!r}", payload)
    required = _FIELDS[kind]
    allowed = {"type", *required, *_OPTIONAL.get(kind, ())}
    extra = set(msg) - allowed
    if extra:
        raise ProtocolError(f"unexpected fields {sorted(extra)} in {kind}", payload)
    for name, typ in required.items():
        value = msg.get(name)
        if not isinstance(value, typ) or isinstance(value, bool):
            raise ProtocolError(f"{kind}.{name} must be {typ.__name__}", payload)
    if kind == SOURCE_WORD and not isinstance(msg.get("final", False), bool):
        raise ProtocolError("source_word.final must be a boolean", payload)
    if kind == DECISION:
        decision_action(msg, payload)
    return msg


def encode_message(msg: dict) -> str:
    """One message as a single JSON line (terminated by ``\\n``)."""
    _check(msg, repr(msg))
    return json.dumps(msg, ensure_ascii=False, separators=(",", ":")) + "\n"


def decode_message(line: str) -> dict:
    """Parse and validate one line. A missing terminator means a truncated frame."""
    if not line.endswith("\n"):
        raise ProtocolError("truncated frame", line)
    try:
        msg = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError("malformed message", line.rstrip("\n")) from None
    return _check(msg, line.rstrip("\n"))


def decision_message(action: Optional[Action], index: int | None = None) -> dict:
    if action is None:
        return {"type": FINISH}
    rec = action.to_record(0)
    del rec["step"]
    msg = {"type": DECISION, **rec}
    if index is not None:
        msg["index"] = index
    return msg


def decision_action(msg: dict, payload: str | None = None) -> Optional[Action]:
    """The Action carried by a decision (None for ``finish``)."""
    if msg.get("type") == FINISH:
        return None
    payload = payload if payload is not None else json.dumps(msg, ensure_ascii=False)
    try:
        action = Action.from_record(msg)
    except ParseError as exc:
        raise ProtocolError(str(exc), payload) from None
    emits = action.kind.emits or action.kind is ActionKind.REVISE
    if emits != bool(action.emission):
        raise ProtocolError(f"{action.kind.value}: emission present iff the action emits", payload)
    return action


# ---------------------------------------------------------------- transports

class Transport:
    """Bidirectional message channel seen from the driver."""

    def send(self, msg: dict) -> None:
        raise NotImplementedError

    def recv(self, timeout_s: float) -> dict:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class StreamTransport(Transport):
    """Lines over a pair of text streams; a reader thread makes timeouts possible."""

    def __init__(self, reader: TextIO, writer: TextIO):
        self._writer = writer
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(reader,), daemon=True)
        self._thread.start()

    def _pump(self, reader):
        try:
            for line in reader:
                self._lines.put(line)
        except (OSError, ValueError):
            pass
        self._lines.put(None)

    def send(self, msg):
        try:
            self._writer.write(encode_message(msg))
            self._writer.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise ProtocolError(f"agent connection lost ({exc})") from None

    def recv(self, timeout_s):
        try:
            line = self._lines.get(timeout=timeout_s)
        except queue.Empty:
            raise SessionTimeout(f"no agent reply within {timeout_s:g} s") from None
        if line is None:
            self._lines.put(None)
            raise ProtocolError("agent closed the connection")
        return decode_message(line)


class SubprocessTransport(StreamTransport):
    """Agent running as a child process speaking over stdin/stdout."""

    def __init__(self, argv: Sequence[str]):
        self.proc = subprocess.Popen(list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                     text=True, encoding="utf-8", bufsize=1)
        super().__init__(self.proc.stdout, self.proc.stdin)

    def close(self):
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class SocketTransport(StreamTransport):
    """Agent listening on a local socket: a filesystem path (unix) or ``host:port``."""

    def __init__(self, address: str, connect_timeout_s: float = 5.0):
        if ":" in address and not address.startswith("/"):
            host, _, port = address.rpartition(":")
            self.sock = socket.create_connection((host, int(port)), timeout=connect_timeout_s)
        else:
            self.sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self.sock.settimeout(connect_timeout_s)
            self.sock.connect(address)
        self.sock.settimeout(None)
        self._rfile = self.sock.makefile("r", encoding="utf-8", newline="\n")
        self._wfile = self.sock.makefile("w", encoding="utf-8", newline="\n")
        super().__init__(self._rfile, self._wfile)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        for f in (self._wfile, self._rfile):
            try:
                f.close()
            except OSError:
                pass
        self.sock.close()


class LoopbackTransport(Transport):
    """In-process agent; every message still goes through encode/decode."""

    def __init__(self, agent: "PolicyAgent"):
        self.agent = agent
        self._pending: list[str] = []

    def send(self, msg):
        reply = self.agent.handle(decode_message(encode_message(msg)))
        if reply is not None:
            self._pending.append(encode_message(reply))

    def recv(self, timeout_s):
        if not self._pending:
            raise SessionTimeout("agent produced no reply")
        return decode_message(self._pending.pop(0))


# ---------------------------------------------------------------- agent side

class PolicyAgent:
    """Serves an in-process Policy over the protocol.

    The agent mirrors the session state from its own decisions and the
    words it has been shown; it never sees anything beyond its READ frontier.
    """

    def __init__(self, policy: Policy | Callable[[str], Policy]):
        # a factory is called with the session id at every session_init
        self._factory = None if isinstance(policy, Policy) else policy
        self.policy = policy if isinstance(policy, Policy) else None
        self.words: list[str] = []
        self.state = SessionState()
        self.aborted: Optional[str] = None
        self.lang_pair = ""
        self.prompt = ""

    def _decide(self) -> dict:
        action = self.policy(tuple(self.words), self.state)
        if action is not None and action.kind is not ActionKind.REVISE:
            try:
                # no upper bound on the source here; source_end tells us when it stops
                self.state = step(self.state, action, sys.maxsize)
            except SimulationError:
                pass  # the driver will reject it and abort
        return decision_message(action, index=len(self.words))

    def handle(self, msg: dict) -> Optional[dict]:
        kind = msg["type"]
        if kind == SESSION_INIT:
            if self._factory is not None:
                self.policy = self._factory(msg.get("session", ""))
            self.policy.reset()
            self.words = []
            self.state = SessionState()
            self.aborted = None
            self.lang_pair = msg["lang_pair"]
            self.prompt = msg["prompt"]
            return None
        if self.policy is None:
            raise ProtocolError(f"{kind} before session_init")
        if kind == ABORT:
            self.aborted = msg["reason"]
            return None
        if kind == SOURCE_WORD:
            if msg["index"] != len(self.words) + 1:
                raise ProtocolError(f"expected word {len(self.words) + 1}, got {msg['index']}")
            self.words.append(msg["text"])
            if self.state.read_count < len(self.words):
                self.state = replace(self.state, read_count=len(self.words))
            # the final word is answered after the source_end that follows it
            return None if msg.get("final") else self._decide()
        if kind == SOURCE_END:
            self.state = replace(self.state, source_ended=True)
            return self._decide()
        if kind == CONTINUE:
            return self._decide()
        raise ProtocolError(f"agent cannot handle {kind}")


def serve(policy: Policy | Callable[[str], Policy], reader: TextIO = sys.stdin, writer: TextIO = sys.stdout) -> int:
    """Answer driver messages until the input closes. Returns a process exit code."""
    agent = PolicyAgent(policy)
    for line in reader:
        if not line.strip():
            continue
        reply = agent.handle(decode_message(line))
        if reply is not None:
            writer.write(encode_message(reply))
            writer.flush()
    return 0


def listen_socket(address: str) -> socket.socket:
    """Bound, listening socket for ``path`` (unix) or ``host:port``."""
    if ":" in address and not address.startswith("/"):
        host, _, port = address.rpartition(":")
        srv = socket.create_server((host, int(port)))
    else:
        srv = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        srv.bind(address)
        srv.listen()
    return srv


def serve_socket(policy: Policy | Callable[[str], Policy], srv: socket.socket,
                 max_connections: int | None = None) -> int:
    """Accept connections one after another, serving one session stream each."""
    served = 0
    with srv:
        while max_connections is None or served < max_connections:
            conn, _ = srv.accept()
            try:
                with conn, conn.makefile("r", encoding="utf-8", newline="\n") as rf, \
                        conn.makefile("w", encoding="utf-8", newline="\n") as wf:
                    serve(policy, rf, wf)
            except (ProtocolError, OSError):
                pass  # a broken session must not stop the server
            served += 1
    return 0


# ---------------------------------------------------------------- driver side

@dataclass(frozen=True)
class SessionConfig:
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    step_budget: Optional[int] = None
    lang_pair: str = ""
    prompt: str = ""
    session: str = ""

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")


class RemotePolicy(Policy):
    """Driver-side stand-in: each ``decide`` is one request/response exchange.

    A newly read word is sent as ``source_word``; once the last word is out,
    ``source_end`` follows it and is the request. Steps that read nothing new
    send ``continue``.
    """

    def __init__(self, transport: Transport, cfg: SessionConfig = SessionConfig(),
                 src_len: int = 0):
        self.transport = transport
        self.cfg = cfg
        self.src_len = src_len
        self._sent = 0
        self._started = False
        self._ended = False
        self.spy: Optional[Callable[[dict], None]] = None

    def reset(self):
        self._sent = 0
        self._started = False
        self._ended = False

    def _send(self, msg):
        if self.spy is not None:
            self.spy(msg)
        self.transport.send(msg)

    def decide(self, prefix, state):
        if not self._started:
            init = {"type": SESSION_INIT, "lang_pair": self.cfg.lang_pair, "prompt": self.cfg.prompt}
            if self.cfg.session:
                init["session"] = self.cfg.session
            self._send(init)
            self._started = True
        if len(prefix) > self._sent:
            for k in range(self._sent, len(prefix)):
                msg = {"type": SOURCE_WORD, "index": k + 1, "text": prefix[k]}
                if state.source_ended and k + 1 == len(prefix):
                    msg["final"] = True
                self._send(msg)
            self._sent = len(prefix)
            if state.source_ended and not self._ended:
                # the final word is a notification; source_end carries the request
                self._ended = True
                self._send({"type": SOURCE_END, "length": self._sent})
        else:
            self._send({"type": CONTINUE})
        reply = self.transport.recv(self.cfg.timeout_ms / 1000.0)
        if reply["type"] not in (DECISION, FINISH):
            raise ProtocolError("expected a decision", json.dumps(reply, ensure_ascii=False))
        if "index" in reply and reply["index"] != state.read_count:
            raise ProtocolError(f"decision echoes word {reply['index']}, driver is at {state.read_count}",
                                json.dumps(reply, ensure_ascii=False))
        return decision_action(reply)


def drive_session(source: SourceTranscript, transport: Transport,
                  cfg: SessionConfig = SessionConfig(),
                  spy: Optional[Callable[[dict], None]] = None) -> SessionTrace:
    """Run one session against an external agent.

    Errors carry the partial trace; the agent is told why with ``abort``
    (``<VIOLATION>`` for revision attempts).
    """
    if not cfg.session:
        cfg = replace(cfg, session=source.id)
    remote = RemotePolicy(transport, cfg, len(source))
    remote.spy = spy
    try:
        return run_policy(source, remote, step_budget=cfg.step_budget)
    except SimulationError as exc:
        reason = VIOLATION_MARKER if isinstance(exc, MonotonicityViolation) else type(exc).__name__
        if exc.trace is not None and exc.trace.aborted is None:
            exc.trace = replace(exc.trace, aborted=reason)
        try:
            transport.send({"type": ABORT, "reason": reason})
        except ProtocolError:
            pass
        raise
