"""Incremental decision state machine and policy driver.

A session consumes source words one at a time. Every emitted target token
records ``g(t)``, the number of source words read when it was written.
Emitted tokens are append-only; any revision is rejected with ``<VIOLATION>``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

from .corpus_io import SourceTranscript
from .errors import (
    ExhaustedSourceError,
    IllegalActionError,
    MonotonicityViolation,
    NonProgressError,
    ParseError,
    SimulationError,
    VIOLATION_MARKER,
)


class ActionKind(str, enum.Enum):
    READ = "READ"
    WRITE = "WRITE"
    DROP = "DROP"
    CUT = "CUT"
    PARTIAL_SUMMARIZATION = "PARTIAL_SUMMARIZATION"
    PRONOMINALIZATION = "PRONOMINALIZATION"
    # never legal; lets policies and agents express an attempted rewrite
    REVISE = "REVISE"

    @property
    def emits(self) -> bool:
        return self in _EMITTING

    @classmethod
    def parse(cls, name: str) -> "ActionKind":
        key = name.strip().upper().replace("-", "_").replace(" ", "_")
        try:
            return _ALIASES.get(key) or cls(key)
        except ValueError:
            raise ParseError(f"unknown action name {name!r}") from None


_EMITTING = {ActionKind.WRITE, ActionKind.PARTIAL_SUMMARIZATION, ActionKind.PRONOMINALIZATION}
_ALIASES = {
    "SENTENCE_CUT": ActionKind.CUT,
    "PRONOUN": ActionKind.PRONOMINALIZATION,
    "PARTIAL_SUM": ActionKind.PARTIAL_SUMMARIZATION,
    "PARTIAL_SUMMARY": ActionKind.PARTIAL_SUMMARIZATION,
}

# display names of the extended actions, in canonical order
EXTENDED_LABELS = {
    ActionKind.CUT: "Sentence_Cut",
    ActionKind.DROP: "Drop",
    ActionKind.PARTIAL_SUMMARIZATION: "Partial_Summarization",
    ActionKind.PRONOMINALIZATION: "Pronominalization",
}
BASE_LABEL = "READ/WRITE"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    emission: tuple[str, ...] = ()
    span: Optional[tuple[int, int]] = None
    position: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ActionKind(self.kind))
        object.__setattr__(self, "emission", tuple(self.emission))
        if self.span is not None:
            object.__setattr__(self, "span", (int(self.span[0]), int(self.span[1])))

    # constructors ---------------------------------------------------------
    @classmethod
    def read(cls):
        return cls(ActionKind.READ)

    @classmethod
    def write(cls, tokens: Iterable[str]):
        return cls(ActionKind.WRITE, tuple(tokens))

    @classmethod
    def drop(cls, first: int, last: int | None = None):
        return cls(ActionKind.DROP, span=(first, first if last is None else last))

    @classmethod
    def cut(cls):
        return cls(ActionKind.CUT)

    @classmethod
    def summarize(cls, tokens: Iterable[str]):
        return cls(ActionKind.PARTIAL_SUMMARIZATION, tuple(tokens))

    @classmethod
    def pronoun(cls, tokens: Iterable[str]):
        return cls(ActionKind.PRONOMINALIZATION, tuple(tokens))

    @classmethod
    def revise(cls, position: int, tokens: Iterable[str]):
        return cls(ActionKind.REVISE, tuple(tokens), position=position)

    def check_payload(self) -> None:
        """Raise IllegalActionError when the payload does not fit the kind."""
        k = self.kind
        if k.emits and not self.emission:
            raise IllegalActionError(f"{k.value} needs a non-empty emission")
        if not k.emits and k is not ActionKind.REVISE and self.emission:
            raise IllegalActionError(f"{k.value} carries no emission")
        if (k is ActionKind.DROP) != (self.span is not None):
            raise IllegalActionError(f"{k.value}: span is required for DROP and only for DROP")
        if self.span is not None and self.span[0] > self.span[1]:
            raise IllegalActionError(f"DROP span {self.span} is reversed")

    # trace records --------------------------------------------------------
    def to_record(self, step: int) -> dict:
        rec: dict = {"step": step, "action": self.kind.value}
        if self.emission:
            rec["emission"] = list(self.emission)
        if self.span is not None:
            rec["span"] = list(self.span)
        if self.position is not None:
            rec["position"] = self.position
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Action":
        if not isinstance(rec, dict) or "action" not in rec:
            raise ParseError(f"trace record needs an 'action' field: {rec!r}")
        emission = rec.get("emission", [])
        if not isinstance(emission, list) or not all(isinstance(t, str) for t in emission):
            raise ParseError(f"emission must be a list of strings: {rec!r}")
        span = rec.get("span")
        if span is not None and (not isinstance(span, list) or len(span) != 2
                                 or not all(isinstance(x, int) for x in span)):
            raise ParseError(f"span must be [first, last]: {rec!r}")
        position = rec.get("position")
        if position is not None and not isinstance(position, int):
            raise ParseError(f"position must be an integer: {rec!r}")
        return cls(ActionKind.parse(rec["action"]), tuple(emission),
                   tuple(span) if span is not None else None, position)


@dataclass(frozen=True)
class SessionState:
    read_count: int = 0
    emitted: tuple[str, ...] = ()
    delays: tuple[int, ...] = ()
    dropped_spans: tuple[tuple[int, int], ...] = ()
    cut_points: tuple[int, ...] = ()
    source_ended: bool = False
    finished: bool = False


@dataclass(frozen=True)
class SessionTrace:
    steps: tuple[tuple[Action, int], ...]
    delays: tuple[int, ...]
    final_target: tuple[str, ...]
    src_len: int
    dropped_spans: tuple[tuple[int, int], ...] = ()
    cut_points: tuple[int, ...] = ()
    aborted: Optional[str] = None

    @property
    def actions(self) -> list[Action]:
        return [a for a, _ in self.steps]

    def action_set(self) -> str:
        """Label naming the extended actions used, e.g. ``"Sentence_Cut + Drop"``."""
        used = {a.kind for a in self.actions}
        names = [label for kind, label in EXTENDED_LABELS.items() if kind in used]
        return " + ".join(names) if names else BASE_LABEL


def step(state: SessionState, action: Action, source: SourceTranscript | int) -> SessionState:
    """Apply one action; returns a new state and never mutates ``state``."""
    n_src = source if isinstance(source, int) else len(source)
    if state.finished:
        raise IllegalActionError("session already finished")
    if action.kind is ActionKind.REVISE:
        raise MonotonicityViolation(
            f"attempt to rewrite emitted target from position {action.position}"
        )
    action.check_payload()
    if action.kind is ActionKind.READ:
        if state.read_count >= n_src:
            raise ExhaustedSourceError(f"READ past end of source ({n_src} words)")
        rc = state.read_count + 1
        return replace(state, read_count=rc, source_ended=rc == n_src)
    if state.read_count == 0:
        raise IllegalActionError(f"{action.kind.value} before any source word was read")
    if action.kind.emits:
        g = state.read_count
        return replace(
            state,
            emitted=state.emitted + action.emission,
            delays=state.delays + (g,) * len(action.emission),
        )
    if action.kind is ActionKind.DROP:
        a, b = action.span
        if a < 1 or b > state.read_count:
            raise IllegalActionError(
                f"DROP span [{a},{b}] outside the read prefix [1,{state.read_count}]"
            )
        return replace(state, dropped_spans=state.dropped_spans + ((a, b),))
    # CUT
    return replace(state, cut_points=state.cut_points + (len(state.emitted),))


class Policy:
    """Decision function over the visible source prefix.

    ``decide`` returns the next Action, or ``None`` to finish the session.
    """

    def reset(self) -> None:
        pass

    def decide(self, prefix: Sequence[str], state: SessionState) -> Optional[Action]:
        raise NotImplementedError

    def __call__(self, prefix, state):
        return self.decide(prefix, state)


Emitter = Callable[[Sequence[str], int], Optional[str]]


def echo_emitter(prefix: Sequence[str], n_emitted: int) -> Optional[str]:
    """Copy source word ``n_emitted + 1`` when it has been read."""
    return prefix[n_emitted] if n_emitted < len(prefix) else None


def sequence_emitter(tokens: Sequence[str]) -> Emitter:
    """Emit a fixed target sequence in order, ignoring the source."""
    tokens = list(tokens)

    def emit(prefix: Sequence[str], n_emitted: int) -> Optional[str]:
        return tokens[n_emitted] if n_emitted < len(tokens) else None

    return emit


class WaitKPolicy(Policy):
    """Read ``k`` words, then alternate one WRITE and one READ; flush at source end."""

    def __init__(self, k: int, emitter: Emitter = echo_emitter):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.emitter = emitter

    def decide(self, prefix, state):
        lag = state.read_count - len(state.emitted)
        if lag < self.k and not state.source_ended:
            return Action.read()
        token = self.emitter(prefix, len(state.emitted))
        if token is None:
            return None if state.source_ended else Action.read()
        return Action.write([token])


def wait_k_policy(k: int, emitter: Emitter = echo_emitter) -> WaitKPolicy:
    return WaitKPolicy(k, emitter)


class ScriptedPolicy(Policy):
    """Replay a fixed action list verbatim; finishes when the list runs out."""

    def __init__(self, actions: Iterable[Action]):
        self.actions = list(actions)
        self._cursor = 0

    def reset(self):
        self._cursor = 0

    def decide(self, prefix, state):
        if self._cursor >= len(self.actions):
            return None
        action = self.actions[self._cursor]
        self._cursor += 1
        return action


def scripted_policy(actions: Iterable[Action]) -> ScriptedPolicy:
    return ScriptedPolicy(actions)


def default_step_budget(src_len: int, expected_target_len: int | None = None) -> int:
    return 8 * (src_len + (src_len if expected_target_len is None else expected_target_len))


def _trace_of(steps, state: SessionState, src_len: int, aborted=None) -> SessionTrace:
    return SessionTrace(
        steps=tuple(steps),
        delays=state.delays,
        final_target=state.emitted,
        src_len=src_len,
        dropped_spans=state.dropped_spans,
        cut_points=state.cut_points,
        aborted=aborted,
    )


def _annotate(exc: SimulationError, n: int, trace: SessionTrace) -> None:
    if exc.step is None:
        exc.step = n
        exc.args = (f"step {n}: {exc.args[0]}",) + exc.args[1:]
    exc.trace = trace


def run_policy(
    source: SourceTranscript,
    policy: Policy,
    step_budget: int | None = None,
    expected_target_len: int | None = None,
) -> SessionTrace:
    """Drive ``policy`` over ``source``; the policy only ever sees the read prefix.

    Errors carry the 1-based step index and the partial trace up to the last
    legal step.
    """
    words = source.texts
    budget = step_budget or default_step_budget(len(words), expected_target_len)
    policy.reset()
    state = SessionState()
    steps: list[tuple[Action, int]] = []
    while True:
        n = len(steps) + 1
        if len(steps) >= budget:
            raise NonProgressError(
                f"step budget of {budget} exhausted", step=n, trace=_trace_of(steps, state, len(words))
            )
        try:
            action = policy(tuple(words[: state.read_count]), state)
        except SimulationError as exc:
            if exc.trace is None:
                _annotate(exc, n, _trace_of(steps, state, len(words), aborted=type(exc).__name__))
            raise
        if action is None:
            if state.read_count < len(words):
                raise NonProgressError(
                    f"policy finished after reading {state.read_count} of {len(words)} words",
                    step=n,
                    trace=_trace_of(steps, state, len(words)),
                )
            break
        try:
            state = step(state, action, len(words))
        except SimulationError as exc:
            aborted = VIOLATION_MARKER if isinstance(exc, MonotonicityViolation) else type(exc).__name__
            _annotate(exc, n, _trace_of(steps, state, len(words), aborted=aborted))
            raise
        steps.append((action, state.read_count))
    state = replace(state, finished=True)
    return _trace_of(steps, state, len(words))


# ---------------------------------------------------------------- per-word decisions

@dataclass(frozen=True)
class Decision:
    """One row of a word-by-word decision table: the action taken after a word arrives."""

    action: str
    output: Sequence[str] = ()
    span: Optional[tuple[int, int]] = None


def actions_from_decisions(decisions: Sequence[Decision]) -> list[Action]:
    """Expand per-word decisions into READ-prefixed low-level actions.

    Row ``i`` reads word ``i`` and then applies its action. DROP defaults to
    dropping the word just read; CUT rows with output append a WRITE.
    """
    out: list[Action] = []
    for i, d in enumerate(decisions, start=1):
        out.append(Action.read())
        kind = ActionKind.parse(d.action)
        if kind is ActionKind.READ:
            continue
        if kind is ActionKind.DROP:
            out.append(Action(kind, span=d.span or (i, i)))
        elif kind is ActionKind.CUT:
            out.append(Action.cut())
            if d.output:
                out.append(Action.write(d.output))
        else:
            out.append(Action(kind, tuple(d.output)))
    return out


# ---------------------------------------------------------------- trace files

def dump_trace(trace: SessionTrace | Sequence[Action], sid: str | None = None) -> str:
    """Serialize the steps of one session, one JSON record per line."""
    actions = trace.actions if isinstance(trace, SessionTrace) else list(trace)
    lines = []
    for n, action in enumerate(actions, start=1):
        rec = action.to_record(n)
        if sid is not None:
            rec = {"id": sid, **rec}
        lines.append(json.dumps(rec, ensure_ascii=False) + "\n")
    if isinstance(trace, SessionTrace) and trace.aborted:
        rec = {"step": len(actions) + 1, "action": trace.aborted}
        if sid is not None:
            rec = {"id": sid, **rec}
        lines.append(json.dumps(rec, ensure_ascii=False) + "\n")
    return "".join(lines)


def load_traces(content: str) -> dict[str, list[Action]]:
    """Parse trace records grouped by session id (``"1"`` when absent).

    Abort marker records are skipped; step numbers must run 1, 2, ... per id.
    """
    sessions: dict[str, list[Action]] = {}
    for n, raw in enumerate(content.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", n) from None
        sid = str(rec.get("id", "1")) if isinstance(rec, dict) else "1"
        if isinstance(rec, dict) and str(rec.get("action", "")).startswith("<"):
            continue
        try:
            action = Action.from_record(rec)
        except ParseError as exc:
            raise ParseError(str(exc), n) from None
        actions = sessions.setdefault(sid, [])
        if rec.get("step") != len(actions) + 1:
            raise ParseError(f"expected step {len(actions) + 1} for session {sid}", n)
        actions.append(action)
    return sessions


def load_trace(content: str) -> list[Action]:
    sessions = load_traces(content)
    if len(sessions) > 1:
        raise ParseError(f"expected one session, found {len(sessions)}")
    return next(iter(sessions.values()), [])
