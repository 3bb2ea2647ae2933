"""Causal target scheduling for latency-aware speech output.

Target tokens are grouped into segments at ``<WAIT>`` boundaries so that no
token is spoken before the source words aligned to it have finished. Each
segment gets an earliest start time; segments that could start before the
previous one finishes are merged into continuous speech.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus_io import SentenceAlignment, SourceTranscript, TokenScheme
from .errors import ParseError, ValidationError
from .latency import TimedEmission

WAIT = "<WAIT>"

DEFAULT_SECONDS_PER_UNIT = {
    TokenScheme.CHARACTER: 0.20,
    TokenScheme.WHITESPACE: 0.30,
    TokenScheme.PUNCT_SPLIT: 0.30,
}


@dataclass(frozen=True)
class CausalTarget:
    tokens: tuple[str, ...]
    required: tuple[int, ...]  # running-max source index per token, 0 if none yet
    boundaries: tuple[int, ...]  # 0-based token positions preceded by <WAIT>

    def segments(self) -> list[tuple[int, int]]:
        """Half-open ``(start, stop)`` token ranges between boundaries."""
        if not self.tokens:
            return []
        cuts = [0, *self.boundaries, len(self.tokens)]
        return [(cuts[k], cuts[k + 1]) for k in range(len(cuts) - 1)]


@dataclass(frozen=True)
class DurationModel:
    seconds_per_unit: float = 0.30
    # measured per-unit durations; overrides the constant rate when given
    measured: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not self.seconds_per_unit > 0:
            raise ValidationError("duration per unit must be > 0")
        if self.measured is not None:
            object.__setattr__(self, "measured", tuple(float(x) for x in self.measured))
            if any(not x > 0 for x in self.measured):
                raise ValidationError("measured durations must be > 0")

    @classmethod
    def for_scheme(cls, scheme: TokenScheme | str) -> "DurationModel":
        return cls(DEFAULT_SECONDS_PER_UNIT[TokenScheme(scheme)])

    @property
    def timing(self) -> str:
        return "measured" if self.measured is not None else "model"

    def duration(self, unit_index: int) -> float:
        if self.measured is not None:
            if unit_index >= len(self.measured):
                raise ValidationError(f"no measured duration for unit {unit_index + 1}")
            return self.measured[unit_index]
        return self.seconds_per_unit


@dataclass(frozen=True)
class Segment:
    tokens: tuple[str, ...]
    earliest_start_s: float
    start_s: float
    projected_end_s: float
    first_unit: int  # 0-based index of the segment's first target unit


def insert_waits(target: Sequence[str], align: SentenceAlignment,
                 source: SourceTranscript) -> CausalTarget:
    """Place a boundary wherever the running aligned-source requirement rises."""
    align.validate(len(source), len(target))
    need = [0] * len(target)
    for s, t in align.links:
        if s > need[t - 1]:
            need[t - 1] = s
    required = []
    boundaries = []
    running = 0
    for j, r in enumerate(need):
        if r > running:
            if j > 0:
                boundaries.append(j)
            running = r
        required.append(running)
    return CausalTarget(tuple(target), tuple(required), tuple(boundaries))


def build_timetable(ct: CausalTarget, source: SourceTranscript,
                    dm: DurationModel = DurationModel()) -> list[Segment]:
    """Schedule segments; a segment whose constraint falls before the previous
    projected end is merged into it."""
    ends = source.ends
    if ct.required and ct.required[-1] > len(ends):
        raise ValidationError("causal target requires more source words than the transcript has")
    segments: list[Segment] = []
    for start, stop in ct.segments():
        req = ct.required[start]
        constraint = ends[req - 1] if req > 0 else 0.0
        if segments and constraint <= segments[-1].projected_end_s:
            prev = segments[-1]
            end = prev.projected_end_s
            for u in range(start, stop):
                end += dm.duration(u)
            segments[-1] = Segment(prev.tokens + ct.tokens[start:stop], prev.earliest_start_s,
                                   prev.start_s, end, prev.first_unit)
            continue
        begin = max(constraint, 0.0)
        end = begin
        for u in range(start, stop):
            end += dm.duration(u)
        segments.append(Segment(ct.tokens[start:stop], constraint, begin, end, start))
    return segments


def emission_times(timetable: Sequence[Segment], dm: DurationModel = DurationModel()) -> TimedEmission:
    """Per-unit onsets: units in a segment are spoken back to back from its start."""
    onsets = []
    for seg in timetable:
        t = seg.start_s
        for k in range(len(seg.tokens)):
            onsets.append(t)
            t += dm.duration(seg.first_unit + k)
    return TimedEmission(tuple(onsets))


def trace_emission_times(delays: Sequence[int], source: SourceTranscript,
                         dm: DurationModel = DurationModel()) -> TimedEmission:
    """Onsets for a simulated session: unit ``t`` starts once source word
    ``g(t)`` has ended and the previous unit has finished."""
    ends = source.ends
    onsets = []
    free_at = 0.0
    for t, g in enumerate(delays):
        ready = ends[g - 1] if g > 0 else 0.0
        start = max(ready, free_at)
        onsets.append(start)
        free_at = start + dm.duration(t)
    return TimedEmission(tuple(onsets))


# ---------------------------------------------------------------- files

def format_causal_target(ct: CausalTarget) -> str:
    out = []
    marks = set(ct.boundaries)
    for j, tok in enumerate(ct.tokens):
        if j in marks:
            out.append(WAIT)
        out.append(tok)
    return " ".join(out)


def parse_causal_target(line: str) -> tuple[list[str], list[int]]:
    """Inverse of :func:`format_causal_target`: tokens and boundary positions."""
    tokens: list[str] = []
    boundaries: list[int] = []
    for tok in line.split():
        if tok == WAIT:
            if not tokens or (boundaries and boundaries[-1] == len(tokens)):
                raise ParseError("misplaced <WAIT> marker")
            boundaries.append(len(tokens))
        else:
            tokens.append(tok)
    return tokens, boundaries


def timetable_records(timetable: Sequence[Segment], dm: DurationModel = DurationModel(),
                      sid: str | None = None) -> list[dict]:
    recs = []
    for k, seg in enumerate(timetable, start=1):
        rec = {"seg": k, "start": seg.start_s, "tokens": list(seg.tokens),
               "end": seg.projected_end_s, "timing": dm.timing}
        if sid is not None:
            rec = {"id": sid, **rec}
        recs.append(rec)
    return recs


def dump_timetable(timetable: Sequence[Segment], dm: DurationModel = DurationModel(),
                   sid: str | None = None) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n"
                   for r in timetable_records(timetable, dm, sid))
