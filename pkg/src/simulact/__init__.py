"""Simulation and evaluation harness for simultaneous translation policies
with an extended action space (drop, cut, summarize, pronominalize)."""
from ._kernels import BACKEND
from .corpus_io import (
    ParallelRecord,
    SentenceAlignment,
    SourceTranscript,
    TimedWord,
    TokenScheme,
    parse_alignment,
    parse_transcript,
    tokenize,
)
from .errors import (
    MonotonicityViolation,
    ProtocolError,
    SimulactError,
    SimulationError,
    VIOLATION_MARKER,
)
from .latency import DelaySequence, TimedEmission, al_token, compute_g_from_times, laal_sec, laal_token
from .prompts import ActionStats, PromptSpec, aggregate_stats, rank_systems, render_prompt
from .quality import BleuConfig, chrf, corpus_bleu, spearman_alignment, ter
from .scheduler import DurationModel, build_timetable, emission_times, insert_waits
from .simulation import Action, ActionKind, SessionState, SessionTrace, run_policy, step, wait_k_policy

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Action", "ActionKind", "ActionStats", "BleuConfig", "DelaySequence", "DurationModel",
    "MonotonicityViolation", "ParallelRecord", "PromptSpec", "ProtocolError", "SentenceAlignment",
    "SessionState", "SessionTrace", "SimulactError", "SimulationError", "SourceTranscript",
    "TimedEmission", "TimedWord", "TokenScheme", "VIOLATION_MARKER", "aggregate_stats", "al_token",
    "build_timetable", "chrf", "compute_g_from_times", "corpus_bleu", "emission_times",
    "insert_waits", "laal_sec", "laal_token", "parse_alignment", "parse_transcript", "rank_systems",
    "render_prompt", "run_policy", "spearman_alignment", "step", "ter", "tokenize", "wait_k_policy",
]
