"""Token-level AL/LAAL and time-based LAAL over source word end times."""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus_io import SourceTranscript
from .errors import MetricError, ValidationError


@dataclass(frozen=True)
class DelaySequence:
    """``g[t]`` = source words read when target unit ``t + 1`` was emitted.

    ``g`` may contain 0 for units emitted before any source word finished.
    """

    g: tuple[int, ...]
    src_len: int
    ref_len: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(int(x) for x in self.g))
        if self.src_len < 1:
            raise ValidationError("src_len must be >= 1")
        prev = 0
        for t, x in enumerate(self.g, start=1):
            if x < 0 or x > self.src_len:
                raise ValidationError(f"g({t}) = {x} outside [0, {self.src_len}]", index=t)
            if x < prev:
                raise ValidationError(f"g({t}) = {x} decreases from {prev}", index=t)
            prev = x
        if self.ref_len is not None and self.ref_len < 0:
            raise ValidationError("ref_len must be >= 0")


@dataclass(frozen=True)
class TimedEmission:
    onsets: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "onsets", tuple(float(x) for x in self.onsets))
        for t in range(1, len(self.onsets)):
            if self.onsets[t] < self.onsets[t - 1]:
                raise ValidationError(f"onset {t + 1} precedes onset {t}", index=t + 1)


def compute_g_from_times(source: SourceTranscript, emission: TimedEmission) -> DelaySequence:
    """Count, for every onset, the source words whose end time is <= the onset."""
    ends = source.ends
    g = [bisect.bisect_right(ends, tau) for tau in emission.onsets]
    return DelaySequence(tuple(g), len(ends))


def _cutoff(g: Sequence[int], src_len: int) -> int:
    for t, x in enumerate(g, start=1):
        if x >= src_len:
            return t
    return len(g)


def _lagging(d: DelaySequence, gamma: float) -> float:
    if not d.g:
        raise MetricError("empty delay sequence")
    tau = _cutoff(d.g, d.src_len)
    total = 0.0
    for t in range(1, tau + 1):
        total += d.g[t - 1] - (t - 1) / gamma
    return total / tau


def al_token(d: DelaySequence) -> float:
    """Average Lagging in source tokens, with rate |Y| / |X|."""
    return _lagging(d, len(d.g) / d.src_len)


def laal_token(d: DelaySequence) -> float:
    """Length-adaptive AL: rate max(|Y|, |Y_ref|) / |X|."""
    if d.ref_len is None:
        raise MetricError("LAAL needs the reference length")
    return _lagging(d, max(len(d.g), d.ref_len) / d.src_len)


def time_at_index(x: float, ends: Sequence[float]) -> float:
    """Map a fractional 1-based source index to seconds by linear interpolation."""
    n = len(ends)
    if x <= 1:
        return ends[0]
    if x >= n:
        return ends[n - 1]
    i = int(x)
    w = x - i
    return (1 - w) * ends[i - 1] + w * ends[i]


def laal_sec(source: SourceTranscript, emission: TimedEmission) -> float:
    """Time-based LAAL in seconds."""
    if not emission.onsets:
        raise MetricError("empty emission")
    ends = source.ends
    n = len(ends)
    g = compute_g_from_times(source, emission).g
    tau = len(g)
    for t, x in enumerate(g, start=1):
        if x == n:
            tau = t
            break
    s = 0.0
    for t in range(1, tau + 1):
        gt = g[t - 1]
        x_pol = max(1, min(n, gt))
        x_diag = max(1, min(n, gt / t * (t - 1)))
        s += time_at_index(x_pol, ends) - time_at_index(x_diag, ends)
    return s / tau
