"""Reference-based quality metrics: BLEU, chrF, TER and alignment Spearman."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from . import _kernels
from .corpus_io import SentenceAlignment, TokenScheme
from .errors import MetricError

TER_MAX_SHIFT_SPAN = 10
TER_MAX_SHIFT_DIST = 10
# tied best shifts explored per sentence before falling back to the first one
TER_TIE_BUDGET = 256


class Smoothing(str, enum.Enum):
    NONE = "none"
    FLOOR = "floor"
    EXP = "exp"


@dataclass(frozen=True)
class BleuConfig:
    max_order: int = 4
    smoothing: Smoothing = Smoothing.EXP
    epsilon: float = 0.1
    tokenization: TokenScheme = TokenScheme.PUNCT_SPLIT

    def __post_init__(self):
        object.__setattr__(self, "smoothing", Smoothing(self.smoothing))
        object.__setattr__(self, "tokenization", TokenScheme(self.tokenization))
        if self.max_order < 1:
            raise MetricError("max_order must be >= 1")
        if self.smoothing is Smoothing.FLOOR and not self.epsilon > 0:
            raise MetricError("floor smoothing needs epsilon > 0")

    def fingerprint(self) -> str:
        smooth = self.smoothing.value
        if self.smoothing is Smoothing.FLOOR:
            smooth += f"({self.epsilon!r})"
        return f"bleu|n:{self.max_order}|smooth:{smooth}|tok:{self.tokenization.value}"


@dataclass(frozen=True)
class MetricReport:
    metric: str
    corpus_score: float
    sentence_scores: tuple[float, ...]
    fingerprint: str
    extra: dict = field(default_factory=dict)


def _intern(*seqs: Sequence[str]) -> list[list[int]]:
    vocab: dict[str, int] = {}
    return [[vocab.setdefault(tok, len(vocab)) for tok in seq] for seq in seqs]


def _check_pair_lists(hyps, refs):
    if len(hyps) != len(refs):
        raise MetricError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise MetricError("empty corpus")


# ---------------------------------------------------------------- BLEU

def bleu_statistics(hyp: Sequence[str], ref: Sequence[str], max_order: int = 4):
    """Sufficient statistics ``(matches, totals, hyp_len, ref_len)`` for one pair."""
    h, r = _intern(hyp, ref)
    matches, totals, _ = _kernels.ngram_stats(h, r, max_order)
    return matches, totals, len(h), len(r)


def bleu_from_statistics(matches, totals, hyp_len: int, ref_len: int, cfg: BleuConfig) -> float:
    """BLEU in [0, 100] from pooled n-gram counts.

    Orders with no hypothesis n-grams at all are left out of the geometric
    mean, so short identical segments still score 100.
    """
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    used = 0
    smooth = 1.0
    for n in range(cfg.max_order):
        total = totals[n]
        if total == 0:
            break
        if matches[n] > 0:
            p = matches[n] / total
        elif cfg.smoothing is Smoothing.EXP:
            smooth *= 2.0
            p = 1.0 / (smooth * total)
        elif cfg.smoothing is Smoothing.FLOOR:
            p = cfg.epsilon / total
        else:
            return 0.0
        log_sum += math.log(p)
        used += 1
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_sum / used)


def bleu_report(hyps, refs, cfg: BleuConfig = BleuConfig()) -> MetricReport:
    _check_pair_lists(hyps, refs)
    order = cfg.max_order
    pooled_m = [0] * order
    pooled_t = [0] * order
    hyp_len = ref_len = 0
    sentence = []
    for hyp, ref in zip(hyps, refs):
        m, t, hl, rl = bleu_statistics(hyp, ref, order)
        sentence.append(bleu_from_statistics(m, t, hl, rl, cfg))
        for n in range(order):
            pooled_m[n] += m[n]
            pooled_t[n] += t[n]
        hyp_len += hl
        ref_len += rl
    corpus = bleu_from_statistics(pooled_m, pooled_t, hyp_len, ref_len, cfg)
    return MetricReport("bleu", corpus, tuple(sentence), cfg.fingerprint())


def corpus_bleu(hyps, refs, cfg: BleuConfig = BleuConfig()) -> float:
    """Corpus BLEU over token lists with pooled n-gram counts."""
    return bleu_report(hyps, refs, cfg).corpus_score


def sentence_bleu(hyp, ref, cfg: BleuConfig = BleuConfig()) -> float:
    return corpus_bleu([hyp], [ref], cfg)


# ---------------------------------------------------------------- chrF

def chrf_statistics(hyp: str, ref: str, char_order: int = 6):
    """``(matches, hyp_totals, ref_totals)`` over character n-grams, whitespace removed."""
    h = [ord(c) for c in hyp if not c.isspace()]
    r = [ord(c) for c in ref if not c.isspace()]
    return _kernels.ngram_stats(h, r, char_order)


def chrf_from_statistics(matches, hyp_totals, ref_totals, beta: float = 2.0) -> float:
    prec = rec = 0.0
    used = 0
    for m, ht, rt in zip(matches, hyp_totals, ref_totals):
        if ht > 0 and rt > 0:
            prec += m / ht
            rec += m / rt
            used += 1
    if used == 0:
        return 0.0
    prec /= used
    rec /= used
    if prec + rec == 0:
        return 0.0
    b2 = beta * beta
    return 100.0 * (1 + b2) * prec * rec / (b2 * prec + rec)


def chrf_report(hyps: Sequence[str], refs: Sequence[str], char_order: int = 6,
                beta: float = 2.0) -> MetricReport:
    _check_pair_lists(hyps, refs)
    pm = [0] * char_order
    ph = [0] * char_order
    pr = [0] * char_order
    sentence = []
    for hyp, ref in zip(hyps, refs):
        m, ht, rt = chrf_statistics(hyp, ref, char_order)
        sentence.append(chrf_from_statistics(m, ht, rt, beta))
        for n in range(char_order):
            pm[n] += m[n]
            ph[n] += ht[n]
            pr[n] += rt[n]
    corpus = chrf_from_statistics(pm, ph, pr, beta)
    return MetricReport("chrf", corpus, tuple(sentence), f"chrf|n:{char_order}|beta:{beta!r}")


def chrf(hyps: Sequence[str], refs: Sequence[str], char_order: int = 6, beta: float = 2.0) -> float:
    """Corpus chrF (F-beta of order-averaged character n-gram precision and recall)."""
    return chrf_report(hyps, refs, char_order, beta).corpus_score


# ---------------------------------------------------------------- TER

def ter_edits(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True,
              max_span: int = TER_MAX_SHIFT_SPAN, max_dist: int = TER_MAX_SHIFT_DIST,
              tie_budget: int = TER_TIE_BUDGET) -> int:
    """Number of edits (shifts + insertions + deletions + substitutions).

    Greedy: each round applies a shift with the largest drop in edit
    distance, stopping when no shift lowers it. Ties between equally good
    shifts are all followed (memoized) and the cheapest outcome kept, up to
    ``tie_budget`` expansions; after that only the first tie is followed.
    """
    h, r = _intern(hyp, ref)
    if not shifts:
        return _kernels.edit_distance(h, r)
    memo: dict[tuple, int] = {}
    expansions = 0

    def search(seq: tuple) -> int:
        nonlocal expansions
        if seq in memo:
            return memo[seq]
        cur, gain, cands = _kernels.shift_candidates(list(seq), r, max_span, max_dist)
        if gain <= 0 or not cands:
            memo[seq] = cur
            return cur
        # prefer longer blocks, then earlier starts, then earlier destinations
        cands.sort(key=lambda c: (-c[1], c[0], c[2]))
        best = None
        seen = set()
        for start, length, dest in cands:
            nxt = tuple(_kernels.apply_shift(seq, start, length, dest))
            if nxt in seen:
                continue
            seen.add(nxt)
            if best is not None and expansions >= tie_budget:
                break
            expansions += 1
            total = 1 + search(nxt)
            if best is None or total < best:
                best = total
        memo[seq] = best
        return best

    return search(tuple(h))


def ter(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True) -> float:
    """Sentence TER in percent: edits / |ref| * 100."""
    if len(ref) == 0:
        raise MetricError("TER is undefined for an empty reference")
    return 100.0 * ter_edits(hyp, ref, shifts) / len(ref)


def ter_report(hyps, refs, shifts: bool = True, tokenization: str = "") -> MetricReport:
    _check_pair_lists(hyps, refs)
    edits = ref_len = 0
    sentence = []
    for hyp, ref in zip(hyps, refs):
        if not ref:
            raise MetricError("TER is undefined for an empty reference")
        e = ter_edits(hyp, ref, shifts)
        sentence.append(100.0 * e / len(ref))
        edits += e
        ref_len += len(ref)
    fp = f"ter|shifts:{'yes' if shifts else 'no'}|span:{TER_MAX_SHIFT_SPAN}|dist:{TER_MAX_SHIFT_DIST}"
    if tokenization:
        fp += f"|tok:{tokenization}"
    return MetricReport("ter", 100.0 * edits / ref_len, tuple(sentence), fp)


# ---------------------------------------------------------------- Spearman

def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_alignment(align: SentenceAlignment) -> float:
    """Rank correlation between source and target positions of the links."""
    links = align.sorted_links()
    if len(links) < 2:
        raise MetricError(f"Spearman correlation needs at least 2 links, got {len(links)}")
    rs = average_ranks([s for s, _ in links])
    rt = average_ranks([t for _, t in links])
    ms = sum(rs) / len(rs)
    mt = sum(rt) / len(rt)
    cov = sum((a - ms) * (b - mt) for a, b in zip(rs, rt))
    vs = sum((a - ms) ** 2 for a in rs)
    vt = sum((b - mt) ** 2 for b in rt)
    if vs == 0 or vt == 0:
        raise MetricError("Spearman correlation undefined: all links share a source or target index")
    return cov / math.sqrt(vs * vt)
