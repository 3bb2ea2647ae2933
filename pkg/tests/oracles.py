"""Reference implementations written independently of the library.

They favour obviousness over speed: direct loops, brute-force enumeration,
or vectorised counting with numpy.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, deque

import numpy as np


# ---------------------------------------------------------------- latency

def laal_sec_bruteforce(ends, onsets):
    """Time-based LAAL, transcribed step by step from its definition."""
    n = len(ends)
    m = len(onsets)

    def count_finished(tau):
        c = 0
        for e in ends:
            if e <= tau:
                c += 1
        return c

    def time_at(x):
        if x <= 1:
            return ends[0]
        if x >= n:
            return ends[-1]
        lo = math.floor(x)
        frac = x - lo
        return ends[lo - 1] + frac * (ends[lo] - ends[lo - 1])

    g = [count_finished(tau) for tau in onsets]
    cutoff = m
    for t in range(m):
        if g[t] == n:
            cutoff = t + 1
            break
    acc = []
    for t in range(1, cutoff + 1):
        policy_x = min(max(g[t - 1], 1), n)
        diag_x = min(max(g[t - 1] * (t - 1) / t, 1), n)
        acc.append(time_at(policy_x) - time_at(diag_x))
    return sum(acc) / cutoff


def lagging_bruteforce(g, src_len, rate):
    cutoff = next((t for t, x in enumerate(g, 1) if x >= src_len), len(g))
    return sum(g[t - 1] - (t - 1) / rate for t in range(1, cutoff + 1)) / cutoff


def wait_k_delays(k, n_src, n_tgt):
    """Hand simulation: unit t is written after min(k + t - 1, |X|) words."""
    return tuple(min(k + t - 1, n_src) for t in range(1, n_tgt + 1))


# ---------------------------------------------------------------- n-gram metrics

def all_strings(alphabet, max_len, min_len=1):
    return ["".join(p) for n in range(min_len, max_len + 1) for p in itertools.product(alphabet, repeat=n)]


def ngram_count_matrix(strings, alphabet, order):
    """Rows: strings; columns: every possible n-gram of ``order``, as counts."""
    index = {"".join(p): k for k, p in enumerate(itertools.product(alphabet, repeat=order))}
    mat = np.zeros((len(strings), len(index)), dtype=np.int16)
    for row, s in enumerate(strings):
        for i in range(len(s) - order + 1):
            mat[row, index[s[i:i + order]]] += 1
    return mat


def clipped_matches(counts, rows=None):
    """``M[h, r] = sum_g min(count_h(g), count_r(g))`` for every pair."""
    rows = range(counts.shape[0]) if rows is None else rows
    out = np.empty((len(rows), counts.shape[0]), dtype=np.int32)
    for k, h in enumerate(rows):
        out[k] = np.minimum(counts[h][None, :], counts).sum(axis=1)
    return out


def bleu_matrix(strings, alphabet, max_order=4):
    """Sentence BLEU (exp smoothing, effective order) for all ordered pairs."""
    lens = np.array([len(s) for s in strings], dtype=float)
    hl = lens[:, None] * np.ones((1, len(strings)))
    rl = np.ones((len(strings), 1)) * lens[None, :]
    log_sum = np.zeros_like(hl)
    used = np.zeros_like(hl)
    smooth = np.ones_like(hl)
    active = np.ones_like(hl, dtype=bool)
    for n in range(1, max_order + 1):
        counts = ngram_count_matrix(strings, alphabet, n)
        m = clipped_matches(counts).astype(float)
        total = np.maximum(hl - n + 1, 0)
        active &= total > 0
        zero = active & (m == 0)
        smooth = np.where(zero, smooth * 2, smooth)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(m > 0, m / total, 1.0 / (smooth * total))
            log_sum = np.where(active, log_sum + np.log(p), log_sum)
        used += active
    bp = np.where(hl >= rl, 1.0, np.exp(1 - rl / np.maximum(hl, 1)))
    return 100.0 * bp * np.exp(log_sum / np.maximum(used, 1))


def chrf_matrix(strings, alphabet, char_order=6, beta=2.0):
    lens = np.array([len(s) for s in strings], dtype=float)
    prec = np.zeros((len(strings), len(strings)))
    rec = np.zeros_like(prec)
    used = np.zeros_like(prec)
    for n in range(1, char_order + 1):
        ht = np.maximum(lens - n + 1, 0)[:, None] * np.ones((1, len(strings)))
        rt = np.ones((len(strings), 1)) * np.maximum(lens - n + 1, 0)[None, :]
        ok = (ht > 0) & (rt > 0)
        if not ok.any():
            continue
        m = clipped_matches(ngram_count_matrix(strings, alphabet, n)).astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            prec += np.where(ok, m / ht, 0)
            rec += np.where(ok, m / rt, 0)
        used += ok
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(used > 0, prec / used, 0)
        r = np.where(used > 0, rec / used, 0)
        b2 = beta * beta
        f = np.where(p + r > 0, (1 + b2) * p * r / (b2 * p + r), 0)
    return 100.0 * f


def bleu_single(hyp, ref, max_order=4):
    """Counter-based BLEU for one pair (same conventions as ``bleu_matrix``)."""
    if not hyp:
        return 0.0
    logs = []
    smooth = 1
    for n in range(1, max_order + 1):
        hc = Counter(tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1))
        rc = Counter(tuple(ref[i:i + n]) for i in range(len(ref) - n + 1))
        total = sum(hc.values())
        if total == 0:
            break
        m = sum(min(c, rc[g]) for g, c in hc.items())
        if m == 0:
            smooth *= 2
            logs.append(math.log(1 / (smooth * total)))
        else:
            logs.append(math.log(m / total))
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1 - len(ref) / len(hyp))
    return 100 * bp * math.exp(sum(logs) / len(logs))


# ---------------------------------------------------------------- TER

def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def block_moves(seq):
    n = len(seq)
    for i in range(n):
        for length in range(1, n - i + 1):
            block = seq[i:i + length]
            rest = seq[:i] + seq[i + length:]
            for p in range(len(rest) + 1):
                moved = rest[:p] + block + rest[p:]
                if moved != seq:
                    yield moved


def shift_distances(seq):
    """Fewest block moves from ``seq`` to every reachable rearrangement (BFS)."""
    dist = {seq: 0}
    todo = deque([seq])
    while todo:
        cur = todo.popleft()
        for nxt in block_moves(cur):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                todo.append(nxt)
    return dist


def ter_exhaustive(hyp, ref, lev=None):
    """min over every sequence of block moves of (#moves + edit distance)."""
    lev = lev or levenshtein
    return min(d + lev(s, ref) for s, d in shift_distances(hyp).items())


# ---------------------------------------------------------------- Spearman

def spearman_textbook(xs, ys):
    """Pearson correlation of mid-ranks (ties share the average rank)."""

    def ranks(v):
        srt = sorted(v)
        first = {}
        last = {}
        for pos, x in enumerate(srt, 1):
            first.setdefault(x, pos)
            last[x] = pos
        return [(first[x] + last[x]) / 2 for x in v]

    rx, ry = ranks(xs), ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den
