"""Pure-Python kernels. Same signatures and results as ``_ckernels``.

All sequences are lists of small ints (tokens already interned).
"""
from __future__ import annotations


def _match_vectors(pattern: list[int]) -> dict[int, int]:
    peq: dict[int, int] = {}
    for i, c in enumerate(pattern):
        peq[c] = peq.get(c, 0) | (1 << i)
    return peq


def _bit_lev(peq: dict[int, int], m: int, text: list[int]) -> int:
    """Levenshtein distance of a length-``m`` pattern to ``text``.

    Bit-parallel column update (Myers 1999, Hyyro 2001) with Python ints as
    bit vectors, so one pass over ``text`` replaces the O(m*n) table.
    """
    if m == 0:
        return len(text)
    mask = (1 << m) - 1
    top = 1 << (m - 1)
    pv, mv, score = mask, 0, m
    for c in text:
        eq = peq.get(c, 0)
        xv = eq | mv
        xh = ((((eq & pv) + pv) & mask) ^ pv) | eq
        ph = (mv | ~(xh | pv)) & mask
        mh = pv & xh
        if ph & top:
            score += 1
        elif mh & top:
            score -= 1
        ph = ((ph << 1) | 1) & mask
        mh = (mh << 1) & mask
        pv = (mh | ~(xv | ph)) & mask
        mv = ph & xv
    return score


def edit_distance(a: list[int], b: list[int]) -> int:
    """Unit-cost Levenshtein distance between two int sequences."""
    return _bit_lev(_match_vectors(a), len(a), b)


def ngram_stats(hyp: list[int], ref: list[int], max_order: int):
    """Clipped n-gram matches plus hypothesis/reference n-gram totals per order."""
    matches = [0] * max_order
    hyp_totals = [0] * max_order
    ref_totals = [0] * max_order
    nh, nr = len(hyp), len(ref)
    for n in range(1, max_order + 1):
        hyp_totals[n - 1] = max(0, nh - n + 1)
        ref_totals[n - 1] = max(0, nr - n + 1)
        if nh < n or nr < n:
            continue
        hyp_counts: dict[tuple, int] = {}
        for i in range(nh - n + 1):
            g = tuple(hyp[i:i + n])
            hyp_counts[g] = hyp_counts.get(g, 0) + 1
        ref_counts: dict[tuple, int] = {}
        for i in range(nr - n + 1):
            g = tuple(ref[i:i + n])
            ref_counts[g] = ref_counts.get(g, 0) + 1
        total = 0
        for g, c in hyp_counts.items():
            rc = ref_counts.get(g, 0)
            total += c if c < rc else rc
        matches[n - 1] = total
    return matches, hyp_totals, ref_totals


def apply_shift(seq, start: int, length: int, dest: int):
    """Move ``seq[start:start+length]`` so that it begins at ``dest`` in the result."""
    block = seq[start:start + length]
    rest = seq[:start] + seq[start + length:]
    return rest[:dest] + block + rest[dest:]


def shift_candidates(hyp: list[int], ref: list[int], max_span: int, max_dist: int):
    """Evaluate every block shift of ``hyp`` within the span/distance caps.

    Returns ``(current_distance, best_gain, shifts)`` where ``shifts`` lists
    every ``(start, length, dest)`` reaching ``best_gain``. ``best_gain`` is 0
    with an empty list when no shift is possible.
    """
    # distance is symmetric, so the reference is the fixed bit-vector pattern
    peq, m = _match_vectors(ref), len(ref)
    cur = _bit_lev(peq, m, hyp)
    n = len(hyp)
    best = None
    found: list[tuple[int, int, int]] = []
    for i in range(n):
        for length in range(1, min(max_span, n - i) + 1):
            lo = max(0, i - max_dist)
            hi = min(n - length, i + max_dist)
            for p in range(lo, hi + 1):
                if p == i:
                    continue
                gain = cur - _bit_lev(peq, m, apply_shift(hyp, i, length, p))
                if best is None or gain > best:
                    best = gain
                    found = [(i, length, p)]
                elif gain == best:
                    found.append((i, length, p))
    if best is None:
        return cur, 0, []
    return cur, best, found
