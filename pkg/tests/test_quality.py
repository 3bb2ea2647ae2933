import itertools
import math

import pytest
from hypothesis import given, strategies as st

import oracles
from simulact.corpus_io import SentenceAlignment
from simulact.errors import MetricError
from simulact.quality import (
    BleuConfig,
    average_ranks,
    bleu_report,
    chrf,
    chrf_report,
    corpus_bleu,
    sentence_bleu,
    spearman_alignment,
    ter,
    ter_report,
)


def test_bleu_hand_example():
    hyp, ref = "the cat sat down".split(), "the cat sat on the mat".split()
    expected = 100 * math.exp(1 - 6 / 4) * (0.75 * (2 / 3) * 0.5 * (1 / 2)) ** 0.25
    assert sentence_bleu(hyp, ref) == pytest.approx(expected, abs=1e-9)
    assert sentence_bleu(hyp, ref, BleuConfig(smoothing="none")) == 0.0
    floor = 100 * math.exp(-0.5) * (0.75 * (2 / 3) * 0.5 * 0.1) ** 0.25
    assert sentence_bleu(hyp, ref, BleuConfig(smoothing="floor", epsilon=0.1)) == pytest.approx(floor)


def test_bleu_degenerate():
    assert corpus_bleu([[]], [["a"]]) == 0.0
    assert corpus_bleu([["a", "b"]], [["a", "b"]]) == 100.0
    with pytest.raises(MetricError):
        corpus_bleu([["a"]], [["a"], ["b"]])
    with pytest.raises(MetricError):
        corpus_bleu([], [])
    with pytest.raises(MetricError):
        BleuConfig(max_order=0)
    with pytest.raises(MetricError):
        BleuConfig(smoothing="floor", epsilon=0)


def test_bleu_fingerprint_in_report():
    rep = bleu_report([["a"]], [["a"]], BleuConfig(tokenization="character"))
    assert rep.fingerprint == "bleu|n:4|smooth:exp|tok:character"
    assert rep.sentence_scores == (100.0,)


def test_chrf_examples():
    # precision = recall per order: 3/4, 2/3, 1/2, 0/1
    expected = 100 * (3 / 4 + 2 / 3 + 1 / 2 + 0) / 4
    assert chrf(["abcd"], ["abce"]) == pytest.approx(expected, abs=1e-9)
    assert chrf(["a b c d"], ["abce"]) == pytest.approx(expected, abs=1e-9)
    assert chrf(["hello"], ["hello"]) == 100.0
    assert chrf(["abc"], ["xyz"]) == 0.0
    assert chrf_report(["ab", "cd"], ["ab", "cx"]).sentence_scores[0] == 100.0


def test_ter_examples():
    assert ter("a x c d".split(), "a b c d".split()) == 25.0
    assert ter("b a c d".split(), "a b c d".split()) == 25.0
    assert ter("b a c d".split(), "a b c d".split(), shifts=False) == 50.0
    assert ter([], ["a", "b"]) == 100.0
    with pytest.raises(MetricError):
        ter(["a"], [])
    rep = ter_report([["a"], ["b", "c"]], [["a"], ["c", "b"]])
    assert rep.corpus_score == pytest.approx(100 / 3)
    assert rep.fingerprint.startswith("ter|shifts:yes|span:10|dist:10")


def test_ter_without_shifts_is_edit_distance():
    strings = [tuple(s) for s in oracles.all_strings("abc", 4)]
    for h, r in itertools.product(strings, strings):
        assert ter(h, r, shifts=False) == pytest.approx(100 * oracles.levenshtein(h, r) / len(r))


def test_spearman_examples():
    assert spearman_alignment(SentenceAlignment({(1, 1), (2, 2), (3, 3)})) == 1.0
    assert spearman_alignment(SentenceAlignment({(1, 3), (2, 2), (3, 1)})) == -1.0
    assert spearman_alignment(SentenceAlignment({(1, 1), (2, 3), (3, 2), (4, 4)})) == pytest.approx(0.8)
    with pytest.raises(MetricError):
        spearman_alignment(SentenceAlignment({(1, 1)}))
    with pytest.raises(MetricError):
        spearman_alignment(SentenceAlignment({(1, 1), (1, 2)}))


def test_average_ranks():
    assert average_ranks([10, 20, 20, 5]) == [2.0, 3.5, 3.5, 1.0]


# ---------------------------------------------------------------- properties

tokens = st.lists(st.sampled_from("abcd"), max_size=8)
corpora = st.lists(st.tuples(tokens, st.lists(st.sampled_from("abcd"), min_size=1, max_size=8)),
                   min_size=1, max_size=6)


@given(corpora, st.randoms())
def test_bleu_permutation_invariant(pairs, rnd):
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    a = corpus_bleu([h for h, _ in pairs], [r for _, r in pairs])
    b = corpus_bleu([h for h, _ in shuffled], [r for _, r in shuffled])
    assert a == pytest.approx(b, abs=1e-9)


@given(corpora)
def test_ranges(pairs):
    hyps, refs = [h for h, _ in pairs], [r for _, r in pairs]
    assert 0.0 <= corpus_bleu(hyps, refs) <= 100.0
    assert 0.0 <= chrf(["".join(h) for h in hyps], ["".join(r) for r in refs]) <= 100.0
    assert ter_report(hyps, refs).corpus_score >= 0.0
    assert corpus_bleu(refs, refs) == 100.0


@given(tokens.filter(bool), st.lists(st.sampled_from("abcd"), min_size=1, max_size=8))
def test_sentence_bleu_matches_counter_oracle(hyp, ref):
    assert sentence_bleu(hyp, ref) == pytest.approx(oracles.bleu_single(hyp, ref), abs=1e-9)


@given(st.sets(st.tuples(st.integers(1, 9), st.integers(1, 9)), min_size=2, max_size=12))
def test_spearman_symmetry(links):
    fwd = SentenceAlignment(links)
    rev = SentenceAlignment({(t, s) for s, t in links})
    try:
        a = spearman_alignment(fwd)
    except MetricError:
        with pytest.raises(MetricError):
            spearman_alignment(rev)
        return
    assert a == pytest.approx(spearman_alignment(rev), abs=1e-12)
    assert a == pytest.approx(oracles.spearman_textbook(*zip(*sorted(links))), abs=1e-12)
    assert -1.0 - 1e-12 <= a <= 1.0 + 1e-12


@given(st.lists(st.sampled_from("abc"), max_size=6), st.lists(st.sampled_from("abc"), min_size=1, max_size=6))
def test_ter_shifts_never_worse(hyp, ref):
    assert ter(hyp, ref) <= ter(hyp, ref, shifts=False)
