"""Exit criteria. Each test carries ``@criterion(n, title)``; the terminal
summary prints one PASS/FAIL line per criterion."""
import filecmp
import random
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

import oracles
from conftest import load_decisions, synthetic_transcript
from simulact import quality as q
from simulact.corpus_io import SentenceAlignment, SourceTranscript, parse_transcripts
from simulact.errors import MonotonicityViolation, VIOLATION_MARKER
from simulact.latency import DelaySequence, TimedEmission, al_token, laal_sec, laal_token
from simulact.prompts import PromptSpec, rank_systems, render_prompt
from simulact.protocol import SessionConfig, SubprocessTransport, drive_session
from simulact.scheduler import DurationModel, build_timetable, emission_times, insert_waits
from simulact.simulation import (
    Action,
    actions_from_decisions,
    dump_trace,
    run_policy,
    scripted_policy,
    sequence_emitter,
    wait_k_policy,
)

criterion = pytest.mark.criterion


def _src(ends):
    return SourceTranscript.from_ends(ends)


# ---------------------------------------------------------------- 1

def _random_causal_instance(rng):
    n = rng.randint(1, 12)
    ends, t = [], 0.0
    for _ in range(n):
        t += rng.choice([0.0, rng.uniform(0.05, 1.5)])
        ends.append(round(t, 3))
    m = rng.randint(1, 15)
    onsets, t = [], rng.uniform(0, ends[0] + 0.5)
    for _ in range(m):
        onsets.append(round(t, 3))
        t += rng.choice([0.0, rng.uniform(0.0, 1.0)])
    return ends, onsets


@criterion(1, "time-based LAAL hand instances and brute-force agreement")
def test_crit1_laal_sec():
    start = time.perf_counter()
    assert abs(laal_sec(_src([1, 2, 3]), TimedEmission((1.0, 2.0))) - 0.5) <= 1e-12
    assert abs(laal_sec(_src([1, 2, 3]), TimedEmission((3.0, 3.5, 4.0))) - 2.0) <= 1e-12
    assert abs(laal_sec(_src([1.7]), TimedEmission((2.0,))) - 0.0) <= 1e-12
    rng = random.Random(1)
    for _ in range(1000):
        ends, onsets = _random_causal_instance(rng)
        lib = laal_sec(_src(ends), TimedEmission(tuple(onsets)))
        ref = oracles.laal_sec_bruteforce(ends, onsets)
        assert abs(lib - ref) <= 1e-9, (ends, onsets, lib, ref)
    assert time.perf_counter() - start < 5.0


# ---------------------------------------------------------------- 2

@criterion(2, "token AL/LAAL hand values and LAAL = AL when |Y| >= |Y_ref|")
def test_crit2_token_lagging():
    assert al_token(DelaySequence((1, 2, 3), 3, 3)) == pytest.approx(1.0, abs=1e-12)
    assert laal_token(DelaySequence((1, 2, 3), 3, 4)) == pytest.approx(1.25, abs=1e-12)
    rng = random.Random(2)
    for _ in range(1000):
        n_src = rng.randint(1, 20)
        n_tgt = rng.randint(1, 25)
        g = sorted(rng.randint(1, n_src) for _ in range(n_tgt))
        ref_len = rng.randint(0, n_tgt)
        d = DelaySequence(tuple(g), n_src, ref_len)
        assert laal_token(d) == pytest.approx(al_token(d), abs=1e-12)
        assert al_token(d) == pytest.approx(oracles.lagging_bruteforce(g, n_src, n_tgt / n_src), abs=1e-9)


# ---------------------------------------------------------------- 3

STRINGS5 = oracles.all_strings("abcd", 5)
STRINGS4 = oracles.all_strings("abcd", 4, min_len=0)


@criterion(3, "BLEU, chrF and TER equal exhaustive oracles; identity gives 100/100/0")
def test_crit3_bleu_exhaustive():
    expect = oracles.bleu_matrix(STRINGS5, "abcd")
    toks = [list(s) for s in STRINGS5]
    for i, h in enumerate(toks):
        got = q.bleu_report([h] * len(toks), toks).sentence_scores
        np.testing.assert_allclose(got, expect[i], rtol=0, atol=1e-9, err_msg=STRINGS5[i])


@criterion(3, "BLEU, chrF and TER equal exhaustive oracles; identity gives 100/100/0")
def test_crit3_chrf_exhaustive():
    expect = oracles.chrf_matrix(STRINGS5, "abcd")
    for i, h in enumerate(STRINGS5):
        got = q.chrf_report([h] * len(STRINGS5), STRINGS5).sentence_scores
        np.testing.assert_allclose(got, expect[i], rtol=0, atol=1e-9, err_msg=h)


@criterion(3, "BLEU, chrF and TER equal exhaustive oracles; identity gives 100/100/0")
def test_crit3_ter_exhaustive():
    lev_table = {(a, b): oracles.levenshtein(a, b) for a in STRINGS4 for b in STRINGS4}
    refs = [r for r in STRINGS4 if r]
    mismatches = []
    for h in STRINGS4:
        dist = oracles.shift_distances(h)
        for r in refs:
            best = min(d + lev_table[s, r] for s, d in dist.items())
            got = q.ter_edits(list(h), list(r))
            if got != best:
                mismatches.append((h, r, got, best))
            assert q.ter(list(h), list(r)) == pytest.approx(100.0 * best / len(r), abs=1e-9)
    assert not mismatches, mismatches[:10]


@criterion(3, "BLEU, chrF and TER equal exhaustive oracles; identity gives 100/100/0")
def test_crit3_identity():
    for s in STRINGS5[::7] + ["a", "abcdabcdabcd"]:
        assert q.sentence_bleu(list(s), list(s)) == 100.0
        assert q.chrf([s], [s]) == 100.0
        assert q.ter(list(s), list(s)) == 0.0
    words = "the model is trained on sixteen datasets".split()
    assert q.corpus_bleu([words], [words]) == 100.0


# ---------------------------------------------------------------- 4

@criterion(4, "Spearman exact on identity/reversal and agrees with a textbook oracle")
def test_crit4_spearman():
    n = 9
    assert q.spearman_alignment(SentenceAlignment({(i, i) for i in range(1, n + 1)})) == 1.0
    assert q.spearman_alignment(SentenceAlignment({(i, n + 1 - i) for i in range(1, n + 1)})) == -1.0
    rng = random.Random(4)
    for _ in range(500):
        m = rng.randint(2, 12)
        perm = list(range(1, m + 1))
        rng.shuffle(perm)
        links = {(s, t) for s, t in zip(range(1, m + 1), perm)}
        # extra links create ties on either side
        for _ in range(rng.randint(1, 4)):
            links.add((rng.randint(1, m), rng.randint(1, m)))
        align = SentenceAlignment(links)
        src = [s for s, _ in align.sorted_links()]
        tgt = [t for _, t in align.sorted_links()]
        if len(set(src)) < 2 or len(set(tgt)) < 2:
            continue
        got = q.spearman_alignment(align)
        assert got == pytest.approx(oracles.spearman_textbook(src, tgt), abs=1e-9)
        assert got == pytest.approx(spearmanr(src, tgt).statistic, abs=1e-9)


# ---------------------------------------------------------------- 5

@criterion(5, "scheduler causality over random instances and the [A],[B,C] example")
def test_crit5_scheduler():
    src = _src([1.0, 2.0, 3.0])
    dm = DurationModel(0.3)
    ct = insert_waits(["A", "B", "C"], SentenceAlignment({(1, 1), (3, 2), (2, 3)}), src)
    assert ct.segments() == [(0, 1), (1, 3)]
    onsets = emission_times(build_timetable(ct, src, dm), dm).onsets
    assert onsets == pytest.approx((1.0, 3.0, 3.3), abs=1e-12)

    rng = random.Random(5)
    violations = 0
    for _ in range(1000):
        n_src, n_tgt = rng.randint(1, 10), rng.randint(1, 12)
        ends, t = [], 0.0
        for _ in range(n_src):
            t += rng.uniform(0.0, 0.8)
            ends.append(round(t, 3))
        links = {(rng.randint(1, n_src), rng.randint(1, n_tgt)) for _ in range(rng.randint(0, 15))}
        source = _src(ends)
        dm = DurationModel(rng.choice([0.05, 0.2, 0.3, 1.0]))
        ct = insert_waits([f"t{j}" for j in range(n_tgt)], SentenceAlignment(links), source)
        onsets = emission_times(build_timetable(ct, source, dm), dm).onsets
        assert len(onsets) == n_tgt
        for s, j in links:
            if onsets[j - 1] < ends[s - 1]:
                violations += 1
    assert violations == 0


# ---------------------------------------------------------------- 6

@criterion(6, "wait-k hand simulation, replay of the leave-one-out trace, revision fuzz")
def test_crit6_wait_k():
    for k in (1, 2, 3):
        for n in range(3, 7):
            words = [f"w{i}" for i in range(1, n + 1)]
            trace = run_policy(synthetic_transcript(words), wait_k_policy(k))
            assert trace.delays == oracles.wait_k_delays(k, n, n)
            assert trace.final_target == tuple(words)
            # a target of a different length through the sequence emitter
            tgt = [f"y{i}" for i in range(n + 2)]
            trace = run_policy(synthetic_transcript(words), wait_k_policy(k, sequence_emitter(tgt)))
            assert trace.delays == oracles.wait_k_delays(k, n, n + 2)


@criterion(6, "wait-k hand simulation, replay of the leave-one-out trace, revision fuzz")
def test_crit6_leave_one_out_replay():
    words, decisions = load_decisions("leave_one_out_zh.tsv")
    assert len(words) == 24
    trace = run_policy(synthetic_transcript(words), scripted_policy(actions_from_decisions(decisions)))
    final = "我们将实验设计为留一法评估,其中我们在十六个数据集上训练FeSTe,并将其应用于第十七个数据集。"
    assert "".join(trace.final_target) == final
    assert trace.dropped_spans == ((9, 9),)
    assert trace.aborted is None


def _fuzz_trace(rng, n_src):
    """Random mostly-legal action list with one revision attempt somewhere."""
    actions, read, emitted = [], 0, 0
    revise_at = rng.randint(0, 3 * n_src)
    while len(actions) < 4 * n_src:
        if len(actions) == revise_at:
            pos = rng.randint(1, max(emitted, 1))
            actions.append(Action.revise(pos, [rng.choice(["X", "Y"])]))
            continue
        choice = rng.random()
        if read < n_src and (read == 0 or choice < 0.4):
            actions.append(Action.read())
            read += 1
        elif choice < 0.8:
            actions.append(Action.write([f"t{emitted + 1}"]))
            emitted += 1
        elif choice < 0.9:
            actions.append(Action.drop(rng.randint(1, read)))
        else:
            actions.append(Action.cut())
    return actions, revise_at


@criterion(6, "wait-k hand simulation, replay of the leave-one-out trace, revision fuzz")
def test_crit6_revision_fuzz():
    rng = random.Random(6)
    silent = 0
    for _ in range(500):
        n_src = rng.randint(1, 8)
        actions, revise_at = _fuzz_trace(rng, n_src)
        source = synthetic_transcript([f"w{i}" for i in range(n_src)])
        legal_prefix = [a for a in actions[:revise_at] if a.kind.emits]
        expected = tuple(t for a in legal_prefix for t in a.emission)
        try:
            run_policy(source, scripted_policy(actions))
        except MonotonicityViolation as exc:
            assert VIOLATION_MARKER in str(exc)
            assert exc.step == revise_at + 1
            assert exc.trace.aborted == VIOLATION_MARKER
            assert exc.trace.final_target == expected
            assert dump_trace(exc.trace).rstrip().endswith(f'"action": "{VIOLATION_MARKER}"}}')
        else:
            silent += 1  # a revision was scheduled, so finishing at all is a corruption
    assert silent == 0


# ---------------------------------------------------------------- 7

@criterion(7, "wait-1 behind the agent protocol gives byte-identical traces on the toy corpus")
def test_crit7_protocol_equivalence(toy):
    from simulact.corpus_io import read_parallel, tokenize

    transcripts = parse_transcripts((toy / "transcripts.jsonl").read_bytes())
    hyps = {r.id: tokenize(r.target_hypothesis, "punct-split") for r in read_parallel(toy / "parallel.tsv")}
    argv = [sys.executable, "-m", "simulact.cli", "agent", "--k", "1",
            "--emitter", "hypothesis", "--parallel", str(toy / "parallel.tsv")]
    with SubprocessTransport(argv) as transport:
        for tr in transcripts:
            local = run_policy(tr, wait_k_policy(1, sequence_emitter(hyps[tr.id])))
            remote = drive_session(tr, transport, SessionConfig(timeout_ms=10_000))
            assert remote == local
            assert dump_trace(remote, tr.id).encode() == dump_trace(local, tr.id).encode()
    # the echo emitter through the same path
    argv = [sys.executable, "-m", "simulact.cli", "agent", "--k", "1"]
    with SubprocessTransport(argv) as transport:
        for tr in transcripts:
            assert drive_session(tr, transport) == run_policy(tr, wait_k_policy(1))


# ---------------------------------------------------------------- 8

@criterion(8, "step-wise prompt carries the measured stats lines; system ranking")
def test_crit8_prompt_and_ranking(reference_stats):
    spec = PromptSpec("en-zh", ("Drop", "Partial_Summarization", "Cut", "PRONOUN"), reference_stats)
    text = render_prompt(spec)
    for line in ("Drop → AL ≈ 0.851s, BLEU ≈ 58.94",
                 "Partial_Summarization → AL ≈ 0.847s, BLEU ≈ 60.33",
                 "Cut → AL ≈ 0.824s, BLEU ≈ 60.28",
                 "PRONOUN → AL ≈ 0.858s, BLEU ≈ 60.85"):
        assert f"- {line}\n" in text + "\n"
    ranking = rank_systems({"Action": 2.438, "Salami": 2.656, "MUSTC": 2.650}, lower_is_better=True)
    assert ranking.text == "Action < MUSTC < Salami"
    assert not ranking.tied


# ---------------------------------------------------------------- 9

@criterion(9, "toy pipeline finishes in under 10 s and is byte-deterministic")
def test_crit9_pipeline(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        start = time.perf_counter()
        res = subprocess.run([sys.executable, "-m", "simulact.cli", "pipeline", "--toy", "--json",
                              "--out-dir", str(out)], capture_output=True, text=True, timeout=60)
        elapsed = time.perf_counter() - start
        assert res.returncode == 0, res.stderr
        assert elapsed < 10.0
        assert '"BLEU"' in res.stdout and '"LAAL_sec"' in res.stdout
        outs.append((out, res.stdout))
    (a, out_a), (b, out_b) = outs
    assert out_a == out_b
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors
    assert len(match) == 9


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
