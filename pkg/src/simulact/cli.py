"""Command-line entry point: ``simulact <subcommand> ...``.

Every subcommand reads an optional YAML config (``--config`` or the
``SIMULACT_CONFIG`` environment variable). Top-level keys apply to all
subcommands, a section named after the subcommand overrides them, and
command-line flags override both.
"""
from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import yaml

from . import latency as lat
from . import quality as q
from .corpus_io import (
    ParallelRecord,
    SourceTranscript,
    TokenScheme,
    detokenize,
    read_alignments,
    read_parallel,
    read_transcripts,
    scheme_for_language,
    tokenize,
)
from .errors import ConfigError, SimulactError, SimulationError, ValidationError
from .prompts import (
    PromptMode,
    PromptSpec,
    aggregate_stats,
    dump_stats,
    format_stats_line,
    parse_stats_file,
    render_prompt,
)
from .scheduler import DurationModel, build_timetable, dump_timetable, insert_waits, trace_emission_times
from .simulation import (
    BASE_LABEL,
    Policy,
    SessionTrace,
    dump_trace,
    echo_emitter,
    load_traces,
    run_policy,
    scripted_policy,
    sequence_emitter,
    wait_k_policy,
)

ENV_CONFIG = "SIMULACT_CONFIG"
PATH_KEYS = {"transcripts", "parallel", "alignments", "traces", "sessions", "scores", "latency", "onsets",
             "records", "stats", "demos", "out", "trace_out", "out_dir"}
ALL_STAGES = ("simulate", "score", "latency", "schedule", "stats", "prompt")


class DependencyError(ConfigError):
    """A stage was requested without the output of a stage it needs."""


def toy_dir() -> Path:
    return Path(str(resources.files("simulact").joinpath("data", "toy")))


# ---------------------------------------------------------------- config

def load_config(path: str | os.PathLike) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    base = p.resolve().parent
    return _resolve_paths(data, base)


def _resolve_paths(data: dict, base: Path) -> dict:
    out = {}
    for key, value in data.items():
        if isinstance(value, dict):
            out[key] = _resolve_paths(value, base)
        elif key in PATH_KEYS and isinstance(value, str):
            out[key] = str(base / value)
        else:
            out[key] = value
    return out


def _as_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


def _require_file(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigError(f"no {what} file given")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {p}")
    return p


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _map(fn: Callable, items: Sequence, jobs: int, threads: bool = False) -> list:
    """Ordered map, optionally across worker processes."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    pool = ThreadPoolExecutor if threads else ProcessPoolExecutor
    with pool(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip():
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{n}: invalid JSON ({exc.msg})") from None
    return out


# ---------------------------------------------------------------- corpus

@dataclass
class Corpus:
    lang_pair: str
    transcripts: list[SourceTranscript]
    parallel: dict[str, ParallelRecord]
    tokenization: Optional[str] = None  # overrides the target-language default

    @property
    def scheme(self) -> TokenScheme:
        if self.tokenization:
            return TokenScheme(self.tokenization)
        return scheme_for_language(self.lang_pair)

    def hypothesis(self, sid: str) -> list[str]:
        return tokenize(self.parallel[sid].target_hypothesis, self.scheme)

    def reference(self, sid: str) -> list[str]:
        return tokenize(self.parallel[sid].target_reference, self.scheme)


def load_corpus(args, need_parallel: bool = True) -> Corpus:
    transcripts = read_transcripts(_require_file(args.transcripts, "transcripts"))
    parallel: dict[str, ParallelRecord] = {}
    if need_parallel or args.parallel:
        parallel = {r.id: r for r in read_parallel(_require_file(args.parallel, "parallel corpus"))}
        missing = [t.id for t in transcripts if t.id not in parallel]
        if missing:
            raise ValidationError(f"no parallel record for transcript ids {missing}")
    return Corpus(args.lang_pair, transcripts, parallel, getattr(args, "tokenization", None))


# ---------------------------------------------------------------- simulate / drive

@dataclass(frozen=True)
class PolicySpec:
    name: str = "wait-k"
    k: int = 1
    emitter: str = "echo"
    hypothesis: tuple[str, ...] = ()
    script: tuple = ()

    def build(self) -> Policy:
        if self.name == "scripted":
            return scripted_policy(self.script)
        if self.name != "wait-k":
            raise ConfigError(f"unknown policy {self.name!r}")
        emit = sequence_emitter(self.hypothesis) if self.emitter == "hypothesis" else echo_emitter
        return wait_k_policy(self.k, emit)


def _policy_specs(args, corpus: Corpus) -> list[PolicySpec]:
    if args.policy == "scripted":
        scripts = load_traces(_require_file(args.traces, "traces").read_text(encoding="utf-8"))
        missing = [t.id for t in corpus.transcripts if t.id not in scripts]
        if missing:
            raise ValidationError(f"no scripted trace for ids {missing}")
        return [PolicySpec("scripted", script=tuple(scripts[t.id])) for t in corpus.transcripts]
    if args.policy != "wait-k":
        raise ConfigError(f"unknown policy {args.policy!r}")
    if args.emitter not in ("echo", "hypothesis"):
        raise ConfigError(f"unknown emitter {args.emitter!r}")
    return [PolicySpec("wait-k", int(args.k), args.emitter,
                       tuple(corpus.hypothesis(t.id)) if args.emitter == "hypothesis" else ())
            for t in corpus.transcripts]


def _session_record(sid: str, trace: SessionTrace) -> dict:
    rec = {"id": sid, "src_len": trace.src_len, "action_set": trace.action_set(),
           "delays": list(trace.delays), "target": list(trace.final_target)}
    if trace.aborted:
        rec["aborted"] = trace.aborted
    return rec


def _simulate_one(item: tuple[SourceTranscript, PolicySpec]):
    tr, spec = item
    try:
        return run_policy(tr, spec.build()), None
    except SimulationError as exc:
        return exc.trace, str(exc)


def _finish_sessions(args, ids: list[str], results) -> int:
    sessions, traces, failures = [], [], []
    for sid, (trace, err) in zip(ids, results):
        if trace is not None:
            sessions.append(_session_record(sid, trace))
            traces.append(dump_trace(trace, sid))
        if err:
            failures.append(f"{sid}: {err}")
    _write(_jsonl(sessions), args.out)
    if args.trace_out:
        _write("".join(traces), args.trace_out)
    for f in failures:
        print(f"session {f}", file=sys.stderr)
    return 1 if failures else 0


def cmd_simulate(args) -> int:
    corpus = load_corpus(args, need_parallel=args.emitter == "hypothesis" and args.policy == "wait-k")
    specs = _policy_specs(args, corpus)
    results = _map(_simulate_one, list(zip(corpus.transcripts, specs)), args.jobs)
    return _finish_sessions(args, [t.id for t in corpus.transcripts], results)


def _agent_transport(args):
    from .protocol import SocketTransport, SubprocessTransport

    if args.agent_cmd:
        return SubprocessTransport(shlex.split(args.agent_cmd))
    if args.connect:
        return SocketTransport(args.connect)
    raise ConfigError("drive needs --agent-cmd or --connect")


def cmd_drive(args) -> int:
    from .protocol import SessionConfig, drive_session

    corpus = load_corpus(args, need_parallel=False)
    cfg = SessionConfig(timeout_ms=int(args.timeout_ms), step_budget=args.step_budget,
                        lang_pair=args.lang_pair)
    if not (args.agent_cmd or args.connect):
        raise ConfigError("drive needs --agent-cmd or --connect")

    def one(tr: SourceTranscript):
        with _agent_transport(args) as transport:
            try:
                return drive_session(tr, transport, cfg), None
            except SimulationError as exc:
                return exc.trace, str(exc)

    results = _map(one, corpus.transcripts, args.jobs, threads=True)
    return _finish_sessions(args, [t.id for t in corpus.transcripts], results)


def cmd_agent(args) -> int:
    from .protocol import listen_socket, serve, serve_socket

    hyps: dict[str, tuple[str, ...]] = {}
    if args.emitter == "hypothesis":
        scheme = scheme_for_language(args.lang_pair)
        hyps = {r.id: tuple(tokenize(r.target_hypothesis, scheme))
                for r in read_parallel(_require_file(args.parallel, "parallel corpus"))}
    scripts = {}
    if args.policy == "scripted":
        scripts = load_traces(_require_file(args.traces, "traces").read_text(encoding="utf-8"))

    def factory(session: str) -> Policy:
        if args.policy == "scripted":
            return PolicySpec("scripted", script=tuple(scripts.get(session, ()))).build()
        return PolicySpec("wait-k", int(args.k), args.emitter, hyps.get(session, ())).build()

    if args.listen:
        return serve_socket(factory, listen_socket(args.listen), args.max_sessions)
    return serve(factory, sys.stdin, sys.stdout)


# ---------------------------------------------------------------- score

def _load_sessions(path: Optional[str]) -> dict[str, dict]:
    recs = _read_jsonl(_require_file(path, "sessions"))
    out = {}
    for rec in recs:
        if rec.get("aborted"):
            raise ValidationError(f"session {rec.get('id')} was aborted ({rec['aborted']})")
        out[str(rec["id"])] = rec
    return out


def _ter_one(pair):
    return q.ter_edits(pair[0], pair[1])


def score_corpus(corpus: Corpus, sessions: Optional[dict], metrics: list[str],
                 alignments: Optional[str] = None, jobs: int = 1, smoothing: str = "exp",
                 one_based: bool = False) -> dict:
    ids = [t.id for t in corpus.transcripts]
    scheme = corpus.scheme
    hyps = [list(sessions[i]["target"]) if sessions else corpus.hypothesis(i) for i in ids]
    refs = [corpus.reference(i) for i in ids]
    report: dict = {"lang_pair": corpus.lang_pair, "tokenization": scheme.value, "corpus": {},
                    "fingerprints": {}}
    per = {i: {"id": i} for i in ids}
    for m in metrics:
        if m == "bleu":
            rep = q.bleu_report(hyps, refs, q.BleuConfig(smoothing=smoothing, tokenization=scheme))
        elif m == "chrf":
            rep = q.chrf_report([detokenize(h, scheme) for h in hyps],
                                [detokenize(r, scheme) for r in refs])
        elif m == "ter":
            if any(not r for r in refs):
                raise ValidationError("TER is undefined for an empty reference")
            edits = _map(_ter_one, list(zip(hyps, refs)), jobs)
            sent = tuple(100.0 * e / len(r) for e, r in zip(edits, refs))
            total = 100.0 * sum(edits) / sum(len(r) for r in refs)
            fp = q.ter_report([["x"]], [["x"]], tokenization=scheme.value).fingerprint
            rep = q.MetricReport("ter", total, sent, fp)
        else:
            raise ConfigError(f"unknown metric {m!r}")
        report["corpus"][m] = rep.corpus_score
        report["fingerprints"][m] = rep.fingerprint
        for i, s in zip(ids, rep.sentence_scores):
            per[i][m] = s
    if alignments:
        aligns = read_alignments(alignments, one_based)
        if len(aligns) != len(ids):
            raise ValidationError(f"{len(aligns)} alignments for {len(ids)} sentences")
        rhos = [q.spearman_alignment(a) for a in aligns]
        report["corpus"]["spearman"] = sum(rhos) / len(rhos)
        for i, r in zip(ids, rhos):
            per[i]["spearman"] = r
    report["sentences"] = [per[i] for i in ids]
    return report


def _print_scores(values: dict, labels: dict) -> None:
    for key, value in values.items():
        print(f"{labels.get(key, key)}\t{value:.2f}")


METRIC_LABELS = {"bleu": "BLEU", "chrf": "chrF", "ter": "TER", "spearman": "Spearman",
                 "al": "AL", "laal": "LAAL", "laal_sec": "LAAL_sec"}


def format_score_table(report: dict) -> str:
    """Per-sentence scores as TSV with a header row, then a ``#corpus`` row."""
    keys = list(report["corpus"])
    lines = ["\t".join(["id", *keys])]
    for rec in report["sentences"]:
        lines.append("\t".join([rec["id"], *(repr(rec[k]) for k in keys)]))
    lines.append("\t".join(["#corpus", *(repr(report["corpus"][k]) for k in keys)]))
    return "\n".join(lines) + "\n"


def parse_score_table(content: str) -> dict:
    """Inverse of :func:`format_score_table` (fingerprints are not stored)."""
    rows = [line.split("\t") for line in content.splitlines() if line.strip()]
    if not rows or rows[0][0] != "id":
        raise ValidationError("score table needs an 'id' header row")
    keys = rows[0][1:]
    report: dict = {"corpus": {}, "sentences": []}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(keys) + 1:
            raise ValidationError(f"score table line {n}: expected {len(keys) + 1} columns")
        try:
            values = {k: float(v) for k, v in zip(keys, row[1:])}
        except ValueError:
            raise ValidationError(f"score table line {n}: non-numeric score") from None
        if row[0] == "#corpus":
            report["corpus"] = values
        else:
            report["sentences"].append({"id": row[0], **values})
    return report


def cmd_score(args) -> int:
    corpus = load_corpus(args)
    sessions = _load_sessions(args.sessions) if args.sessions else None
    align = str(_require_file(args.alignments, "alignment")) if args.alignments else None
    report = score_corpus(corpus, sessions, _as_list(args.metrics), align, args.jobs,
                          args.smoothing, args.one_based)
    if args.out:
        _write(format_score_table(report), args.out)
    if args.json:
        print(json.dumps({k: report[k] for k in ("corpus", "fingerprints", "tokenization")},
                         ensure_ascii=False))
    else:
        _print_scores(report["corpus"], METRIC_LABELS)
    return 0


# ---------------------------------------------------------------- latency

def latency_records(corpus: Corpus, sessions: dict, dm: DurationModel) -> list[dict]:
    out = []
    for tr in corpus.transcripts:
        rec = sessions.get(tr.id)
        if rec is None:
            raise ValidationError(f"no session for transcript {tr.id}")
        if not rec["delays"]:
            raise ValidationError(f"session {tr.id} emitted nothing")
        ref_len = len(corpus.reference(tr.id)) if corpus.parallel else len(rec["delays"])
        d = lat.DelaySequence(tuple(rec["delays"]), len(tr), ref_len)
        onsets = trace_emission_times(d.g, tr, dm)
        out.append({"id": tr.id, "al": lat.al_token(d), "laal": lat.laal_token(d),
                    "laal_sec": lat.laal_sec(tr, onsets)})
    return out


def _means(records: list[dict], keys: Sequence[str]) -> dict:
    return {k: sum(r[k] for r in records) / len(records) for k in keys}


def _duration_model(args, corpus: Corpus) -> DurationModel:
    if args.seconds_per_unit:
        return DurationModel(float(args.seconds_per_unit))
    return DurationModel.for_scheme(corpus.scheme)


def onset_records(corpus: Corpus, emissions: list[SourceTranscript]) -> list[dict]:
    """LAAL_sec from measured onsets; token lags come from the g they imply."""
    by_id = {e.id: e for e in emissions}
    out = []
    for tr in corpus.transcripts:
        if tr.id not in by_id:
            raise ValidationError(f"no onsets for transcript {tr.id}")
        em = lat.TimedEmission(tuple(by_id[tr.id].ends))
        d = lat.compute_g_from_times(tr, em)
        ref_len = len(corpus.reference(tr.id)) if corpus.parallel else len(d.g)
        d = lat.DelaySequence(d.g, d.src_len, ref_len)
        out.append({"id": tr.id, "al": lat.al_token(d), "laal": lat.laal_token(d),
                    "laal_sec": lat.laal_sec(tr, em)})
    return out


def cmd_latency(args) -> int:
    corpus = load_corpus(args, need_parallel=False)
    if args.onsets:
        recs = onset_records(corpus, read_transcripts(_require_file(args.onsets, "onsets")))
    else:
        recs = latency_records(corpus, _load_sessions(args.sessions), _duration_model(args, corpus))
    if args.out:
        _write(_jsonl(recs), args.out)
    means = _means(recs, ("al", "laal", "laal_sec"))
    if args.json:
        print(json.dumps(means))
    else:
        _print_scores(means, METRIC_LABELS)
    return 0


# ---------------------------------------------------------------- schedule

def schedule_corpus(corpus: Corpus, alignments: list, dm: DurationModel) -> str:
    if len(alignments) != len(corpus.transcripts):
        raise ValidationError(f"{len(alignments)} alignments for {len(corpus.transcripts)} sentences")
    parts = []
    for tr, align in zip(corpus.transcripts, alignments):
        ct = insert_waits(corpus.hypothesis(tr.id), align, tr)
        parts.append(dump_timetable(build_timetable(ct, tr, dm), dm, tr.id))
    return "".join(parts)


def cmd_schedule(args) -> int:
    align_path = _require_file(args.alignments, "alignment")
    corpus = load_corpus(args)
    text = schedule_corpus(corpus, read_alignments(align_path, args.one_based),
                           _duration_model(args, corpus))
    _write(text, args.out)
    return 0


# ---------------------------------------------------------------- stats

def stats_records(sessions: dict, scores: dict, latencies: list[dict]) -> list[tuple[str, float, float]]:
    bleu = {r["id"]: r["bleu"] for r in scores["sentences"] if "bleu" in r}
    out = []
    for rec in latencies:
        sid = rec["id"]
        if sid not in bleu or sid not in sessions:
            raise ValidationError(f"sentence {sid} is missing a BLEU score or a session")
        out.append((sessions[sid]["action_set"], bleu[sid], rec["laal_sec"]))
    return out


def format_records(records: Iterable[tuple[str, float, float]]) -> str:
    return "".join(f"{a}\t{b!r}\t{c!r}\n" for a, b, c in records)


def cmd_stats(args) -> int:
    if args.records:
        stats = parse_stats_file(_require_file(args.records, "records").read_text(encoding="utf-8"))
    else:
        if not (args.sessions and args.scores and args.latency):
            raise DependencyError("stats needs --records, or --sessions with --scores and --latency")
        sessions = _load_sessions(args.sessions)
        scores = parse_score_table(_require_file(args.scores, "scores").read_text(encoding="utf-8"))
        latencies = _read_jsonl(_require_file(args.latency, "latency"))
        stats = aggregate_stats(stats_records(sessions, scores, latencies))
    if args.out:
        _write(dump_stats(stats), args.out)
    for st in stats:
        print(format_stats_line(st, args.stat_label))
    return 0


# ---------------------------------------------------------------- prompt

def _prompt_spec(args, stats) -> PromptSpec:
    mode = PromptMode(args.mode)
    demos = ()
    if mode is PromptMode.FEWSHOT:
        demos = tuple(_read_jsonl(_require_file(args.demos, "demonstrations")))
    actions = _as_list(args.actions)
    if not actions:
        actions = [s.action_set for s in stats if s.action_set != BASE_LABEL]
    return PromptSpec(args.lang_pair, tuple(actions), tuple(stats), mode, demos,
                      args.stat_label, args.template_version)


def cmd_prompt(args) -> int:
    mode = PromptMode(args.mode)
    stats = []
    if mode is not PromptMode.FEWSHOT:
        if not args.stats:
            raise DependencyError("prompt needs the output of `stats` (--stats)")
        stats = parse_stats_file(_require_file(args.stats, "stats").read_text(encoding="utf-8"))
    text = render_prompt(_prompt_spec(args, stats), args.source)
    _write(text if text.endswith("\n") else text + "\n", args.out)
    return 0


# ---------------------------------------------------------------- pipeline

def _check_stages(stages: list[str], args) -> None:
    unknown = [s for s in stages if s not in ALL_STAGES]
    if unknown:
        raise ConfigError(f"unknown stages {unknown}")
    needs = {"score": ["simulate"], "latency": ["simulate"], "stats": ["simulate", "score", "latency"]}
    for stage, deps in needs.items():
        if stage in stages:
            missing = [d for d in deps if d not in stages]
            if missing:
                raise DependencyError(f"stage {stage} needs {missing}")
    if "prompt" in stages and PromptMode(args.mode) is not PromptMode.FEWSHOT \
            and "stats" not in stages and not args.stats:
        raise DependencyError("stage prompt needs the stats stage or --stats")
    if "schedule" in stages:
        _require_file(args.alignments, "alignment")
    _require_file(args.transcripts, "transcripts")
    _require_file(args.parallel, "parallel corpus")


def cmd_pipeline(args) -> int:
    stages = _as_list(args.stages) or list(ALL_STAGES)
    _check_stages(stages, args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(args)
    dm = _duration_model(args, corpus)
    summary: dict = {"lang_pair": args.lang_pair, "policy": args.policy, "sentences": len(corpus.transcripts)}
    if args.policy == "wait-k":
        summary["k"] = int(args.k)
    files = []
    sessions = scores = lats = None
    stats = None
    for stage in [s for s in ALL_STAGES if s in stages]:
        try:
            if stage == "simulate":
                specs = _policy_specs(args, corpus)
                results = _map(_simulate_one, list(zip(corpus.transcripts, specs)), args.jobs)
                errors = [f"{t.id}: {e}" for t, (_, e) in zip(corpus.transcripts, results) if e]
                if errors:
                    raise SimulationError("; ".join(errors))
                recs = [_session_record(t.id, tr) for t, (tr, _) in zip(corpus.transcripts, results)]
                _write(_jsonl(recs), str(out / "sessions.jsonl"))
                _write("".join(dump_trace(tr, t.id) for t, (tr, _) in zip(corpus.transcripts, results)),
                       str(out / "traces.jsonl"))
                files += ["sessions.jsonl", "traces.jsonl"]
                sessions = {r["id"]: r for r in recs}
            elif stage == "score":
                scores = score_corpus(corpus, sessions, _as_list(args.metrics), args.alignments,
                                      args.jobs, args.smoothing, args.one_based)
                _write(format_score_table(scores), str(out / "scores.tsv"))
                files.append("scores.tsv")
                summary["fingerprints"] = scores["fingerprints"]
                summary.update({METRIC_LABELS[k]: v for k, v in scores["corpus"].items()})
            elif stage == "latency":
                lats = latency_records(corpus, sessions, dm)
                _write(_jsonl(lats), str(out / "latency.jsonl"))
                files.append("latency.jsonl")
                summary.update({METRIC_LABELS[k]: v for k, v in _means(lats, ("al", "laal", "laal_sec")).items()})
            elif stage == "schedule":
                text = schedule_corpus(corpus, read_alignments(args.alignments, args.one_based), dm)
                _write(text, str(out / "timetable.jsonl"))
                files.append("timetable.jsonl")
            elif stage == "stats":
                records = stats_records(sessions, scores, lats)
                _write(format_records(records), str(out / "stats_records.tsv"))
                stats = aggregate_stats(records)
                _write(dump_stats(stats), str(out / "stats.tsv"))
                files += ["stats_records.tsv", "stats.tsv"]
            elif stage == "prompt":
                if stats is None and PromptMode(args.mode) is not PromptMode.FEWSHOT:
                    stats = parse_stats_file(Path(args.stats).read_text(encoding="utf-8"))
                text = render_prompt(_prompt_spec(args, stats or []), args.source)
                _write(text if text.endswith("\n") else text + "\n", str(out / "prompt.txt"))
                files.append("prompt.txt")
        except SimulactError as exc:
            print(f"pipeline: stage {stage} failed: {exc}", file=sys.stderr)
            return 1
    summary["files"] = files
    _write(json.dumps(summary, ensure_ascii=False, indent=1) + "\n", str(out / "summary.json"))
    if args.json:
        print(json.dumps(summary, ensure_ascii=False))
    else:
        for key in ("BLEU", "chrF", "TER", "AL", "LAAL", "LAAL_sec"):
            if key in summary:
                print(f"{key}\t{summary[key]:.2f}")
    return 0


# ---------------------------------------------------------------- parser

def _add_corpus_args(p):
    p.add_argument("--lang-pair", default="en-de", help="source-target codes, e.g. en-zh")
    p.add_argument("--transcripts", help="timed source transcripts (JSON lines)")
    p.add_argument("--parallel", help="id, source, hypothesis, reference (TSV)")
    p.add_argument("--tokenization", choices=[t.value for t in TokenScheme],
                   help="target unit scheme (default by target language)")


def _add_alignment_args(p, help_text):
    p.add_argument("--alignments", help=help_text)
    p.add_argument("--one-based", action="store_true", help="alignment indices start at 1, not 0")


def _add_policy_args(p):
    p.add_argument("--policy", choices=["wait-k", "scripted"], default="wait-k")
    p.add_argument("--k", type=int, default=1, help="lag of the wait-k policy")
    p.add_argument("--emitter", choices=["echo", "hypothesis"], default="echo",
                   help="echo copies source words; hypothesis replays the parallel hypothesis")
    p.add_argument("--traces", help="scripted action traces (JSON lines with ids)")


def _add_output_args(p, json_flag=True):
    p.add_argument("--out", help="output file (default: stdout)")
    if json_flag:
        p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")


def _add_duration_args(p):
    p.add_argument("--seconds-per-unit", type=float,
                   help="speech duration per target unit (default by target language)")


def _add_prompt_args(p):
    p.add_argument("--mode", choices=[m.value for m in PromptMode], default=PromptMode.STEPWISE.value)
    p.add_argument("--actions", help="comma-separated action labels (default: those in the stats)")
    p.add_argument("--demos", help="few-shot demonstrations (JSON lines)")
    p.add_argument("--stat-label", default="AL", help="latency label printed in stats lines")
    p.add_argument("--template-version", default="v1")
    p.add_argument("--source", default="<input sentence>", help="sentence placed in the prompt")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simulact", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help=f"YAML config (default: ${ENV_CONFIG})")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    jobs_help = "worker processes for per-sentence work"

    p = sub.add_parser("simulate", help="run a policy over transcripts")
    _add_corpus_args(p)
    _add_policy_args(p)
    p.add_argument("--trace-out", help="write replayable action traces here")
    p.add_argument("--jobs", type=int, default=1, help=jobs_help)
    _add_output_args(p, json_flag=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("drive", help="run sessions against an external agent")
    _add_corpus_args(p)
    p.add_argument("--agent-cmd", help="command starting an agent on stdin/stdout")
    p.add_argument("--connect", help="agent socket: a path or host:port")
    p.add_argument("--timeout-ms", type=int, default=30000)
    p.add_argument("--step-budget", type=int)
    p.add_argument("--trace-out", help="write replayable action traces here")
    p.add_argument("--jobs", type=int, default=1, help="concurrent sessions")
    _add_output_args(p, json_flag=False)
    p.set_defaults(func=cmd_drive)

    p = sub.add_parser("agent", help="serve a built-in policy over the agent protocol")
    p.add_argument("--lang-pair", default="en-de")
    p.add_argument("--parallel", help="hypotheses for the hypothesis emitter")
    _add_policy_args(p)
    p.add_argument("--listen", help="serve on a socket (path or host:port) instead of stdio")
    p.add_argument("--max-sessions", type=int, help="stop after this many connections")
    p.set_defaults(func=cmd_agent)

    p = sub.add_parser("score", help="BLEU, chrF, TER and alignment Spearman")
    _add_corpus_args(p)
    p.add_argument("--sessions", help="take hypotheses from simulate output")
    p.add_argument("--metrics", "--metric", dest="metrics", default="bleu,chrf,ter")
    p.add_argument("--smoothing", choices=[m.value for m in q.Smoothing], default="exp",
                   help="BLEU smoothing for zero n-gram matches")
    _add_alignment_args(p, "source-hypothesis alignments for Spearman")
    p.add_argument("--jobs", type=int, default=1, help=jobs_help)
    _add_output_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("latency", help="AL, LAAL and time-based LAAL of simulated sessions")
    _add_corpus_args(p)
    p.add_argument("--sessions", help="simulate output")
    p.add_argument("--onsets", help="emission onsets in transcript format ('end' = onset)")
    _add_duration_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("schedule", help="causal timetable for hypothesis speech")
    _add_corpus_args(p)
    _add_alignment_args(p, "source-hypothesis alignments (Pharaoh)")
    _add_duration_args(p)
    _add_output_args(p, json_flag=False)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("stats", help="aggregate per-action BLEU and latency")
    p.add_argument("--records", help="per-sentence action_set, bleu, laal_sec (TSV)")
    p.add_argument("--sessions")
    p.add_argument("--scores", help="score --out file")
    p.add_argument("--latency", help="latency --out file")
    p.add_argument("--stat-label", default="AL")
    _add_output_args(p, json_flag=False)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("prompt", help="render an action-aware or few-shot prompt")
    p.add_argument("--lang-pair", default="en-de")
    p.add_argument("--stats", help="stats --out file")
    _add_prompt_args(p)
    _add_output_args(p, json_flag=False)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("pipeline", help="simulate, score, latency, schedule, stats and prompt")
    _add_corpus_args(p)
    _add_policy_args(p)
    p.add_argument("--toy", action="store_true", help="use the bundled toy corpus and config")
    _add_alignment_args(p, "source-hypothesis alignments for schedule and Spearman")
    p.add_argument("--smoothing", choices=[m.value for m in q.Smoothing], default="exp")
    p.add_argument("--stages", help=f"comma-separated subset of {','.join(ALL_STAGES)}")
    p.add_argument("--metrics", "--metric", dest="metrics", default="bleu,chrf,ter")
    p.add_argument("--stats", help="existing stats file when the stats stage is skipped")
    p.add_argument("--out-dir", default="runs/pipeline")
    p.add_argument("--jobs", type=int, default=1, help=jobs_help)
    _add_duration_args(p)
    _add_prompt_args(p)
    p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p.set_defaults(func=cmd_pipeline)
    return ap


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre, _ = parser.parse_known_args(argv)
    path = pre.config or os.environ.get(ENV_CONFIG)
    if pre.command == "pipeline" and "--toy" in argv and not path:
        path = str(toy_dir() / "config.yaml")
    if not path:
        return parser.parse_args(argv)
    config = load_config(path)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[pre.command]
    known = {a.dest for a in subparser._actions}
    own = config.get(pre.command, {})
    if not isinstance(own, dict):
        raise ConfigError(f"config section {pre.command!r} must be a mapping")
    # shared top-level keys only apply where the subcommand has the option
    values = {k.replace("-", "_"): v for k, v in config.items()
              if not isinstance(v, dict) and k.replace("-", "_") in known}
    if pre.command == "pipeline":
        # the pipeline also honours the sections of the stages it runs
        for stage in ALL_STAGES:
            part = config.get(stage, {})
            if isinstance(part, dict):
                values.update({k.replace("-", "_"): v for k, v in part.items()
                               if k.replace("-", "_") in known})
    values.update({k.replace("-", "_"): v for k, v in own.items()})
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown keys in config section {pre.command!r}: {unknown}")
    for key in ("metrics", "stages", "actions"):
        if isinstance(values.get(key), list):
            values[key] = ",".join(str(v) for v in values[key])
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except DependencyError as exc:
        print(f"simulact: dependency error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"simulact: config error: {exc}", file=sys.stderr)
        return 2
    except SimulactError as exc:
        print(f"simulact {argv[0] if argv else ''}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"simulact: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
