"""Readers, writers and validators for transcripts, alignments and corpora.

Transcript lines are JSON lists of ``{"w": str, "end": float, "start": float?}``
objects (one sentence per line). A line may instead be an object
``{"id": str, "words": [...]}`` when the sentence needs an explicit id.
"""
from __future__ import annotations

import enum
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError


class TokenScheme(str, enum.Enum):
    WHITESPACE = "whitespace"
    CHARACTER = "character"
    PUNCT_SPLIT = "punct-split"


LANGUAGE_SCHEMES = {
    "zh": TokenScheme.CHARACTER,
    "ja": TokenScheme.CHARACTER,
    "de": TokenScheme.PUNCT_SPLIT,
    "en": TokenScheme.PUNCT_SPLIT,
}


def scheme_for_language(lang: str) -> TokenScheme:
    """Default target-unit scheme for a language code (``"zh"`` or ``"en-zh"``)."""
    code = lang.split("-")[-1].lower()
    return LANGUAGE_SCHEMES.get(code, TokenScheme.PUNCT_SPLIT)


@dataclass(frozen=True)
class TimedWord:
    text: str
    end_s: float
    start_s: float = 0.0

    def __post_init__(self):
        if not self.text or any(ch.isspace() for ch in self.text):
            raise ValidationError(f"word text must be non-empty without whitespace: {self.text!r}")
        if self.start_s < 0 or self.end_s < 0:
            raise ValidationError(f"negative timestamp on {self.text!r}")
        if self.end_s < self.start_s:
            raise ValidationError(f"{self.text!r} ends ({self.end_s}) before it starts ({self.start_s})")


@dataclass(frozen=True)
class SourceTranscript:
    words: tuple[TimedWord, ...]
    id: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ValidationError("transcript must contain at least one word")
        for k in range(1, len(self.words)):
            if self.words[k].end_s < self.words[k - 1].end_s:
                raise ValidationError(
                    f"end time of word {k + 1} ({self.words[k].end_s}) precedes word {k} "
                    f"({self.words[k - 1].end_s})",
                    index=k + 1,
                )

    def __len__(self) -> int:
        return len(self.words)

    @property
    def ends(self) -> list[float]:
        return [w.end_s for w in self.words]

    @property
    def texts(self) -> list[str]:
        return [w.text for w in self.words]

    @classmethod
    def from_ends(cls, ends: Sequence[float], texts: Sequence[str] | None = None, id: str = "1"):
        """Build a transcript from end times, with default starts."""
        texts = texts or [f"w{k + 1}" for k in range(len(ends))]
        words = []
        prev = 0.0
        for text, end in zip(texts, ends):
            words.append(TimedWord(text, float(end), min(prev, float(end))))
            prev = float(end)
        return cls(tuple(words), id=id)


@dataclass(frozen=True)
class SentenceAlignment:
    """1-based ``(source, target)`` links."""

    links: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        for s, t in self.links:
            if s < 1 or t < 1:
                raise ValidationError(f"alignment link {s}-{t} is not 1-based")

    def __len__(self) -> int:
        return len(self.links)

    def sorted_links(self) -> list[tuple[int, int]]:
        return sorted(self.links, key=lambda link: (link[1], link[0]))

    def validate(self, src_len: int, tgt_len: int) -> "SentenceAlignment":
        for s, t in self.sorted_links():
            if s > src_len or t > tgt_len:
                raise ValidationError(
                    f"link {s}-{t} outside sentence pair of lengths {src_len}x{tgt_len}"
                )
        return self

    def to_pharaoh(self, one_based: bool = False) -> str:
        shift = 0 if one_based else 1
        return " ".join(f"{s - shift}-{t - shift}" for s, t in sorted(self.links))


@dataclass(frozen=True)
class ParallelRecord:
    id: str
    source_text: str
    target_hypothesis: str
    target_reference: str
    external_scores: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------- transcripts

def _words_from_records(records, line: int | None) -> list[TimedWord]:
    if not isinstance(records, list):
        raise ParseError("expected a JSON list of word records", line)
    words = []
    prev_end = 0.0
    for k, rec in enumerate(records, start=1):
        if not isinstance(rec, dict) or "w" not in rec or "end" not in rec:
            raise ParseError(f"word record {k} needs 'w' and 'end' fields", line)
        text, end = rec["w"], rec["end"]
        start = rec.get("start", 0.0 if k == 1 else prev_end)
        if not isinstance(text, str) or isinstance(end, bool) or not isinstance(end, (int, float)):
            raise ParseError(f"word record {k} has wrong field types", line)
        if isinstance(start, bool) or not isinstance(start, (int, float)):
            raise ParseError(f"word record {k} has a non-numeric start", line)
        try:
            words.append(TimedWord(unicodedata.normalize("NFC", text), float(end), float(start)))
        except ValidationError as exc:
            raise ValidationError(f"word {k}: {exc}", index=k) from None
        prev_end = float(end)
    return words


def _transcript_from_line(text: str, line: int) -> SourceTranscript:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line) from None
    sid = str(line)
    if isinstance(obj, dict):
        if "words" not in obj:
            raise ParseError("object record needs a 'words' list", line)
        sid = str(obj.get("id", sid))
        obj = obj["words"]
    words = _words_from_records(obj, line)
    return SourceTranscript(tuple(words), id=sid)


def parse_transcripts(content: bytes | str) -> list[SourceTranscript]:
    """Parse a transcript file (one sentence per non-empty line)."""
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    out = []
    for n, raw in enumerate(content.splitlines(), start=1):
        if raw.strip():
            out.append(_transcript_from_line(raw, n))
    return out


def parse_transcript(content: bytes | str) -> SourceTranscript:
    """Parse exactly one transcript record."""
    items = parse_transcripts(content)
    if len(items) != 1:
        raise ParseError(f"expected one transcript record, found {len(items)}")
    return items[0]


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def serialize_transcript(tr: SourceTranscript, line: int | None = None) -> str:
    """One transcript line; emits the object form when the id is not positional."""
    records = []
    prev_end = 0.0
    for k, w in enumerate(tr.words, start=1):
        rec = {"w": w.text, "end": w.end_s}
        default_start = 0.0 if k == 1 else prev_end
        if w.start_s != default_start:
            rec["start"] = w.start_s
        records.append(rec)
        prev_end = w.end_s
    if line is not None and tr.id == str(line):
        return json.dumps(records, ensure_ascii=False)
    return json.dumps({"id": tr.id, "words": records}, ensure_ascii=False)


def serialize_transcripts(items: Iterable[SourceTranscript]) -> str:
    return "".join(serialize_transcript(tr, n) + "\n" for n, tr in enumerate(items, start=1))


def read_transcripts(path: str | Path) -> list[SourceTranscript]:
    return parse_transcripts(Path(path).read_bytes())


# ---------------------------------------------------------------- alignments

_LINK = re.compile(r"^(-?\d+)-(-?\d+)$")


def parse_alignment(text: str, one_based: bool = False) -> SentenceAlignment:
    """Parse Pharaoh ``i-j`` links; input is 0-based unless ``one_based``."""
    shift = 0 if one_based else 1
    links = set()
    for tok in text.split():
        m = _LINK.match(tok)
        if not m:
            raise ParseError(f"alignment token {tok!r} is not of the form i-j")
        s, t = int(m.group(1)) + shift, int(m.group(2)) + shift
        if s < 1 or t < 1:
            raise ParseError(f"alignment token {tok!r} has an index below the first word")
        links.add((s, t))
    return SentenceAlignment(frozenset(links))


def parse_alignments(content: str, one_based: bool = False) -> list[SentenceAlignment]:
    out = []
    for n, raw in enumerate(content.splitlines(), start=1):
        try:
            out.append(parse_alignment(raw, one_based))
        except ParseError as exc:
            raise ParseError(str(exc), n) from None
    return out


def read_alignments(path: str | Path, one_based: bool = False) -> list[SentenceAlignment]:
    return parse_alignments(Path(path).read_text(encoding="utf-8"), one_based)


# ---------------------------------------------------------------- tokenization

def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def _punct_split_word(word: str) -> list[str]:
    tokens: list[str] = []
    buf: list[str] = []
    for k, ch in enumerate(word):
        # keep decimal and thousands separators between digits
        if ch in ".," and 0 < k < len(word) - 1 and word[k - 1].isdigit() and word[k + 1].isdigit():
            buf.append(ch)
        elif _is_punct(ch):
            if buf:
                tokens.append("".join(buf))
                buf = []
            tokens.append(ch)
        else:
            buf.append(ch)
    if buf:
        tokens.append("".join(buf))
    return tokens


def tokenize(text: str, scheme: TokenScheme | str = TokenScheme.WHITESPACE) -> list[str]:
    """Split text into target units under ``scheme`` (input is NFC-normalized first)."""
    scheme = TokenScheme(scheme)
    text = unicodedata.normalize("NFC", text)
    if scheme is TokenScheme.CHARACTER:
        return [ch for ch in text if not ch.isspace()]
    words = text.split()
    if scheme is TokenScheme.WHITESPACE:
        return words
    out: list[str] = []
    for w in words:
        out.extend(_punct_split_word(w))
    return out


def detokenize(tokens: Sequence[str], scheme: TokenScheme | str = TokenScheme.WHITESPACE) -> str:
    return ("" if TokenScheme(scheme) is TokenScheme.CHARACTER else " ").join(tokens)


# ---------------------------------------------------------------- parallel corpus

def parse_parallel(content: str) -> list[ParallelRecord]:
    """Parse ``id \\t source \\t hypothesis \\t reference [\\t metric=value ...]`` lines."""
    records: list[ParallelRecord] = []
    seen: set[str] = set()
    for n, raw in enumerate(content.splitlines(), start=1):
        if not raw.strip():
            continue
        cols = raw.split("\t")
        if len(cols) < 4:
            raise ParseError(f"expected at least 4 tab-separated columns, got {len(cols)}", n)
        sid, src, hyp, ref = cols[:4]
        scores = {}
        for extra in cols[4:]:
            name, sep, value = extra.partition("=")
            if not sep or not name:
                raise ParseError(f"extra column {extra!r} is not metric=value", n)
            try:
                scores[name] = float(value)
            except ValueError:
                raise ParseError(f"metric {name} has non-numeric value {value!r}", n) from None
        if sid in seen:
            raise ValidationError(f"duplicate record id {sid!r} on line {n}")
        seen.add(sid)
        norm = lambda s: unicodedata.normalize("NFC", s)  # noqa: E731
        records.append(ParallelRecord(sid, norm(src), norm(hyp), norm(ref), scores))
    return records


def read_parallel(path: str | Path) -> list[ParallelRecord]:
    return parse_parallel(Path(path).read_text(encoding="utf-8"))


def serialize_parallel(records: Iterable[ParallelRecord]) -> str:
    lines = []
    for r in records:
        cols = [r.id, r.source_text, r.target_hypothesis, r.target_reference]
        cols += [f"{k}={v!r}" for k, v in sorted(r.external_scores.items())]
        lines.append("\t".join(cols) + "\n")
    return "".join(lines)
