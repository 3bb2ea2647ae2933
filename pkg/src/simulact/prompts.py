"""Per-action statistics, action-aware prompt rendering and system ranking."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import ParseError, ValidationError
from .simulation import ActionKind

LANGUAGE_NAMES = {"en": "English", "zh": "Chinese", "de": "German", "ja": "Japanese"}

ACTION_HELP = {
    ActionKind.READ: "wait for the next source word (default).",
    ActionKind.WRITE: "append a target word or phrase.",
    ActionKind.DROP: "discard source words already read when they carry no content: "
                     "fillers such as \"uh\" or \"um\", repetitions, false starts or "
                     "self-corrections. Use sparingly.",
    ActionKind.PARTIAL_SUMMARIZATION: "condense redundant or equivalent expressions while "
                                      "keeping meaning and tone (politeness, hedging).",
    ActionKind.CUT: "end the current sentence here and continue with a new, independently "
                    "translatable one. Use only for long or complex sentences.",
    ActionKind.PRONOMINALIZATION: "replace a repeated noun phrase with a pronoun, only when "
                                  "the referent is unambiguous.",
}


@dataclass(frozen=True)
class ActionStats:
    action_set: str
    mean_bleu: float
    mean_laal_sec: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"{self.action_set}: n must be >= 1")
        if not (math.isfinite(self.mean_bleu) and math.isfinite(self.mean_laal_sec)):
            raise ValidationError(f"{self.action_set}: statistics must be finite")


def aggregate_stats(records: Iterable[tuple[str, float, float]]) -> list[ActionStats]:
    """Unweighted means of BLEU and LAAL per action set, ordered by label."""
    groups: dict[str, list[tuple[float, float]]] = {}
    for label, bleu, laal in records:
        groups.setdefault(label, []).append((float(bleu), float(laal)))
    if not groups:
        raise ValidationError("no records to aggregate")
    out = []
    for label in sorted(groups):
        rows = groups[label]
        # fsum keeps the means independent of record order
        out.append(ActionStats(label,
                               math.fsum(b for b, _ in rows) / len(rows),
                               math.fsum(l for _, l in rows) / len(rows),
                               len(rows)))
    return out


def action_kinds(label: str) -> list[ActionKind]:
    """Actions named by a stats label such as ``"Sentence_Cut + Drop"``."""
    parts = [p for chunk in label.split("+") for p in chunk.split("/")]
    return [ActionKind.parse(p) for p in parts if p.strip()]


class PromptMode(str, enum.Enum):
    STEPWISE = "step-wise"
    PREFIX = "prefix-feeding"
    FEWSHOT = "few-shot"


_TEMPLATE_FILES = {
    PromptMode.STEPWISE: "stepwise",
    PromptMode.PREFIX: "prefix",
    PromptMode.FEWSHOT: "fewshot",
}


@dataclass(frozen=True)
class PromptSpec:
    lang_pair: str
    allowed_actions: tuple[str, ...] = ()
    stats: tuple[ActionStats, ...] = ()
    mode: PromptMode = PromptMode.STEPWISE
    demonstrations: tuple[Mapping[str, str], ...] = ()
    stat_label: str = "AL"
    template_version: str = "v1"

    def __post_init__(self):
        object.__setattr__(self, "mode", PromptMode(self.mode))
        object.__setattr__(self, "allowed_actions", tuple(self.allowed_actions))
        object.__setattr__(self, "stats", tuple(self.stats))
        object.__setattr__(self, "demonstrations", tuple(self.demonstrations))
        if self.mode is not PromptMode.FEWSHOT:
            allowed = {ActionKind.READ, ActionKind.WRITE}
            for label in self.allowed_actions:
                allowed.update(action_kinds(label))
            for st in self.stats:
                missing = [k.value for k in action_kinds(st.action_set) if k not in allowed]
                if missing:
                    raise ValidationError(
                        f"stats row {st.action_set!r} names actions not allowed: {missing}")

    @property
    def languages(self) -> tuple[str, str]:
        src, _, tgt = self.lang_pair.partition("-")
        return src, tgt or src


def load_template(mode: PromptMode | str, version: str = "v1") -> str:
    name = f"{_TEMPLATE_FILES[PromptMode(mode)]}_{version}.txt"
    try:
        return resources.files("simulact").joinpath("templates", name).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"no prompt template {name}") from None


def format_stats_line(st: ActionStats, stat_label: str = "AL") -> str:
    return f"- {st.action_set} → {stat_label} ≈ {st.mean_laal_sec:.3f}s, BLEU ≈ {st.mean_bleu:.2f}"


def _action_lines(spec: PromptSpec) -> list[str]:
    lines = [f"- READ: {ACTION_HELP[ActionKind.READ]}", f"- WRITE: {ACTION_HELP[ActionKind.WRITE]}"]
    for label in spec.allowed_actions:
        kinds = action_kinds(label)
        if kinds in ([ActionKind.READ], [ActionKind.WRITE]):
            continue
        text = " ".join(ACTION_HELP[k] for k in kinds)
        lines.append(f"- {label}: {text}")
    return lines


def render_prompt(spec: PromptSpec, source: str = "<input sentence>") -> str:
    """Fill the versioned template for ``spec.mode``."""
    src, tgt = spec.languages
    fields = {
        "pair": f"{src.capitalize()}-{tgt.capitalize()}",
        "src_name": LANGUAGE_NAMES.get(src, src),
        "tgt_name": LANGUAGE_NAMES.get(tgt, tgt),
        "source": source,
        "actions": "",
        "stats": "",
        "demos": "",
    }
    if spec.mode is PromptMode.FEWSHOT:
        if not spec.demonstrations:
            raise ValidationError("few-shot prompts need at least one demonstration")
        fields["demos"] = "\n".join(json.dumps(dict(d), ensure_ascii=False)
                                    for d in spec.demonstrations)
    else:
        have = {tuple(action_kinds(st.action_set)) for st in spec.stats}
        for label in spec.allowed_actions:
            kinds = tuple(action_kinds(label))
            if set(kinds) <= {ActionKind.READ, ActionKind.WRITE}:
                continue
            if kinds not in have:
                raise ValidationError(f"no statistics for allowed action {label!r}")
        fields["actions"] = "\n".join(_action_lines(spec))
        fields["stats"] = "\n".join(format_stats_line(st, spec.stat_label) for st in spec.stats)
    template = Template(load_template(spec.mode, spec.template_version))
    return template.substitute(fields)


class Ranking(NamedTuple):
    text: str
    tied: bool


def rank_systems(scores: Mapping[str, float], lower_is_better: bool = True) -> Ranking:
    """Order systems best first, joined with ``" < "``; exact ties break by label."""
    if len(scores) < 2:
        raise ValidationError("ranking needs at least two systems")
    sign = 1.0 if lower_is_better else -1.0
    order = sorted(scores, key=lambda name: (sign * scores[name], name))
    values = [scores[name] for name in order]
    tied = any(values[k] == values[k + 1] for k in range(len(values) - 1))
    return Ranking(" < ".join(order), tied)


# ---------------------------------------------------------------- stats files

def parse_stats_file(content: str) -> list[ActionStats]:
    """Read per-sentence rows (label, bleu, laal) or aggregated rows (..., n).

    Per-sentence rows are aggregated; aggregated rows are returned as is.
    """
    sentence_rows: list[tuple[str, float, float]] = []
    aggregated: list[ActionStats] = []
    for n, raw in enumerate(content.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        cols = raw.split("\t")
        try:
            if len(cols) == 3:
                sentence_rows.append((cols[0], float(cols[1]), float(cols[2])))
            elif len(cols) == 4:
                aggregated.append(ActionStats(cols[0], float(cols[1]), float(cols[2]), int(cols[3])))
            else:
                raise ParseError(f"expected 3 or 4 tab-separated columns, got {len(cols)}", n)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad number ({exc})", n) from None
    if sentence_rows and aggregated:
        raise ParseError("mixed per-sentence and aggregated rows")
    return aggregated if aggregated else aggregate_stats(sentence_rows)


def dump_stats(stats: Sequence[ActionStats]) -> str:
    return "".join(f"{s.action_set}\t{s.mean_bleu!r}\t{s.mean_laal_sec!r}\t{s.n}\n" for s in stats)
