import json
from pathlib import Path

import pytest

from simulact.cli import toy_dir
from simulact.corpus_io import SourceTranscript
from simulact.simulation import Decision

DATA = Path(__file__).parent / "data"

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.get_closest_marker("criterion"):
            item.add_marker(pytest.mark.acceptance)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    prev = _criteria.get(n, (title, True))[1]
    if report.failed or report.skipped:
        _criteria[n] = (title, False)
    elif report.when == "call":
        _criteria[n] = (title, prev)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")


# ---------------------------------------------------------------- fixtures

def load_decisions(name: str) -> tuple[list[str], list[Decision]]:
    """Word-by-word decision table: source word, action, output, optional drop span."""
    words, decisions = [], []
    for line in (DATA / name).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t") + [""] * 3
        word, action, output, span = cols[:4]
        words.append(word)
        drop = tuple(int(x) for x in span.split("-")) if span else None
        decisions.append(Decision(action, (output,) if output else (), drop))
    return words, decisions


def synthetic_transcript(words, seconds_per_word=0.4, sid="1"):
    return SourceTranscript.from_ends([round(seconds_per_word * (i + 1), 6) for i in range(len(words))],
                                      words, id=sid)


@pytest.fixture
def leave_one_out():
    return load_decisions("leave_one_out_zh.tsv")


@pytest.fixture
def classify_abstract():
    return load_decisions("classify_abstract_zh.tsv")


@pytest.fixture
def toy():
    return toy_dir()


@pytest.fixture
def reference_stats():
    from simulact.prompts import parse_stats_file

    return parse_stats_file((DATA / "prompt_stats_en_zh.tsv").read_text(encoding="utf-8"))


def read_json_lines(path):
    return [json.loads(x) for x in Path(path).read_text(encoding="utf-8").splitlines() if x.strip()]
