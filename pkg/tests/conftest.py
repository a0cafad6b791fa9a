import sys
from importlib.resources import files
from pathlib import Path

import pytest
from hypothesis import settings

from mgparser import close, load_table, parse_lexicon

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ANBN_PROBS = "S1 0.7\nS2 0.3\nMg2 0.4\nMg3 0.6\n"


def grammar_text(name: str) -> str:
    return files("mgparser").joinpath("data", f"{name}.mg").read_text()


@pytest.fixture(scope="session")
def anbn_lex():
    return parse_lexicon(grammar_text("anbn"))


@pytest.fixture(scope="session")
def cats_lex():
    return parse_lexicon(grammar_text("cats_and_mice"))


@pytest.fixture(scope="session")
def anbn(anbn_lex):
    return close(anbn_lex)


@pytest.fixture(scope="session")
def cats(cats_lex):
    return close(cats_lex)


@pytest.fixture(scope="session")
def anbn_table(anbn):
    return load_table(anbn, ANBN_PROBS)


# --- acceptance summary -----------------------------------------------------

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "ran": False})
    entry["ran"] = entry["ran"] or report.when == "call"
    entry["ok"] = entry["ok"] and not report.failed and not report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}  {status}  {entry['title']}")
