import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from wfsynth.catalog import default_catalog
from wfsynth.corpus import bundled_responses_dir, load_corpus
from wfsynth.parsing import doc_from_json

# first examples pay for imports and regex compilation; wall-clock deadlines only add flakiness
settings.register_profile("wfsynth", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wfsynth")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


def perfect_response(task_id: str, round_number: int) -> str:
    return (bundled_responses_dir("perfect") / task_id / f"round{round_number}.txt").read_text(encoding="utf-8")


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_doc(name: str):
    return doc_from_json(json.loads(fixture_text(name)))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
