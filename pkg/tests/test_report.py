import csv
import json

import pytest

from wfsynth.corpus import bundled_responses_dir
from wfsynth.evaluation import evaluate, load_responses_dir
from wfsynth.report import write_report


@pytest.fixture(scope="module")
def seeded_result():
    from wfsynth.corpus import load_corpus
    return evaluate(load_corpus(), load_responses_dir(bundled_responses_dir("seeded")))


def test_report_files(tmp_path, seeded_result):
    paths = write_report(tmp_path, seeded_result)
    doc = json.loads(paths["results"].read_text())
    assert doc["metrics"] == seeded_result.metrics.to_json()
    rows = list(csv.DictReader(paths["per_round"].open()))
    assert [r["round"] for r in rows] == ["1", "2", "3", "all"]
    assert (rows[-1]["pass_rate"], rows[-1]["resolve_rate"]) == ("64.29", "47.62")
    domains = list(csv.DictReader(paths["per_domain"].open()))
    assert len(domains) == 6
    for key in ("round_figure", "domain_figure"):
        assert paths[key].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_is_reproducible(tmp_path, seeded_result):
    a = write_report(tmp_path / "a", seeded_result)
    b = write_report(tmp_path / "b", seeded_result)
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes(), key


def test_report_without_figures(tmp_path, seeded_result):
    paths = write_report(tmp_path, metrics=seeded_result.metrics, figures=False)
    assert set(paths) == {"results", "per_round", "per_domain"}
    assert not list(tmp_path.glob("*.png"))
    with pytest.raises(ValueError):
        write_report(tmp_path)
