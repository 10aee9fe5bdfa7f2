import json
import shutil

import pytest

from conftest import FIXTURES, perfect_response
from wfsynth.cli import main
from wfsynth.corpus import bundled_responses_dir
from wfsynth.dify import import_check


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_catalog(capsys):
    code, out, _ = run_cli(capsys, "catalog")
    assert code == 0 and "## iteration (" in out
    code, out, _ = run_cli(capsys, "catalog", "--json")
    assert code == 0 and json.loads(out)


def test_validate_response_and_bare_workflow(capsys, tmp_path):
    resp = tmp_path / "r.txt"
    resp.write_text(perfect_response("study-planner", 2))
    code, out, _ = run_cli(capsys, "validate", str(resp))
    assert code == 0 and out.strip().endswith("PASS")
    code, out, _ = run_cli(capsys, "validate", str(FIXTURES / "studyplanner_round2.json"))
    assert code == 0 and out.startswith("note: bare workflow")


def test_validate_against_round(capsys, tmp_path, corpus):
    resp = tmp_path / "r.txt"
    resp.write_text(perfect_response("study-planner", 1))
    round_file = tmp_path / "round.json"
    raw = json.loads((bundled_responses_dir().parents[1] / "mini_corpus.json").read_text())
    rnd = next(t for t in raw["tasks"] if t["id"] == "study-planner")["rounds"][1]
    round_file.write_text(json.dumps(rnd))
    code, out, _ = run_cli(capsys, "validate", str(resp), "--round", str(round_file), "--json")
    assert code == 1 and json.loads(out)["pass"] is False


def test_validate_containment_fixture_fails(capsys):
    code, out, _ = run_cli(capsys, "validate", str(FIXTURES / "studyplanner_containment.json"))
    assert code == 1 and "FAIL at conversion" in out


def test_convert_with_import_check(capsys, tmp_path):
    target = tmp_path / "app.yml"
    code, out, err = run_cli(capsys, "convert", str(FIXTURES / "studyplanner_round2.json"), "-o", str(target),
                             "--import-check")
    assert code == 0 and "round trip ok" in err
    import_check(target.read_text())


def test_convert_rejects_cycle(capsys):
    code, _, err = run_cli(capsys, "convert", str(FIXTURES / "studyplanner_containment.json"))
    assert code == 1 and err.startswith("error:")


def test_push_needs_platform_url(capsys, monkeypatch):
    monkeypatch.delenv("WFSYNTH_PLATFORM_URL", raising=False)
    code, _, err = run_cli(capsys, "convert", str(FIXTURES / "studyplanner_round2.json"), "--push")
    assert code == 2 and "platform_url" in err


def test_run_with_scripts_and_trace(capsys, tmp_path):
    case = json.loads((FIXTURES / "studyplanner_case.json").read_text())
    inputs, scripts = tmp_path / "in.json", tmp_path / "s.json"
    inputs.write_text(json.dumps(case["input"]))
    scripts.write_text(json.dumps(case["scripts"]))
    trace = tmp_path / "trace.jsonl"
    code, out, _ = run_cli(capsys, "run", str(FIXTURES / "studyplanner_round2.json"), "--inputs", str(inputs),
                           "--scripts", str(scripts), "--trace", str(trace))
    assert code == 0 and "Pandas" in json.loads(out)["text"]["tutorial"]
    assert all(json.loads(line) for line in trace.read_text().splitlines())


def test_run_input_mismatch_is_usage_error(capsys, tmp_path):
    inputs = tmp_path / "in.json"
    inputs.write_text('{"nope": 1}')
    code, _, err = run_cli(capsys, "run", str(FIXTURES / "studyplanner_round2.json"), "--inputs", str(inputs))
    assert code == 2 and "InputMismatch" in err


def test_run_strict_without_scripts_fails(capsys, tmp_path):
    case = json.loads((FIXTURES / "studyplanner_case.json").read_text())
    inputs = tmp_path / "in.json"
    inputs.write_text(json.dumps(case["input"]))
    code, _, err = run_cli(capsys, "run", str(FIXTURES / "studyplanner_round2.json"), "--inputs", str(inputs),
                           "--strict")
    assert code == 1 and "ScriptMissing" in err


def test_eval_seeded(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "eval", "--responses", str(bundled_responses_dir("seeded")),
                           "--out", str(tmp_path), "--no-figures")
    assert code == 0 and out.startswith("%Pas. 64.29  %Res. 47.62  (9/14 subtasks, 20/42 cases, runs=1)")
    assert (tmp_path / "results.json").exists() and not list(tmp_path.glob("*.png"))


def test_eval_runs_average(capsys, tmp_path):
    responses = tmp_path / "responses"
    shutil.copytree(bundled_responses_dir("seeded"), responses / "run1")
    shutil.copytree(bundled_responses_dir("perfect"), responses / "run2")
    code, out, _ = run_cli(capsys, "eval", "--responses", str(responses), "--runs", "2", "--out",
                           str(tmp_path / "out"), "--no-figures")
    assert code == 0 and "runs=2" in out
    # mean of (64.29, 100) and (47.62, 100)
    assert out.startswith("%Pas. 82.14  %Res. 73.81")
    assert (tmp_path / "out" / "run1" / "results.json").exists()
    code, _, err = run_cli(capsys, "eval", "--responses", str(responses), "--runs", "3")
    assert code == 2 and "run3" in err


def test_eval_incomplete_needs_partial(capsys, tmp_path):
    responses = tmp_path / "r"
    shutil.copytree(bundled_responses_dir("perfect"), responses)
    (responses / "code-doc" / "round3.txt").unlink()
    code, _, err = run_cli(capsys, "eval", "--responses", str(responses), "--out", str(tmp_path / "o"))
    assert code == 2 and "--partial" in err
    code, out, _ = run_cli(capsys, "eval", "--responses", str(responses), "--partial", "--out",
                           str(tmp_path / "o"), "--no-figures")
    assert code == 0 and "(13/14 subtasks, 39/42 cases" in out


def test_agent_scripted_then_eval_journals(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "agent", "--script-dir", str(bundled_responses_dir("perfect")), "--out",
                           str(tmp_path), "--no-figures", "--jobs", "2")
    assert code == 0 and out.startswith("%Pas. 100.00  %Res. 100.00")
    assert len(list((tmp_path / "journals").glob("*.jsonl"))) == 6
    code, out, _ = run_cli(capsys, "eval", "--responses", str(tmp_path / "journals"), "--out",
                           str(tmp_path / "again"), "--no-figures")
    assert code == 0 and out.startswith("%Pas. 100.00  %Res. 100.00")


def test_agent_reports_aborted_tasks(capsys, tmp_path):
    scripts = tmp_path / "scripts"
    shutil.copytree(bundled_responses_dir("perfect"), scripts)
    shutil.rmtree(scripts / "poster-studio")
    code, _, err = run_cli(capsys, "agent", "--script-dir", str(scripts), "--out", str(tmp_path / "o"),
                           "--no-figures")
    assert code == 1 and "aborted poster-studio" in err


def test_agent_needs_script_dir(capsys):
    code, _, err = run_cli(capsys, "agent")
    assert code == 2 and "--script-dir" in err


def test_repair_explain(capsys, tmp_path):
    text = perfect_response("study-planner", 1).replace("<workflow>", "<workflow>\n```json").replace(
        "</workflow>", "```\n</workflow>")
    f = tmp_path / "r.txt"
    f.write_text(text)
    code, out, err = run_cli(capsys, "repair", str(f), "--explain")
    assert code == 0 and "applied: fence" in err
    assert "```" not in out


def test_config_file_and_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"out_dir": "results", "judge": "rule"}))
    code, _, _ = run_cli(capsys, "--workspace", str(tmp_path), "--config", "cfg.json", "eval", "--responses",
                         str(bundled_responses_dir("perfect")), "--no-figures")
    assert code == 0 and (tmp_path / "results" / "results.json").exists()
    cfg.write_text(json.dumps({"colour": "blue"}))
    code, _, err = run_cli(capsys, "--config", str(cfg), "catalog")
    assert code == 2 and "colour" in err


@pytest.mark.parametrize("argv", [["validate", "/no/such/file"], ["bogus"], []])
def test_usage_errors(capsys, argv):
    code, _, _ = run_cli(capsys, *argv)
    assert code == 2
