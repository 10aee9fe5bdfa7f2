import json
import random
import warnings
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import perfect_response
from wfsynth.corpus import bundled_responses_dir, corpus_from_json, round_from_json
from wfsynth.errors import IncompleteCoverage
from wfsynth.evaluation import (
    FAIL,
    PASS,
    PASS_STEPS,
    SKIPPED,
    PassReport,
    ResolveReport,
    StepVerdict,
    average_metrics,
    compute_metrics,
    evaluate,
    load_journal,
    load_responses_dir,
    pass_pipeline,
    resolve_pipeline,
)
from wfsynth.graph import build
from wfsynth.judges import JudgeVerdict, RuleJudge
from wfsynth.parsing import doc_from_json, extract_sections, render_response

# --- synthetic corpora for metric arithmetic -----------------------------------------------------


def _round_json(cases=3):
    return {"instruction": "do it", "reference_vars": {"inputs": [{"name": "q", "type": "string"}],
                                                      "outputs": [{"name": "a", "type": "string"}]},
            "key_nodes": ["llm"], "test_cases": [{"input": {"q": f"c{i}"}} for i in range(cases)]}


def synthetic_corpus(rounds_per_task, cases=3, domains=("Education",)):
    tasks = []
    for i, n in enumerate(rounds_per_task):
        tasks.append({"id": f"t{i}", "domain": domains[i % len(domains)], "rounds": [_round_json(cases) for _ in range(n)]})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # odd case counts are deliberate here
        return corpus_from_json({"tasks": tasks})


def _pass(task, rnd, ok):
    steps = tuple(StepVerdict(s, PASS) for s in PASS_STEPS) if ok else (
        (StepVerdict("format", FAIL, "x"),) + tuple(StepVerdict(s, SKIPPED) for s in PASS_STEPS[1:]))
    return PassReport(task, rnd, steps)


def _resolve(task, rnd, case, ok):
    return ResolveReport(task, rnd, case, (StepVerdict("execution", PASS), StepVerdict("output", PASS if ok else FAIL)))


def test_worked_example():
    corpus = synthetic_corpus([3])
    passes = [_pass("t0", 0, True), _pass("t0", 1, True), _pass("t0", 2, False)]
    resolves = [_resolve("t0", 0, c, True) for c in range(3)] + [_resolve("t0", 1, c, c == 0) for c in range(3)]
    m = compute_metrics(passes, resolves, corpus)
    assert m.pass_rate == pytest.approx(66.67, abs=0.01)
    assert m.resolve_rate == pytest.approx(44.44, abs=0.01)


def test_all_failed():
    corpus = synthetic_corpus([2, 2])
    m = compute_metrics([_pass(t, r, False) for t in ("t0", "t1") for r in (0, 1)], [], corpus)
    assert (m.pass_rate, m.resolve_rate) == (0.0, 0.0)


def test_incomplete_coverage():
    corpus = synthetic_corpus([2])
    with pytest.raises(IncompleteCoverage):
        compute_metrics([_pass("t0", 0, False)], [], corpus)
    with pytest.raises(IncompleteCoverage):
        compute_metrics([_pass("t0", 0, True), _pass("t0", 1, False)], [_resolve("t0", 0, 0, True)], corpus)


def test_failed_subtask_cases_count_unresolved_even_with_reports():
    corpus = synthetic_corpus([2])
    resolves = [_resolve("t0", r, c, True) for r in (0, 1) for c in range(3)]
    m = compute_metrics([_pass("t0", 0, True), _pass("t0", 1, False)], resolves, corpus)
    assert m.overall.resolved == 3 and m.overall.cases == 6


@given(st.randoms(use_true_random=False))
def test_resolve_rate_never_exceeds_pass_rate(rng):
    corpus = synthetic_corpus([rng.randint(2, 4) for _ in range(rng.randint(1, 5))], cases=rng.randint(1, 4))
    passes, resolves = [], []
    for task, rnd in corpus.subtasks():
        ok = rng.random() < 0.6
        passes.append(_pass(task.id, rnd.index, ok))
        resolves += [_resolve(task.id, rnd.index, c, rng.random() < 0.5) for c in range(len(rnd.test_cases))]
    m = compute_metrics(passes, resolves, corpus)
    assert m.resolve_rate <= m.pass_rate + 1e-9


def test_breakdowns_and_averaging():
    corpus = synthetic_corpus([2, 3], domains=("Research", "AIGC"))
    runs = []
    for seed in range(4):
        rng = random.Random(seed)
        passes = [_pass(t.id, r.index, rng.random() < 0.5) for t, r in corpus.subtasks()]
        resolves = [_resolve(t.id, r.index, c, rng.random() < 0.5) for t, r in corpus.subtasks() for c in range(3)]
        runs.append(compute_metrics(passes, resolves, corpus))
    avg = average_metrics(runs)
    assert avg.runs == 4
    assert avg.to_json() == average_metrics(list(reversed(runs))).to_json()
    assert avg.pass_rate == pytest.approx(sum(m.pass_rate for m in runs) / 4)
    assert set(avg.by_domain) == {"Research", "AIGC"} and set(avg.by_round) == {1, 2, 3}
    assert runs[0].by_round[3].subtasks == 1


# --- pass pipeline ---------------------------------------------------------------------------------


def _corpus_round(corpus, task, k):
    return corpus.task(task).rounds[k - 1]


def test_perfect_response_passes_all_steps(corpus):
    rep = pass_pipeline(perfect_response("study-planner", 2), _corpus_round(corpus, "study-planner", 2))
    assert rep.passed and [s.status for s in rep.steps] == [PASS] * 4


def _edit_workflow(text, fn):
    parsed = extract_sections(text)
    data = json.loads(parsed.workflow_text)
    fn(data)
    return render_response(parsed.__class__(parsed.node_selection, parsed.design_principle, json.dumps(data)))


def _rename_output(d):
    d["nodes_info"][-1]["params"]["outputs"][0]["name"] = "schedule"


def _add_cycle(d):
    d["edges"].append(["3", 0, "2"])


def _bad_ref(d):
    d["nodes_info"][1]["params"]["prompt"] = "{{#7.text#}}"


CASES = [
    (lambda t: t.replace("</workflow>", ""), "format"),
    (lambda t: t.replace('"edges"', "'edges'"), "format"),
    (lambda t: _edit_workflow(t, _add_cycle), "conversion"),
    (lambda t: _edit_workflow(t, _bad_ref), "conversion"),
    (lambda t: _edit_workflow(t, _rename_output), "variables"),
    (lambda t: t.replace("start, llm, end", "start, llm, end, code"), "logic"),
]


@pytest.mark.parametrize("mutate,step", CASES)
def test_each_step_can_fail_and_short_circuits(corpus, mutate, step):
    rep = pass_pipeline(mutate(perfect_response("study-planner", 1)), _corpus_round(corpus, "study-planner", 1))
    assert rep.first_failure == step
    k = PASS_STEPS.index(step)
    assert [s.status for s in rep.steps] == [PASS] * k + [FAIL] + [SKIPPED] * (3 - k)


def test_missing_key_node_fails_logic(corpus):
    rnd = replace(_corpus_round(corpus, "study-planner", 1), key_nodes=frozenset({"llm", "iteration"}))
    rep = pass_pipeline(perfect_response("study-planner", 1), rnd)
    assert rep.first_failure == "logic" and "iteration" in rep.detail


def test_glm_style_declaration_fails_logic(corpus):
    parsed = extract_sections(perfect_response("study-planner", 2))
    declared = tuple(k for k in parsed.node_selection if k not in ("code", "iteration-start"))
    text = render_response(parsed.__class__(declared, parsed.design_principle, parsed.workflow_text))
    rep = pass_pipeline(text, _corpus_round(corpus, "study-planner", 2))
    assert rep.first_failure == "logic" and "node-set" in rep.detail


def test_pass_without_round_checks_structure_only():
    assert pass_pipeline(perfect_response("code-doc", 3)).passed


# --- resolve pipeline ---------------------------------------------------------------------------------


class NoCallJudge(RuleJudge):
    def semantic_resolve(self, *args, **kwargs):
        raise AssertionError("judge must not be consulted")


def test_file_only_output_resolves_without_judge(corpus):
    rnd = _corpus_round(corpus, "poster-studio", 1)
    rep = pass_pipeline(perfect_response("poster-studio", 1), rnd)
    graph = rep.graph
    # keep only the file output
    doc = json.loads(graph.to_doc().dumps())
    end = next(n for n in doc["nodes_info"] if n["type"] == "end")
    end["params"]["outputs"] = [o for o in end["params"]["outputs"] if "files" in o["value"]]
    g = build(doc_from_json(doc))
    rr = resolve_pipeline(g, rnd, rnd.test_cases[0], judge=NoCallJudge())
    assert rr.resolved and rr.steps[1].detail == "file outputs only"


def test_wrong_extension_fails_output_step(corpus):
    rnd = _corpus_round(corpus, "poster-studio", 1)
    seeded = (bundled_responses_dir("seeded") / "poster-studio" / "round1.txt").read_text(encoding="utf-8")
    rep = pass_pipeline(seeded, rnd)
    assert rep.passed
    rr = resolve_pipeline(rep.graph, rnd, rnd.test_cases[0])
    assert rr.first_failure == "output" and ".mp3" in rr.steps[1].detail


def test_handler_error_fails_execution(corpus):
    rnd = _corpus_round(corpus, "study-planner", 1)
    g = pass_pipeline(perfect_response("study-planner", 1), rnd).graph

    def broken(node, params, ctx):
        raise RuntimeError("boom")
    from wfsynth.handlers import default_test_handlers
    handlers = dict(default_test_handlers(), llm=broken)
    rr = resolve_pipeline(g, rnd, rnd.test_cases[0], handlers)
    assert rr.first_failure == "execution" and "HandlerError" in rr.steps[0].detail
    assert rr.steps[1].status == SKIPPED


def test_text_output_consults_judge_with_history(corpus):
    seen = {}

    class Spy(RuleJudge):
        def semantic_resolve(self, instructions, text_output, case_input, ref_output):
            seen.update(instructions=instructions, output=text_output, input=case_input, ref=ref_output)
            return JudgeVerdict(True, "semantic", "ok", transcript="raw")

    task = corpus.task("study-planner")
    rnd = task.rounds[1]
    g = pass_pipeline(perfect_response("study-planner", 2), rnd).graph
    rr = resolve_pipeline(g, rnd, rnd.test_cases[0], judge=Spy(), instructions=task.instructions_until(1))
    assert rr.resolved and rr.transcript == "raw"
    assert seen["instructions"] == [task.rounds[0].instruction, rnd.instruction]
    assert seen["ref"] == rnd.test_cases[0].ref_output


def test_empty_output_fails_execution():
    rnd = round_from_json(_round_json())
    g = build(doc_from_json({"nodes_info": [
        {"id": "1", "type": "start", "params": {"variables": [{"name": "q", "type": "string"}]}},
        {"id": "2", "type": "end", "params": {"outputs": []}}], "edges": [["1", 0, "2"]]}))
    rr = resolve_pipeline(g, rnd, rnd.test_cases[0])
    assert rr.first_failure == "execution" and rr.steps[0].detail == "no outputs"


# --- harness over the bundled corpus -------------------------------------------------------------


SEEDED_FIRST_FAILURES = {
    ("study-planner", 0): "format",
    ("study-planner", 2): "variables",
    ("deep-research", 1): "logic",
    ("support-triage", 1): "conversion",
    ("code-doc", 1): "logic",
}


def test_seeded_breakdown(corpus):
    result = evaluate(corpus, load_responses_dir(bundled_responses_dir("seeded")))
    failures = {(r.task_id, r.round_index): r.first_failure for r in result.pass_reports if not r.passed}
    assert failures == SEEDED_FIRST_FAILURES
    m = result.metrics
    assert {k: (r.passed, r.subtasks, r.resolved, r.cases) for k, r in m.by_round.items()} == {
        1: (5, 6, 9, 18), 2: (3, 6, 8, 18), 3: (1, 2, 3, 6)}
    assert {k: (r.passed, r.subtasks, r.resolved, r.cases) for k, r in m.by_domain.items()} == {
        "Education": (1, 3, 3, 9), "Research": (1, 2, 3, 6), "Document": (2, 2, 2, 6),
        "Enterprise": (1, 2, 3, 6), "Developer": (2, 3, 6, 9), "AIGC": (2, 2, 3, 6)}


def test_evaluate_parallel_matches_serial(corpus):
    responses = load_responses_dir(bundled_responses_dir("seeded"))
    serial = evaluate(corpus, responses).to_json()
    assert evaluate(corpus, responses, jobs=4).to_json() == serial


def test_partial_responses(corpus):
    responses = load_responses_dir(bundled_responses_dir("perfect"))
    responses.pop(("code-doc", 2))
    with pytest.raises(IncompleteCoverage):
        evaluate(corpus, responses)
    m = evaluate(corpus, responses, partial=True).metrics
    assert (m.overall.passed, m.overall.resolved) == (13, 39)


def test_load_journal(tmp_path):
    path = tmp_path / "journal.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in [
        {"event": "attempt", "task": "a", "round": 1},
        {"event": "turn", "task": "a", "round": 1, "response": "r1"},
        {"event": "turn", "task": "a", "round": 2, "response": "r2"},
    ]) + "\n")
    assert load_journal(path) == {("a", 0): "r1", ("a", 1): "r2"}
