import itertools
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_doc, perfect_response
from graphgen import random_doc
from wfsynth.errors import AttemptsExhausted, Unrepairable
from wfsynth.graph import build, dominators
from wfsynth.parsing import Edge, WorkflowDoc, doc_from_json, extract_sections, render_response
from wfsynth.repair import (
    process_response,
    repair_fences,
    repair_json,
    repair_node_selection,
    repair_topology,
    unwrap_response_fence,
    verified_retry,
)

VALID = perfect_response("study-planner", 1)


# --- fences ---------------------------------------------------------------------------


def test_repair_fences_on_workflow_section():
    parsed = extract_sections(VALID)
    fenced = parsed.__class__(parsed.node_selection, parsed.design_principle, "```json\n" + parsed.workflow_text + "\n```")
    out = repair_fences(fenced)
    assert out.applied == ("fence",)
    assert json.loads(out.repaired.workflow_text) == json.loads(parsed.workflow_text)


def test_repair_fences_identity_when_clean():
    parsed = extract_sections(VALID)
    assert repair_fences(parsed).applied == ()


WRAPPERS = [
    (open_, close) for open_, close in itertools.product(
        ["```\n", "```xml\n", "```markdown\n", "```text\n", "~~~\n", "````\n", "  ```\n", "\n```md\n"],
        ["\n```", "\n```\n", "```", "\n```  \n\n"],
    )
]


def _wrap_variants():
    out = []
    for open_, close in WRAPPERS:
        marker = open_.strip().rstrip("abcdefghijklmnopqrstuvwxyz")
        close = close.replace("```", marker)
        out.append(open_ + VALID + close)
    out.append("```\n```xml\n" + VALID + "\n```\n```")
    return out[:20]


@pytest.mark.parametrize("wrapped", _wrap_variants(), ids=[f"wrap{i}" for i in range(20)])
def test_whole_response_fence_variants(wrapped):
    result = process_response(wrapped)
    assert result.stage is None
    assert set(result.repairs) <= {"fence"}
    assert result.parsed.workflow_doc == process_response(VALID).parsed.workflow_doc


def test_wrapped_response_with_fence_inside_tag_is_unwrapped():
    # the inner fence hides the closing tag from the first extraction
    text = "```\n" + VALID.replace("</workflow>", "```\n</workflow>") + "\n```"
    assert unwrap_response_fence("```\n" + VALID + "\n```") == VALID
    result = process_response(text)
    assert result.stage is None and result.repairs == ("fence",)


def test_unwrap_leaves_unfenced_text():
    assert unwrap_response_fence(VALID) == VALID
    assert unwrap_response_fence("```\nno closing marker") == "```\nno closing marker"


# --- lenient JSON --------------------------------------------------------------------------


@pytest.mark.parametrize("text,expected", [
    ('{"a":1,}', '{"a":1}'),
    ("{'a': 1}", '{"a": 1}'),
    ('{"a": "it\'s"}', '{"a": "it\'s"}'),
    ('{a: [1, 2,], "b": "x"}', '{"a": [1, 2], "b": "x"}'),
    ('{"a": 1 // count\n}', '{"a": 1 \n}'),
    ('{"a": "//not a comment",}', '{"a": "//not a comment"}'),
    ("{'q': 'say \"hi\"'}", '{"q": "say \\"hi\\""}'),
    # a comment between the comma and the next key must not hide the key position
    ('{"a": 1, // c\n b: 2}', '{"a": 1, \n "b": 2}'),
    ("{'a': 1, // it's\n 'b': 'x'}", '{"a": 1, \n "b": "x"}'),
])
def test_repair_json_examples(text, expected):
    assert repair_json(text) == expected


def test_repair_json_gives_up_unchanged():
    assert repair_json('{"a": ') == '{"a": '


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=5), inner, max_size=3),
    max_leaves=10,
)


@given(json_values, st.sampled_from([None, 2]))
def test_repair_json_identity_on_valid(value, indent):
    text = json.dumps(value, indent=indent)
    assert repair_json(text) == text


@given(st.dictionaries(st.from_regex(r"[a-z]{1,6}", fullmatch=True), st.integers(), min_size=1, max_size=4))
def test_trailing_comma_variant_decodes_to_original(obj):
    text = json.dumps(obj)[:-1] + ",}"
    assert json.loads(repair_json(text)) == obj


# --- topology --------------------------------------------------------------------------------


def test_containment_edge_removed():
    d = fixture_doc("studyplanner_containment.json")
    fixed = repair_topology(d)
    assert set(d.edges) - set(fixed.edges) == {Edge("5", 0, "5-1")}
    assert fixed.nodes_info == d.nodes_info
    build(fixed)


def _chain(extra):
    nodes = [{"id": "1", "type": "start", "params": {"variables": [{"name": "q", "type": "string"}]}}]
    nodes += [{"id": str(i), "type": "llm", "params": {"prompt": "{{#1.q#}}"}} for i in (2, 3, 4)]
    nodes.append({"id": "5", "type": "end", "params": {"outputs": [{"name": "a", "value": "{{#4.text#}}"}]}})
    return doc_from_json({"nodes_info": nodes, "edges": [["1", 0, "2"], ["2", 0, "3"], ["3", 0, "4"], ["4", 0, "5"]] + extra})


def test_chain_back_edge_recovered():
    assert repair_topology(_chain([["4", 0, "2"]])) == _chain([])


def test_identity_on_valid_graph():
    d = _chain([])
    assert repair_topology(d) is d


def test_detached_cycle_unrepairable():
    d = _chain([])
    nodes = [n.to_json() for n in d.nodes_info] + [
        {"id": "6", "type": "llm", "params": {"prompt": "x"}}, {"id": "7", "type": "llm", "params": {"prompt": "y"}}]
    edges = [[e.source, e.port, e.target] for e in d.edges]
    broken = doc_from_json({"nodes_info": nodes, "edges": edges + [["6", 0, "7"], ["7", 0, "6"]]})
    with pytest.raises(Unrepairable):
        repair_topology(broken)


def test_non_topology_defect_unrepairable():
    d = doc_from_json({"nodes_info": [{"id": "1", "type": "start", "params": {"variables": []}}], "edges": []})
    with pytest.raises(Unrepairable):
        repair_topology(d)


def _inject_back_edge(rng, doc):
    """Add u -> v where v strictly dominates u, so every DFS from start meets it as the back edge."""
    g = build(doc)
    dom = dominators(g, None)
    candidates = sorted(
        (u, v) for u, ds in dom.items() for v in ds
        if v != u and g.node(u).kind != "end" and g.node(v).kind != "start"
    )
    if not candidates:
        return None
    u, v = rng.choice(candidates)
    return WorkflowDoc(doc.nodes_info, doc.edges + (Edge(u, 0, v),))


def test_random_dags_with_injected_back_edge():
    recovered = 0
    for seed in range(400):
        rng = random.Random(seed)
        original = random_doc(rng)
        broken = _inject_back_edge(rng, original)
        if broken is None:
            continue
        fixed = repair_topology(broken)
        assert set(fixed.edges) == set(original.edges), seed
        assert fixed.nodes_info == broken.nodes_info
        recovered += 1
        if recovered == 200:
            break
    assert recovered == 200


@settings(max_examples=60)
@given(st.randoms(use_true_random=False))
def test_topology_never_adds_edges_or_nodes(rng):
    original = random_doc(rng)
    ids = [n.id for n in original.nodes_info if n.parent_id is None]
    extra = tuple(Edge(rng.choice(ids), 0, rng.choice(ids)) for _ in range(2))
    broken = WorkflowDoc(original.nodes_info, original.edges + extra)
    try:
        fixed = repair_topology(broken)
    except Unrepairable:
        return
    assert set(fixed.edges) <= set(broken.edges)
    assert fixed.nodes_info == broken.nodes_info


# --- node selection -------------------------------------------------------------------------------


def _with_selection(text, selection):
    parsed = extract_sections(text)
    return parsed.__class__(tuple(selection), parsed.design_principle, parsed.workflow_text)


def test_selection_missing_end_is_completed():
    text = perfect_response("study-planner", 1)
    parsed = process_response(text).parsed
    fixed = repair_node_selection(parsed.__class__(("start", "llm"), "", parsed.workflow_text, parsed.workflow_doc))
    assert fixed.node_selection == ("end", "llm", "start")


def test_selection_omitting_code_and_iteration_start():
    raw = _with_selection(perfect_response("study-planner", 2), ["start", "llm", "iteration", "template-transform", "end"])
    result = process_response(render_response(raw))
    assert result.repairs == ("node-selection",)
    assert set(result.parsed.node_selection) == {"start", "llm", "code", "iteration", "iteration-start",
                                                  "template-transform", "end"}


def test_template_alias_is_not_a_mismatch():
    raw = _with_selection(perfect_response("code-doc", 1), ["Start", "Code", "Template", "LLM", "End"])
    assert process_response(render_response(raw)).repairs == ()


@pytest.mark.parametrize("task,rounds", [("study-planner", 3), ("deep-research", 2), ("contract-review", 2),
                                          ("support-triage", 2), ("code-doc", 3), ("poster-studio", 2)])
def test_repairs_identity_on_valid_responses(task, rounds):
    for r in range(1, rounds + 1):
        result = process_response(perfect_response(task, r))
        assert (result.stage, result.repairs) == (None, ())


# --- verified retry ---------------------------------------------------------------------------------


def _script(*responses):
    seen = []

    def generate(attempt, previous):
        seen.append((attempt, previous))
        return responses[min(attempt, len(responses)) - 1]
    return generate, seen


def test_retry_succeeds_on_third_attempt_with_feedback():
    broken = VALID.replace("</workflow>", "")
    generate, seen = _script(broken, broken, VALID)
    result = verified_retry(generate)
    assert result.verified
    assert [r.index for r in result.log] == [1, 2, 3]
    assert [r.stage for r in result.log] == ["format", "format", "verified"]
    assert seen[1][1].detail == "missing tag <workflow>"


def _unrepairable_response():
    parsed = extract_sections(VALID)
    data = json.loads(parsed.workflow_text)
    data["nodes_info"] += [{"id": "8", "type": "llm", "params": {"prompt": "a"}},
                           {"id": "9", "type": "llm", "params": {"prompt": "b"}}]
    data["edges"] += [["8", 0, "9"], ["9", 0, "8"]]
    return render_response(parsed.__class__(parsed.node_selection, parsed.design_principle, json.dumps(data)))


def test_retry_exhausts_after_five():
    generate, seen = _script(_unrepairable_response())
    with pytest.raises(AttemptsExhausted) as info:
        verified_retry(generate)
    assert len(info.value.log) == 5 and len(seen) == 5
    assert all(r.stage == "conversion" for r in info.value.log)


def _fenced_workflow(text):
    return text.replace("<workflow>\n", "<workflow>\n```json\n").replace("\n</workflow>", "\n```\n</workflow>")


def test_retry_fence_wrapped_first_attempt():
    generate, _ = _script(_fenced_workflow(VALID))
    result = verified_retry(generate)
    assert len(result.log) == 1
    assert result.log[0].repairs == ("fence",) and result.log[0].verified


@pytest.mark.parametrize("k", range(6))
def test_retry_log_length_tracks_failures(k):
    broken = VALID.replace("<design_principle>", "")
    generate, _ = _script(*([broken] * k + [VALID]))
    if k < 5:
        assert len(verified_retry(generate).log) == k + 1
    else:
        with pytest.raises(AttemptsExhausted):
            verified_retry(generate)


def test_log_lines_are_json():
    generate, _ = _script(VALID.replace("</workflow>", ""), VALID)
    log = verified_retry(generate).log
    assert [json.loads(r.to_line())["attempt"] for r in log] == [1, 2]
