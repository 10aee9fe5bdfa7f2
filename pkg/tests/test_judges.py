import json
import threading
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fixture_text, perfect_response
from wfsynth.judges import JudgeFormatError, LLMJudge, RuleJudge, normalize_text, parse_judge_output
from wfsynth.parsing import decode_workflow, extract_sections

JUDGE = RuleJudge()
CASES = json.loads(fixture_text("rule_judge_cases.json"))


def workflow(*kinds):
    nodes = ",".join(f'{{"id":"{i}","type":"{k}","params":{{}}}}' for i, k in enumerate(kinds, 1))
    return decode_workflow(f'{{"nodes_info":[{nodes}],"edges":[]}}')


def test_suite_size_and_balance():
    assert len(CASES) == 30
    assert {c["verdict"] for c in CASES} == {True, False}


@pytest.mark.parametrize("case", CASES, ids=[c["why"].replace(" ", "-") for c in CASES])
def test_rule_judge_hand_labels(case):
    verdict = JUDGE.semantic_resolve(["instruction"], case["output"], {}, case["ref"])
    assert verdict.ok is case["verdict"]


def test_key_node_subset():
    assert JUDGE.key_node_coverage(["llm"], ["start", "llm", "end"]).ok
    miss = JUDGE.key_node_coverage(["llm", "code"], ["start", "llm", "end"])
    assert not miss.ok and "code" in miss.reason


def test_key_nodes_ignore_frequency_and_case():
    assert JUDGE.key_node_coverage(["LLM", "llm", "Template"], ["template-transform", "Llm"]).ok


def test_node_set_exact_match():
    assert not JUDGE.consistency(["start", "llm"], "", workflow("start", "llm", "end")).ok
    assert JUDGE.consistency(["start", "llm", "end"], "", workflow("start", "llm", "end", "llm")).ok


def test_template_alias_matches():
    assert JUDGE.consistency(["Start", "Template", "End"], "", workflow("start", "template-transform", "end")).ok


def test_declared_but_unused_and_unknown_tokens():
    v = JUDGE.consistency(["start", "code", "end"], "", workflow("start", "end"))
    assert not v.ok and "declared but not used: code" in v.reason
    assert not JUDGE.consistency(["start", "end", "magic"], "", workflow("start", "end")).ok


def test_glm_style_mismatch_fails_step_four():
    parsed = extract_sections(perfect_response("study-planner", 2))
    doc = decode_workflow(parsed.workflow_text)
    declared = [k for k in parsed.node_selection if k not in ("code", "iteration-start")]
    v = JUDGE.consistency(declared, parsed.design_principle, doc)
    assert not v.ok and "code" in v.reason and "iteration-start" in v.reason


kinds = st.sampled_from(["start", "llm", "code", "end", "template-transform", "if-else", "iteration"])


@given(st.lists(kinds, max_size=6), st.lists(kinds, min_size=1, max_size=6))
def test_node_set_verdict_is_set_equality(selection, used):
    assert JUDGE.consistency(selection, "", workflow(*used)).ok == (set(selection) == set(used))


@given(st.text(max_size=20))
def test_normalize_idempotent(text):
    assert normalize_text(normalize_text(text)) == normalize_text(text)


# --- model-backed judge -------------------------------------------------------------------------


def test_parse_judge_output_strict():
    assert parse_judge_output("<reason>fine</reason>\n<result>True</result>") == (True, "fine")
    for bad in ["<result>true</result>", "Sure! <reason>x</reason><result>true</result>",
                "<reason>x</reason><result>maybe</result>"]:
        with pytest.raises(JudgeFormatError):
            parse_judge_output(bad)


class Scripted:
    def __init__(self, reply, delay=0.0):
        self.reply, self.delay = reply, delay
        self.prompts, self.active, self.peak = [], 0, 0
        self.lock = threading.Lock()

    def complete(self, system, messages, config):
        with self.lock:
            self.active += 1
            self.peak = max(self.peak, self.active)
            self.prompts.append(messages[-1]["content"])
        time.sleep(self.delay)
        with self.lock:
            self.active -= 1
        return self.reply


def test_llm_judge_records_transcript():
    provider = Scripted("<reason>matches</reason><result>true</result>")
    judge = LLMJudge(provider)
    v = judge.semantic_resolve(["Make a plan"], {"plan": "Week 1"}, {"topic": "x"}, "Week 1")
    assert v.ok and v.transcript and "Week 1" in provider.prompts[0]
    assert json.loads(v.transcript)["response"] == provider.reply


def test_llm_judge_malformed_reply_is_a_failed_verdict():
    v = LLMJudge(Scripted("yes")).consistency(["start"], "", workflow("start"))
    assert not v.ok and v.transcript is not None


def test_llm_judge_key_nodes_stay_mechanical():
    provider = Scripted("<reason>x</reason><result>false</result>")
    assert LLMJudge(provider).key_node_coverage(["llm"], ["llm"]).ok
    assert provider.prompts == []


def test_llm_judge_concurrency_cap():
    provider = Scripted("<reason>x</reason><result>true</result>", delay=0.02)
    judge = LLMJudge(provider, max_concurrency=2)
    threads = [threading.Thread(target=judge.semantic_resolve, args=([], {"a": "b"}, {}, None)) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert provider.peak <= 2 and len(provider.prompts) == 6
