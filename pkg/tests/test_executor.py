import itertools
import operator
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphgen import random_doc, valid_docs
from unroll import iteration_graph, unrolled_graph
from wfsynth.catalog import VarType
from wfsynth.errors import HandlerError, InputMismatch, LimitExceeded, TypeMismatch, UnboundToken
from wfsynth.executor import (
    FileValue,
    Limits,
    TypedValue,
    VarStore,
    compare,
    evaluate_condition,
    execute,
    render_template,
    render_value,
    trace_to_jsonl,
)
from wfsynth.graph import build
from wfsynth.handlers import default_test_handlers
from wfsynth.parsing import doc_from_json


def graph(nodes, edges):
    return build(doc_from_json({"nodes_info": nodes, "edges": edges}))


def start(**types):
    return {"id": "1", "type": "start", "params": {"variables": [{"name": k, "type": t} for k, t in types.items()]}}


def end(id_, **outs):
    return {"id": id_, "type": "end", "params": {"outputs": [{"name": k, "value": v} for k, v in outs.items()]}}


def test_passthrough():
    g = graph([start(instruction="string"), end("2", instruction="{{#1.instruction#}}")], [["1", 0, "2"]])
    out = execute(g, {"instruction": "learn rust"})
    assert out.text_values() == {"instruction": "learn rust"}
    assert out.files == {}


def _threshold_graph():
    nodes = [start(x="number"),
             {"id": "2", "type": "if-else", "params": {"conditions": [
                 {"variable": "{{#1.x#}}", "operator": ">", "value": 3}]}},
             {"id": "3", "type": "template-transform", "params": {"template": "big"}},
             {"id": "4", "type": "template-transform", "params": {"template": "small"}},
             {"id": "5", "type": "variable-aggregator", "params": {"variables": ["{{#3.output#}}", "{{#4.output#}}"]}},
             end("6", size="{{#5.output#}}")]
    edges = [["1", 0, "2"], ["2", 0, "3"], ["2", 1, "4"], ["3", 0, "5"], ["4", 0, "5"], ["5", 0, "6"]]
    return graph(nodes, edges)


@pytest.mark.parametrize("x,port,size", [(5, 0, "big"), (2, 1, "small"), (3, 1, "small")])
def test_if_else_branches(x, port, size):
    out = execute(_threshold_graph(), {"x": x})
    taken = [e.detail for e in out.trace if e.event == "branch-taken"]
    assert taken == [port]
    assert out.text_values() == {"size": size}
    skipped = "4" if port == 0 else "3"
    assert skipped not in {e.node for e in out.trace}


def test_iteration_appends():
    g = iteration_graph()
    out = execute(g, {"csv": "a|b|c"})
    assert out.text_values() == {"out": ["Item a at 0!", "Item b at 1!", "Item c at 2!"]}
    assert [e.detail for e in out.trace if e.event == "iteration-item"] == [0, 1, 2]


item_lists = st.lists(st.text(alphabet="abcxyz é数", min_size=1, max_size=5).filter(lambda s: s.strip() == s and s),
                      max_size=4)


@given(item_lists)
def test_iteration_equals_unrolled(items):
    csv = "|".join(items)
    looped = execute(iteration_graph(), {"csv": csv}).text_values()
    straight = execute(unrolled_graph(len(items)), {"csv": csv}).text_values()
    assert looped == straight


def test_trace_is_deterministic_and_balanced():
    g = iteration_graph()
    a = execute(g, {"csv": "p|q"})
    b = execute(g, {"csv": "p|q"})
    assert trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace)
    depth = {}
    for ev in a.trace:
        if ev.event == "node-enter":
            depth[(ev.scope, ev.node)] = depth.get((ev.scope, ev.node), 0) + 1
        elif ev.event == "node-exit":
            depth[(ev.scope, ev.node)] -= 1
    assert set(depth.values()) == {0}


def _sample(t: VarType):
    if t.is_file:
        f = {"name": "a.txt", "content": "alpha 12"}
        return [f, {"name": "b.pdf", "content": "beta"}] if t.is_array else f
    return {"string": "query 7", "number": 4, "boolean": False, "object": {"k": 1}}[t.base]


@given(valid_docs)
def test_generated_runs_are_deterministic_and_exclusive(d):
    g = build(d)
    inputs = {name: _sample(t) for name, t in g.io.inputs}
    try:
        first = execute(g, inputs)
    except (HandlerError, TypeMismatch):
        return  # generated conditions may compare mismatched types; that is a legal runtime failure
    second = execute(g, inputs)
    assert first == second
    branching = {n.id for n in g.nodes if n.kind in ("if-else", "question-classifier")}
    exits = [(e.scope, e.node) for e in first.trace if e.event == "node-exit" and e.node in branching]
    taken = [(e.scope, e.node) for e in first.trace if e.event == "branch-taken"]
    assert exits == taken
    seen = [(e.scope, e.node) for e in first.trace if e.event == "node-enter"]
    assert len(seen) == len(set(seen))
    for name, tv in {**first.text, **first.files}.items():
        assert (name in first.files) == tv.type.is_file


def test_output_split_by_type():
    nodes = [start(topic="string"), {"id": "2", "type": "markdown-exporter", "params": {"md_text": "# {{#1.topic#}}",
                                                                                      "format": "pdf"}},
             end("3", doc="{{#2.files#}}", topic="{{#1.topic#}}")]
    out = execute(graph(nodes, [["1", 0, "2"], ["2", 0, "3"]]), {"topic": "tides"})
    assert set(out.text) == {"topic"} and set(out.files) == {"doc"}
    [f] = out.files["doc"].value
    assert f.extension == ".pdf" and f.content == b"# tides"


def test_input_mismatch():
    g = graph([start(x="number"), end("2", x="{{#1.x#}}")], [["1", 0, "2"]])
    with pytest.raises(InputMismatch):
        execute(g, {"y": 1})
    with pytest.raises(InputMismatch):
        execute(g, {"x": "five"})
    with pytest.raises(InputMismatch):
        execute(g, {"x": TypedValue(VarType("string"), "5")})


def test_limits():
    g = iteration_graph()
    with pytest.raises(LimitExceeded) as info:
        execute(g, {"csv": "a|b|c"}, limits=Limits(max_iteration_items=2))
    assert info.value.which == "iteration items"
    with pytest.raises(LimitExceeded) as info:
        execute(g, {"csv": "a|b|c"}, limits=Limits(max_node_executions=5))
    assert info.value.which == "node executions"
    assert info.value.trace[-1].event == "error"


def test_untaken_branch_reference_is_unbound():
    # references across an untaken branch are rejected by the resolver; at runtime they fail loudly
    nodes = [start(x="number"),
             {"id": "2", "type": "if-else", "params": {"conditions": [{"variable": "{{#1.x#}}", "operator": ">",
                                                                       "value": 3}]}},
             {"id": "3", "type": "llm", "params": {"prompt": "yes"}},
             end("4", a="{{#3.text#}}")]
    g = graph(nodes, [["1", 0, "2"], ["2", 0, "3"], ["2", 1, "4"], ["3", 0, "4"]])
    with pytest.raises(UnboundToken):
        execute(g, {"x": 1})


# --- conditions ------------------------------------------------------------------------------

NUMERIC = {"=": operator.eq, "≠": operator.ne, "<": operator.lt, "≤": operator.le, ">": operator.gt, "≥": operator.ge}
GRID = [-2, 0, 1, 2.5, 3, 10]


@pytest.mark.parametrize("op", list(NUMERIC))
def test_numeric_comparators_truth_table(op):
    for a, b in itertools.product(GRID, GRID):
        assert compare(op, a, b) is NUMERIC[op](a, b), (op, a, b)


STRINGS = ["", "hello world", "world", "hello", "Hello"]


def test_string_operators_truth_table():
    for a, b in itertools.product(STRINGS, STRINGS):
        assert compare("equals", a, b) == (a == b)
        assert compare("contains", a, b) == (b in a)
        assert compare("starts-with", a, b) == a.startswith(b)
        assert compare("not-contains", a, b) == (b not in a)
    for a in STRINGS:
        assert compare("is-empty", a) == (a == "")
        assert compare("not-empty", a) == (a != "")


def test_array_operators():
    assert compare("contains", ["a", "b"], "b") is True
    assert compare("contains", [1, 2], 3) is False
    assert compare("is-empty", []) is True
    assert compare("not-empty", [0]) is True


def test_examples_from_contract():
    assert compare("contains", "hello world", "world") is True
    assert compare("is-empty", "") is True


@pytest.mark.parametrize("x,expected", [(2, True), (3, False), (1, False), (2.5, True)])
def test_and_group(x, expected):
    store = VarStore()
    store.write("1", "x", x)
    group = {"logical_operator": "and", "conditions": [
        {"variable": "{{#1.x#}}", "operator": ">", "value": 1}, {"variable": "{{#1.x#}}", "operator": "<", "value": 3}]}
    assert evaluate_condition(group, store) is expected


@given(st.integers(-5, 5), st.sampled_from(list(NUMERIC)), st.sampled_from(list(NUMERIC)), st.integers(-5, 5),
       st.integers(-5, 5))
def test_or_group_matches_truth_table(x, op1, op2, v1, v2):
    store = VarStore()
    store.write("1", "x", x)
    group = {"logical_operator": "or", "conditions": [
        {"variable": "{{#1.x#}}", "operator": op1, "value": v1}, {"variable": "{{#1.x#}}", "operator": op2, "value": v2}]}
    assert evaluate_condition(group, store) == (NUMERIC[op1](x, v1) or NUMERIC[op2](x, v2))


@pytest.mark.parametrize("op,operand", [(">", "abc"), ("starts-with", 3), ("is-empty", 5)])
def test_type_mismatch(op, operand):
    with pytest.raises(TypeMismatch):
        compare(op, operand, 1)


# --- templates ---------------------------------------------------------------------------------


def test_render_template():
    store = VarStore()
    store.write("2", "text", "abc")
    store.write("3", "items", ["x", "y"])
    store.write("4", "n", 0.1)
    store.write("5", "whole", 3.0)
    assert render_template("Plan: {{#2.text#}}", store) == "Plan: abc"
    assert render_template("{{#3.items#}}", store) == "x\ny"
    assert render_template("{{#4.n#}} {{#5.whole#}}", store) == "0.1 3"
    with pytest.raises(UnboundToken):
        render_template("{{#9.q#}}", store)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_number_rendering_round_trips(x):
    assert float(render_value(x)) == x


def test_store_is_write_once_and_scoped():
    outer = VarStore()
    outer.write("1", "a", 1)
    inner = VarStore(parent=outer)
    inner.write("it", "item", "z")
    assert inner.read("1", "a") == 1 and not outer.has("it", "item")
    with pytest.raises(Exception):
        outer.write("1", "a", 2)


def test_file_value_from_json():
    f = FileValue.from_json({"name": "Report.PDF", "content": "abc"})
    assert (f.extension, f.size) == (".pdf", 3)


def test_custom_handler_registry_is_used():
    g = graph([start(q="string"), {"id": "2", "type": "llm", "params": {"prompt": "{{#1.q#}}"}},
               end("3", a="{{#2.text#}}")], [["1", 0, "2"], ["2", 0, "3"]])
    handlers = dict(default_test_handlers())
    handlers["llm"] = lambda node, params, ctx: {"text": params["prompt"].upper()}
    assert execute(g, {"q": "hi"}, handlers).text_values() == {"a": "HI"}


def test_resolver_clean_graphs_never_hit_unbound_tokens():
    for seed in range(60):
        g = build(random_doc(random.Random(1000 + seed)))
        inputs = {name: _sample(t) for name, t in g.io.inputs}
        try:
            execute(g, inputs)
        except UnboundToken:  # pragma: no cover
            pytest.fail(f"seed {seed}")
        except (HandlerError, TypeMismatch):
            pass
