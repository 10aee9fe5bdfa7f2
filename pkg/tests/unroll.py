"""Paired workflows: one iteration over a list, and the same body unrolled by hand.

The list arrives as a ``|``-joined string and is split by a code node,
since start inputs cannot be arrays of strings.  The body is an llm
(echo handler) followed by a template, reading the item and its index.
"""

from __future__ import annotations

from wfsynth.graph import build
from wfsynth.parsing import doc_from_json

SPLIT = "def main(csv: str) -> dict:\n    return {\"items\": [x for x in csv.split(\"|\") if x]}\n"


def _start_and_split():
    return [
        {"id": "1", "type": "start", "params": {"variables": [{"name": "csv", "type": "string"}]}},
        {"id": "2", "type": "code", "params": {"script": SPLIT, "variables": [{"name": "csv", "value": "{{#1.csv#}}"}],
                                               "outputs": [{"name": "items", "type": "array[string]"}]}},
    ]


def _body(prefix: str, item: str, index: str, parent: str | None = None) -> list[dict]:
    llm = {"id": f"{prefix}a", "type": "llm", "params": {"prompt": f"Item {item} at {index}"}}
    tpl = {"id": f"{prefix}b", "type": "template-transform", "params": {"template": "{{#" + prefix + "a.text#}}!"}}
    if parent:
        llm["parent_id"] = tpl["parent_id"] = parent
    return [llm, tpl]


def iteration_graph():
    nodes = _start_and_split() + [
        {"id": "3", "type": "iteration", "params": {"iterator": "{{#2.items#}}", "output_selector": "{{#3-b.output#}}"}},
        {"id": "3-start", "type": "iteration-start", "params": {}, "parent_id": "3"},
        *_body("3-", "{{#3.item#}}", "{{#3.index#}}", parent="3"),
        {"id": "4", "type": "end", "params": {"outputs": [{"name": "out", "value": "{{#3.output#}}",
                                                            "type": "array[string]"}]}},
    ]
    edges = [["1", 0, "2"], ["2", 0, "3"], ["3-start", 0, "3-a"], ["3-a", 0, "3-b"], ["3", 0, "4"]]
    return build(doc_from_json({"nodes_info": nodes, "edges": edges}))


def unrolled_graph(length: int):
    """Straight-line equivalent for lists of exactly *length* items."""
    nodes = _start_and_split()
    edges = [["1", 0, "2"]]
    tail = "2"
    outs = []
    for i in range(length):
        pick = f"p{i}"
        nodes.append({"id": pick, "type": "code", "params": {
            "script": f"def main(items: list) -> dict:\n    return {{\"v\": items[{i}]}}\n",
            "variables": [{"name": "items", "value": "{{#2.items#}}"}],
            "outputs": [{"name": "v", "type": "string"}]}})
        nodes.extend(_body(f"u{i}", "{{#" + pick + ".v#}}", str(i)))
        edges += [[tail, 0, pick], [pick, 0, f"u{i}a"], [f"u{i}a", 0, f"u{i}b"]]
        tail = f"u{i}b"
        outs.append(f"u{i}b")
    names = [f"x{i}" for i in range(length)]
    nodes.append({"id": "c", "type": "code", "params": {
        "script": f"def main({', '.join(names)}) -> dict:\n    return {{\"out\": [{', '.join(names)}]}}\n",
        "variables": [{"name": n, "value": "{{#" + o + ".output#}}"} for n, o in zip(names, outs)],
        "outputs": [{"name": "out", "type": "array[string]"}]}})
    nodes.append({"id": "e", "type": "end", "params": {"outputs": [{"name": "out", "value": "{{#c.out#}}",
                                                                     "type": "array[string]"}]}})
    edges += [[tail, 0, "c"], ["c", 0, "e"]]
    return build(doc_from_json({"nodes_info": nodes, "edges": edges}))
