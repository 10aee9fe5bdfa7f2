"""Extract the tagged reasoning sections from a model response and decode
the workflow JSON inside them.

Interchange schema (version 1)::

    {
      "nodes_info": [
        {"id": "1", "type": "start", "title": "Start",
         "params": {...}, "parent_id": "5"}        # title/params/parent_id optional
      ],
      "edges": [["1", 0, "2"], {"source": "2", "target": "3", "port": 0}]
    }

Edges may be ``[source, port, target]`` triples or ``{source, port?, target}``
maps; ``port`` defaults to 0.  Decoding is strict: leniency lives in
:mod:`wfsynth.repair`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, NamedTuple

from wfsynth.errors import JsonSyntax, MissingTag, SchemaViolation

SCHEMA_VERSION = 1
SECTION_TAGS = ("node_selection", "design_principle", "workflow")


class Edge(NamedTuple):
    source: str
    port: int
    target: str


@dataclass(frozen=True)
class NodeRecord:
    id: str
    type: str
    title: str = ""
    params: dict = field(default_factory=dict)
    parent_id: str | None = None

    def to_json(self) -> dict:
        out = {"id": self.id, "type": self.type, "title": self.title, "params": self.params}
        if self.parent_id is not None:
            out["parent_id"] = self.parent_id
        return out


@dataclass(frozen=True)
class WorkflowDoc:
    nodes_info: tuple[NodeRecord, ...]
    edges: tuple[Edge, ...]

    def to_json(self) -> dict:
        return {
            "nodes_info": [n.to_json() for n in self.nodes_info],
            "edges": [list(e) for e in self.edges],
        }

    def dumps(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json(), indent=indent, ensure_ascii=False)

    def node(self, node_id: str) -> NodeRecord | None:
        for n in self.nodes_info:
            if n.id == node_id:
                return n
        return None


@dataclass(frozen=True)
class ParsedResponse:
    node_selection: tuple[str, ...]
    design_principle: str
    workflow_text: str
    workflow_doc: WorkflowDoc | None = None

    def with_doc(self, doc: WorkflowDoc | None) -> "ParsedResponse":
        return replace(self, workflow_doc=doc)


def _find_section(text: str, name: str) -> str:
    open_tag, close_tag = f"<{name}>", f"</{name}>"
    start = text.find(open_tag)
    if start < 0:
        raise MissingTag(name)
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        raise MissingTag(name)
    return text[start + len(open_tag):end]


_LIST_MARKER = re.compile(r"^(?:[-*•]\s+|\d+[.)]\s+)")


def split_selection(text: str) -> tuple[str, ...]:
    tokens = []
    for line in text.splitlines():
        for piece in line.split(","):
            tok = _LIST_MARKER.sub("", piece.strip()).strip()
            if tok:
                tokens.append(tok)
    return tuple(tokens)


def extract_sections(response_text: str) -> ParsedResponse:
    """Locate the three tagged sections; order and surrounding prose don't matter."""
    sections = {name: _find_section(response_text, name) for name in SECTION_TAGS}
    return ParsedResponse(
        node_selection=split_selection(sections["node_selection"]),
        design_principle=sections["design_principle"].strip(),
        workflow_text=sections["workflow"].strip(),
    )


def render_response(parsed: ParsedResponse) -> str:
    """Inverse of :func:`extract_sections` for tag-free section contents."""
    return (
        f"<node_selection>\n{', '.join(parsed.node_selection)}\n</node_selection>\n"
        f"<design_principle>\n{parsed.design_principle}\n</design_principle>\n"
        f"<workflow>\n{parsed.workflow_text}\n</workflow>\n"
    )


_LEADING_FENCE = re.compile(r"\A\s*```[\w+.\-]*[ \t]*(?:\r?\n|\Z)")
_TRAILING_FENCE = re.compile(r"(?:\A|\r?\n)[ \t]*`{1,3}[ \t]*\s*\Z")


def strip_code_fences(text: str) -> str:
    """Remove a leading ```lang fence line and a trailing ``` line, to a fixpoint."""
    while True:
        out = text
        m = _LEADING_FENCE.match(out)
        if m:
            out = out[m.end():]
        m = _TRAILING_FENCE.search(out)
        if m:
            out = out[:m.start()]
        if out == text:
            return text
        text = out


def _schema_error(path: str, msg: str) -> SchemaViolation:
    return SchemaViolation(path, msg)


def _decode_edge(raw: Any, i: int) -> Edge:
    path = f"edges[{i}]"
    if isinstance(raw, list):
        if len(raw) != 3:
            raise _schema_error(path, "edge triple must be [source, port, target]")
        source, port, target = raw
    elif isinstance(raw, dict):
        extra = set(raw) - {"source", "target", "port"}
        if extra:
            raise _schema_error(path, f"unexpected keys {sorted(extra)}")
        if "source" not in raw or "target" not in raw:
            raise _schema_error(path, "edge needs source and target")
        source, target, port = raw["source"], raw["target"], raw.get("port", 0)
    else:
        raise _schema_error(path, "edge must be an array or object")
    if not isinstance(source, str) or not isinstance(target, str):
        raise _schema_error(path, "source and target must be strings")
    if not isinstance(port, int) or isinstance(port, bool) or port < 0:
        raise _schema_error(f"{path}.port", "port must be a non-negative integer")
    return Edge(source, port, target)


_NODE_KEYS = {"id", "type", "title", "params", "parent_id"}


def _decode_node(raw: Any, i: int) -> NodeRecord:
    path = f"nodes_info[{i}]"
    if not isinstance(raw, dict):
        raise _schema_error(path, "node must be an object")
    extra = set(raw) - _NODE_KEYS
    if extra:
        raise _schema_error(path, f"unexpected keys {sorted(extra)}")
    for key in ("id", "type"):
        if key not in raw:
            raise _schema_error(f"{path}.{key}", "required")
        if not isinstance(raw[key], str):
            raise _schema_error(f"{path}.{key}", "must be a string")
    title = raw.get("title", "")
    if not isinstance(title, str):
        raise _schema_error(f"{path}.title", "must be a string")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise _schema_error(f"{path}.params", "must be an object")
    parent = raw.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        raise _schema_error(f"{path}.parent_id", "must be a string")
    return NodeRecord(raw["id"], raw["type"], title, params, parent)


def doc_from_json(data: Any) -> WorkflowDoc:
    if not isinstance(data, dict):
        raise _schema_error("$", "top level must be an object")
    missing = {"nodes_info", "edges"} - set(data)
    if missing:
        raise _schema_error("$", f"missing keys {sorted(missing)}")
    extra = set(data) - {"nodes_info", "edges"}
    if extra:
        raise _schema_error("$", f"unexpected keys {sorted(extra)}")
    if not isinstance(data["nodes_info"], list):
        raise _schema_error("nodes_info", "must be an array")
    if not isinstance(data["edges"], list):
        raise _schema_error("edges", "must be an array")
    nodes = tuple(_decode_node(n, i) for i, n in enumerate(data["nodes_info"]))
    edges = tuple(_decode_edge(e, i) for i, e in enumerate(data["edges"]))
    return WorkflowDoc(nodes, edges)


def decode_workflow(workflow_text: str) -> WorkflowDoc:
    text = strip_code_fences(workflow_text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonSyntax(exc.pos, exc.msg) from None
    return doc_from_json(data)


def parse_response(response_text: str) -> ParsedResponse:
    """extract_sections followed by decode_workflow, no repairs."""
    parsed = extract_sections(response_text)
    return parsed.with_doc(decode_workflow(parsed.workflow_text))
