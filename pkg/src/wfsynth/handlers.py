"""Deterministic stand-in handlers for all node kinds.

Model-backed kinds (llm, question-classifier, parameter-extractor) and
network kinds (http-request, google-search) consult a :class:`ScriptTable`
keyed by ``(node id, input digest)``; ``"*"`` matches any digest.  Without a
matching entry they fall back to fixed behaviour:

* llm echoes its rendered prompt;
* question-classifier picks class 0;
* parameter-extractor fills strings with the query text, numbers with the
  first number in the query, everything else with an empty value;
* http-request returns an empty 200 response, google-search a canned result.

Generation kinds return synthetic file values with the right extension.

Script file format (JSON)::

    [{"node": "3", "digest": "*", "outputs": {"text": "..."}},
     {"node": "4", "digest": "9f...", "class": 1},
     {"kind": "question-classifier", "class": "billing"}]

An entry keyed by ``kind`` applies to every node of that kind that has no
entry of its own, which lets a corpus script responses it has not seen.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from wfsynth.catalog import EXPORT_FORMATS, VarType
from wfsynth.codeeval import CodeError, run_main
from wfsynth.errors import HandlerError, ScriptMissing, UnboundToken
from wfsynth.executor import (
    STRUCTURAL_KINDS,
    ExecContext,
    FileValue,
    Handler,
    NodeResult,
    compare,
    evaluate_condition,
    render_value,
    value_to_json,
)
from wfsynth.graph import Node


def input_digest(params: Mapping[str, Any]) -> str:
    blob = json.dumps(value_to_json(params), sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class ScriptTable:
    entries: list[dict] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> "ScriptTable":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_json(cls, data: Any) -> "ScriptTable":
        if isinstance(data, Mapping):
            data = data.get("entries", [])
        return cls([dict(e) for e in data or []])

    def lookup(self, node_id: str, digest: str, kind: str | None = None) -> dict | None:
        """Best entry for a node: node id beats kind, exact digest beats ``"*"``."""
        ranked: list[tuple[int, int, dict]] = []
        for pos, e in enumerate(self.entries):
            if "node" in e:
                if str(e["node"]) != node_id:
                    continue
                rank = 0
            elif kind is not None and e.get("kind") == kind:
                rank = 2
            else:
                continue
            d = e.get("digest", "*")
            if d == digest:
                ranked.append((rank, pos, e))
            elif d == "*":
                ranked.append((rank + 1, pos, e))
        return min(ranked, key=lambda r: r[:2])[2] if ranked else None


def _entry(ctx_scripts: ScriptTable, node: Node, params: dict, strict: bool) -> dict | None:
    entry = ctx_scripts.lookup(node.id, input_digest(params), node.kind)
    if entry is None and strict:
        raise ScriptMissing(f"no script for node {node.id} digest {input_digest(params)}")
    return entry


def _typed_default(vartype: VarType, query: str) -> Any:
    if vartype.is_array:
        return []
    if vartype.base == "string":
        return query
    if vartype.base == "number":
        m = re.search(r"-?\d+(?:\.\d+)?", query)
        if not m:
            return 0
        return float(m.group()) if "." in m.group() else int(m.group())
    if vartype.base == "boolean":
        return False
    if vartype.base == "object":
        return {}
    return None


def _files_output(node: Node, stem: str, ext: str, media: str, payload: str) -> dict:
    data = payload.encode("utf-8")
    return {"files": [FileValue(f"{stem}_{node.id}{ext}", ext, media, len(data), data)]}


def default_test_handlers(
    scripts: ScriptTable | Iterable[dict] | None = None,
    strict: bool = False,
    code_scripts: Mapping[str, Any] | None = None,
) -> dict[str, Handler]:
    """Handlers for every kind.  *code_scripts* maps node id -> callable(**inputs) -> dict."""
    if scripts is None:
        scripts = ScriptTable()
    elif not isinstance(scripts, ScriptTable):
        scripts = ScriptTable.from_json(list(scripts))
    code_scripts = dict(code_scripts or {})

    def llm(node: Node, params: dict, ctx: ExecContext):
        e = _entry(scripts, node, params, strict)
        if e is not None:
            return {"text": render_value(e.get("outputs", {}).get("text", ""))}
        return {"text": render_value(params["prompt"])}

    def question_classifier(node: Node, params: dict, ctx: ExecContext):
        classes = params["classes"]
        e = _entry(scripts, node, params, strict)
        index = 0
        if e is not None:
            choice = e.get("class", 0)
            index = classes.index(choice) if isinstance(choice, str) else int(choice)
        if not 0 <= index < len(classes):
            raise HandlerError(node.id, f"scripted class {index} out of range")
        return NodeResult({"class_name": classes[index]}, port=index)

    def parameter_extractor(node: Node, params: dict, ctx: ExecContext):
        e = _entry(scripts, node, params, strict)
        query = render_value(params["query"])
        scripted = (e or {}).get("outputs", {})
        out = {}
        for p in params["parameters"]:
            t = VarType.parse(p["type"])
            out[p["name"]] = scripted[p["name"]] if p["name"] in scripted else _typed_default(t, query)
        return out

    def code(node: Node, params: dict, ctx: ExecContext):
        declared = [o["name"] for o in params["outputs"]]
        args = {v["name"]: v["value"] for v in params["variables"]}
        e = scripts.lookup(node.id, input_digest(params), node.kind)
        if node.id in code_scripts:
            result = code_scripts[node.id](**args)
        elif e is not None:
            result = e.get("outputs", {})
        else:
            try:
                result = run_main(params["script"], args)
            except CodeError as exc:
                raise HandlerError(node.id, str(exc)) from None
        if not isinstance(result, dict):
            raise HandlerError(node.id, "main() must return a dict")
        missing = [n for n in declared if n not in result]
        if missing:
            raise HandlerError(node.id, f"main() result lacks {missing}")
        return {n: result[n] for n in declared}

    def document_extractor(node: Node, params: dict, ctx: ExecContext):
        def text(f: Any) -> str:
            if not isinstance(f, FileValue):
                raise HandlerError(node.id, "input is not a file")
            if f.content is not None:
                return f.content.decode("utf-8", errors="replace")
            return f"[{f.name}]"

        value = params["file"]
        if isinstance(value, list):
            return {"text": [text(f) for f in value]}
        return {"text": text(value)}

    def http_request(node: Node, params: dict, ctx: ExecContext):
        e = _entry(scripts, node, params, strict)
        out = {"body": "", "status_code": 200, "headers": {}}
        if e is not None:
            out.update(e.get("outputs", {}))
        return out

    def google_search(node: Node, params: dict, ctx: ExecContext):
        e = _entry(scripts, node, params, strict)
        query = render_value(params["query"])
        out = {"text": f"Search results for: {query}", "json": [{"title": query, "link": "", "snippet": ""}]}
        if e is not None:
            out.update(e.get("outputs", {}))
        return out

    def if_else(node: Node, params: dict, ctx: ExecContext):
        # params already substituted: evaluate against literal operands
        for i, group in enumerate(params["conditions"]):
            results = (compare(c["operator"], c["variable"], c.get("value")) for c in group["conditions"])
            hit = any(results) if group.get("logical_operator") == "or" else all(results)
            if hit:
                return NodeResult({}, port=i)
        return NodeResult({}, port=len(params["conditions"]))

    def list_operator(node: Node, params: dict, ctx: ExecContext):
        items = params["variable"]
        if not isinstance(items, list):
            raise HandlerError(node.id, "list-operator input is not an array")
        items = list(items)
        flt = params.get("filter")
        if flt:
            items = [x for x in items if compare(flt["operator"], x, flt.get("value"))]
        if params.get("order"):
            items = sorted(items, key=lambda x: (render_value(x) if not isinstance(x, (int, float)) else x),
                           reverse=params["order"] == "desc")
        if params.get("limit") is not None:
            items = items[: int(params["limit"])]
        return {
            "result": items,
            "first_record": items[0] if items else None,
            "last_record": items[-1] if items else None,
        }

    def template_transform(node: Node, params: dict, ctx: ExecContext):
        return {"output": render_value(params["template"])}

    def variable_aggregator(node: Node, params: dict, ctx: ExecContext):
        for token in params["variables"]:
            try:
                return {"output": ctx.store.resolve(token)}
            except UnboundToken:
                continue
        raise HandlerError(node.id, "no aggregated branch produced a value")

    def text_to_speech(node: Node, params: dict, ctx: ExecContext):
        return _files_output(node, "speech", ".mp3", "audio", render_value(params["text"]))

    def text_to_image(node: Node, params: dict, ctx: ExecContext):
        return _files_output(node, "image", ".png", "image", render_value(params["prompt"]))

    def mermaid_converter(node: Node, params: dict, ctx: ExecContext):
        return _files_output(node, "mermaid", ".png", "image", render_value(params["mermaid_code"]))

    def markdown_exporter(node: Node, params: dict, ctx: ExecContext):
        fmt = params["format"]
        return _files_output(node, "export", EXPORT_FORMATS[fmt], "document", render_value(params["md_text"]))

    def echarts(node: Node, params: dict, ctx: ExecContext):
        raw = render_value(params["data"])
        try:
            values = [float(x) for x in raw.split(";") if x.strip()]
        except ValueError:
            raise HandlerError(node.id, f"chart data is not ';'-separated numbers: {raw!r}") from None
        labels = [x.strip() for x in render_value(params["x_axis"]).split(";") if x.strip()]
        values = [int(v) if v == int(v) else v for v in values]
        chart_type = params["chart_type"]
        option: dict[str, Any] = {"title": {"text": render_value(params["title"])}}
        if chart_type == "pie":
            names = labels or [str(i + 1) for i in range(len(values))]
            option["series"] = [{"type": "pie", "data": [{"name": n, "value": v} for n, v in zip(names, values)]}]
        else:
            option["xAxis"] = {"type": "category", "data": labels}
            option["yAxis"] = {"type": "value"}
            option["series"] = [{"type": chart_type, "data": values}]
        return {"text": "```echarts\n" + json.dumps(option, ensure_ascii=False, sort_keys=True) + "\n```"}

    def structural(node: Node, params: dict, ctx: ExecContext):
        raise HandlerError(node.id, f"{node.kind} is run by the executor itself")

    registry: dict[str, Handler] = {
        "llm": llm,
        "question-classifier": question_classifier,
        "parameter-extractor": parameter_extractor,
        "code": code,
        "document-extractor": document_extractor,
        "http-request": http_request,
        "google-search": google_search,
        "if-else": if_else,
        "list-operator": list_operator,
        "template-transform": template_transform,
        "variable-aggregator": variable_aggregator,
        "text-to-speech": text_to_speech,
        "text-to-image": text_to_image,
        "mermaid-converter": mermaid_converter,
        "markdown-exporter": markdown_exporter,
        "echarts": echarts,
    }
    for kind in STRUCTURAL_KINDS:
        registry[kind] = structural
    return registry


__all__ = ["ScriptTable", "default_test_handlers", "input_digest", "evaluate_condition"]
