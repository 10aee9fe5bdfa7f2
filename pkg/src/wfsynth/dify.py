"""Compile validated graphs to Dify workflow DSL (YAML) and lower it back.

All platform-specific constants live in the mapping tables at the top of
this module; they are pinned to Dify 1.9.2 and one set of tool plugins.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping

import yaml

from wfsynth.catalog import (
    Catalog,
    VarType,
    default_catalog,
    find_tokens,
    UNARY_OPERATORS,
    make_token,
    single_token,
)
from wfsynth.errors import EmitUnsupported, GraphError, ImportFailure, WfsynthError
from wfsynth.graph import ValidatedGraph, build
from wfsynth.parsing import Edge, NodeRecord, WorkflowDoc

DIFY_VERSION = "1.9.2"
DSL_VERSION = "0.4.0"

MODEL_PROVIDERS = {
    "qwen3-vl-plus": "langgenius/tongyi/tongyi",
    "qwen3-max": "langgenius/tongyi/tongyi",
}
FALLBACK_PROVIDER = "langgenius/openai_api_compatible/openai_api_compatible"
COMPLETION_PARAMS = {"temperature": 0.7, "max_tokens": 32768}

# start-node input types
START_TYPES = {
    "string": "paragraph",
    "number": "number",
    "boolean": "checkbox",
    "object": "json_object",
    "file": "file",
    "array[file]": "file-list",
}
START_TYPES_BACK = {v: k for k, v in START_TYPES.items()} | {"text-input": "string", "select": "string"}

EXTRACTOR_TYPES = {"boolean": "bool"}
EXTRACTOR_TYPES_BACK = {v: k for k, v in EXTRACTOR_TYPES.items()}

IF_OPERATORS = {
    "=": "=", "≠": "≠", "<": "<", "≤": "≤", ">": ">", "≥": "≥",
    "equals": "is", "not-equals": "is not", "contains": "contains", "not-contains": "not contains",
    "starts-with": "start with", "ends-with": "end with", "is-empty": "empty", "not-empty": "not empty",
}
IF_OPERATORS_BACK = {v: k for k, v in IF_OPERATORS.items()}

# Tool-plugin kinds: provider, tool name (may depend on params) and param mapping.
TOOL_KINDS: dict[str, dict[str, Any]] = {
    "text-to-speech": {
        "provider_id": "langgenius/audio/audio", "provider_name": "audio",
        "tool": lambda p: "tts", "params": ("text", "voice"), "model_config": True,
    },
    "text-to-image": {
        "provider_id": "langgenius/tongyi/tongyi", "provider_name": "tongyi",
        "tool": lambda p: "text2image", "params": ("prompt", "size"), "model_config": True,
    },
    "mermaid-converter": {
        "provider_id": "hjlarry/mermaid_converter/mermaid_converter", "provider_name": "mermaid_converter",
        "tool": lambda p: "mermaid_converter", "params": ("mermaid_code",),
    },
    "markdown-exporter": {
        "provider_id": "bowenliang123/md_exporter/md_exporter", "provider_name": "md_exporter",
        "tool": lambda p: f"md_to_{p['format']}", "params": ("md_text",),
    },
    "google-search": {
        "provider_id": "langgenius/google/google", "provider_name": "google",
        "tool": lambda p: "google_search", "params": ("query",),
    },
    "echarts": {
        "provider_id": "langgenius/echarts/echarts", "provider_name": "echarts",
        "tool": lambda p: f"{p['chart_type']}_chart", "params": ("data", "x_axis", "title"),
    },
}

NODE_W, NODE_H = 244, 90
GAP_X, GAP_Y = 96, 60
PAD_X, PAD_Y = 24, 68
ORIGIN = (80, 280)
CHILD_Z = 1002

# --- layout --------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float


def _layout_scope(graph: ValidatedGraph, parent: str | None, boxes: dict[str, Box], rel: dict) -> tuple[float, float]:
    """Lay out one scope with local origin (0, 0); returns its extent."""
    ids = graph.scope(parent)
    depth: dict[str, int] = {}
    for i in ids:
        preds = [e.source for e in graph.in_edges(i) if e.source in depth]
        depth[i] = max((depth[p] + 1 for p in preds), default=0)
    sizes = {}
    for i in ids:
        if graph.node(i).kind == "iteration":
            w, h = _layout_scope(graph, i, boxes, rel)
            sizes[i] = (max(w + 2 * PAD_X, NODE_W), max(h + PAD_X + PAD_Y, NODE_H))
        else:
            sizes[i] = (NODE_W, NODE_H)
    layers: dict[int, list[str]] = {}
    for i in ids:
        layers.setdefault(depth[i], []).append(i)
    x, extent_w, extent_h = 0.0, 0.0, 0.0
    for d in sorted(layers):
        y = 0.0
        width = max(sizes[i][0] for i in layers[d])
        for i in layers[d]:
            rel[i] = (x, y)
            y += sizes[i][1] + GAP_Y
        extent_h = max(extent_h, y - GAP_Y)
        x += width + GAP_X
        extent_w = x - GAP_X
    for i in ids:
        boxes[i] = Box(rel[i][0], rel[i][1], *sizes[i])
    return extent_w, extent_h


def layout(graph: ValidatedGraph) -> dict[str, dict]:
    """Layered layout: x by longest-path depth, y by order within the layer.

    Returns per node ``{"position", "absolute", "width", "height"}``; child
    positions are relative to their iteration, as the platform expects.
    """
    boxes: dict[str, Box] = {}
    rel: dict[str, tuple[float, float]] = {}
    _layout_scope(graph, None, boxes, rel)
    out: dict[str, dict] = {}
    by_id = graph.node_map
    for i in graph.topo_order:  # parents precede children
        n = by_id[i]
        if n.parent_id is None:
            ax, ay = ORIGIN[0] + rel[i][0], ORIGIN[1] + rel[i][1]
            px, py = ax, ay
        else:
            parent = out[n.parent_id]["absolute"]
            px, py = PAD_X + rel[i][0], PAD_Y + rel[i][1]
            ax, ay = parent["x"] + px, parent["y"] + py
        out[i] = {
            "position": {"x": px, "y": py},
            "absolute": {"x": ax, "y": ay},
            "width": boxes[i].w,
            "height": boxes[i].h,
        }
    return out


# --- emission --------------------------------------------------------------------


def _selector(token: str) -> list[str]:
    ref = single_token(token)
    assert ref is not None
    return [ref[0], ref[1]]


def _model(catalog: Catalog, kind: str) -> dict:
    name = catalog.lookup(kind).model or ""
    return {
        "provider": MODEL_PROVIDERS.get(name, FALLBACK_PROVIDER),
        "name": name,
        "mode": "chat",
        "completion_params": dict(COMPLETION_PARAMS),
    }


def _jinja_name(rid: str, var: str, taken: set[str], text: str) -> str:
    base = re.sub(r"[^A-Za-z0-9_]", "_", f"arg_{rid}_{var}")
    name, k = base, 1
    while name in taken or ("{{ " + name + " }}") in text:
        k += 1
        name = f"{base}_{k}"
    taken.add(name)
    return name


def _if_case_id(index: int) -> str:
    return "true" if index == 0 else f"case_{index}"


def _source_handle(graph: ValidatedGraph, edge: Edge) -> str:
    node = graph.node(edge.source)
    if node.kind == "if-else":
        if edge.port == len(node.params["conditions"]):
            return "false"
        return _if_case_id(edge.port)
    if node.kind == "question-classifier":
        return str(edge.port + 1)
    return "source"


def _node_data(graph: ValidatedGraph, node, catalog: Catalog) -> dict:
    p = node.params
    kind = node.kind
    data: dict[str, Any] = {"type": kind, "title": node.title or catalog.lookup(kind).label, "desc": "", "selected": False}
    if node.parent_id is not None:
        data["isInIteration"] = True
        data["iteration_id"] = node.parent_id

    def type_of(token: str) -> VarType | None:
        ref = single_token(token)
        return graph.type_of(*ref) if ref else None

    if kind == "start":
        data["variables"] = []
        for v in p["variables"]:
            t = str(VarType.parse(v["type"]))
            if t not in START_TYPES:
                raise EmitUnsupported(node.id, f"start input type {t} has no platform encoding")
            entry = {"variable": v["name"], "label": v["name"], "type": START_TYPES[t], "required": True,
                     "options": []}
            if VarType.parse(t).is_file:
                entry["allowed_file_types"] = ["document", "image", "audio", "video"]
                entry["allowed_file_upload_methods"] = ["local_file", "remote_url"]
            else:
                entry["max_length"] = 48000
            data["variables"].append(entry)
    elif kind == "end":
        data["outputs"] = [
            {"variable": o["name"], "value_selector": _selector(o["value"]), "value_type": o["type"]}
            for o in p["outputs"]
        ]
    elif kind == "llm":
        prompts = []
        if p["system"]:
            prompts.append({"id": f"{node.id}-system", "role": "system", "text": p["system"]})
        prompts.append({"id": f"{node.id}-user", "role": "user", "text": p["prompt"]})
        data.update({
            "model": _model(catalog, kind),
            "prompt_template": prompts,
            "context": {"enabled": False, "variable_selector": []},
            "vision": {"enabled": False},
        })
    elif kind == "question-classifier":
        data.update({
            "model": _model(catalog, kind),
            "query_variable_selector": _selector(p["query"]),
            "classes": [{"id": str(i + 1), "name": c} for i, c in enumerate(p["classes"])],
            "instruction": p["instruction"],
            "vision": {"enabled": False},
        })
    elif kind == "code":
        data.update({
            "code_language": "python3",
            "code": p["script"],
            "variables": [{"variable": v["name"], "value_selector": _selector(v["value"])} for v in p["variables"]],
            "outputs": {o["name"]: {"type": str(VarType.parse(o["type"])), "children": None} for o in p["outputs"]},
        })
    elif kind == "document-extractor":
        t = type_of(p["file"])
        data.update({"variable_selector": _selector(p["file"]), "is_array_file": bool(t and t.is_array)})
    elif kind == "http-request":
        body = {"type": "none", "data": []}
        if p["body"]:
            body = {"type": "raw-text", "data": [{"type": "text", "value": p["body"]}]}
        data.update({
            "method": p["method"].lower(),
            "url": p["url"],
            "authorization": {"type": "no-auth", "config": None},
            "headers": p["headers"],
            "params": "",
            "body": body,
            "timeout": {"max_connect_timeout": 0, "max_read_timeout": 0, "max_write_timeout": 0},
        })
    elif kind == "if-else":
        cases = []
        for i, group in enumerate(p["conditions"]):
            conds = []
            for j, c in enumerate(group["conditions"]):
                t = type_of(c["variable"])
                conds.append({
                    "id": f"{node.id}-{i}-{j}",
                    "variable_selector": _selector(c["variable"]),
                    "comparison_operator": IF_OPERATORS[c["operator"]],
                    "value": "" if c["operator"] in UNARY_OPERATORS else c["value"],
                    "varType": str(t) if t else "string",
                })
            cid = _if_case_id(i)
            cases.append({"id": cid, "case_id": cid, "logical_operator": group["logical_operator"], "conditions": conds})
        data["cases"] = cases
    elif kind == "list-operator":
        t = type_of(p["variable"]) or VarType("string", True)
        flt = p["filter"]
        data.update({
            "variable": _selector(p["variable"]),
            "var_type": str(t),
            "item_var_type": str(t.element()),
            "filter_by": {
                "enabled": flt is not None,
                "conditions": [] if flt is None else [
                    {"key": "", "comparison_operator": IF_OPERATORS[flt["operator"]],
                     "value": "" if flt["operator"] in UNARY_OPERATORS else flt["value"]}],
            },
            "order_by": {"enabled": p["order"] is not None, "key": "", "value": p["order"] or "asc"},
            "limit": {"enabled": p["limit"] is not None, "size": p["limit"] if p["limit"] is not None else 10},
            "extract_by": {"enabled": False, "serial": "1"},
        })
    elif kind == "parameter-extractor":
        data.update({
            "model": _model(catalog, kind),
            "query": _selector(p["query"]),
            "parameters": [
                {"name": q["name"], "type": EXTRACTOR_TYPES.get(q["type"], q["type"]),
                 "description": q["description"], "required": True}
                for q in p["parameters"]
            ],
            "instruction": p["instruction"],
            "reasoning_mode": "prompt",
            "vision": {"enabled": False},
        })
    elif kind == "template-transform":
        text = p["template"]
        taken: set[str] = set()
        names: dict[tuple[str, str], str] = {}
        for ref in find_tokens(text):
            if ref not in names:
                names[ref] = _jinja_name(*ref, taken, text)
        rendered = text
        for (rid, var), name in names.items():
            rendered = rendered.replace(make_token(rid, var), "{{ " + name + " }}")
        data.update({
            "template": rendered,
            "variables": [{"variable": name, "value_selector": [rid, var]} for (rid, var), name in names.items()],
        })
    elif kind == "variable-aggregator":
        t = graph.type_of(node.id, "output")
        data.update({"variables": [_selector(v) for v in p["variables"]], "output_type": str(t) if t else "string"})
    elif kind == "iteration":
        t = graph.type_of(node.id, "output")
        entry = next(c for c in graph.children(node.id) if graph.node(c).kind == "iteration-start")
        data.update({
            "iterator_selector": _selector(p["iterator"]),
            "output_selector": _selector(p["output_selector"]),
            "output_type": str(t) if t else "array[string]",
            "start_node_id": entry,
            "is_parallel": False,
            "parallel_nums": 10,
            "error_handle_mode": "terminated",
        })
    elif kind == "iteration-start":
        data["title"] = node.title
    elif kind in TOOL_KINDS:
        tool = TOOL_KINDS[kind]
        config = {}
        if tool.get("model_config"):
            config["model"] = catalog.lookup(kind).model or ""
        data.update({
            "provider_id": tool["provider_id"],
            "provider_name": tool["provider_name"],
            "provider_type": "builtin",
            "tool_name": tool["tool"](p),
            "tool_label": catalog.lookup(kind).label,
            "tool_configurations": config,
            "tool_parameters": {name: {"type": "mixed", "value": p[name]} for name in tool["params"]},
        })
        data["type"] = "tool"
    else:
        raise EmitUnsupported(node.id, f"no platform encoding for kind {kind}")
    return data


def to_platform(graph: ValidatedGraph, name: str = "workflow", description: str = "",
                catalog: Catalog | None = None) -> dict:
    """Build the DSL document as a plain dict (see :func:`emit`)."""
    catalog = catalog or default_catalog()
    pos = layout(graph)
    nodes = []
    for node_id in graph.topo_order:
        node = graph.node(node_id)
        box = pos[node_id]
        entry: dict[str, Any] = {
            "id": node_id,
            "type": "custom-iteration-start" if node.kind == "iteration-start" else "custom",
            "data": _node_data(graph, node, catalog),
            "position": box["position"],
            "positionAbsolute": box["absolute"],
            "width": box["width"],
            "height": box["height"],
            "sourcePosition": "right",
            "targetPosition": "left",
            "selected": False,
        }
        if node.kind == "iteration-start":
            entry["draggable"] = False
            entry["selectable"] = False
        if node.parent_id is not None:
            entry["parentId"] = node.parent_id
            entry["extent"] = "parent"
            entry["zIndex"] = CHILD_Z
        nodes.append(entry)
    edges = []
    for e in graph.edges:
        src, tgt = graph.node(e.source), graph.node(e.target)
        handle = _source_handle(graph, e)
        edata: dict[str, Any] = {
            "sourceType": src.kind if src.kind not in TOOL_KINDS else "tool",
            "targetType": tgt.kind if tgt.kind not in TOOL_KINDS else "tool",
            "isInIteration": src.parent_id is not None,
        }
        if src.parent_id is not None:
            edata["iteration_id"] = src.parent_id
        edges.append({
            "id": f"{e.source}-{handle}-{e.target}-target",
            "source": e.source,
            "sourceHandle": handle,
            "target": e.target,
            "targetHandle": "target",
            "type": "custom",
            "zIndex": CHILD_Z if src.parent_id is not None else 0,
            "data": edata,
        })
    return {
        "app": {
            "name": name,
            "description": description,
            "mode": "workflow",
            "icon": "🤖",
            "icon_background": "#FFEAD5",
            "use_icon_as_answer_icon": False,
        },
        "kind": "app",
        "version": DSL_VERSION,
        "dependencies": [],
        "workflow": {
            "conversation_variables": [],
            "environment_variables": [],
            "features": {
                "file_upload": {"enabled": False},
                "opening_statement": "",
                "retriever_resource": {"enabled": False},
                "sensitive_word_avoidance": {"enabled": False},
                "speech_to_text": {"enabled": False},
                "suggested_questions": [],
                "suggested_questions_after_answer": {"enabled": False},
                "text_to_speech": {"enabled": False, "language": "", "voice": ""},
            },
            "graph": {"nodes": nodes, "edges": edges, "viewport": {"x": 0, "y": 0, "zoom": 1}},
        },
    }


def emit(graph: ValidatedGraph, name: str = "workflow", description: str = "",
         catalog: Catalog | None = None) -> str:
    """Deterministic Dify YAML for *graph* (same inputs give identical bytes)."""
    doc = to_platform(graph, name, description, catalog)
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True, indent=2, width=4096,
                          default_flow_style=False)


# --- lowering -------------------------------------------------------------------------


def _token(selector: Any) -> str:
    if not (isinstance(selector, list) and len(selector) == 2):
        raise ImportFailure("lower", f"bad value selector {selector!r}")
    return make_token(str(selector[0]), str(selector[1]))


def _tool_kind(data: Mapping[str, Any]) -> str:
    provider, tool_name = data.get("provider_id"), data.get("tool_name", "")
    for kind, tool in TOOL_KINDS.items():
        if tool["provider_id"] != provider:
            continue
        if kind == "markdown-exporter" and tool_name.startswith("md_to_"):
            return kind
        if kind == "echarts" and tool_name.endswith("_chart"):
            return kind
        if kind not in ("markdown-exporter", "echarts") and tool_name == tool["tool"]({}):
            return kind
    raise ImportFailure("lower", f"unknown tool {provider}/{tool_name}")


def _lower_params(kind: str, d: Mapping[str, Any]) -> dict:
    if kind == "start":
        out = []
        for v in d.get("variables", []):
            t = START_TYPES_BACK.get(v.get("type"))
            if t is None:
                raise ImportFailure("lower", f"unsupported start input type {v.get('type')!r}")
            out.append({"name": v["variable"], "type": t})
        return {"variables": out}
    if kind == "end":
        return {"outputs": [
            {"name": o["variable"], "value": _token(o["value_selector"]), "type": o.get("value_type", "string")}
            for o in d.get("outputs", [])
        ]}
    if kind == "llm":
        prompts = {p.get("role"): p.get("text", "") for p in d.get("prompt_template", [])}
        return {"prompt": prompts.get("user", ""), "system": prompts.get("system", "")}
    if kind == "question-classifier":
        return {"query": _token(d["query_variable_selector"]), "classes": [c["name"] for c in d.get("classes", [])],
                "instruction": d.get("instruction", "")}
    if kind == "code":
        return {
            "script": d.get("code", ""),
            "variables": [{"name": v["variable"], "value": _token(v["value_selector"])} for v in d.get("variables", [])],
            "outputs": [{"name": k, "type": v["type"]} for k, v in (d.get("outputs") or {}).items()],
        }
    if kind == "document-extractor":
        return {"file": _token(d["variable_selector"])}
    if kind == "http-request":
        body = d.get("body") or {}
        text = ""
        if body.get("type") not in (None, "none"):
            text = "".join(part.get("value", "") for part in body.get("data", []))
        return {"url": d.get("url", ""), "method": str(d.get("method", "get")).upper(),
                "headers": d.get("headers", ""), "body": text}
    if kind == "if-else":
        conditions = []
        for case in d.get("cases", []):
            leaves = []
            for c in case.get("conditions", []):
                op = IF_OPERATORS_BACK.get(c.get("comparison_operator"))
                if op is None:
                    raise ImportFailure("lower", f"unknown operator {c.get('comparison_operator')!r}")
                value = None if op in UNARY_OPERATORS else c.get("value")
                leaves.append({"variable": _token(c["variable_selector"]), "operator": op, "value": value})
            conditions.append({"logical_operator": case.get("logical_operator", "and"), "conditions": leaves})
        return {"conditions": conditions}
    if kind == "list-operator":
        flt = d.get("filter_by") or {}
        f = None
        if flt.get("enabled") and flt.get("conditions"):
            c = flt["conditions"][0]
            op = IF_OPERATORS_BACK.get(c.get("comparison_operator"))
            if op is None:
                raise ImportFailure("lower", f"unknown operator {c.get('comparison_operator')!r}")
            f = {"operator": op, "value": None if op in UNARY_OPERATORS else c.get("value")}
        order = d.get("order_by") or {}
        limit = d.get("limit") or {}
        return {
            "variable": _token(d["variable"]),
            "filter": f,
            "order": order.get("value") if order.get("enabled") else None,
            "limit": limit.get("size") if limit.get("enabled") else None,
        }
    if kind == "parameter-extractor":
        return {
            "query": _token(d["query"]),
            "parameters": [
                {"description": q.get("description", ""), "name": q["name"],
                 "type": EXTRACTOR_TYPES_BACK.get(q["type"], q["type"])}
                for q in d.get("parameters", [])
            ],
            "instruction": d.get("instruction", ""),
        }
    if kind == "template-transform":
        text = d.get("template", "")
        for v in d.get("variables", []):
            text = text.replace("{{ " + v["variable"] + " }}", _token(v["value_selector"]))
        return {"template": text}
    if kind == "variable-aggregator":
        return {"variables": [_token(s) for s in d.get("variables", [])]}
    if kind == "iteration":
        return {"iterator": _token(d["iterator_selector"]), "output_selector": _token(d["output_selector"])}
    if kind == "iteration-start":
        return {}
    if kind in TOOL_KINDS:
        tool = TOOL_KINDS[kind]
        tp = d.get("tool_parameters") or {}
        out = {}
        for name in tool["params"]:
            if name in tp:
                v = tp[name]
                out[name] = _token(v["value"]) if v.get("type") == "variable" else v.get("value")
        if kind == "markdown-exporter":
            out["format"] = d["tool_name"][len("md_to_"):]
        if kind == "echarts":
            out["chart_type"] = d["tool_name"][: -len("_chart")]
        return out
    raise ImportFailure("lower", f"unsupported kind {kind}")


def lower(platform_doc: Mapping[str, Any], catalog: Catalog | None = None) -> WorkflowDoc:
    """Translate a parsed DSL document back to the interchange form."""
    catalog = catalog or default_catalog()
    try:
        graph = platform_doc["workflow"]["graph"]
        raw_nodes, raw_edges = graph["nodes"], graph["edges"]
    except (KeyError, TypeError):
        raise ImportFailure("schema", "missing workflow.graph.nodes/edges") from None
    if platform_doc.get("app", {}).get("mode") not in ("workflow", "advanced-chat"):
        raise ImportFailure("schema", "app.mode must be workflow")
    nodes: list[NodeRecord] = []
    kinds: dict[str, str] = {}
    params_by_id: dict[str, dict] = {}
    for raw in raw_nodes:
        data = raw.get("data") or {}
        dtype = data.get("type")
        kind = _tool_kind(data) if dtype == "tool" else catalog.canonical(str(dtype))
        if kind is None:
            raise ImportFailure("lower", f"unknown node type {dtype!r}")
        node_id = str(raw["id"])
        try:
            params = _lower_params(kind, data)
        except KeyError as exc:
            raise ImportFailure("lower", f"node {node_id}: missing field {exc}") from None
        kinds[node_id] = kind
        params_by_id[node_id] = params
        parent = raw.get("parentId")
        nodes.append(NodeRecord(node_id, kind, data.get("title", ""), params, None if parent is None else str(parent)))
    edges = []
    for raw in raw_edges:
        src, tgt, handle = str(raw["source"]), str(raw["target"]), str(raw.get("sourceHandle", "source"))
        kind = kinds.get(src)
        port = 0
        if kind == "if-else":
            n = len(params_by_id[src]["conditions"])
            case_ids = [_if_case_id(i) for i in range(n)]
            if handle == "false":
                port = n
            elif handle in case_ids:
                port = case_ids.index(handle)
            else:
                raise ImportFailure("lower", f"unknown if-else handle {handle!r}")
        elif kind == "question-classifier":
            try:
                port = int(handle) - 1
            except ValueError:
                raise ImportFailure("lower", f"unknown classifier handle {handle!r}") from None
        edges.append(Edge(src, port, tgt))
    return WorkflowDoc(tuple(nodes), tuple(edges))


def import_check(yaml_text: str, catalog: Catalog | None = None) -> ValidatedGraph:
    """Stand-in for platform import: parse, lower, and validate."""
    try:
        doc = yaml.safe_load(yaml_text)
    except yaml.YAMLError as exc:
        raise ImportFailure("parse", str(exc)) from None
    if not isinstance(doc, dict):
        raise ImportFailure("parse", "document is not a mapping")
    if doc.get("kind") != "app":
        raise ImportFailure("schema", "kind must be app")
    workflow_doc = lower(doc, catalog)
    try:
        return build(workflow_doc, catalog)
    except GraphError as exc:
        raise ImportFailure("build", str(exc)) from None


def isomorphic(a: ValidatedGraph, b: ValidatedGraph) -> bool:
    """Same nodes (kind, params, parent) and the same port-labelled edges.

    The emitter keeps node ids, so the node bijection is the identity map.
    """
    na = {n.id: (n.kind, n.params, n.parent_id) for n in a.nodes}
    nb = {n.id: (n.kind, n.params, n.parent_id) for n in b.nodes}
    return na == nb and set(a.edges) == set(b.edges)


def push_to_platform(yaml_text: str, base_url: str, token: str, client=None) -> dict:
    """POST the DSL to a live instance's app-import endpoint (opt-in)."""
    import httpx

    own = client is None
    client = client or httpx.Client(timeout=30)
    try:
        resp = client.post(
            base_url.rstrip("/") + "/console/api/apps/imports",
            json={"mode": "yaml-content", "yaml_content": yaml_text},
            headers={"Authorization": f"Bearer {token}"},
        )
        if resp.status_code >= 400:
            raise WfsynthError(f"platform import failed: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.json()
    finally:
        if own:
            client.close()
