"""Registry of the twenty supported node kinds.

Every other module asks the catalog what a node kind accepts, what it
produces and how many outbound ports it has.  Parameter schemas are trimmed
to the *primary* parameters a generator has to fill in; everything else is
defaulted here (``normalize_params``) or by the YAML emitter.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Iterable, Mapping

from wfsynth.errors import MissingBranchSpec, UnknownKind

KIND_IDS: tuple[str, ...] = (
    "start",
    "end",
    "llm",
    "question-classifier",
    "code",
    "document-extractor",
    "http-request",
    "if-else",
    "list-operator",
    "parameter-extractor",
    "template-transform",
    "variable-aggregator",
    "iteration",
    "iteration-start",
    "text-to-speech",
    "text-to-image",
    "mermaid-converter",
    "markdown-exporter",
    "google-search",
    "echarts",
)

ALIASES = {"template": "template-transform"}

# Models bound to model-backed kinds; overridable through Catalog.with_models.
MODEL_DEFAULTS = {
    "llm": "qwen3-vl-plus",
    "question-classifier": "qwen3-max",
    "parameter-extractor": "qwen3-max",
    "text-to-image": "z-image-turbo",
    "text-to-speech": "gpt-4o-mini-tts",
}

TOKEN_RE = re.compile(r"\{\{#([A-Za-z0-9_\-]+)\.([A-Za-z0-9_\-.]+)#\}\}")


def find_tokens(text: str) -> list[tuple[str, str]]:
    return [(m.group(1), m.group(2)) for m in TOKEN_RE.finditer(text)]


def single_token(value: Any) -> tuple[str, str] | None:
    """Return ``(node_id, var)`` when *value* is exactly one reference token."""
    if not isinstance(value, str):
        return None
    m = TOKEN_RE.fullmatch(value.strip())
    return (m.group(1), m.group(2)) if m else None


def make_token(node_id: str, var: str) -> str:
    return "{{#" + f"{node_id}.{var}" + "#}}"


# --- variable types ------------------------------------------------------------

_BASES = ("string", "number", "boolean", "object", "file")


@dataclass(frozen=True, order=True)
class VarType:
    base: str
    is_array: bool = False

    def __post_init__(self):
        if self.base not in _BASES:
            raise ValueError(f"unknown base type {self.base!r}")

    @classmethod
    def parse(cls, text: str) -> "VarType":
        if not isinstance(text, str):
            raise ValueError(f"variable type must be a string, got {text!r}")
        t = text.strip().lower()
        m = re.fullmatch(r"array\[(\w+)\]", t)
        if m:
            return cls(m.group(1), True)
        if t == "array-of-file":
            return cls("file", True)
        return cls(t)

    @property
    def is_file(self) -> bool:
        return self.base == "file"

    def element(self) -> "VarType":
        return VarType(self.base) if self.is_array else self

    def array_of(self) -> "VarType":
        if self.is_array:
            raise ValueError("array-of nests at most one level")
        return VarType(self.base, True)

    def __str__(self) -> str:
        return f"array[{self.base}]" if self.is_array else self.base


def is_vartype(text: Any) -> bool:
    try:
        VarType.parse(text)
    except ValueError:
        return False
    return True


STRING = VarType("string")
NUMBER = VarType("number")
OBJECT = VarType("object")
FILES = VarType("file", True)

START_INPUT_TYPES = frozenset(
    VarType.parse(t) for t in ("string", "number", "boolean", "object", "file", "array[file]")
)

# --- catalog records -------------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str  # string | number | boolean | object | token | array[string] | array[object]
    required: bool = True
    default: Any = None
    item_fields: tuple[str, ...] = ()
    item_defaults: tuple[tuple[str, Any], ...] = ()
    description: str = ""


@dataclass(frozen=True)
class PortRule:
    kind: str  # fixed | per-branch | per-class | terminal
    count: int = 1


@dataclass(frozen=True)
class Violation:
    code: str
    param: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.code}({self.param!r}{', ' + self.detail if self.detail else ''})"


@dataclass(frozen=True)
class NodeSpec:
    kind: str
    label: str
    description: str
    primary_params: tuple[ParamSpec, ...]
    output_vars: tuple[tuple[str, VarType], ...]
    port_rule: PortRule = PortRule("fixed", 1)
    container_rule: str = "plain"
    accepts_inbound: bool = True
    model: str | None = None

    def param(self, name: str) -> ParamSpec | None:
        for p in self.primary_params:
            if p.name == name:
                return p
        return None


FIXED1 = PortRule("fixed", 1)


def _p(name, type_, required=True, default=None, items=(), item_defaults=(), description=""):
    return ParamSpec(name, type_, required, default, tuple(items), tuple(item_defaults), description)


_SPECS: tuple[NodeSpec, ...] = (
    NodeSpec(
        "start", "Start", "Entry point; declares the workflow input variables.",
        (_p("variables", "array[object]", items=("name", "type"),
            description="[{name, type}] with type in string|number|boolean|object|file|array[file]"),),
        (), FIXED1, accepts_inbound=False,
    ),
    NodeSpec(
        "end", "End", "Terminates a branch and declares workflow outputs.",
        (_p("outputs", "array[object]", items=("name", "value"),
            description="[{name, value: single reference token, type?}]"),),
        (), PortRule("terminal", 0),
    ),
    NodeSpec(
        "llm", "LLM", "Calls a chat model with a prompt; references allowed inside prompts.",
        (_p("prompt", "string"), _p("system", "string", False, "")),
        (("text", STRING),),
    ),
    NodeSpec(
        "question-classifier", "Question Classifier",
        "Routes to one outbound port per declared class (port i = classes[i]).",
        (_p("query", "token"), _p("classes", "array[string]"), _p("instruction", "string", False, "")),
        (("class_name", STRING),), PortRule("per-class", 0),
    ),
    NodeSpec(
        "code", "Code",
        "Runs a python3 `def main(...) -> dict` script; inputs bound by name from references.",
        (_p("script", "string"),
         _p("variables", "array[object]", False, [], items=("name", "value")),
         _p("outputs", "array[object]", False, [{"name": "result", "type": "string"}], items=("name", "type"))),
        (),
    ),
    NodeSpec(
        "document-extractor", "Document Extractor", "Extracts text from a file (or list of files).",
        (_p("file", "token"),),
        (("text", STRING),),
    ),
    NodeSpec(
        "http-request", "HTTP Request", "Performs an HTTP request.",
        (_p("url", "string"), _p("method", "string", False, "GET"),
         _p("headers", "string", False, ""), _p("body", "string", False, "")),
        (("body", STRING), ("status_code", NUMBER), ("headers", OBJECT)),
    ),
    NodeSpec(
        "if-else", "If-Else",
        "n conditions give n+1 outbound ports; port i fires for the first true condition, port n is ELSE.",
        (_p("conditions", "array[object]",
            description="each {variable, operator, value} or {logical_operator: and|or, conditions: [...]}"),),
        (), PortRule("per-branch", 0),
    ),
    NodeSpec(
        "list-operator", "List Operator", "Filters, sorts and truncates an array variable.",
        (_p("variable", "token"), _p("filter", "object", False, None),
         _p("order", "string", False, None), _p("limit", "number", False, None)),
        (("result", VarType("string", True)), ("first_record", STRING), ("last_record", STRING)),
    ),
    NodeSpec(
        "parameter-extractor", "Parameter Extractor", "Extracts typed parameters from text with a model.",
        (_p("query", "token"),
         _p("parameters", "array[object]", items=("name", "type"), item_defaults=(("description", ""),)),
         _p("instruction", "string", False, "")),
        (),
    ),
    NodeSpec(
        "template-transform", "Template", "Renders a text template containing reference tokens.",
        (_p("template", "string"),),
        (("output", STRING),),
    ),
    NodeSpec(
        "variable-aggregator", "Variable Aggregator",
        "Outputs the first available value among references from alternative branches.",
        (_p("variables", "array[string]"),),
        (("output", STRING),),
    ),
    NodeSpec(
        "iteration", "Iteration",
        "Container: runs its child sub-workflow once per item. Children set parent_id to this node and "
        "may reference {{#<id>.item#}} / {{#<id>.index#}}. Never connect the iteration to its children "
        "by edges.",
        (_p("iterator", "token"), _p("output_selector", "token")),
        (("output", VarType("string", True)),), container_rule="container",
    ),
    NodeSpec(
        "iteration-start", "Iteration-Start",
        "Entry of an iteration's sub-workflow; exactly one per iteration, parent_id = the iteration.",
        (), (), container_rule="container-entry", accepts_inbound=False,
    ),
    NodeSpec(
        "text-to-speech", "Text to Speech", "Synthesizes speech audio (.mp3).",
        (_p("text", "string"), _p("voice", "string", False, "alloy")),
        (("files", FILES),),
    ),
    NodeSpec(
        "text-to-image", "Text to Image", "Generates an image (.png) from a prompt.",
        (_p("prompt", "string"), _p("size", "string", False, "1024*1024")),
        (("files", FILES),),
    ),
    NodeSpec(
        "mermaid-converter", "Mermaid Converter", "Renders Mermaid code to an image (.png).",
        (_p("mermaid_code", "string"),),
        (("files", FILES),),
    ),
    NodeSpec(
        "markdown-exporter", "Markdown Exporter", "Exports Markdown to a document file.",
        (_p("md_text", "string"), _p("format", "string", False, "md",
                                     description="pdf|docx|md|html|pptx|xlsx")),
        (("files", FILES),),
    ),
    NodeSpec(
        "google-search", "Google Search", "Web search.",
        (_p("query", "string"),),
        (("text", STRING), ("json", VarType("object", True))),
    ),
    NodeSpec(
        "echarts", "Echarts", "Builds an ECharts chart definition from ';'-separated data.",
        (_p("chart_type", "string", description="line|bar|pie"), _p("data", "string"),
         _p("x_axis", "string", False, ""), _p("title", "string", False, "")),
        (("text", STRING),),
    ),
)

EXPORT_FORMATS = {"pdf": ".pdf", "docx": ".docx", "md": ".md", "html": ".html", "pptx": ".pptx", "xlsx": ".xlsx"}
CHART_TYPES = ("line", "bar", "pie")

# Comparison operators: canonical spelling -> accepted alternates.
OPERATORS = {
    "=": ("==",),
    "≠": ("!=",),
    "<": (),
    "≤": ("<=",),
    ">": (),
    "≥": (">=",),
    "equals": ("is", "eq"),
    "not-equals": ("is not", "is-not"),
    "contains": (),
    "not-contains": ("not contains",),
    "starts-with": ("start with", "starts with"),
    "ends-with": ("end with", "ends with"),
    "is-empty": ("empty",),
    "not-empty": ("not empty",),
}
_OPERATOR_LOOKUP = {alt: canon for canon, alts in OPERATORS.items() for alt in (canon, *alts)}
UNARY_OPERATORS = frozenset({"is-empty", "not-empty"})


def canonical_operator(op: Any) -> str | None:
    if not isinstance(op, str):
        return None
    return _OPERATOR_LOOKUP.get(op.strip().lower()) or _OPERATOR_LOOKUP.get(op.strip())


# --- the catalog object ---------------------------------------------------------


def fold_kind(token: str) -> str:
    """Case-fold a kind token and unify word separators."""
    folded = re.sub(r"[\s_]+", "-", token.strip().lower())
    return ALIASES.get(folded, folded)


@dataclass(frozen=True)
class Catalog:
    specs: Mapping[str, NodeSpec] = field(default_factory=dict)

    def lookup(self, kind_token: str) -> NodeSpec:
        if not isinstance(kind_token, str):
            raise UnknownKind([kind_token])
        spec = self.specs.get(fold_kind(kind_token))
        if spec is None:
            raise UnknownKind([kind_token])
        return spec

    def canonical(self, kind_token: str) -> str | None:
        try:
            return self.lookup(kind_token).kind
        except UnknownKind:
            return None

    def __iter__(self):
        return iter(self.specs.values())

    def __len__(self) -> int:
        return len(self.specs)

    def with_models(self, overrides: Mapping[str, str]) -> "Catalog":
        specs = dict(self.specs)
        for kind, model in overrides.items():
            spec = self.lookup(kind)
            specs[spec.kind] = replace(spec, model=model)
        return Catalog(specs)

    def dump(self) -> list[dict]:
        return [spec_record(s) for s in self.specs.values()]


def spec_record(spec: NodeSpec) -> dict:
    return {
        "kind": spec.kind,
        "label": spec.label,
        "description": spec.description,
        "params": [
            {
                "name": p.name,
                "type": p.type,
                "required": p.required,
                **({"default": p.default} if not p.required else {}),
                **({"item_fields": list(p.item_fields)} if p.item_fields else {}),
                **({"description": p.description} if p.description else {}),
            }
            for p in spec.primary_params
        ],
        "outputs": [{"name": n, "type": str(t)} for n, t in spec.output_vars],
        "ports": {"rule": spec.port_rule.kind, "count": spec.port_rule.count},
        "container": spec.container_rule,
        "accepts_inbound": spec.accepts_inbound,
        **({"model": spec.model} if spec.model else {}),
    }


@lru_cache(maxsize=1)
def default_catalog() -> Catalog:
    specs = {}
    for spec in _SPECS:
        specs[spec.kind] = replace(spec, model=MODEL_DEFAULTS.get(spec.kind))
    return Catalog(specs)


def lookup(kind_token: str, catalog: Catalog | None = None) -> NodeSpec:
    return (catalog or default_catalog()).lookup(kind_token)


# --- parameter validation --------------------------------------------------------


def _type_ok(value: Any, type_: str) -> bool:
    if type_ == "string":
        return isinstance(value, str)
    if type_ == "token":
        return single_token(value) is not None
    if type_ == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if type_ == "boolean":
        return isinstance(value, bool)
    if type_ == "object":
        return isinstance(value, dict)
    if type_ == "array[string]":
        return isinstance(value, list) and all(isinstance(v, str) for v in value)
    if type_ == "array[object]":
        return isinstance(value, list) and all(isinstance(v, dict) for v in value)
    raise AssertionError(type_)


def _check_condition(cond: Any, where: str, out: list[Violation]) -> None:
    if not isinstance(cond, dict):
        out.append(Violation("BadItem", "conditions", f"{where}: expected an object"))
        return
    if "conditions" in cond:
        lo = cond.get("logical_operator", "and")
        if lo not in ("and", "or"):
            out.append(Violation("BadItem", "conditions", f"{where}: logical_operator must be and|or"))
        subs = cond["conditions"]
        if not isinstance(subs, list) or not subs:
            out.append(Violation("BadItem", "conditions", f"{where}: empty condition list"))
            return
        for j, sub in enumerate(subs):
            if isinstance(sub, dict) and "conditions" in sub:
                out.append(Violation("BadItem", "conditions", f"{where}.{j}: nested groups unsupported"))
            else:
                _check_condition(sub, f"{where}.{j}", out)
        return
    if single_token(cond.get("variable")) is None:
        out.append(Violation("BadItem", "conditions", f"{where}: variable must be one reference token"))
    op = canonical_operator(cond.get("operator"))
    if op is None:
        out.append(Violation("BadItem", "conditions", f"{where}: unknown operator {cond.get('operator')!r}"))
    elif op not in UNARY_OPERATORS and "value" not in cond:
        out.append(Violation("BadItem", "conditions", f"{where}: operator {op} needs a value"))


def _kind_checks(kind: str, params: Mapping[str, Any]) -> list[Violation]:
    out: list[Violation] = []
    if kind == "start":
        for i, v in enumerate(params.get("variables") or []):
            if not isinstance(v, dict) or "type" not in v:
                continue
            if not is_vartype(v["type"]) or VarType.parse(v["type"]) not in START_INPUT_TYPES:
                out.append(Violation("BadItem", "variables", f"{i}: unsupported input type {v['type']!r}"))
    elif kind == "end":
        for i, o in enumerate(params.get("outputs") or []):
            if not isinstance(o, dict):
                continue
            if "value" in o and single_token(o["value"]) is None:
                out.append(Violation("BadItem", "outputs", f"{i}: value must be one reference token"))
            if "type" in o and not is_vartype(o["type"]):
                out.append(Violation("BadItem", "outputs", f"{i}: unknown type {o['type']!r}"))
    elif kind in ("code", "parameter-extractor"):
        key = "outputs" if kind == "code" else "parameters"
        for i, o in enumerate(params.get(key) or []):
            if isinstance(o, dict) and "type" in o and not is_vartype(o["type"]):
                out.append(Violation("BadItem", key, f"{i}: unknown type {o['type']!r}"))
        if kind == "code":
            for i, v in enumerate(params.get("variables") or []):
                if isinstance(v, dict) and "value" in v and single_token(v["value"]) is None:
                    out.append(Violation("BadItem", "variables", f"{i}: value must be one reference token"))
    elif kind == "if-else":
        conds = params.get("conditions")
        if isinstance(conds, list):
            if not conds:
                out.append(Violation("BadItem", "conditions", "at least one condition required"))
            for i, c in enumerate(conds):
                _check_condition(c, str(i), out)
    elif kind == "question-classifier":
        classes = params.get("classes")
        if isinstance(classes, list) and not classes:
            out.append(Violation("BadItem", "classes", "at least one class required"))
    elif kind == "variable-aggregator":
        vs = params.get("variables")
        if isinstance(vs, list):
            if not vs:
                out.append(Violation("BadItem", "variables", "at least one reference required"))
            for i, v in enumerate(vs):
                if single_token(v) is None:
                    out.append(Violation("BadItem", "variables", f"{i}: must be one reference token"))
    elif kind == "markdown-exporter":
        fmt = params.get("format")
        if isinstance(fmt, str) and fmt.lower().lstrip(".") not in EXPORT_FORMATS:
            out.append(Violation("BadItem", "format", f"unsupported format {fmt!r}"))
    elif kind == "echarts":
        ct = params.get("chart_type")
        if isinstance(ct, str) and ct.lower() not in CHART_TYPES:
            out.append(Violation("BadItem", "chart_type", f"unsupported chart type {ct!r}"))
    elif kind == "list-operator":
        order = params.get("order")
        if isinstance(order, str) and order not in ("asc", "desc"):
            out.append(Violation("BadItem", "order", "must be asc or desc"))
        flt = params.get("filter")
        if isinstance(flt, dict) and canonical_operator(flt.get("operator")) is None:
            out.append(Violation("BadItem", "filter", f"unknown operator {flt.get('operator')!r}"))
    return out


def validate_params(spec: NodeSpec, node_params: Mapping[str, Any]) -> list[Violation]:
    """Check *node_params* against the kind's primary parameter schema.

    Never raises; returns violations in a stable order (schema order, then
    unknown keys sorted, then kind-specific checks).
    """
    if not isinstance(node_params, Mapping):
        return [Violation("WrongType", "params", "expected an object")]
    out: list[Violation] = []
    for p in spec.primary_params:
        if p.name not in node_params:
            if p.required:
                out.append(Violation("MissingRequired", p.name))
            continue
        value = node_params[p.name]
        if value is None and not p.required:
            continue
        if not _type_ok(value, p.type):
            out.append(Violation("WrongType", p.name, f"expected {p.type}"))
            continue
        if p.item_fields:
            for i, item in enumerate(value):
                for f in p.item_fields:
                    if f not in item:
                        out.append(Violation("BadItem", p.name, f"{i}: missing {f!r}"))
                if "name" in p.item_fields and not isinstance(item.get("name", ""), str):
                    out.append(Violation("BadItem", p.name, f"{i}: name must be a string"))
            names = [item.get("name") for item in value if isinstance(item.get("name"), str)]
            if "name" in p.item_fields and len(names) != len(set(names)):
                out.append(Violation("BadItem", p.name, "duplicate names"))
    known = {p.name for p in spec.primary_params}
    for key in sorted(k for k in node_params if k not in known):
        out.append(Violation("UnknownKey", key))
    if not out:
        out.extend(_kind_checks(spec.kind, node_params))
    return out


def _normalize_condition(cond: dict) -> dict:
    if "conditions" in cond:
        return {
            "logical_operator": cond.get("logical_operator", "and"),
            "conditions": [_normalize_condition(c)["conditions"][0] for c in cond["conditions"]],
        }
    op = canonical_operator(cond["operator"])
    leaf = {"variable": cond["variable"].strip(), "operator": op,
            "value": None if op in UNARY_OPERATORS else cond.get("value")}
    return {"logical_operator": "and", "conditions": [leaf]}


# optional per-item keys kept by normalization; other unknown item keys are dropped
_ITEM_EXTRAS = {("end", "outputs"): {"type"}}


def normalize_params(spec: NodeSpec, node_params: Mapping[str, Any]) -> dict:
    """Fill defaults for absent optional params; canonical key order.

    Assumes ``validate_params`` returned no violations.
    """
    out: dict[str, Any] = {}
    for p in spec.primary_params:
        value = node_params.get(p.name)
        if value is None:
            value = copy.deepcopy(p.default)
        else:
            value = copy.deepcopy(value)
        if p.item_fields and isinstance(value, list):
            keep = set(p.item_fields) | {k for k, _ in p.item_defaults} | _ITEM_EXTRAS.get((spec.kind, p.name), set())
            value = [{**dict(p.item_defaults), **{k: v for k, v in item.items() if k in keep}} for item in value]
            for item in value:
                if isinstance(item.get("type"), str):
                    item["type"] = str(VarType.parse(item["type"]))
        out[p.name] = value
    if spec.kind == "if-else":
        out["conditions"] = [_normalize_condition(c) for c in out["conditions"]]
    elif spec.kind == "markdown-exporter":
        out["format"] = out["format"].lower().lstrip(".")
    elif spec.kind == "echarts":
        out["chart_type"] = out["chart_type"].lower()
    elif spec.kind == "list-operator" and isinstance(out.get("filter"), dict):
        f = out["filter"]
        op = canonical_operator(f["operator"])
        out["filter"] = {"operator": op, "value": None if op in UNARY_OPERATORS else f.get("value")}
    elif spec.kind == "http-request":
        out["method"] = out["method"].upper()
    return out


def outbound_port_count(spec: NodeSpec, node_params: Mapping[str, Any]) -> int:
    rule = spec.port_rule
    if rule.kind == "fixed":
        return rule.count
    if rule.kind == "terminal":
        return 0
    key = "conditions" if rule.kind == "per-branch" else "classes"
    branches = node_params.get(key) if isinstance(node_params, Mapping) else None
    if not isinstance(branches, list):
        raise MissingBranchSpec(f"{spec.kind} params lack {key!r}")
    return len(branches) + 1 if rule.kind == "per-branch" else len(branches)


# --- output variables --------------------------------------------------------------

TypeOf = Callable[[str, str], "VarType | None"]


def output_vars(spec: NodeSpec, params: Mapping[str, Any], type_of: TypeOf | None = None) -> dict[str, VarType]:
    """Output variables of a node, resolving kind-dependent types.

    *type_of(node_id, var)* resolves a referenced variable's type; without it,
    inferred types fall back to the static catalog entry.
    """

    def ref_type(value: Any) -> VarType | None:
        tok = single_token(value)
        if tok is None or type_of is None:
            return None
        return type_of(*tok)

    kind = spec.kind
    if kind == "start":
        return {v["name"]: VarType.parse(v["type"]) for v in params.get("variables") or []}
    if kind == "code":
        return {o["name"]: VarType.parse(o["type"]) for o in params.get("outputs") or []}
    if kind == "parameter-extractor":
        return {o["name"]: VarType.parse(o["type"]) for o in params.get("parameters") or []}
    out = dict(spec.output_vars)
    if kind == "document-extractor":
        t = ref_type(params.get("file"))
        if t is not None and t.is_array:
            out["text"] = VarType("string", True)
    elif kind == "list-operator":
        t = ref_type(params.get("variable"))
        if t is not None and t.is_array:
            out = {"result": t, "first_record": t.element(), "last_record": t.element()}
    elif kind == "variable-aggregator":
        vs = params.get("variables") or []
        t = ref_type(vs[0]) if vs else None
        if t is not None:
            out["output"] = t
    elif kind == "iteration":
        t = ref_type(params.get("output_selector"))
        if t is not None and not t.is_array:
            out["output"] = t.array_of()
    return out


def iteration_item_vars(params: Mapping[str, Any], type_of: TypeOf | None = None) -> dict[str, VarType]:
    """Variables an iteration exposes to its children."""
    item = STRING
    tok = single_token(params.get("iterator"))
    if tok is not None and type_of is not None:
        t = type_of(*tok)
        if t is not None:
            item = t.element()
    return {"item": item, "index": NUMBER}


def iter_kinds(catalog: Catalog | None = None) -> Iterable[str]:
    return (catalog or default_catalog()).specs.keys()
