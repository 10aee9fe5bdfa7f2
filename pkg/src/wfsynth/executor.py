"""Deterministic interpreter for validated workflows.

Nodes run in topological order.  A node runs when at least one inbound
edge is live (its source ran and, for branching sources, the edge's port
was the one taken); everything else is skipped.  Iterations run their
child scope once per item in a fresh store.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from wfsynth.catalog import TOKEN_RE, VarType, single_token
from wfsynth.errors import (
    ExecutionError,
    HandlerError,
    InputMismatch,
    LimitExceeded,
    MissingHandler,
    TypeMismatch,
    UnboundToken,
)
from wfsynth.graph import Node, ValidatedGraph

STRUCTURAL_KINDS = frozenset({"start", "end", "iteration", "iteration-start"})


@dataclass(frozen=True)
class FileValue:
    name: str
    extension: str
    media_kind: str = "document"
    size: int = 0
    content: bytes | None = None

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "FileValue":
        content = data.get("content")
        if isinstance(content, str):
            content = content.encode("utf-8")
        ext = data.get("extension") or ("." + data["name"].rsplit(".", 1)[-1] if "." in data["name"] else "")
        return cls(
            name=data["name"],
            extension=ext.lower(),
            media_kind=data.get("media_kind", "document"),
            size=int(data.get("size", len(content) if content else 0)),
            content=content,
        )

    def to_json(self) -> dict:
        return {"name": self.name, "extension": self.extension, "media_kind": self.media_kind, "size": self.size}


@dataclass(frozen=True)
class TypedValue:
    type: VarType
    value: Any


def coerce_value(vartype: VarType, raw: Any) -> TypedValue:
    """Wrap a plain JSON-ish value as a TypedValue, checking it fits *vartype*."""
    if isinstance(raw, TypedValue):
        raw = raw.value

    def one(base: str, v: Any) -> Any:
        if base == "file":
            if isinstance(v, FileValue):
                return v
            if isinstance(v, Mapping) and "name" in v:
                return FileValue.from_json(v)
        elif base == "string" and isinstance(v, str):
            return v
        elif base == "number" and isinstance(v, (int, float)) and not isinstance(v, bool):
            return v
        elif base == "boolean" and isinstance(v, bool):
            return v
        elif base == "object" and isinstance(v, Mapping):
            return dict(v)
        raise InputMismatch(f"value {v!r} does not fit type {vartype}")

    if vartype.is_array:
        if not isinstance(raw, (list, tuple)):
            raise InputMismatch(f"value {raw!r} does not fit type {vartype}")
        return TypedValue(vartype, [one(vartype.base, v) for v in raw])
    return TypedValue(vartype, one(vartype.base, raw))


def value_to_json(value: Any) -> Any:
    if isinstance(value, FileValue):
        return value.to_json()
    if isinstance(value, list):
        return [value_to_json(v) for v in value]
    if isinstance(value, dict):
        return {k: value_to_json(v) for k, v in value.items()}
    return value


# --- variable store ------------------------------------------------------------


class VarStore:
    """Write-once mapping (node id, var name) -> value, with a read-only parent."""

    def __init__(self, parent: "VarStore | None" = None):
        self._data: dict[tuple[str, str], Any] = {}
        self.parent = parent

    def write(self, node_id: str, var: str, value: Any) -> None:
        key = (node_id, var)
        if key in self._data:
            raise ExecutionError(f"variable {node_id}.{var} written twice")
        self._data[key] = value

    def has(self, node_id: str, var: str) -> bool:
        if (node_id, var) in self._data:
            return True
        return self.parent.has(node_id, var) if self.parent else False

    def read(self, node_id: str, var: str) -> Any:
        key = (node_id, var)
        if key in self._data:
            return self._data[key]
        if self.parent is not None:
            return self.parent.read(node_id, var)
        raise UnboundToken("{{#" + f"{node_id}.{var}" + "#}}")

    def resolve(self, token: str) -> Any:
        ref = single_token(token)
        if ref is None:
            raise UnboundToken(token)
        return self.read(*ref)


# --- rendering -------------------------------------------------------------------


def render_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isfinite(value) and value == int(value) and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    if isinstance(value, str):
        return value
    if isinstance(value, FileValue):
        return value.name
    if isinstance(value, (list, tuple)):
        return "\n".join(render_value(v) for v in value)
    if isinstance(value, dict):
        return json.dumps(value_to_json(value), ensure_ascii=False, sort_keys=True)
    return str(value)


def render_template(template: str, store: VarStore) -> str:
    """Substitute every ``{{#id.var#}}`` token; nothing else is interpreted."""

    def sub(m):
        return render_value(store.read(m.group(1), m.group(2)))

    return TOKEN_RE.sub(sub, template)


def substitute(value: Any, store: VarStore) -> Any:
    """Replace references inside a params structure.

    A string that is exactly one token becomes the referenced value itself;
    other strings are rendered as templates.
    """
    if isinstance(value, str):
        if single_token(value) is not None:
            return store.resolve(value)
        return render_template(value, store)
    if isinstance(value, list):
        return [substitute(v, store) for v in value]
    if isinstance(value, dict):
        return {k: substitute(v, store) for k, v in value.items()}
    return value


# --- conditions --------------------------------------------------------------------


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _as_number(v: Any) -> float:
    if _is_number(v):
        return v
    try:
        return float(v)
    except (TypeError, ValueError):
        raise TypeMismatch(v, "expected a number") from None


def compare(operator: str, operand: Any, value: Any = None) -> bool:
    """Apply one comparison to a resolved operand."""
    if operator in ("=", "≠", "<", "≤", ">", "≥"):
        if not _is_number(operand):
            raise TypeMismatch(operand, f"{operator} needs a number")
        rhs = _as_number(value)
        return {
            "=": operand == rhs, "≠": operand != rhs, "<": operand < rhs,
            "≤": operand <= rhs, ">": operand > rhs, "≥": operand >= rhs,
        }[operator]
    if operator in ("is-empty", "not-empty"):
        if operand is None:
            empty = True
        elif isinstance(operand, (str, list, tuple, dict)):
            empty = len(operand) == 0
        else:
            raise TypeMismatch(operand, f"{operator} needs a string or array")
        return empty if operator == "is-empty" else not empty
    if operator in ("contains", "not-contains"):
        if isinstance(operand, str):
            hit = render_value(value) in operand
        elif isinstance(operand, (list, tuple)):
            hit = any(item == value or render_value(item) == render_value(value) for item in operand)
        else:
            raise TypeMismatch(operand, f"{operator} needs a string or array")
        return hit if operator == "contains" else not hit
    if not isinstance(operand, str):
        raise TypeMismatch(operand, f"{operator} needs a string")
    rhs = render_value(value)
    if operator == "equals":
        return operand == rhs
    if operator == "not-equals":
        return operand != rhs
    if operator == "starts-with":
        return operand.startswith(rhs)
    if operator == "ends-with":
        return operand.endswith(rhs)
    raise TypeMismatch(operator, "unknown operator")


def evaluate_condition(condition: Mapping[str, Any], store: VarStore) -> bool:
    """Evaluate a normalized ``{logical_operator, conditions: [leaf...]}`` group."""
    leaves = condition["conditions"]
    results = (compare(c["operator"], store.resolve(c["variable"]), c.get("value")) for c in leaves)
    if condition.get("logical_operator", "and") == "or":
        return any(results)
    return all(results)


# --- trace ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEvent:
    event: str  # node-enter | node-exit | branch-taken | iteration-item | error
    node: str
    scope: str = ""
    detail: Any = None

    def to_json(self) -> dict:
        out = {"event": self.event, "node": self.node, "scope": self.scope}
        if self.detail is not None:
            out["detail"] = self.detail
        return out


def trace_to_jsonl(trace) -> str:
    return "".join(json.dumps(e.to_json(), ensure_ascii=False, sort_keys=True) + "\n" for e in trace)


def _summary(outputs: Mapping[str, Any]) -> dict:
    out = {}
    for k in sorted(outputs):
        text = render_value(outputs[k])
        out[k] = text if len(text) <= 80 else text[:77] + "..."
    return out


# --- execution ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Limits:
    max_node_executions: int = 1000
    max_iteration_items: int = 100


@dataclass
class NodeResult:
    outputs: dict
    port: int | None = None


@dataclass(frozen=True)
class ExecOutput:
    text: Mapping[str, TypedValue]
    files: Mapping[str, TypedValue]
    trace: tuple[TraceEvent, ...]

    @property
    def empty(self) -> bool:
        return not self.text and not self.files

    def text_values(self) -> dict[str, Any]:
        return {k: v.value for k, v in self.text.items()}


Handler = Callable[[Node, dict, "ExecContext"], "NodeResult | dict"]
# kinds whose handler receives raw (unsubstituted) params
LAZY_KINDS = frozenset({"variable-aggregator"})


@dataclass
class ExecContext:
    graph: ValidatedGraph
    handlers: Mapping[str, Handler]
    limits: Limits
    store: VarStore
    scope: str = ""
    trace: list = field(default_factory=list)
    executed: list = field(default_factory=lambda: [0])

    def child(self, store: VarStore, scope: str) -> "ExecContext":
        return ExecContext(self.graph, self.handlers, self.limits, store, scope, self.trace, self.executed)


def _run_scope(ctx: ExecContext, parent: str | None, outputs: dict) -> None:
    graph = ctx.graph
    ids = graph.scope(parent)
    by_id = graph.node_map
    entry_kind = "start" if parent is None else "iteration-start"
    active = {i for i in ids if by_id[i].kind == entry_kind}
    for nid in ids:
        if nid not in active:
            continue
        node = by_id[nid]
        ctx.executed[0] += 1
        if ctx.executed[0] > ctx.limits.max_node_executions:
            raise LimitExceeded("node executions")
        ctx.trace.append(TraceEvent("node-enter", nid, ctx.scope))
        result = _run_node(node, ctx, outputs)
        for var, value in result.outputs.items():
            ctx.store.write(nid, var, value)
        ctx.trace.append(TraceEvent("node-exit", nid, ctx.scope, _summary(result.outputs)))
        if result.port is not None:
            ctx.trace.append(TraceEvent("branch-taken", nid, ctx.scope, result.port))
        for e in graph.out_edges(nid):
            if result.port is None or e.port == result.port:
                active.add(e.target)


def _run_node(node: Node, ctx: ExecContext, outputs: dict) -> NodeResult:
    kind = node.kind
    if kind in ("start", "iteration-start"):
        return NodeResult({})
    if kind == "end":
        for o in node.params["outputs"]:
            if o["name"] in outputs:
                continue
            value = ctx.store.resolve(o["value"])
            outputs[o["name"]] = TypedValue(VarType.parse(o["type"]), value)
        return NodeResult({})
    if kind == "iteration":
        return _run_iteration(node, ctx)
    handler = ctx.handlers.get(kind)
    if handler is None:
        raise MissingHandler(f"no handler for {kind}")
    params = node.params if kind in LAZY_KINDS else substitute(node.params, ctx.store)
    try:
        result = handler(node, params, ctx)
    except ExecutionError:
        raise
    except Exception as exc:  # handler bugs surface as node failures
        raise HandlerError(node.id, f"{type(exc).__name__}: {exc}") from exc
    if not isinstance(result, NodeResult):
        result = NodeResult(dict(result))
    expected = set(ctx.graph.var_types.get(node.id, {}))
    if set(result.outputs) != expected:
        raise HandlerError(node.id, f"handler produced {sorted(result.outputs)}, expected {sorted(expected)}")
    return result


def _run_iteration(node: Node, ctx: ExecContext) -> NodeResult:
    items = ctx.store.resolve(node.params["iterator"])
    if not isinstance(items, (list, tuple)):
        raise HandlerError(node.id, "iterator is not an array")
    if len(items) > ctx.limits.max_iteration_items:
        raise LimitExceeded("iteration items")
    collected = []
    for index, item in enumerate(items):
        store = VarStore(parent=ctx.store)
        store.write(node.id, "item", item)
        store.write(node.id, "index", index)
        inner = ctx.child(store, f"{ctx.scope}/{node.id}[{index}]")
        ctx.trace.append(TraceEvent("iteration-item", node.id, ctx.scope, index))
        _run_scope(inner, node.id, {})
        collected.append(store.resolve(node.params["output_selector"]))
    return NodeResult({"output": collected})


def execute(
    graph: ValidatedGraph,
    inputs: Mapping[str, Any],
    handlers: Mapping[str, Handler] | None = None,
    limits: Limits | None = None,
) -> ExecOutput:
    """Run *graph* on *inputs* (name -> TypedValue or plain value).

    Raises an :class:`ExecutionError`; the partial trace is attached to it as
    ``exc.trace``.
    """
    if handlers is None:
        from wfsynth.handlers import default_test_handlers

        handlers = default_test_handlers()
    limits = limits or Limits()
    declared = dict(graph.io.inputs)
    if set(inputs) != set(declared):
        raise InputMismatch(f"inputs {sorted(inputs)} do not match declared {sorted(declared)}")
    missing = sorted(k for k in graph.kinds() - STRUCTURAL_KINDS if k not in handlers)
    if missing:
        raise MissingHandler(f"no handler for {missing}")

    store = VarStore()
    start = next(n for n in graph.nodes if n.kind == "start")
    for name, t in declared.items():
        tv = inputs[name]
        if isinstance(tv, TypedValue) and tv.type != t:
            raise InputMismatch(f"input {name} has type {tv.type}, expected {t}")
        store.write(start.id, name, coerce_value(t, tv).value)

    ctx = ExecContext(graph, handlers, limits, store)
    outputs: dict[str, TypedValue] = {}
    try:
        _run_scope(ctx, None, outputs)
    except ExecutionError as exc:
        ctx.trace.append(TraceEvent("error", getattr(exc, "node_id", ""), ctx.scope, str(exc)))
        exc.trace = tuple(ctx.trace)
        raise
    text = {k: v for k, v in outputs.items() if not v.type.is_file}
    files = {k: v for k, v in outputs.items() if v.type.is_file}
    return ExecOutput(text, files, tuple(ctx.trace))
