"""Structural validation of workflow documents.

``build`` turns a decoded :class:`~wfsynth.parsing.WorkflowDoc` into an
immutable :class:`ValidatedGraph` or raises one :class:`GraphError` subclass
carrying every instance of the first failing check.  Checks run in this
order::

    DuplicateId, UnknownKind, DanglingEdge, ParamViolation, PortOutOfRange,
    CycleDetected, ContainmentViolation, MissingStart, MultipleStarts, NoEnd,
    Unreachable

Iteration membership is expressed by ``parent_id``; edges never cross a
containment boundary.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

from wfsynth.catalog import (
    Catalog,
    STRING,
    VarType,
    default_catalog,
    find_tokens,
    iteration_item_vars,
    normalize_params,
    outbound_port_count,
    output_vars,
    single_token,
    validate_params,
)
from wfsynth.errors import (
    ContainmentViolation,
    CycleDetected,
    DanglingEdge,
    DuplicateId,
    MissingStart,
    MultipleStarts,
    NoEnd,
    ParamViolation,
    PortOutOfRange,
    UnknownKind,
    Unreachable,
)
from wfsynth.parsing import Edge, NodeRecord, WorkflowDoc


def id_key(node_id: str) -> tuple:
    """Tie-break key: numeric ids first in numeric order, then the rest lexicographically."""
    if node_id.isascii() and node_id.isdigit():
        return (0, int(node_id), node_id)
    return (1, 0, node_id)


def edge_key(e: Edge) -> tuple:
    return (id_key(e.source), e.port, id_key(e.target))


# --- topological sort -----------------------------------------------------------


def _pairs(edges: Iterable[Sequence]) -> list[tuple[str, str]]:
    out = []
    for e in edges:
        if len(e) == 3:
            out.append((e[0], e[2]))
        else:
            out.append((e[0], e[1]))
    return out


def shortest_cycle(nodes: Iterable[str], pairs: Iterable[tuple[str, str]]) -> list[str]:
    """Shortest directed cycle among *nodes*, rotated to start at its smallest id."""
    nodes = sorted(set(nodes), key=id_key)
    allowed = set(nodes)
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for s, t in pairs:
        if s in allowed and t in allowed:
            succ[s].append(t)
    for n in nodes:
        succ[n] = sorted(set(succ[n]), key=id_key)
    best: list[str] | None = None
    for root in nodes:
        # BFS for the shortest path root -> ... -> root
        parent: dict[str, str | None] = {root: None}
        queue = deque([root])
        found = None
        while queue and found is None:
            u = queue.popleft()
            for v in succ[u]:
                if v == root:
                    found = u
                    break
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        if found is None:
            continue
        path = [found]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        cycle = list(reversed(path))
        if best is None or len(cycle) < len(best):
            best = cycle
    return best or []


def topological_sort(nodes: Iterable[str], edges: Iterable[Sequence]) -> list[str]:
    """Kahn's algorithm; among ready nodes the smallest ``id_key`` goes first.

    *edges* may be ``(source, target)`` pairs or ``(source, port, target)``
    triples.  Raises :class:`CycleDetected` with a shortest cycle.
    """
    nodes = list(dict.fromkeys(nodes))
    pairs = _pairs(edges)
    indeg = {n: 0 for n in nodes}
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for s, t in pairs:
        succ[s].append(t)
        indeg[t] += 1
    heap = [(id_key(n), n) for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, n = heapq.heappop(heap)
        order.append(n)
        for t in succ[n]:
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(heap, (id_key(t), t))
    if len(order) < len(nodes):
        done = set(order)
        raise CycleDetected(shortest_cycle([n for n in nodes if n not in done], pairs))
    return order


# --- validated graph ---------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    title: str
    params: dict
    parent_id: str | None = None


@dataclass(frozen=True)
class IOSignature:
    inputs: tuple[tuple[str, VarType], ...]
    outputs: tuple[tuple[str, VarType], ...]

    def to_json(self) -> dict:
        return {
            "inputs": [{"name": n, "type": str(t)} for n, t in self.inputs],
            "outputs": [{"name": n, "type": str(t)} for n, t in self.outputs],
        }


@dataclass(frozen=True)
class ValidatedGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    topo_order: tuple[str, ...]
    io: IOSignature
    var_types: Mapping[str, Mapping[str, VarType]] = field(compare=True)

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    def scope(self, parent_id: str | None) -> list[str]:
        """Node ids of one containment level, in topological order."""
        by_id = self.node_map
        return [i for i in self.topo_order if by_id[i].parent_id == parent_id]

    def children(self, iteration_id: str) -> list[str]:
        return self.scope(iteration_id)

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.source == node_id]

    def in_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.target == node_id]

    def kinds(self) -> set[str]:
        return {n.kind for n in self.nodes}

    def type_of(self, node_id: str, var: str) -> VarType | None:
        return self.var_types.get(node_id, {}).get(var)

    def to_doc(self) -> WorkflowDoc:
        """Lossless interchange form: nodes in stored order, edges sorted."""
        return WorkflowDoc(
            tuple(NodeRecord(n.id, n.kind, n.title, n.params, n.parent_id) for n in self.nodes),
            tuple(sorted(self.edges, key=edge_key)),
        )


def _check_duplicates(doc: WorkflowDoc) -> None:
    seen, dups = set(), []
    for n in doc.nodes_info:
        if n.id in seen and n.id not in dups:
            dups.append(n.id)
        seen.add(n.id)
    if dups:
        raise DuplicateId(dups)


def _containment_errors(doc: WorkflowDoc, kinds: Mapping[str, str]) -> list[Any]:
    errs: list[Any] = []
    parent = {n.id: n.parent_id for n in doc.nodes_info}
    for n in doc.nodes_info:
        kind = kinds[n.id]
        if n.parent_id is not None:
            pk = kinds.get(n.parent_id)
            if pk is None:
                errs.append(("unknown-parent", n.id, n.parent_id))
            elif pk != "iteration":
                errs.append(("parent-not-iteration", n.id, n.parent_id))
            elif kind in ("start", "end", "iteration"):
                errs.append(("illegal-child", n.id, kind))
        elif kind == "iteration-start":
            errs.append(("orphan-iteration-start", n.id))
    for n in doc.nodes_info:
        if kinds[n.id] == "iteration":
            entries = [c.id for c in doc.nodes_info if c.parent_id == n.id and kinds[c.id] == "iteration-start"]
            if len(entries) != 1:
                errs.append(("iteration-entry-count", n.id, len(entries)))
    for e in doc.edges:
        if parent[e.source] != parent[e.target]:
            errs.append(("cross-boundary-edge", e))
    return errs


def _reachable(entry: str, succ: Mapping[str, Iterable[str]]) -> set[str]:
    seen = {entry}
    stack = [entry]
    while stack:
        u = stack.pop()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def _infer_types(
    nodes: Mapping[str, NodeRecord],
    kinds: Mapping[str, str],
    params: Mapping[str, dict],
    order: Sequence[str],
    catalog: Catalog,
) -> dict[str, dict[str, VarType]]:
    types: dict[str, dict[str, VarType]] = {}
    item_vars: dict[str, dict[str, VarType]] = {}

    def type_of(node_id: str, var: str) -> VarType | None:
        if node_id in item_vars and var in item_vars[node_id]:
            return item_vars[node_id][var]
        return types.get(node_id, {}).get(var)

    def visit(scope: str | None) -> None:
        for nid in order:
            if nodes[nid].parent_id != scope:
                continue
            spec = catalog.lookup(kinds[nid])
            if spec.kind == "iteration":
                item_vars[nid] = iteration_item_vars(params[nid], type_of)
                visit(nid)
            types[nid] = output_vars(spec, params[nid], type_of)

    visit(None)
    return types


def build(doc: WorkflowDoc, catalog: Catalog | None = None) -> ValidatedGraph:
    catalog = catalog or default_catalog()
    _check_duplicates(doc)

    unknown = [(n.id, n.type) for n in doc.nodes_info if catalog.canonical(n.type) is None]
    if unknown:
        raise UnknownKind(unknown)
    kinds = {n.id: catalog.canonical(n.type) for n in doc.nodes_info}
    nodes = {n.id: n for n in doc.nodes_info}

    dangling = []
    for e in doc.edges:
        for endpoint in (e.source, e.target):
            if endpoint not in nodes:
                dangling.append((tuple(e), endpoint))
    if dangling:
        raise DanglingEdge(dangling)

    violations = []
    for n in doc.nodes_info:
        for v in validate_params(catalog.lookup(kinds[n.id]), n.params):
            violations.append((n.id, v))
    if violations:
        raise ParamViolation(violations)
    params = {n.id: normalize_params(catalog.lookup(kinds[n.id]), n.params) for n in doc.nodes_info}

    bad_ports = []
    for e in doc.edges:
        count = outbound_port_count(catalog.lookup(kinds[e.source]), params[e.source])
        if e.port >= count:
            bad_ports.append(tuple(e))
    if bad_ports:
        raise PortOutOfRange(bad_ports)

    ids = [n.id for n in doc.nodes_info]
    order = topological_sort(ids, doc.edges)

    contain = _containment_errors(doc, kinds)
    if contain:
        raise ContainmentViolation(contain)

    starts = [i for i in ids if kinds[i] == "start"]
    if not starts:
        raise MissingStart(["no start node"])
    if len(starts) > 1:
        raise MultipleStarts(starts)
    if not any(kinds[i] == "end" for i in ids):
        raise NoEnd(["no end node"])

    succ: dict[str, list[str]] = {i: [] for i in ids}
    for e in doc.edges:
        succ[e.source].append(e.target)
    reached = _reachable(starts[0], succ)
    for i in ids:
        if kinds[i] == "iteration-start":
            reached |= _reachable(i, succ)
    unreachable = sorted((i for i in ids if i not in reached), key=id_key)
    if unreachable:
        raise Unreachable(unreachable)

    types = _infer_types(nodes, kinds, params, order, catalog)
    for i in ids:
        if kinds[i] == "end":
            outs = []
            for o in params[i]["outputs"]:
                t = o.get("type")
                if t is None:
                    tok = single_token(o["value"])
                    inferred = types.get(tok[0], {}).get(tok[1]) if tok else None
                    t = str(inferred or STRING)
                rest = {k: v for k, v in o.items() if k not in ("name", "value", "type")}
                outs.append({"name": o["name"], "value": o["value"].strip(), "type": str(VarType.parse(t)), **rest})
            params[i]["outputs"] = outs

    inputs = tuple(types[starts[0]].items())
    outputs: list[tuple[str, VarType]] = []
    for i in order:
        if kinds[i] == "end":
            for o in params[i]["outputs"]:
                pair = (o["name"], VarType.parse(o["type"]))
                if pair not in outputs:
                    outputs.append(pair)

    # children directly after their iteration keeps every scope in topological order
    top = [i for i in order if nodes[i].parent_id is None]
    flat: list[str] = []
    for i in top:
        flat.append(i)
        if kinds[i] == "iteration":
            flat.extend(c for c in order if nodes[c].parent_id == i)

    return ValidatedGraph(
        nodes=tuple(Node(n.id, kinds[n.id], n.title, params[n.id], n.parent_id) for n in doc.nodes_info),
        edges=tuple(sorted(doc.edges, key=edge_key)),
        topo_order=tuple(flat),
        io=IOSignature(inputs, tuple(outputs)),
        var_types=types,
    )


def io_signature(graph: ValidatedGraph) -> IOSignature:
    return graph.io


# --- variable reference resolution ----------------------------------------------------


@dataclass(frozen=True)
class RefViolation:
    code: str  # UnknownRefNode | UnknownRefVar | UseBeforeDef | CrossScopeRef
    node_id: str
    token: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.code}(node {self.node_id}: {self.token}{'; ' + self.detail if self.detail else ''})"


def iter_strings(value: Any, path: str = "") -> Iterator[tuple[str, str]]:
    if isinstance(value, str):
        yield path, value
    elif isinstance(value, list):
        for i, v in enumerate(value):
            yield from iter_strings(v, f"{path}[{i}]")
    elif isinstance(value, dict):
        for k, v in value.items():
            yield from iter_strings(v, f"{path}.{k}" if path else k)


def dominators(graph: ValidatedGraph, scope: str | None) -> dict[str, set[str]]:
    ids = graph.scope(scope)
    preds: dict[str, list[str]] = {i: [] for i in ids}
    for e in graph.edges:
        if e.target in preds and e.source in preds:
            preds[e.target].append(e.source)
    dom: dict[str, set[str]] = {}
    for i in ids:  # topological order
        ps = preds[i]
        if not ps:
            dom[i] = {i}
        else:
            common = set.intersection(*(dom[p] for p in ps))
            dom[i] = common | {i}
    return dom


def guaranteed_before(graph: ValidatedGraph, scope: str | None,
                      catalog: Catalog | None = None) -> dict[str, set[str]]:
    """Nodes certain to have run whenever a node runs (the node itself included).

    Starts from the dominators and adds upstream nodes reached by an
    unconditional edge from a node already in the set: parallel fan-out
    runs every arm, and a branching node forces a target only when all of
    its ports lead there.
    """
    catalog = catalog or default_catalog()
    ids = graph.scope(scope)
    dom = dominators(graph, scope)
    anc = ancestors(graph, scope)
    ports = {i: outbound_port_count(catalog.lookup(graph.node(i).kind), graph.node(i).params) for i in ids}
    forced: dict[str, set[str]] = {i: set() for i in ids}  # target -> sources that always fire into it
    for i in ids:
        by_target: dict[str, set[int]] = {}
        for e in graph.out_edges(i):
            by_target.setdefault(e.target, set()).add(e.port)
        for t, used in by_target.items():
            if t in forced and len(used) == ports[i]:
                forced[t].add(i)
    out: dict[str, set[str]] = {}
    for i in ids:
        sure = set(dom[i])
        for z in ids:  # topological order, so forcing sources are settled first
            if z in anc[i] and z not in sure and forced[z] & sure:
                sure.add(z)
        out[i] = sure
    return out


def ancestors(graph: ValidatedGraph, scope: str | None) -> dict[str, set[str]]:
    ids = graph.scope(scope)
    anc: dict[str, set[str]] = {i: set() for i in ids}
    for i in ids:
        for e in graph.in_edges(i):
            if e.source in anc:
                anc[i] |= anc[e.source] | {e.source}
    return anc


def resolve_vars(graph: ValidatedGraph, catalog: Catalog | None = None) -> list[RefViolation]:
    """Check every ``{{#node.var#}}`` token; returns all violations (empty list = ok).

    A reference must name a node in the same containment level that is
    guaranteed to have run before the referencing node (see
    :func:`guaranteed_before`).
    Variable-aggregator inputs only need to be upstream, since the
    aggregator takes whichever branch actually ran.  Iteration children may
    also use the iteration's ``item``/``index`` and its iterator token.
    """
    by_id = graph.node_map
    scopes = {n.parent_id for n in graph.nodes}
    dom: dict[str, set[str]] = {}
    anc: dict[str, set[str]] = {}
    for s in scopes:
        dom.update(guaranteed_before(graph, s, catalog))
        anc.update(ancestors(graph, s))

    out: list[RefViolation] = []
    for n in graph.nodes:
        for path, text in iter_strings(n.params):
            for rid, var in find_tokens(text):
                tok = "{{#" + f"{rid}.{var}" + "#}}"

                def bad(code: str, detail: str = "") -> None:
                    out.append(RefViolation(code, n.id, tok, detail))

                ref = by_id.get(rid)
                if ref is None:
                    bad("UnknownRefNode")
                    continue
                if n.kind == "iteration" and path == "output_selector":
                    if ref.parent_id != n.id:
                        bad("CrossScopeRef", "output_selector must name a child node")
                    elif graph.type_of(rid, var) is None:
                        bad("UnknownRefVar")
                    continue
                if n.parent_id is not None and rid == n.parent_id:
                    if var not in ("item", "index"):
                        bad("UnknownRefVar", "only item and index are visible inside the iteration")
                    continue
                if n.parent_id is not None and single_token(by_id[n.parent_id].params.get("iterator")) == (rid, var):
                    continue
                if ref.parent_id != n.parent_id:
                    bad("CrossScopeRef")
                    continue
                if graph.type_of(rid, var) is None:
                    bad("UnknownRefVar")
                    continue
                if n.kind == "variable-aggregator":
                    if rid not in anc[n.id]:
                        bad("UseBeforeDef", "not upstream")
                elif rid == n.id or rid not in dom[n.id]:
                    bad("UseBeforeDef", "referenced node does not always run before this node")
    return out
