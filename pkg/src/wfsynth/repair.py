"""Targeted auto-repairs for model responses and the verified retry loop."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from wfsynth.catalog import Catalog, default_catalog
from wfsynth.errors import (
    AttemptsExhausted,
    ContainmentViolation,
    CycleDetected,
    GraphError,
    JsonSyntax,
    MissingTag,
    SchemaViolation,
    Unrepairable,
)
from wfsynth.graph import build, id_key
from wfsynth.parsing import (
    Edge,
    ParsedResponse,
    WorkflowDoc,
    decode_workflow,
    extract_sections,
    render_response,
    strip_code_fences,
)

REPAIR_IDS = ("fence", "json", "topology", "node-selection")
MAX_TOPOLOGY_PASSES = 3


@dataclass(frozen=True)
class RepairOutcome:
    repaired: ParsedResponse
    applied: tuple[str, ...] = ()

    @property
    def changed(self) -> bool:
        return bool(self.applied)


# --- fences -------------------------------------------------------------------------

_WRAP_OPEN = re.compile(r"\A\s*(`{3,}|~{3,})[^\n`]*\n")


def unwrap_response_fence(text: str) -> str:
    """Remove fences wrapping the whole response (one or more layers)."""
    while True:
        m = _WRAP_OPEN.match(text)
        if not m:
            return text
        marker = m.group(1)
        body = text[m.end():]
        close = re.search(r"\n?[ \t]*" + re.escape(marker) + r"[ \t]*\s*\Z", body)
        if not close:
            return text
        text = body[: close.start()]


def repair_fences(response: ParsedResponse) -> RepairOutcome:
    stripped = strip_code_fences(response.workflow_text).strip()
    if stripped == response.workflow_text:
        return RepairOutcome(response)
    return RepairOutcome(replace(response, workflow_text=stripped), ("fence",))


def extract_with_repair(response_text: str) -> RepairOutcome:
    """extract_sections, retrying on the unwrapped body when the tags sit inside a fence."""
    applied: list[str] = []
    try:
        parsed = extract_sections(response_text)
    except MissingTag:
        unwrapped = unwrap_response_fence(response_text)
        if unwrapped == response_text:
            raise
        parsed = extract_sections(unwrapped)
        applied.append("fence")
    outcome = repair_fences(parsed)
    if outcome.changed and "fence" not in applied:
        applied.append("fence")
    return RepairOutcome(outcome.repaired, tuple(applied))


# --- lenient JSON -------------------------------------------------------------------------

# Each pass is a small scanner that tracks double- and single-quoted strings and
# comments so that it only rewrites structural text.


def _scan(text: str):
    """Yield (kind, start, end): kind in {"dq", "sq", "line-comment", "block-comment", "code"}."""
    i, n = 0, len(text)
    start = 0
    while i < n:
        c = text[i]
        if c in "\"'":
            if start < i:
                yield "code", start, i
            j = i + 1
            while j < n and text[j] != c:
                if text[j] == "\\":
                    j += 1
                elif text[j] == "\n" and c == "'":
                    break
                j += 1
            if j >= n or text[j] != c:
                # unterminated: treat rest of line as code
                yield "code", i, i + 1
                i += 1
                start = i
                continue
            yield ("dq" if c == '"' else "sq"), i, j + 1
            i = start = j + 1
            continue
        if text.startswith("//", i):
            if start < i:
                yield "code", start, i
            j = text.find("\n", i)
            j = n if j < 0 else j
            yield "line-comment", i, j
            i = start = j
            continue
        if text.startswith("/*", i):
            if start < i:
                yield "code", start, i
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            yield "block-comment", i, j
            i = start = j
            continue
        i += 1
    if start < n:
        yield "code", start, n


def _remove_trailing_commas(text: str) -> str:
    pieces = list(_scan(text))
    out = []
    for idx, (kind, s, e) in enumerate(pieces):
        chunk = text[s:e]
        if kind == "code":
            buf = []
            for j, ch in enumerate(chunk):
                if ch == "," and _next_significant(text, pieces, idx, s + j + 1) in ("]", "}"):
                    continue
                buf.append(ch)
            chunk = "".join(buf)
        out.append(chunk)
    return "".join(out)


def _next_significant(text: str, pieces, idx: int, pos: int) -> str | None:
    """First non-space, non-comment character at or after *pos*."""
    for kind, s, e in pieces[idx:]:
        if e <= pos or kind in ("line-comment", "block-comment"):
            continue
        if kind != "code":
            return text[s]
        for ch in text[max(s, pos):e]:
            if not ch.isspace():
                return ch
    return None


def _convert_single_quotes(text: str) -> str:
    out = []
    prev = ""  # last significant character outside comments
    for kind, s, e in _scan(text):
        chunk = text[s:e]
        # a single quote opens a literal only in value or key position
        if kind == "sq" and prev in ("", "{", "[", ",", ":"):
            inner = chunk[1:-1]
            inner = re.sub(r'\\(.)|"', lambda m: ("\\\"" if m.group(0) == '"' else
                                                  ("'" if m.group(1) == "'" else m.group(0))), inner)
            chunk = '"' + inner + '"'
        if kind == "code":
            stripped = chunk.rstrip()
            prev = stripped[-1] if stripped else prev
        elif kind in ("dq", "sq"):
            prev = chunk[-1]
        out.append(chunk)
    return "".join(out)


_BARE_KEY = re.compile(r"([{,]\s*)([A-Za-z_$][\w$\-]*)(\s*:)")


def _quote_bare_keys(text: str) -> str:
    out = []
    prev = ""  # last significant character outside comments; a comment may separate "," from the key
    for kind, s, e in _scan(text):
        chunk = text[s:e]
        if kind == "code":
            lead = prev if prev in ("{", ",") else ""
            chunk = _BARE_KEY.sub(lambda m: f'{m.group(1)}"{m.group(2)}"{m.group(3)}', lead + chunk)[len(lead):]
            stripped = chunk.rstrip()
            prev = stripped[-1] if stripped else prev
        elif kind not in ("line-comment", "block-comment"):
            prev = chunk[-1:]
        out.append(chunk)
    return "".join(out)


def _strip_comments(text: str) -> str:
    return "".join(text[s:e] for kind, s, e in _scan(text) if kind not in ("line-comment", "block-comment"))


JSON_PASSES: tuple[tuple[str, Callable[[str], str]], ...] = (
    ("trailing-commas", _remove_trailing_commas),
    ("single-quotes", _convert_single_quotes),
    ("bare-keys", _quote_bare_keys),
    ("comments", _strip_comments),
)


def _decodes(text: str) -> bool:
    try:
        json.loads(text)
    except json.JSONDecodeError:
        return False
    return True


def repair_json(workflow_text: str) -> str:
    """Apply the lenient passes cumulatively; return the first variant that strictly decodes.

    Valid input is returned as is; if no variant decodes the input is returned unchanged.
    """
    if _decodes(workflow_text):
        return workflow_text
    text = workflow_text
    for _, fix in JSON_PASSES:
        text = fix(text)
        if _decodes(text):
            return text
    return workflow_text


# --- topology -----------------------------------------------------------------------------


def _back_edges(doc: WorkflowDoc, kinds: dict[str, str]) -> set[Edge]:
    ids = [n.id for n in doc.nodes_info]
    out: dict[str, list[Edge]] = {i: [] for i in ids}
    for e in doc.edges:
        if e.source in out:
            out[e.source].append(e)
    for edges in out.values():
        edges.sort(key=lambda e: (e.port, id_key(e.target)))
    roots = [i for i in ids if kinds.get(i) == "start"]
    roots += sorted((i for i in ids if kinds.get(i) == "iteration-start"), key=id_key)
    roots += sorted(ids, key=id_key)
    color: dict[str, int] = {}  # 1 on stack, 2 done
    back: set[Edge] = set()
    for root in roots:
        if root in color:
            continue
        color[root] = 1
        stack = [(root, iter(out[root]))]
        while stack:
            node, it = stack[-1]
            e = next(it, None)
            if e is None:
                color[node] = 2
                stack.pop()
                continue
            if e.target not in out:
                continue
            state = color.get(e.target, 0)
            if state == 1:
                back.add(e)
            elif state == 0:
                color[e.target] = 1
                stack.append((e.target, iter(out[e.target])))
    return back


def _containment_edges(doc: WorkflowDoc, kinds: dict[str, str]) -> set[Edge]:
    """Edges linking an iteration with one of its own children (containment, not connection)."""
    parent = {n.id: n.parent_id for n in doc.nodes_info}
    bad = set()
    for e in doc.edges:
        for a, b in ((e.source, e.target), (e.target, e.source)):
            if kinds.get(a) == "iteration" and parent.get(b) == a:
                bad.add(e)
    return bad


def _topology_pass(doc: WorkflowDoc, catalog: Catalog) -> WorkflowDoc:
    kinds = {n.id: catalog.canonical(n.type) or "" for n in doc.nodes_info}
    drop = _containment_edges(doc, kinds)
    kept = WorkflowDoc(doc.nodes_info, tuple(e for e in doc.edges if e not in drop))
    drop |= _back_edges(kept, kinds)
    return WorkflowDoc(doc.nodes_info, tuple(e for e in doc.edges if e not in drop))


def repair_topology(doc: WorkflowDoc, catalog: Catalog | None = None) -> WorkflowDoc:
    """Delete back edges (deterministic DFS) and iteration-to-child edges until the doc builds.

    Never adds edges or removes nodes; raises :class:`Unrepairable` after
    three passes or on any other validation failure.
    """
    catalog = catalog or default_catalog()
    for _ in range(MAX_TOPOLOGY_PASSES):
        try:
            build(doc, catalog)
            return doc
        except (CycleDetected, ContainmentViolation) as exc:
            fixed = _topology_pass(doc, catalog)
            if fixed == doc:
                raise Unrepairable(f"no removable edge for {type(exc).__name__}", exc) from None
            doc = fixed
        except GraphError as exc:
            raise Unrepairable(f"{type(exc).__name__} is not a topology defect", exc) from None
    try:
        build(doc, catalog)
    except GraphError as exc:
        raise Unrepairable(f"still invalid after {MAX_TOPOLOGY_PASSES} passes", exc) from None
    return doc


# --- node selection -------------------------------------------------------------------------


def repair_node_selection(response: ParsedResponse, catalog: Catalog | None = None) -> ParsedResponse:
    """Make the declared selection equal the workflow's kinds (the workflow wins)."""
    catalog = catalog or default_catalog()
    if response.workflow_doc is None:
        return response
    used = sorted({catalog.canonical(n.type) or n.type for n in response.workflow_doc.nodes_info})
    declared = {catalog.canonical(t) for t in response.node_selection}
    if None not in declared and declared == set(used):
        return response
    return replace(response, node_selection=tuple(used))


# --- verified retry ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttemptRecord:
    index: int  # 1-based
    repairs: tuple[str, ...]
    stage: str  # "verified" or the failing stage
    detail: str = ""

    @property
    def verified(self) -> bool:
        return self.stage == "verified"

    def to_json(self) -> dict:
        return {"attempt": self.index, "repairs": list(self.repairs), "stage": self.stage, "detail": self.detail}

    def to_line(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True)


def log_to_lines(log: list[AttemptRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in log)


@dataclass
class ProcessedResponse:
    """Outcome of one attempt's repair chain, before verification."""

    raw: str
    parsed: ParsedResponse | None
    repairs: tuple[str, ...]
    stage: str | None = None  # failing stage, None when all repairs succeeded
    detail: str = ""

    @property
    def text(self) -> str:
        """The repaired response rendered back to tagged text (raw text if extraction failed)."""
        return self.raw if self.parsed is None else render_response(self.parsed)


def process_response(text: str, catalog: Catalog | None = None) -> ProcessedResponse:
    """extract -> fences -> decode (json repair) -> build (topology repair) -> node selection."""
    catalog = catalog or default_catalog()
    try:
        outcome = extract_with_repair(text)
    except MissingTag as exc:
        return ProcessedResponse(text, None, (), "format", f"missing tag <{exc.name}>")
    parsed, repairs = outcome.repaired, list(outcome.applied)
    try:
        doc = decode_workflow(parsed.workflow_text)
    except JsonSyntax as exc:
        fixed = repair_json(parsed.workflow_text)
        if fixed == parsed.workflow_text:
            return ProcessedResponse(text, parsed, tuple(repairs), "format", f"JsonSyntax: {exc}")
        parsed = replace(parsed, workflow_text=fixed)
        repairs.append("json")
        try:
            doc = decode_workflow(fixed)
        except SchemaViolation as exc2:
            return ProcessedResponse(text, parsed, tuple(repairs), "format", f"SchemaViolation: {exc2}")
    except SchemaViolation as exc:
        return ProcessedResponse(text, parsed, tuple(repairs), "format", f"SchemaViolation: {exc}")
    parsed = parsed.with_doc(doc)
    try:
        build(doc, catalog)
    except (CycleDetected, ContainmentViolation):
        try:
            fixed_doc = repair_topology(doc, catalog)
        except Unrepairable as exc:
            return ProcessedResponse(text, parsed, tuple(repairs), "conversion", f"Unrepairable: {exc}")
        parsed = replace(parsed, workflow_text=fixed_doc.dumps()).with_doc(fixed_doc)
        repairs.append("topology")
    except GraphError as exc:
        return ProcessedResponse(text, parsed, tuple(repairs), "conversion", f"{type(exc).__name__}: {exc}")
    selected = repair_node_selection(parsed, catalog)
    if selected != parsed:
        parsed = selected
        repairs.append("node-selection")
    return ProcessedResponse(text, parsed, tuple(repairs))


@dataclass
class RetryResult:
    response: ParsedResponse | None
    text: str
    log: list[AttemptRecord] = field(default_factory=list)
    report: Any = None

    @property
    def verified(self) -> bool:
        return bool(self.log) and self.log[-1].verified


Generate = Callable[[int, "AttemptRecord | None"], str]
Verify = Callable[[str], Any]  # returns an object with .passed, .first_failure, .detail


def verified_retry(
    generate: Generate,
    verify: Verify | None = None,
    max_attempts: int = 5,
    catalog: Catalog | None = None,
) -> RetryResult:
    """Generate, repair and verify up to *max_attempts* times.

    ``generate(attempt, previous_record)`` returns a fresh response; the
    previous record carries the failure to feed back.  Repairs happen inside
    an attempt; only a verification failure consumes another call.
    """
    from wfsynth.evaluation import pass_pipeline

    catalog = catalog or default_catalog()
    if verify is None:
        def verify(text: str):
            return pass_pipeline(text, None, catalog)
    log: list[AttemptRecord] = []
    last: ProcessedResponse | None = None
    last_report = None
    for attempt in range(1, max_attempts + 1):
        text = generate(attempt, log[-1] if log else None)
        last = process_response(text, catalog)
        if last.stage is not None:
            log.append(AttemptRecord(attempt, last.repairs, last.stage, last.detail))
            last_report = None
            continue
        last_report = verify(last.text)
        if last_report.passed:
            log.append(AttemptRecord(attempt, last.repairs, "verified"))
            return RetryResult(last.parsed, last.text, log, last_report)
        log.append(AttemptRecord(attempt, last.repairs, last_report.first_failure or "unknown", last_report.detail))
    raise AttemptsExhausted(log, last, last_report)
