"""Judges behind one contract: a deterministic rule judge and a model-backed judge.

Both expose ``key_node_coverage``, ``consistency`` and ``semantic_resolve``
returning :class:`JudgeVerdict`.
"""

from __future__ import annotations

import json
import re
import threading
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from string import Template
from typing import Any, Iterable, Mapping, Protocol, Sequence

from wfsynth.catalog import Catalog, default_catalog, fold_kind
from wfsynth.errors import WfsynthError
from wfsynth.executor import render_value, value_to_json
from wfsynth.parsing import WorkflowDoc


@dataclass(frozen=True)
class JudgeVerdict:
    ok: bool
    rule: str
    reason: str = ""
    transcript: str | None = None

    def to_json(self) -> dict:
        out = {"ok": self.ok, "rule": self.rule, "reason": self.reason}
        if self.transcript is not None:
            out["transcript"] = self.transcript
        return out


class Judge(Protocol):
    def key_node_coverage(self, key_nodes: Iterable[str], selection: Sequence[str]) -> JudgeVerdict: ...

    def consistency(self, selection: Sequence[str], principle: str, workflow: WorkflowDoc) -> JudgeVerdict: ...

    def semantic_resolve(self, instructions: Sequence[str], text_output: Mapping[str, Any],
                         case_input: Mapping[str, Any], ref_output: str | None) -> JudgeVerdict: ...


def _canon_set(tokens: Iterable[str], catalog: Catalog) -> tuple[set[str], list[str]]:
    """Canonical kinds plus the tokens that name no kind (kept folded)."""
    kinds, unknown = set(), []
    for t in tokens:
        k = catalog.canonical(t)
        if k is None:
            unknown.append(fold_kind(t))
        else:
            kinds.add(k)
    return kinds, unknown


def normalize_text(text: str) -> str:
    text = unicodedata.normalize("NFKC", text).casefold()
    return re.sub(r"\s+", " ", text).strip()


class RuleJudge:
    """Deterministic judge covering the mechanical evaluation rules.

    * key-node coverage: required kinds must be a subset of the declared
      selection (type level, case-insensitive, ``Template`` aliases
      ``template-transform``);
    * node-set match: declared selection and workflow kinds must be equal sets;
    * design-principle consistency is approximated: every workflow kind must be
      named in the selection or in the principle text;
    * semantic resolve: the normalized reference answer must occur in the
      normalized text output (casefold, NFKC, whitespace collapsed).  Without
      a reference, any non-blank text output is accepted.
    """

    def __init__(self, catalog: Catalog | None = None):
        self.catalog = catalog or default_catalog()

    def key_node_coverage(self, key_nodes: Iterable[str], selection: Sequence[str]) -> JudgeVerdict:
        required, _ = _canon_set(key_nodes, self.catalog)
        declared, _ = _canon_set(selection, self.catalog)
        missing = sorted(required - declared)
        if missing:
            return JudgeVerdict(False, "key-nodes", f"required node kinds not selected: {', '.join(missing)}")
        return JudgeVerdict(True, "key-nodes", "all required node kinds selected")

    def consistency(self, selection: Sequence[str], principle: str, workflow: WorkflowDoc) -> JudgeVerdict:
        declared, unknown = _canon_set(selection, self.catalog)
        used, unknown_used = _canon_set((n.type for n in workflow.nodes_info), self.catalog)
        undeclared = sorted(used - declared)
        unused = sorted(declared - used) + sorted(set(unknown))
        if undeclared or unused or unknown_used:
            parts = []
            if undeclared:
                parts.append(f"used but not declared: {', '.join(undeclared)}")
            if unused:
                parts.append(f"declared but not used: {', '.join(unused)}")
            if unknown_used:
                parts.append(f"unknown workflow kinds: {', '.join(sorted(set(unknown_used)))}")
            return JudgeVerdict(False, "node-set", "; ".join(parts))
        text = normalize_text(principle).replace("_", "-")
        named = {k for k in used if k in text or normalize_text(self.catalog.lookup(k).label) in text}
        unexplained = sorted(used - declared - named)
        if unexplained:  # unreachable once the sets match; kept for the weaker contract
            return JudgeVerdict(False, "principle", f"kinds neither declared nor explained: {unexplained}")
        return JudgeVerdict(True, "node-set", "declared selection matches the workflow node kinds")

    def semantic_resolve(self, instructions: Sequence[str], text_output: Mapping[str, Any],
                         case_input: Mapping[str, Any], ref_output: str | None) -> JudgeVerdict:
        produced = normalize_text("\n".join(render_value(v) for v in text_output.values()))
        if not ref_output or not ref_output.strip():
            if produced:
                return JudgeVerdict(True, "semantic", "no reference; non-empty output accepted")
            return JudgeVerdict(False, "semantic", "no reference and blank output")
        ref = normalize_text(ref_output)
        if ref in produced:
            return JudgeVerdict(True, "semantic", "reference answer contained in output")
        return JudgeVerdict(False, "semantic", "reference answer not found in output")


# --- model-backed judge ---------------------------------------------------------------


class JudgeFormatError(WfsynthError):
    pass


_VERDICT_RE = re.compile(
    r"\s*<reason>(?P<reason>.*?)</reason>\s*<result>\s*(?P<result>true|false)\s*</result>\s*",
    re.DOTALL | re.IGNORECASE,
)


def parse_judge_output(text: str) -> tuple[bool, str]:
    """Strictly parse ``<reason>..</reason><result>true|false</result>``; nothing else allowed."""
    m = _VERDICT_RE.fullmatch(text)
    if m is None:
        raise JudgeFormatError("judge output does not match <reason>/<result> format")
    return m.group("result").lower() == "true", m.group("reason").strip()


def _template(name: str) -> Template:
    return Template((Path(__file__).parent / "data" / name).read_text(encoding="utf-8"))


class LLMJudge:
    """Provider-backed judge; the rule judge still handles key-node coverage.

    *provider* needs ``complete(system, messages, config) -> str``.  At most
    *max_concurrency* requests are in flight across threads.
    """

    def __init__(self, provider: Any, catalog: Catalog | None = None, max_concurrency: int = 4,
                 config: Mapping[str, Any] | None = None):
        self.provider = provider
        self.rules = RuleJudge(catalog)
        self.config = dict(config or {"temperature": 0.0})
        self._gate = threading.Semaphore(max_concurrency)
        self.pass_template = _template("judge_pass.txt")
        self.resolve_template = _template("judge_resolve.txt")

    def _ask(self, rule: str, prompt: str) -> JudgeVerdict:
        with self._gate:
            raw = self.provider.complete("You are a strict evaluator.", [{"role": "user", "content": prompt}],
                                         self.config)
        transcript = json.dumps({"prompt": prompt, "response": raw}, ensure_ascii=False)
        try:
            ok, reason = parse_judge_output(raw)
        except JudgeFormatError as exc:
            return JudgeVerdict(False, rule, str(exc), transcript)
        return JudgeVerdict(ok, rule, reason, transcript)

    def key_node_coverage(self, key_nodes: Iterable[str], selection: Sequence[str]) -> JudgeVerdict:
        return self.rules.key_node_coverage(key_nodes, selection)

    def consistency(self, selection: Sequence[str], principle: str, workflow: WorkflowDoc) -> JudgeVerdict:
        prompt = self.pass_template.substitute(
            node_selection=", ".join(selection),
            design_principle=principle,
            workflow=workflow.dumps(),
        )
        return self._ask("consistency", prompt)

    def semantic_resolve(self, instructions: Sequence[str], text_output: Mapping[str, Any],
                         case_input: Mapping[str, Any], ref_output: str | None) -> JudgeVerdict:
        prompt = self.resolve_template.substitute(
            queries=json.dumps(list(instructions), ensure_ascii=False, indent=2),
            input=json.dumps(value_to_json(dict(case_input)), ensure_ascii=False, indent=2),
            output=json.dumps(value_to_json(dict(text_output)), ensure_ascii=False, indent=2),
            reference_answer=ref_output or "",
        )
        return self._ask("semantic", prompt)
