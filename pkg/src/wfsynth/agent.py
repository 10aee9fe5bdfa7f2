"""Error-driven agent loop: prompt assembly, providers, dialogue state and journals."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from string import Template
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

from wfsynth.catalog import Catalog, NodeSpec, default_catalog
from wfsynth.corpus import Corpus, Round, Task
from wfsynth.errors import AttemptsExhausted, ProviderUnavailable
from wfsynth.evaluation import PassReport, pass_pipeline
from wfsynth.graph import ValidatedGraph
from wfsynth.judges import Judge, RuleJudge
from wfsynth.repair import AttemptRecord, ProcessedResponse, verified_retry

# --- providers --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProviderConfig:
    model: str = "gpt-4o-mini"
    temperature: float = 0.7
    max_tokens: int = 32768
    timeout: float = 120.0
    transport_retries: int = 2
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "WFSYNTH_API_KEY"

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ProviderConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown provider settings: {sorted(unknown)}")
        return cls(**data)

    def generation(self) -> dict:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens}


class ProviderClient(Protocol):
    def complete(self, system: str, messages: Sequence[Mapping[str, str]], config: Mapping[str, Any]) -> str: ...


class ScriptedProvider:
    """Replays canned responses in order; ignores generation settings.

    *responses* is a list of strings or a callable ``(call_index, system,
    messages) -> str``.  Every call is recorded in ``calls``.
    """

    def __init__(self, responses: Sequence[str] | Callable[[int, str, list], str]):
        self.responses = responses
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def complete(self, system: str, messages: Sequence[Mapping[str, str]], config: Mapping[str, Any]) -> str:
        with self._lock:
            index = len(self.calls)
            self.calls.append({"system": system, "messages": [dict(m) for m in messages]})
        if callable(self.responses):
            return self.responses(index, system, list(messages))
        if index >= len(self.responses):
            raise ProviderUnavailable(f"scripted provider exhausted after {len(self.responses)} responses")
        return self.responses[index]


class OpenAICompatibleProvider:
    """Chat-completions client over httpx with transport-level retries."""

    def __init__(self, config: ProviderConfig, api_key: str | None = None, transport: Any = None,
                 backoff: float = 1.0):
        import httpx

        self.config = config
        key = api_key if api_key is not None else os.environ.get(config.api_key_env, "")
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {key}"} if key else {},
            transport=transport,
        )
        self.backoff = backoff
        self.requests = 0

    def complete(self, system: str, messages: Sequence[Mapping[str, str]], config: Mapping[str, Any]) -> str:
        import httpx

        body = {
            "model": self.config.model,
            "messages": [{"role": "system", "content": system}, *[dict(m) for m in messages]],
            **self.config.generation(),
            **dict(config or {}),
        }
        last = ""
        for attempt in range(self.config.transport_retries + 1):
            self.requests += 1
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError):
                        raise ProviderUnavailable("malformed chat-completions response") from None
            if attempt < self.config.transport_retries and self.backoff:
                time.sleep(self.backoff * 2 ** attempt)
        raise ProviderUnavailable(f"transport retries exhausted: {last}")

    def close(self) -> None:
        self._client.close()


# --- variable summaries --------------------------------------------------------------


def summarize_variables(graph: ValidatedGraph) -> str:
    """One line per node in topological order; iteration children indented.

    ``start`` lists the workflow inputs and ``end`` the outputs it declares.
    """
    lines = []
    for node_id in graph.topo_order:
        node = graph.node(node_id)
        indent = "  " if node.parent_id is not None else ""
        if node.kind == "start":
            detail = "inputs " + ", ".join(f"{n}:{t}" for n, t in graph.var_types.get(node_id, {}).items())
        elif node.kind == "end":
            detail = "outputs " + ", ".join(f"{o['name']}:{o['type']}" for o in node.params["outputs"])
        else:
            outs = graph.var_types.get(node_id, {})
            detail = ", ".join(f"{n}:{t}" for n, t in outs.items())
        lines.append(f"{indent}{node_id} {node.kind}" + (f" -> {detail}" if detail.strip() else ""))
    return "\n".join(lines)


# --- dialogue -------------------------------------------------------------------------


@dataclass
class Turn:
    round_index: int
    instruction: str
    response: str
    report: PassReport | None
    log: list[AttemptRecord]
    graph: ValidatedGraph | None = None

    @property
    def verified(self) -> bool:
        return bool(self.log) and self.log[-1].verified

    @property
    def summary(self) -> str | None:
        return summarize_variables(self.graph) if self.graph is not None and self.verified else None


@dataclass
class Dialogue:
    task_id: str
    turns: list[Turn] = field(default_factory=list)

    @property
    def current(self) -> int:
        return len(self.turns)

    def append(self, turn: Turn) -> None:
        if turn.round_index != self.current:
            raise ValueError(f"turn for round {turn.round_index} but dialogue is at {self.current}")
        self.turns.append(turn)


# --- prompts --------------------------------------------------------------------------


def render_spec(spec: NodeSpec) -> str:
    lines = [f"## {spec.kind} ({spec.label})", spec.description]
    if spec.primary_params:
        lines.append("params:")
        for p in spec.primary_params:
            flag = "required" if p.required else f"optional, default {json.dumps(p.default)}"
            extra = f"; {p.description}" if p.description else ""
            items = f"; items need {', '.join(p.item_fields)}" if p.item_fields else ""
            lines.append(f"- {p.name}: {p.type} ({flag}){items}{extra}")
    else:
        lines.append("params: none")
    if spec.output_vars:
        lines.append("outputs: " + ", ".join(f"{n}:{t}" for n, t in spec.output_vars))
    elif spec.kind in ("start", "code", "parameter-extractor"):
        lines.append("outputs: as declared in params")
    ports = {"fixed": f"{spec.port_rule.count} outbound port", "terminal": "no outbound edges",
             "per-branch": "one port per condition plus else", "per-class": "one port per class"}
    lines.append("ports: " + ports[spec.port_rule.kind])
    return "\n".join(lines)


def knowledge_base(catalog: Catalog) -> str:
    return "\n\n".join(render_spec(s) for s in catalog)


def _tokens(text: str) -> int:
    # rough budget estimate: four characters per token
    return (len(text) + 3) // 4


def system_prompt(catalog: Catalog | None = None, template_path: str | Path | None = None) -> str:
    catalog = catalog or default_catalog()
    path = Path(template_path) if template_path else Path(__file__).parent / "data" / "skill_prompt.md"
    return Template(path.read_text(encoding="utf-8")).substitute(knowledge_base=knowledge_base(catalog))


def _summary_block(turns: Sequence[Turn]) -> str:
    blocks = [f"Round {t.round_index + 1}:\n{t.summary}" for t in turns if t.summary]
    if not blocks:
        return ""
    return "\n\n<variable_summary>\n" + "\n\n".join(blocks) + "\n</variable_summary>"


def build_prompt(
    dialogue: Dialogue,
    round_: Round,
    catalog: Catalog | None = None,
    token_budget: int | None = None,
    template_path: str | Path | None = None,
) -> tuple[str, list[dict]]:
    """System prompt plus message list for the dialogue's current round.

    Over budget, prior responses are elided oldest first: a response with a
    summary is replaced by it, one without by a marker.  Instructions stay.
    """
    if round_.index != dialogue.current:
        raise ValueError(f"round {round_.index} is not the dialogue's current round {dialogue.current}")
    system = system_prompt(catalog, template_path)
    turns = dialogue.turns
    elided: set[int] = set()

    def assemble() -> list[dict]:
        msgs = []
        for i, t in enumerate(turns):
            msgs.append({"role": "user", "content": t.instruction})
            if i in elided:
                body = f"[earlier response elided]\n{t.summary}" if t.summary else "[earlier response elided]"
            else:
                body = t.response
            msgs.append({"role": "assistant", "content": body})
        current = round_.instruction
        if round_.index > 0:
            current += _summary_block(turns)
        msgs.append({"role": "user", "content": current})
        return msgs

    messages = assemble()
    if token_budget is not None:
        for i in range(len(turns)):
            if _tokens(system) + sum(_tokens(m["content"]) for m in messages) <= token_budget:
                break
            elided.add(i)
            messages = assemble()
    return system, messages


def retry_messages(messages: list[dict], previous_text: str, record: AttemptRecord) -> list[dict]:
    """Error-fed re-prompt: the failed reply and its verification error follow the base messages."""
    feedback = (
        f"Your previous reply failed verification at stage '{record.stage}'"
        + (f": {record.detail}" if record.detail else "")
        + ". Reply again with the complete corrected answer in the three tagged sections."
    )
    return [*messages, {"role": "assistant", "content": previous_text}, {"role": "user", "content": feedback}]


# --- journal ---------------------------------------------------------------------------


class Journal:
    """Append-only JSONL session journal."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        self._lock = threading.Lock()
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def write(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock:
            self.records.append(record)
            if self.path:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")


def prompt_digest(system: str, messages: Sequence[Mapping[str, str]]) -> str:
    blob = json.dumps({"system": system, "messages": list(messages)}, ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --- rounds and tasks ------------------------------------------------------------------


def run_round(
    dialogue: Dialogue,
    round_: Round,
    provider: ProviderClient,
    catalog: Catalog | None = None,
    judge: Judge | None = None,
    max_attempts: int = 5,
    feedback: bool = True,
    journal: Journal | None = None,
    token_budget: int | None = None,
    generation: Mapping[str, Any] | None = None,
) -> Turn:
    """One round through the verified retry loop; the turn is appended whether or not it verified."""
    catalog = catalog or default_catalog()
    judge = judge or RuleJudge(catalog)
    system, base = build_prompt(dialogue, round_, catalog, token_budget)
    gen = dict(generation or {})
    previous: dict[str, str] = {}

    def generate(attempt: int, record: AttemptRecord | None) -> str:
        messages = base
        if feedback and record is not None:
            messages = retry_messages(base, previous["text"], record)
        if journal:
            journal.write({"event": "prompt", "task": dialogue.task_id, "round": round_.index + 1,
                           "attempt": attempt, "system": system, "messages": messages})
        text = provider.complete(system, messages, gen)
        previous["text"] = text
        if journal:
            journal.write({"event": "response", "task": dialogue.task_id, "round": round_.index + 1,
                           "attempt": attempt, "text": text})
        return text

    def verify(text: str) -> PassReport:
        return pass_pipeline(text, round_, catalog, judge, task_id=dialogue.task_id)

    try:
        result = verified_retry(generate, verify, max_attempts, catalog)
        text, log, report = result.text, result.log, result.report
    except AttemptsExhausted as exc:
        log = exc.log
        last: ProcessedResponse | None = exc.last_response
        text = last.text if last is not None else ""
        report = exc.last_report or verify(text)
    turn = Turn(round_.index, round_.instruction, text, report, list(log),
                report.graph if report is not None and report.passed else None)
    dialogue.append(turn)
    if journal:
        for rec in log:
            journal.write({"event": "attempt", "task": dialogue.task_id, "round": round_.index + 1, **rec.to_json()})
        journal.write({"event": "turn", "task": dialogue.task_id, "round": round_.index + 1,
                       "instruction": round_.instruction, "response": text, "verified": turn.verified,
                       "attempts": len(log), "report": report.to_json() if report else None})
    return turn


def run_task(task: Task, provider: ProviderClient, catalog: Catalog | None = None, judge: Judge | None = None,
             max_attempts: int = 5, feedback: bool = True, journal: Journal | None = None,
             token_budget: int | None = None) -> Dialogue:
    dialogue = Dialogue(task.id)
    for rnd in task.rounds:
        run_round(dialogue, rnd, provider, catalog, judge, max_attempts, feedback, journal, token_budget)
    return dialogue


def run_corpus(
    corpus: Corpus | Iterable[Task],
    provider_for: Callable[[Task], ProviderClient],
    journal_dir: str | Path | None = None,
    catalog: Catalog | None = None,
    judge: Judge | None = None,
    max_attempts: int = 5,
    feedback: bool = True,
    jobs: int = 1,
) -> tuple[dict[str, Dialogue], dict[str, str]]:
    """Run every task; returns dialogues and, per task, the error that aborted it."""
    from concurrent.futures import ThreadPoolExecutor

    tasks = list(corpus)
    dialogues: dict[str, Dialogue] = {}
    aborted: dict[str, str] = {}

    def one(task: Task):
        journal = Journal(Path(journal_dir) / f"{task.id}.jsonl" if journal_dir else None)
        try:
            dialogues[task.id] = run_task(task, provider_for(task), catalog, judge, max_attempts, feedback, journal)
        except ProviderUnavailable as exc:
            aborted[task.id] = str(exc)
            journal.write({"event": "aborted", "task": task.id, "error": str(exc)})

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(one, tasks))
    else:
        for t in tasks:
            one(t)
    return dialogues, aborted


def replay_prompts(records: Iterable[Mapping[str, Any]], corpus: Corpus, catalog: Catalog | None = None,
                   token_budget: int | None = None) -> list[tuple[dict, tuple[str, list[dict]]]]:
    """Rebuild each first-attempt prompt from a journal's recorded turns.

    Returns (recorded prompt event, rebuilt (system, messages)) pairs so the
    caller can compare them byte for byte.
    """
    from wfsynth.graph import build
    from wfsynth.parsing import parse_response

    catalog = catalog or default_catalog()
    records = list(records)
    dialogues: dict[str, Dialogue] = {}
    pairs = []
    for rec in records:
        task = corpus.task(rec["task"])
        dlg = dialogues.setdefault(task.id, Dialogue(task.id))
        rnd = task.rounds[rec["round"] - 1]
        if rec["event"] == "prompt" and rec["attempt"] == 1:
            pairs.append((rec, build_prompt(dlg, rnd, catalog, token_budget)))
        elif rec["event"] == "turn":
            graph = None
            if rec["verified"]:
                graph = build(parse_response(rec["response"]).workflow_doc, catalog)
            log = [AttemptRecord(rec["attempts"], (), "verified" if rec["verified"] else "failed")]
            dlg.append(Turn(rnd.index, rec["instruction"], rec["response"], None, log, graph))
    return pairs
