"""Staged pass/resolve pipelines, metric computation and the batch harness."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from wfsynth.catalog import Catalog, default_catalog
from wfsynth.corpus import Corpus, Round, Task, TestCase
from wfsynth.dify import emit, import_check
from wfsynth.errors import (
    EmitUnsupported,
    ExecutionError,
    GraphError,
    ImportFailure,
    IncompleteCoverage,
    JsonSyntax,
    MissingTag,
    SchemaViolation,
)
from wfsynth.executor import ExecOutput, Handler, execute
from wfsynth.graph import ValidatedGraph, build, resolve_vars
from wfsynth.handlers import default_test_handlers
from wfsynth.judges import Judge, RuleJudge
from wfsynth.parsing import ParsedResponse, decode_workflow, extract_sections

PASS_STEPS = ("format", "conversion", "variables", "logic")
RESOLVE_STEPS = ("execution", "output")
PASS, FAIL, SKIPPED = "pass", "fail", "not-evaluated"


@dataclass(frozen=True)
class StepVerdict:
    step: str
    status: str
    detail: str = ""

    def to_json(self) -> dict:
        return {"step": self.step, "status": self.status, "detail": self.detail}


def _staged(names: Sequence[str], results: Sequence[tuple[str, str]]) -> tuple[StepVerdict, ...]:
    out = [StepVerdict(n, status, detail) for n, (status, detail) in zip(names, results)]
    out += [StepVerdict(n, SKIPPED) for n in names[len(results):]]
    return tuple(out)


def _first_failure(steps: Sequence[StepVerdict]) -> str | None:
    return next((s.step for s in steps if s.status == FAIL), None)


@dataclass(frozen=True)
class PassReport:
    task_id: str
    round_index: int
    steps: tuple[StepVerdict, ...]
    graph: ValidatedGraph | None = field(default=None, compare=False, repr=False)
    parsed: ParsedResponse | None = field(default=None, compare=False, repr=False)

    @property
    def passed(self) -> bool:
        return all(s.status == PASS for s in self.steps)

    @property
    def first_failure(self) -> str | None:
        return _first_failure(self.steps)

    @property
    def detail(self) -> str:
        step = self.first_failure
        return next((s.detail for s in self.steps if s.step == step), "") if step else ""

    def to_json(self) -> dict:
        return {
            "task": self.task_id,
            "round": self.round_index + 1,
            "pass": self.passed,
            "first_failure": self.first_failure,
            "steps": [s.to_json() for s in self.steps],
        }


@dataclass(frozen=True)
class ResolveReport:
    task_id: str
    round_index: int
    case_index: int
    steps: tuple[StepVerdict, ...]
    transcript: str | None = None

    @property
    def resolved(self) -> bool:
        return all(s.status == PASS for s in self.steps)

    @property
    def first_failure(self) -> str | None:
        return _first_failure(self.steps)

    def to_json(self) -> dict:
        out = {
            "task": self.task_id,
            "round": self.round_index + 1,
            "case": self.case_index + 1,
            "resolved": self.resolved,
            "first_failure": self.first_failure,
            "steps": [s.to_json() for s in self.steps],
        }
        if self.transcript is not None:
            out["transcript"] = self.transcript
        return out


# --- pass checks --------------------------------------------------------------------------


def compare_signature(graph: ValidatedGraph, round_: Round) -> list[str]:
    """Differences between the graph's I/O and the round's reference variables (names and types)."""
    diffs = []
    want_in, want_out = round_.reference_vars.signature()
    for label, got, want in (("inputs", graph.io.inputs, want_in), ("outputs", graph.io.outputs, want_out)):
        g, w = dict(got), dict(want)
        for name in sorted(set(w) - set(g)):
            diffs.append(f"missing {label[:-1]} {name}:{w[name]}")
        for name in sorted(set(g) - set(w)):
            diffs.append(f"unexpected {label[:-1]} {name}:{g[name]}")
        for name in sorted(set(g) & set(w)):
            if g[name] != w[name]:
                diffs.append(f"{label[:-1]} {name} has type {g[name]}, expected {w[name]}")
    return diffs


def pass_pipeline(
    response_text: str,
    round_: Round | None = None,
    catalog: Catalog | None = None,
    judge: Judge | None = None,
    task_id: str = "",
) -> PassReport:
    """Run the four pass checks in order, stopping at the first failure.

    Without a round, the variable check passes vacuously and only the
    consistency half of the logic check runs.
    """
    catalog = catalog or default_catalog()
    judge = judge or RuleJudge(catalog)
    index = round_.index if round_ is not None else 0
    results: list[tuple[str, str]] = []

    def report(graph=None, parsed=None) -> PassReport:
        return PassReport(task_id, index, _staged(PASS_STEPS, results), graph, parsed)

    try:
        parsed = extract_sections(response_text)
        parsed = parsed.with_doc(decode_workflow(parsed.workflow_text))
    except MissingTag as exc:
        results.append((FAIL, f"missing tag <{exc.name}>"))
        return report()
    except (JsonSyntax, SchemaViolation) as exc:
        results.append((FAIL, f"{type(exc).__name__}: {exc}"))
        return report()
    results.append((PASS, ""))

    try:
        graph = build(parsed.workflow_doc, catalog)
        refs = resolve_vars(graph, catalog)
        if refs:
            raise ImportFailure("references", "; ".join(str(r) for r in refs))
        import_check(emit(graph, catalog=catalog), catalog)
    except (GraphError, EmitUnsupported, ImportFailure) as exc:
        results.append((FAIL, f"{type(exc).__name__}: {exc}"))
        return report(parsed=parsed)
    results.append((PASS, ""))

    if round_ is not None:
        diffs = compare_signature(graph, round_)
        if diffs:
            results.append((FAIL, "; ".join(diffs)))
            return report(graph, parsed)
        results.append((PASS, ""))
    else:
        results.append((PASS, "no reference variables"))

    if round_ is not None:
        v = judge.key_node_coverage(round_.key_nodes, parsed.node_selection)
        if not v.ok:
            results.append((FAIL, f"{v.rule}: {v.reason}"))
            return report(graph, parsed)
    v = judge.consistency(parsed.node_selection, parsed.design_principle, parsed.workflow_doc)
    if not v.ok:
        results.append((FAIL, f"{v.rule}: {v.reason}"))
        return report(graph, parsed)
    results.append((PASS, ""))
    return report(graph, parsed)


# --- resolve checks -----------------------------------------------------------------------


def file_mismatches(output: ExecOutput, round_: Round) -> list[str]:
    problems = []
    for name, tv in output.files.items():
        ref = round_.reference_vars.output(name)
        if ref is None or not ref.extensions:
            continue
        files = tv.value if isinstance(tv.value, list) else [tv.value]
        if not files:
            problems.append(f"{name}: no file produced, expected {'/'.join(ref.extensions)}")
        for f in files:
            if f is None or f.extension.lower() not in ref.extensions:
                ext = None if f is None else f.extension
                problems.append(f"{name}: extension {ext!r} not in {list(ref.extensions)}")
    return problems


def resolve_pipeline(
    graph: ValidatedGraph,
    round_: Round,
    case: TestCase,
    handlers: Mapping[str, Handler] | None = None,
    judge: Judge | None = None,
    instructions: Sequence[str] | None = None,
    task_id: str = "",
    case_index: int = 0,
) -> ResolveReport:
    judge = judge or RuleJudge()
    if handlers is None:
        handlers = default_test_handlers(list(case.scripts) + list(round_.scripts))
    results: list[tuple[str, str]] = []

    def report(transcript=None) -> ResolveReport:
        return ResolveReport(task_id, round_.index, case_index, _staged(RESOLVE_STEPS, results), transcript)

    try:
        out = execute(graph, case.input, handlers)
    except ExecutionError as exc:
        results.append((FAIL, f"{type(exc).__name__}: {exc}"))
        return report()
    if out.empty:
        results.append((FAIL, "no outputs"))
        return report()
    results.append((PASS, ""))

    problems = file_mismatches(out, round_)
    if problems:
        results.append((FAIL, "; ".join(problems)))
        return report()
    if not out.text:
        results.append((PASS, "file outputs only"))
        return report()
    text_inputs = {k: v.value for k, v in case.input.items() if not v.type.is_file}
    v = judge.semantic_resolve(list(instructions or [round_.instruction]), out.text_values(), text_inputs,
                               case.ref_output)
    results.append((PASS if v.ok else FAIL, v.reason))
    return report(v.transcript)


# --- metrics ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Rates:
    subtasks: int
    passed: float
    cases: int
    resolved: float

    @property
    def pass_rate(self) -> float:
        return 100.0 * self.passed / self.subtasks if self.subtasks else 0.0

    @property
    def resolve_rate(self) -> float:
        return 100.0 * self.resolved / self.cases if self.cases else 0.0

    def to_json(self) -> dict:
        return {
            "subtasks": self.subtasks, "passed": self.passed, "cases": self.cases, "resolved": self.resolved,
            "pass_rate": round(self.pass_rate, 2), "resolve_rate": round(self.resolve_rate, 2),
        }


@dataclass(frozen=True)
class Metrics:
    overall: Rates
    by_domain: Mapping[str, Rates]
    by_round: Mapping[int, Rates]  # 1-based round index
    runs: int = 1

    @property
    def pass_rate(self) -> float:
        return self.overall.pass_rate

    @property
    def resolve_rate(self) -> float:
        return self.overall.resolve_rate

    def to_json(self) -> dict:
        return {
            "runs": self.runs,
            "overall": self.overall.to_json(),
            "by_domain": {d: r.to_json() for d, r in self.by_domain.items()},
            "by_round": {str(i): r.to_json() for i, r in self.by_round.items()},
        }


def compute_metrics(
    pass_reports: Iterable[PassReport],
    resolve_reports: Iterable[ResolveReport],
    corpus: Corpus,
) -> Metrics:
    """Fold reports into pass/resolve rates.

    Every subtask needs a pass report and every case of a passed subtask a
    resolve report; cases of failed subtasks count as unresolved whatever
    reports exist for them.
    """
    passes = {(r.task_id, r.round_index): r for r in pass_reports}
    resolves = {(r.task_id, r.round_index, r.case_index): r for r in resolve_reports}
    missing: list[Any] = []
    for task, rnd in corpus.subtasks():
        key = (task.id, rnd.index)
        if key not in passes:
            missing.append(key)
        elif passes[key].passed:
            missing.extend((task.id, rnd.index, c) for c in range(len(rnd.test_cases))
                           if (task.id, rnd.index, c) not in resolves)
    if missing:
        raise IncompleteCoverage(missing)

    tallies: dict[tuple[str, Any], list[int]] = {}

    def add(key, passed: bool, cases: int, resolved: int):
        t = tallies.setdefault(key, [0, 0, 0, 0])
        t[0] += 1
        t[1] += int(passed)
        t[2] += cases
        t[3] += resolved

    for task, rnd in corpus.subtasks():
        ok = passes[(task.id, rnd.index)].passed
        n = len(rnd.test_cases)
        solved = sum(resolves[(task.id, rnd.index, c)].resolved for c in range(n)) if ok else 0
        for key in (("all", None), ("domain", task.domain), ("round", rnd.index + 1)):
            add(key, ok, n, solved)

    def rates(key) -> Rates:
        s, p, c, r = tallies.get(key, [0, 0, 0, 0])
        return Rates(s, p, c, r)

    domains = sorted({t.domain for t in corpus})
    rounds = sorted({r.index + 1 for _, r in corpus.subtasks()})
    return Metrics(
        rates(("all", None)),
        {d: rates(("domain", d)) for d in domains},
        {i: rates(("round", i)) for i in rounds},
    )


def average_metrics(runs: Sequence[Metrics]) -> Metrics:
    """Mean counts over repeated runs of the same corpus (order-invariant)."""
    if not runs:
        raise ValueError("no runs to average")

    def mean(rs: Sequence[Rates]) -> Rates:
        k = len(rs)
        return Rates(rs[0].subtasks, sum(r.passed for r in rs) / k, rs[0].cases, sum(r.resolved for r in rs) / k)

    domains = sorted(runs[0].by_domain)
    rounds = sorted(runs[0].by_round)
    return Metrics(
        mean([m.overall for m in runs]),
        {d: mean([m.by_domain[d] for m in runs]) for d in domains},
        {i: mean([m.by_round[i] for m in runs]) for i in rounds},
        runs=sum(m.runs for m in runs),
    )


# --- harness ----------------------------------------------------------------------------

ResponseKey = tuple[str, int]  # (task id, 0-based round index)


def load_responses_dir(path: str | Path) -> dict[ResponseKey, str]:
    """``<dir>/<task id>/round<k>.txt`` with k 1-based."""
    out = {}
    root = Path(path)
    for task_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(task_dir.glob("round*.txt")):
            try:
                k = int(f.stem[len("round"):])
            except ValueError:
                continue
            out[(task_dir.name, k - 1)] = f.read_text(encoding="utf-8")
    return out


def load_journal(path: str | Path) -> dict[ResponseKey, str]:
    """Final responses from a session journal (``turn`` records)."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("event") == "turn":
            out[(rec["task"], int(rec["round"]) - 1)] = rec["response"]
    return out


def coverage_gaps(corpus: Corpus, responses: Mapping[ResponseKey, str]) -> list[ResponseKey]:
    return [(t.id, r.index) for t, r in corpus.subtasks() if (t.id, r.index) not in responses]


@dataclass
class EvalResult:
    pass_reports: list[PassReport]
    resolve_reports: list[ResolveReport]
    metrics: Metrics

    def to_json(self) -> dict:
        return {
            "metrics": self.metrics.to_json(),
            "pass_reports": [r.to_json() for r in self.pass_reports],
            "resolve_reports": [r.to_json() for r in self.resolve_reports],
        }


def _score_subtask(task: Task, rnd: Round, text: str | None, catalog: Catalog, judge: Judge,
                   handlers_for: Callable[[Round, TestCase], Mapping[str, Handler]] | None):
    if text is None:
        steps = (StepVerdict("format", FAIL, "no response"),) + tuple(StepVerdict(s, SKIPPED) for s in PASS_STEPS[1:])
        return PassReport(task.id, rnd.index, steps), []
    pr = pass_pipeline(text, rnd, catalog, judge, task_id=task.id)
    rrs = []
    if pr.passed:
        history = task.instructions_until(rnd.index)
        for ci, case in enumerate(rnd.test_cases):
            handlers = handlers_for(rnd, case) if handlers_for else None
            rrs.append(resolve_pipeline(pr.graph, rnd, case, handlers, judge, history, task.id, ci))
    return pr, rrs


def evaluate(
    corpus: Corpus,
    responses: Mapping[ResponseKey, str],
    catalog: Catalog | None = None,
    judge: Judge | None = None,
    partial: bool = False,
    jobs: int = 1,
    handlers_for: Callable[[Round, TestCase], Mapping[str, Handler]] | None = None,
) -> EvalResult:
    """Score every subtask; with *partial*, missing responses count as format failures."""
    catalog = catalog or default_catalog()
    judge = judge or RuleJudge(catalog)
    gaps = coverage_gaps(corpus, responses)
    if gaps and not partial:
        raise IncompleteCoverage(gaps)
    work = corpus.subtasks()

    def score(item):
        task, rnd = item
        return _score_subtask(task, rnd, responses.get((task.id, rnd.index)), catalog, judge, handlers_for)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(score, work))
    else:
        results = [score(w) for w in work]
    pass_reports = [pr for pr, _ in results]
    resolve_reports = [rr for _, rrs in results for rr in rrs]
    return EvalResult(pass_reports, resolve_reports, compute_metrics(pass_reports, resolve_reports, corpus))
