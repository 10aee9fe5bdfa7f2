"""Command-line interface.

Exit codes: 0 success, 1 domain failure (validation, build, execution,
aborted agent run), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from wfsynth.catalog import Catalog, default_catalog
from wfsynth.errors import (
    ExecutionError,
    ImportFailure,
    IncompleteCoverage,
    InputMismatch,
    SchemaViolation,
    WfsynthError,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    workspace: Path = field(default_factory=Path.cwd)
    catalog_overrides: Path | None = None
    provider: dict = field(default_factory=dict)
    platform_url: str | None = None
    platform_token_env: str = "WFSYNTH_PLATFORM_TOKEN"
    corpus: Path | None = None
    out_dir: Path = Path("out")
    judge: str = "rule"

    def path(self, p: str | Path | None) -> Path | None:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.workspace / p

    def catalog(self) -> Catalog:
        cat = default_catalog()
        if self.catalog_overrides:
            cat = cat.with_models(json.loads(self.path(self.catalog_overrides).read_text(encoding="utf-8")))
        return cat


def load_config(args: argparse.Namespace) -> CliConfig:
    workspace = Path(args.workspace).resolve() if args.workspace else Path.cwd()
    cfg = CliConfig(workspace=workspace)
    if args.config:
        path = Path(args.config)
        path = path if path.is_absolute() else workspace / path
        data = json.loads(path.read_text(encoding="utf-8"))
        for key, value in data.items():
            if not hasattr(cfg, key) or key == "workspace":
                raise UsageError(f"unknown config key {key!r}")
            if key in ("catalog_overrides", "corpus", "out_dir") and value is not None:
                value = Path(value)
            setattr(cfg, key, value)
    if os.environ.get("WFSYNTH_PLATFORM_URL"):
        cfg.platform_url = os.environ["WFSYNTH_PLATFORM_URL"]
    return cfg


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _print_json(obj: Any) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=True))


def _as_response(text: str, catalog: Catalog) -> tuple[str, bool]:
    """Tagged responses pass through; bare workflow JSON gets a selection derived from its nodes."""
    if "<workflow>" in text:
        return text, False
    from wfsynth.parsing import ParsedResponse, decode_workflow, render_response

    selection: tuple[str, ...] = ()
    try:
        doc = decode_workflow(text)
        selection = tuple(sorted({catalog.canonical(n.type) or n.type for n in doc.nodes_info}))
    except WfsynthError:
        pass
    return render_response(ParsedResponse(selection, "", text.strip())), True


def _build_from_file(path: Path, catalog: Catalog):
    from wfsynth.graph import build
    from wfsynth.parsing import decode_workflow, extract_sections

    text = _read(path)
    if "<workflow>" in text:
        text = extract_sections(text).workflow_text
    return build(decode_workflow(text), catalog)


# --- commands ------------------------------------------------------------------------------


def cmd_catalog(args, cfg: CliConfig) -> int:
    from wfsynth.agent import knowledge_base

    cat = cfg.catalog()
    if args.json:
        _print_json(cat.dump())
    else:
        print(knowledge_base(cat))
    return EXIT_OK


def cmd_validate(args, cfg: CliConfig) -> int:
    from wfsynth.corpus import round_from_json
    from wfsynth.evaluation import pass_pipeline

    cat = cfg.catalog()
    text, derived = _as_response(_read(cfg.path(args.file)), cat)
    rnd = None
    if args.round:
        try:
            rnd = round_from_json(json.loads(_read(cfg.path(args.round))), catalog=cat)
        except json.JSONDecodeError as exc:
            raise UsageError(f"round file is not JSON: {exc}") from None
    report = pass_pipeline(text, rnd, cat)
    if args.json:
        _print_json(report.to_json())
    else:
        if derived:
            print("note: bare workflow; node selection derived from its nodes")
        for i, s in enumerate(report.steps, 1):
            print(f"step {i} {s.step}: {s.status}" + (f" - {s.detail}" if s.detail else ""))
        print("PASS" if report.passed else f"FAIL at {report.first_failure}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_convert(args, cfg: CliConfig) -> int:
    from wfsynth.dify import emit, import_check, isomorphic, push_to_platform
    from wfsynth.graph import resolve_vars

    cat = cfg.catalog()
    try:
        graph = _build_from_file(cfg.path(args.file), cat)
    except WfsynthError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    refs = resolve_vars(graph, cat)
    if refs:
        print(f"error: {len(refs)} unresolved reference(s): {refs[0]}", file=sys.stderr)
        return EXIT_FAIL
    yaml_text = emit(graph, args.name or Path(args.file).stem, args.description or "", cat)
    if args.output:
        out = cfg.path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(yaml_text, encoding="utf-8")
        print(f"wrote {out}")
    else:
        sys.stdout.write(yaml_text)
    if args.import_check:
        try:
            back = import_check(yaml_text, cat)
        except ImportFailure as exc:
            print(f"import check failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
        if not isomorphic(graph, back):
            print("import check failed: round trip changed the graph", file=sys.stderr)
            return EXIT_FAIL
        print("import check: round trip ok", file=sys.stderr)
    if args.push:
        if not cfg.platform_url:
            raise UsageError("--push needs platform_url in the config or WFSYNTH_PLATFORM_URL")
        token = os.environ.get(cfg.platform_token_env, "")
        try:
            result = push_to_platform(yaml_text, cfg.platform_url, token)
        except WfsynthError as exc:
            print(f"push failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
        print(json.dumps(result), file=sys.stderr)
    return EXIT_OK


def cmd_run(args, cfg: CliConfig) -> int:
    from wfsynth.executor import execute, trace_to_jsonl, value_to_json
    from wfsynth.handlers import ScriptTable, default_test_handlers

    cat = cfg.catalog()
    try:
        graph = _build_from_file(cfg.path(args.file), cat)
    except WfsynthError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        inputs = json.loads(_read(cfg.path(args.inputs))) if args.inputs else {}
        scripts = ScriptTable.load(cfg.path(args.scripts)) if args.scripts else None
    except json.JSONDecodeError as exc:
        raise UsageError(f"bad JSON: {exc}") from None
    handlers = default_test_handlers(scripts, strict=args.strict)
    trace_path = cfg.path(args.trace) if args.trace else None
    try:
        out = execute(graph, inputs, handlers)
    except InputMismatch as exc:
        print(f"error: InputMismatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExecutionError as exc:
        if trace_path:
            trace_path.write_text(trace_to_jsonl(getattr(exc, "trace", ())), encoding="utf-8")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if trace_path:
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        trace_path.write_text(trace_to_jsonl(out.trace), encoding="utf-8")
    _print_json({
        "text": {k: value_to_json(v.value) for k, v in out.text.items()},
        "files": {k: value_to_json(v.value) for k, v in out.files.items()},
    })
    return EXIT_OK


def _judge(cfg: CliConfig, cat: Catalog):
    from wfsynth.judges import LLMJudge, RuleJudge

    if cfg.judge == "rule":
        return RuleJudge(cat)
    if cfg.judge == "provider":
        return LLMJudge(_live_provider(cfg), cat)
    raise UsageError(f"unknown judge {cfg.judge!r}")


def _live_provider(cfg: CliConfig):
    from wfsynth.agent import OpenAICompatibleProvider, ProviderConfig

    if not cfg.provider:
        raise UsageError("provider settings are required for this mode")
    try:
        return OpenAICompatibleProvider(ProviderConfig.from_mapping(cfg.provider))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_source(path: Path) -> dict:
    from wfsynth.evaluation import load_journal, load_responses_dir

    if path.is_file():
        return load_journal(path)
    if not path.is_dir():
        raise UsageError(f"no such responses path: {path}")
    journals = sorted(path.glob("*.jsonl"))
    if journals:
        out: dict = {}
        for j in journals:
            out.update(load_journal(j))
        return out
    return load_responses_dir(path)


def _evaluate_sources(cfg: CliConfig, cat: Catalog, corpus, sources: list[Path], partial: bool, jobs: int,
                      out_dir: Path, figures: bool) -> int:
    from wfsynth.evaluation import average_metrics, evaluate
    from wfsynth.report import write_report

    judge = _judge(cfg, cat)
    results = []
    for src in sources:
        responses = _load_source(src)
        try:
            results.append(evaluate(corpus, responses, cat, judge, partial=partial, jobs=jobs))
        except IncompleteCoverage as exc:
            print(f"error: responses in {src} do not cover the corpus ({len(exc.missing)} missing); "
                  "use --partial to score anyway", file=sys.stderr)
            return EXIT_USAGE
    if len(results) == 1:
        paths = write_report(out_dir, results[0], figures=figures)
        metrics = results[0].metrics
    else:
        metrics = average_metrics([r.metrics for r in results])
        for i, r in enumerate(results, 1):
            write_report(out_dir / f"run{i}", r, figures=False)
        paths = write_report(out_dir, metrics=metrics, figures=figures)
    o = metrics.overall
    print(f"%Pas. {o.pass_rate:.2f}  %Res. {o.resolve_rate:.2f}  "
          f"({o.passed:g}/{o.subtasks} subtasks, {o.resolved:g}/{o.cases} cases, runs={metrics.runs})")
    for name, p in paths.items():
        print(f"{name}: {p}")
    return EXIT_OK


def cmd_eval(args, cfg: CliConfig) -> int:
    from wfsynth.corpus import load_corpus

    cat = cfg.catalog()
    if args.judge:
        cfg.judge = args.judge
    corpus = load_corpus(cfg.path(args.corpus or cfg.corpus), cat)
    source = cfg.path(args.responses)
    if args.runs:
        sources = [source / f"run{i}" for i in range(1, args.runs + 1)]
        missing = [s for s in sources if not s.exists()]
        if missing:
            raise UsageError(f"--runs {args.runs} expects {', '.join(str(m) for m in missing)}")
    else:
        sources = [source]
    out_dir = cfg.path(args.out or cfg.out_dir)
    return _evaluate_sources(cfg, cat, corpus, sources, args.partial, args.jobs, out_dir, not args.no_figures)


class DirectoryProvider:
    """Scripted provider reading ``<dir>/round<k>.txt`` or ``round<k>.attempt<j>.txt``.

    The round is recognised from the task instructions present in the
    messages; attempts beyond the last file repeat the last file.
    """

    def __init__(self, task, directory: Path):
        self.task = task
        self.directory = directory
        self.counts: dict[int, int] = {}

    def _files(self, k: int) -> list[Path]:
        attempts = sorted(self.directory.glob(f"round{k}.attempt*.txt"),
                          key=lambda p: int(p.stem.rsplit("attempt", 1)[1]))
        single = self.directory / f"round{k}.txt"
        return attempts or ([single] if single.exists() else [])

    def complete(self, system, messages, config) -> str:
        from wfsynth.errors import ProviderUnavailable

        users = [m["content"] for m in messages if m["role"] == "user"]
        k = 0
        for i, rnd in enumerate(self.task.rounds):
            if any(u.startswith(rnd.instruction) for u in users):
                k = i + 1
        files = self._files(k)
        if not files:
            raise ProviderUnavailable(f"no scripted response for {self.task.id} round {k}")
        n = self.counts.get(k, 0)
        self.counts[k] = n + 1
        return files[min(n, len(files) - 1)].read_text(encoding="utf-8")


def cmd_agent(args, cfg: CliConfig) -> int:
    from wfsynth.agent import run_corpus
    from wfsynth.corpus import load_corpus

    cat = cfg.catalog()
    corpus = load_corpus(cfg.path(args.corpus or cfg.corpus), cat)
    out_dir = cfg.path(args.out or cfg.out_dir)
    journal_dir = out_dir / "journals"
    if args.provider == "scripted":
        if not args.script_dir:
            raise UsageError("--provider scripted needs --script-dir")
        root = cfg.path(args.script_dir)
        if not root.is_dir():
            raise UsageError(f"no such script directory: {root}")

        def provider_for(task):
            return DirectoryProvider(task, root / task.id)
    else:
        provider_for_live = _live_provider(cfg)

        def provider_for(task):
            return provider_for_live
    judge = _judge(cfg, cat)
    _, aborted = run_corpus(corpus, provider_for, journal_dir, cat, judge, args.max_attempts,
                            feedback=not args.independent, jobs=args.jobs)
    status = _evaluate_sources(cfg, cat, corpus, [journal_dir], partial=True, jobs=args.jobs, out_dir=out_dir,
                               figures=not args.no_figures)
    for task_id, err in sorted(aborted.items()):
        print(f"aborted {task_id}: {err}", file=sys.stderr)
    if aborted:
        return EXIT_FAIL
    return status


def cmd_repair(args, cfg: CliConfig) -> int:
    from wfsynth.evaluation import pass_pipeline
    from wfsynth.repair import AttemptRecord, process_response

    cat = cfg.catalog()
    text = _read(cfg.path(args.file))
    processed = process_response(text, cat)
    if processed.stage is None:
        report = pass_pipeline(processed.text, None, cat)
        stage = "verified" if report.passed else (report.first_failure or "unknown")
        record = AttemptRecord(1, processed.repairs, stage, report.detail)
    else:
        record = AttemptRecord(1, processed.repairs, processed.stage, processed.detail)
    if args.explain:
        print(record.to_line(), file=sys.stderr)
        for r in processed.repairs:
            print(f"applied: {r}", file=sys.stderr)
    if args.output:
        cfg.path(args.output).write_text(processed.text, encoding="utf-8")
    else:
        sys.stdout.write(processed.text)
    return EXIT_OK if record.verified else EXIT_FAIL


# --- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wfsynth", description="Validate, repair, compile, run and score "
                                "LLM-generated workflows.")
    p.add_argument("--workspace", help="root for relative paths (default: current directory)")
    p.add_argument("--config", help="JSON config file (provider, platform_url, corpus, out_dir, judge, ...)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("catalog", help="print the node knowledge base")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_catalog)

    s = sub.add_parser("validate", help="staged checks on a response or workflow JSON file")
    s.add_argument("file")
    s.add_argument("--round", help="round JSON supplying reference variables and key nodes")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("convert", help="compile a workflow to platform YAML")
    s.add_argument("file")
    s.add_argument("-o", "--output")
    s.add_argument("--name")
    s.add_argument("--description")
    s.add_argument("--import-check", action="store_true", help="re-import the YAML and compare")
    s.add_argument("--push", action="store_true", help="POST the YAML to the configured platform")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("run", help="execute a workflow with the deterministic handlers")
    s.add_argument("file")
    s.add_argument("--inputs", help="JSON object of input values")
    s.add_argument("--scripts", help="handler script table (JSON)")
    s.add_argument("--trace", help="write the JSONL trace here")
    s.add_argument("--strict", action="store_true", help="fail on unscripted model/network nodes")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("eval", help="score responses or session journals against a corpus")
    s.add_argument("--corpus", help="corpus JSON (default: bundled mini-corpus)")
    s.add_argument("--responses", required=True, help="responses dir, journal file, or journal dir")
    s.add_argument("--runs", type=int, help="average run1..runN subdirectories of --responses")
    s.add_argument("--partial", action="store_true", help="score missing responses as failures")
    s.add_argument("--judge", choices=["rule", "provider"])
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("agent", help="run the retry agent over a corpus, then score its journals")
    s.add_argument("--corpus")
    s.add_argument("--provider", choices=["scripted", "live"], default="scripted")
    s.add_argument("--script-dir", help="scripted responses: <dir>/<task>/round<k>[.attempt<j>].txt")
    s.add_argument("--max-attempts", type=int, default=5)
    s.add_argument("--independent", action="store_true", help="regenerate without error feedback")
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_agent)

    s = sub.add_parser("repair", help="apply the auto-repairs to one response")
    s.add_argument("file")
    s.add_argument("--explain", action="store_true", help="print the attempt record and applied repairs")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_repair)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
