"""Benchmark corpus model: tasks, rounds and executable test cases."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from wfsynth.catalog import Catalog, VarType, default_catalog, is_vartype
from wfsynth.errors import SchemaViolation
from wfsynth.executor import TypedValue, coerce_value

DOMAINS = ("Research", "Document", "Enterprise", "Developer", "Education", "AIGC")
CASES_PER_ROUND = 3

_VAR = {
    "type": "object",
    "required": ["name", "type"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "type": {"type": "string"},
        "extensions": {"type": "array", "items": {"type": "string"}},
    },
}

CORPUS_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tasks"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "integer"},
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "domain", "rounds"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "domain": {"enum": list(DOMAINS)},
                    "description": {"type": "string"},
                    "rounds": {
                        "type": "array",
                        "minItems": 2,
                        "maxItems": 4,
                        "items": {
                            "type": "object",
                            "required": ["instruction", "reference_vars", "key_nodes", "test_cases"],
                            "additionalProperties": False,
                            "properties": {
                                "instruction": {"type": "string"},
                                "reference_vars": {
                                    "type": "object",
                                    "required": ["inputs", "outputs"],
                                    "additionalProperties": False,
                                    "properties": {
                                        "inputs": {"type": "array", "items": _VAR},
                                        "outputs": {"type": "array", "items": _VAR},
                                    },
                                },
                                "key_nodes": {"type": "array", "items": {"type": "string"}},
                                "scripts": {"type": "array", "items": {"type": "object"}},
                                "test_cases": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "required": ["input"],
                                        "additionalProperties": False,
                                        "properties": {
                                            "input": {"type": "object"},
                                            "ref_output": {"type": ["string", "null"]},
                                            "scripts": {"type": "array", "items": {"type": "object"}},
                                        },
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
    },
}


@dataclass(frozen=True)
class VarRef:
    name: str
    type: VarType
    extensions: tuple[str, ...] = ()

    def to_json(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "type": str(self.type)}
        if self.extensions:
            out["extensions"] = list(self.extensions)
        return out


@dataclass(frozen=True)
class ReferenceVars:
    inputs: tuple[VarRef, ...]
    outputs: tuple[VarRef, ...]

    def signature(self) -> tuple[tuple[tuple[str, VarType], ...], tuple[tuple[str, VarType], ...]]:
        return (tuple((v.name, v.type) for v in self.inputs), tuple((v.name, v.type) for v in self.outputs))

    def output(self, name: str) -> VarRef | None:
        return next((v for v in self.outputs if v.name == name), None)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    input: Mapping[str, TypedValue]
    ref_output: str | None = None
    scripts: tuple[dict, ...] = ()


@dataclass(frozen=True)
class Round:
    index: int  # 0-based position within the task
    instruction: str
    reference_vars: ReferenceVars
    key_nodes: frozenset[str]
    test_cases: tuple[TestCase, ...]
    scripts: tuple[dict, ...] = ()


@dataclass(frozen=True)
class Task:
    id: str
    domain: str
    rounds: tuple[Round, ...]
    description: str = ""

    def instructions_until(self, round_index: int) -> list[str]:
        return [r.instruction for r in self.rounds[: round_index + 1]]


@dataclass(frozen=True)
class Corpus:
    tasks: tuple[Task, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def subtasks(self) -> list[tuple[Task, Round]]:
        return [(t, r) for t in self.tasks for r in t.rounds]


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _var(raw: Mapping[str, Any], path: str) -> VarRef:
    if not is_vartype(raw["type"]):
        raise SchemaViolation(f"{path}.type", f"unknown type {raw['type']!r}")
    exts = tuple(e.lower() if e.startswith(".") else "." + e.lower() for e in raw.get("extensions", ()))
    return VarRef(raw["name"], VarType.parse(raw["type"]), exts)


def _round(r: Mapping[str, Any], ri: int, rpath: str, catalog: Catalog) -> Round:
    rv = r["reference_vars"]
    ins = tuple(_var(v, f"{rpath}.reference_vars.inputs[{i}]") for i, v in enumerate(rv["inputs"]))
    outs = tuple(_var(v, f"{rpath}.reference_vars.outputs[{i}]") for i, v in enumerate(rv["outputs"]))
    for group, vs in (("inputs", ins), ("outputs", outs)):
        names = [v.name for v in vs]
        if len(names) != len(set(names)):
            raise SchemaViolation(f"{rpath}.reference_vars.{group}", "names must be unique")
    keys = []
    for ki, k in enumerate(r["key_nodes"]):
        kind = catalog.canonical(k)
        if kind is None:
            raise SchemaViolation(f"{rpath}.key_nodes[{ki}]", f"unknown node kind {k!r}")
        keys.append(kind)
    in_types = {v.name: v.type for v in ins}
    cases = []
    for ci, c in enumerate(r["test_cases"]):
        cpath = f"{rpath}.test_cases[{ci}].input"
        values = {}
        for name, raw in c["input"].items():
            if name not in in_types:
                raise SchemaViolation(f"{cpath}.{name}", "not a reference input")
            try:
                values[name] = coerce_value(in_types[name], raw)
            except Exception as exc:
                raise SchemaViolation(f"{cpath}.{name}", str(exc)) from None
        cases.append(TestCase(values, c.get("ref_output"), tuple(c.get("scripts", ()))))
    return Round(ri, r["instruction"], ReferenceVars(ins, outs), frozenset(keys), tuple(cases),
                 tuple(r.get("scripts", ())))


def _first_error(schema: dict, data: Any, prefix: str = "$") -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: ([str(p) for p in e.absolute_path], e.message))
    if errors:
        err = errors[0]
        raise SchemaViolation(prefix + _json_path(err.absolute_path)[1:], err.message)


ROUND_SCHEMA: dict = CORPUS_SCHEMA["properties"]["tasks"]["items"]["properties"]["rounds"]["items"]


def round_from_json(data: Any, index: int = 0, catalog: Catalog | None = None) -> Round:
    """A single round document (same shape as a corpus round)."""
    _first_error(ROUND_SCHEMA, data)
    return _round(data, index, "$", catalog or default_catalog())


def corpus_from_json(data: Any, catalog: Catalog | None = None) -> Corpus:
    catalog = catalog or default_catalog()
    _first_error(CORPUS_SCHEMA, data)
    notes: list[str] = []
    tasks = []
    seen_ids: set[str] = set()
    for ti, t in enumerate(data["tasks"]):
        if t["id"] in seen_ids:
            raise SchemaViolation(f"$.tasks[{ti}].id", f"duplicate task id {t['id']!r}")
        seen_ids.add(t["id"])
        rounds = []
        for ri, r in enumerate(t["rounds"]):
            rnd = _round(r, ri, f"$.tasks[{ti}].rounds[{ri}]", catalog)
            if len(rnd.test_cases) != CASES_PER_ROUND:
                notes.append(f"{t['id']} round {ri + 1}: {len(rnd.test_cases)} test cases "
                             f"(expected {CASES_PER_ROUND})")
            rounds.append(rnd)
        tasks.append(Task(t["id"], t["domain"], tuple(rounds), t.get("description", "")))
    for n in notes:
        warnings.warn(n, stacklevel=2)
    return Corpus(tuple(tasks), tuple(notes))


def load_corpus(path: str | Path | None = None, catalog: Catalog | None = None) -> Corpus:
    """Load and validate a corpus document; no path means the bundled mini-corpus."""
    if path is None:
        path = bundled_corpus_path()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc.msg} at {exc.pos}") from None
    return corpus_from_json(data, catalog)


def data_dir() -> Path:
    return Path(__file__).parent / "data"


def bundled_corpus_path() -> Path:
    return data_dir() / "mini_corpus.json"


def bundled_responses_dir(name: str = "perfect") -> Path:
    return data_dir() / "responses" / name


__all__ = [
    "CORPUS_SCHEMA", "DOMAINS", "Corpus", "ReferenceVars", "Round", "Task", "TestCase", "VarRef",
    "bundled_corpus_path", "bundled_responses_dir", "corpus_from_json", "load_corpus", "round_from_json",
]
