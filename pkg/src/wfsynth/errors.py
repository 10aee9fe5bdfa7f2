"""Exception types shared across the toolkit."""

from __future__ import annotations

from typing import Any, Sequence


class WfsynthError(Exception):
    """Base class for every error raised by wfsynth."""


# --- parsing -----------------------------------------------------------------


class MissingTag(WfsynthError):
    def __init__(self, name: str):
        super().__init__(f"missing or unbalanced <{name}> tag")
        self.name = name


class JsonSyntax(WfsynthError):
    def __init__(self, position: int, message: str = ""):
        super().__init__(f"JSON syntax error at position {position}: {message}")
        self.position = position


class SchemaViolation(WfsynthError):
    def __init__(self, path: str, message: str = ""):
        super().__init__(f"schema violation at {path}: {message}" if message else f"schema violation at {path}")
        self.path = path


# --- graph validation --------------------------------------------------------


class GraphError(WfsynthError):
    """A batch of validation failures that all belong to one error class."""

    code = "GraphError"

    def __init__(self, instances: Sequence[Any]):
        self.instances = list(instances)
        super().__init__(f"{self.code}: {self.instances}")


class DuplicateId(GraphError):
    code = "DuplicateId"


class UnknownKind(GraphError):
    code = "UnknownKind"


class DanglingEdge(GraphError):
    code = "DanglingEdge"


class ParamViolation(GraphError):
    code = "ParamViolation"


class PortOutOfRange(GraphError):
    code = "PortOutOfRange"


class CycleDetected(GraphError):
    code = "CycleDetected"

    @property
    def cycle(self) -> list[str]:
        return list(self.instances)


class ContainmentViolation(GraphError):
    code = "ContainmentViolation"


class MissingStart(GraphError):
    code = "MissingStart"


class MultipleStarts(GraphError):
    code = "MultipleStarts"


class NoEnd(GraphError):
    code = "NoEnd"


class Unreachable(GraphError):
    code = "Unreachable"


class MissingBranchSpec(WfsynthError):
    pass


# --- repair ------------------------------------------------------------------


class Unrepairable(WfsynthError):
    def __init__(self, reason: str, last_error: Exception | None = None):
        super().__init__(reason)
        self.last_error = last_error


class AttemptsExhausted(WfsynthError):
    def __init__(self, log: list, last_response: Any = None, last_report: Any = None):
        super().__init__(f"no verified response after {len(log)} attempts")
        self.log = log
        self.last_response = last_response
        self.last_report = last_report


# --- compilation -------------------------------------------------------------


class EmitUnsupported(WfsynthError):
    def __init__(self, node_id: str, reason: str):
        super().__init__(f"node {node_id}: {reason}")
        self.node_id = node_id
        self.reason = reason


class ImportFailure(WfsynthError):
    def __init__(self, stage: str, detail: str):
        super().__init__(f"import failed at {stage}: {detail}")
        self.stage = stage
        self.detail = detail


# --- execution ---------------------------------------------------------------


class ExecutionError(WfsynthError):
    pass


class HandlerError(ExecutionError):
    def __init__(self, node_id: str, detail: str):
        super().__init__(f"node {node_id}: {detail}")
        self.node_id = node_id
        self.detail = detail


class MissingHandler(ExecutionError):
    pass


class LimitExceeded(ExecutionError):
    def __init__(self, which: str):
        super().__init__(f"limit exceeded: {which}")
        self.which = which


class InputMismatch(ExecutionError):
    pass


class UnboundToken(ExecutionError):
    def __init__(self, token: str):
        super().__init__(f"unbound variable {token}")
        self.token = token


class TypeMismatch(ExecutionError):
    def __init__(self, operand: Any, detail: str = ""):
        super().__init__(f"type mismatch for {operand!r}{': ' + detail if detail else ''}")
        self.operand = operand


class ScriptMissing(ExecutionError):
    pass


# --- evaluation / agent ------------------------------------------------------


class IncompleteCoverage(WfsynthError):
    def __init__(self, missing: Sequence[Any]):
        super().__init__(f"reports missing for {len(missing)} item(s): {list(missing)[:5]}")
        self.missing = list(missing)


class ProviderUnavailable(WfsynthError):
    pass
