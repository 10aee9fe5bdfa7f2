"""A tiny, side-effect-free evaluator for code-node scripts.

Scripts are written the way the target platform expects them::

    def main(items: list, suffix: str) -> dict:
        out = [x + suffix for x in items]
        return {"result": out, "count": len(out)}

Only a small subset of Python is accepted: assignments, ``if``/``for``,
``return``, arithmetic, comparisons, string concatenation and formatting,
indexing/slicing, literals, comprehensions and a whitelist of builtins and
string/list/dict methods.  Anything else raises :class:`CodeError`.
"""

from __future__ import annotations

import ast
import operator
from typing import Any, Mapping


class CodeError(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
}
_CMPOPS = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.In: lambda a, b: a in b,
    ast.NotIn: lambda a, b: a not in b,
}
_MAX_RANGE = 10_000
_MAX_STEPS = 100_000


def _range(*args):
    r = range(*args)
    if len(r) > _MAX_RANGE:
        raise CodeError("range too large")
    return list(r)


_BUILTINS = {
    "len": len, "str": str, "int": int, "float": float, "bool": bool, "round": round,
    "min": min, "max": max, "sum": sum, "sorted": sorted, "abs": abs, "list": list,
    "dict": dict, "range": _range, "enumerate": lambda x: list(enumerate(x)),
    "zip": lambda *a: list(zip(*a)),
}
_METHODS = {
    str: {"upper", "lower", "strip", "lstrip", "rstrip", "split", "join", "replace", "startswith",
          "endswith", "title", "capitalize", "count", "find", "splitlines"},
    list: {"append", "index", "count", "copy"},
    dict: {"get", "keys", "values", "items"},
}


class _Interp:
    def __init__(self, env: dict):
        self.env = env
        self.steps = 0

    def tick(self):
        self.steps += 1
        if self.steps > _MAX_STEPS:
            raise CodeError("step limit exceeded")

    # statements
    def run(self, body):
        for stmt in body:
            self.stmt(stmt)

    def stmt(self, s):
        self.tick()
        if isinstance(s, ast.Return):
            raise _Return(self.expr(s.value) if s.value is not None else None)
        if isinstance(s, ast.Assign):
            value = self.expr(s.value)
            for target in s.targets:
                self.assign(target, value)
            return
        if isinstance(s, ast.AnnAssign) and s.value is not None:
            self.assign(s.target, self.expr(s.value))
            return
        if isinstance(s, ast.AugAssign):
            if not isinstance(s.target, ast.Name) or type(s.op) not in _BINOPS:
                raise CodeError("unsupported augmented assignment")
            self.env[s.target.id] = _BINOPS[type(s.op)](self.lookup(s.target.id), self.expr(s.value))
            return
        if isinstance(s, ast.If):
            self.run(s.body if self.expr(s.test) else s.orelse)
            return
        if isinstance(s, ast.For):
            for item in list(self.expr(s.iter)):
                self.assign(s.target, item)
                self.run(s.body)
            return
        if isinstance(s, ast.Expr):
            self.expr(s.value)
            return
        if isinstance(s, ast.Pass):
            return
        raise CodeError(f"unsupported statement {type(s).__name__}")

    def assign(self, target, value):
        if isinstance(target, ast.Name):
            self.env[target.id] = value
        elif isinstance(target, (ast.Tuple, ast.List)):
            values = list(value)
            if len(values) != len(target.elts):
                raise CodeError("unpacking mismatch")
            for t, v in zip(target.elts, values):
                self.assign(t, v)
        elif isinstance(target, ast.Subscript):
            container = self.expr(target.value)
            if not isinstance(container, (list, dict)):
                raise CodeError("item assignment needs a list or dict")
            container[self.expr(target.slice)] = value
        else:
            raise CodeError("unsupported assignment target")

    def lookup(self, name):
        if name in self.env:
            return self.env[name]
        if name in _BUILTINS:
            return _BUILTINS[name]
        if name in ("True", "False", "None"):
            return {"True": True, "False": False, "None": None}[name]
        raise CodeError(f"name {name!r} is not defined")

    # expressions
    def expr(self, e):
        self.tick()
        if isinstance(e, ast.Constant):
            return e.value
        if isinstance(e, ast.Name):
            return self.lookup(e.id)
        if isinstance(e, ast.List):
            return [self.expr(x) for x in e.elts]
        if isinstance(e, ast.Tuple):
            return tuple(self.expr(x) for x in e.elts)
        if isinstance(e, ast.Dict):
            if any(k is None for k in e.keys):
                raise CodeError("dict unpacking unsupported")
            return {self.expr(k): self.expr(v) for k, v in zip(e.keys, e.values)}
        if isinstance(e, ast.BinOp):
            op = _BINOPS.get(type(e.op))
            if op is None:
                raise CodeError(f"unsupported operator {type(e.op).__name__}")
            left, right = self.expr(e.left), self.expr(e.right)
            if isinstance(e.op, ast.Mult) and (isinstance(left, (str, list)) or isinstance(right, (str, list))):
                n = right if isinstance(left, (str, list)) else left
                if not isinstance(n, int) or n > _MAX_RANGE:
                    raise CodeError("sequence repetition too large")
            return op(left, right)
        if isinstance(e, ast.UnaryOp):
            v = self.expr(e.operand)
            if isinstance(e.op, ast.USub):
                return -v
            if isinstance(e.op, ast.UAdd):
                return +v
            if isinstance(e.op, ast.Not):
                return not v
            raise CodeError("unsupported unary operator")
        if isinstance(e, ast.BoolOp):
            if isinstance(e.op, ast.And):
                result = True
                for v in e.values:
                    result = self.expr(v)
                    if not result:
                        return result
                return result
            result = False
            for v in e.values:
                result = self.expr(v)
                if result:
                    return result
            return result
        if isinstance(e, ast.Compare):
            left = self.expr(e.left)
            for op, comp in zip(e.ops, e.comparators):
                right = self.expr(comp)
                fn = _CMPOPS.get(type(op))
                if fn is None:
                    raise CodeError("unsupported comparison")
                if not fn(left, right):
                    return False
                left = right
            return True
        if isinstance(e, ast.IfExp):
            return self.expr(e.body) if self.expr(e.test) else self.expr(e.orelse)
        if isinstance(e, ast.Subscript):
            return self.expr(e.value)[self.expr(e.slice)]
        if isinstance(e, ast.Slice):
            return slice(
                self.expr(e.lower) if e.lower else None,
                self.expr(e.upper) if e.upper else None,
                self.expr(e.step) if e.step else None,
            )
        if isinstance(e, ast.JoinedStr):
            return "".join(self.expr(v) if not isinstance(v, ast.Constant) else v.value for v in e.values)
        if isinstance(e, ast.FormattedValue):
            v = self.expr(e.value)
            spec = self.expr(e.format_spec) if e.format_spec else ""
            return format(v, spec)
        if isinstance(e, (ast.ListComp, ast.GeneratorExp)):
            return self.comprehension(e)
        if isinstance(e, ast.Call):
            return self.call(e)
        raise CodeError(f"unsupported expression {type(e).__name__}")

    def comprehension(self, e):
        if len(e.generators) != 1:
            raise CodeError("only single-generator comprehensions are supported")
        gen = e.generators[0]
        saved = dict(self.env)
        out = []
        try:
            for item in list(self.expr(gen.iter)):
                self.assign(gen.target, item)
                if all(self.expr(cond) for cond in gen.ifs):
                    out.append(self.expr(e.elt))
        finally:
            self.env = saved
        return out

    def call(self, e):
        if e.keywords and any(k.arg is None for k in e.keywords):
            raise CodeError("keyword unpacking unsupported")
        args = [self.expr(a) for a in e.args]
        kwargs = {k.arg: self.expr(k.value) for k in e.keywords}
        if isinstance(e.func, ast.Name):
            fn = _BUILTINS.get(e.func.id)
            if fn is None:
                raise CodeError(f"call to {e.func.id!r} not allowed")
            return fn(*args, **kwargs)
        if isinstance(e.func, ast.Attribute):
            obj = self.expr(e.func.value)
            allowed = next((m for t, m in _METHODS.items() if isinstance(obj, t)), set())
            if e.func.attr not in allowed:
                raise CodeError(f"method {e.func.attr!r} not allowed on {type(obj).__name__}")
            return getattr(obj, e.func.attr)(*args, **kwargs)
        raise CodeError("unsupported call")


def run_main(script: str, arguments: Mapping[str, Any]) -> Any:
    """Parse *script*, bind *arguments* to ``main``'s parameters and run it."""
    try:
        tree = ast.parse(script)
    except SyntaxError as exc:
        raise CodeError(f"syntax error: {exc.msg} (line {exc.lineno})") from None
    main = next((n for n in tree.body if isinstance(n, ast.FunctionDef) and n.name == "main"), None)
    if main is None:
        raise CodeError("script must define main()")
    env = {}
    for arg in main.args.args:
        if arg.arg not in arguments:
            raise CodeError(f"no input bound to parameter {arg.arg!r}")
        env[arg.arg] = arguments[arg.arg]
    interp = _Interp(env)
    try:
        interp.run(main.body)
    except _Return as r:
        return r.value
    except CodeError:
        raise
    except Exception as exc:
        raise CodeError(f"{type(exc).__name__}: {exc}") from None
    return None
