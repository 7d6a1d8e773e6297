"""
Combinatorial testing: trace expressions are expanded into concrete call
sequences, each sequence is executed as a test against a fresh copy of the
module state, and large suites can be cut down to a seeded random subset.

Trace grammar (``|`` binds loosest)::

    alt    := seq ('|' seq)*
    seq    := repeat (';' repeat)*
    repeat := atom ( '{' lo [',' hi] '}' | '?' | '*' | '+' )*
    atom   := op '(' [literal (',' literal)*] ')' | '(' alt ')'
"""

import itertools
import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from treeforge import DEFAULT_SEED, MAX_REPEAT, MAX_TESTS
from .baselang import BaseModule, Value, format_value, params_of, value_type
from .errors import (
    BoundsError,
    ConfigError,
    ExpansionBudgetExceeded,
    ParseError,
    PreconditionFailure,
    TreeforgeError,
    UnboundNameError,
)
from .interpreter import exec_operation, initial_state
from .lexer import INT, REAL, TokenStream
from .treekit import Diagnostic

__all__ = [
    "Call",
    "Seq",
    "Alt",
    "Repeat",
    "TraceExpr",
    "TestCase",
    "VerdictKind",
    "Verdict",
    "parse_trace_expr",
    "count_tests",
    "expand",
    "execute",
    "reduce",
    "rerun",
    "check_trace",
    "trace_of",
    "render_tests",
    "render_report",
]

logger = logging.getLogger(__name__)

CallStep = Tuple[str, Tuple[Value, ...]]


@dataclass(frozen=True)
class Call:
    op: str
    args: Tuple[Value, ...] = ()

    def __str__(self) -> str:
        return _call_text((self.op, self.args))


@dataclass(frozen=True)
class Seq:
    items: Tuple["TraceExpr", ...]

    def __str__(self) -> str:
        return " ; ".join(_wrapped(item, (Alt,)) for item in self.items)


@dataclass(frozen=True)
class Alt:
    items: Tuple["TraceExpr", ...]

    def __str__(self) -> str:
        return " | ".join(str(item) for item in self.items)


@dataclass(frozen=True)
class Repeat:
    inner: "TraceExpr"
    lo: int
    hi: int

    def __str__(self) -> str:
        return f"{_wrapped(self.inner, (Alt, Seq))}{{{self.lo},{self.hi}}}"


TraceExpr = Union[Call, Seq, Alt, Repeat]


def _wrapped(expr: TraceExpr, kinds) -> str:
    return f"({expr})" if isinstance(expr, kinds) else str(expr)


def _call_text(step: CallStep) -> str:
    op, args = step
    return f"{op}({', '.join(format_value(a) for a in args)})"


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    index: int
    calls: Tuple[CallStep, ...]

    def __str__(self) -> str:
        return " ; ".join(_call_text(step) for step in self.calls) or "<empty>"


class VerdictKind(str, Enum):
    PASSED = "PASSED"
    FAILED = "FAILED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    reason: str = ""
    index: Optional[int] = None
    detail: str = ""

    @classmethod
    def passed(cls) -> "Verdict":
        return cls(VerdictKind.PASSED)

    @classmethod
    def failed(cls, reason: str, index: int, detail: str = "") -> "Verdict":
        return cls(VerdictKind.FAILED, reason, index, detail)

    @classmethod
    def inconclusive(cls, index: int, detail: str = "") -> "Verdict":
        return cls(VerdictKind.INCONCLUSIVE, "PreconditionFailure", index, detail)

    def __str__(self) -> str:
        if self.kind is VerdictKind.PASSED:
            return self.kind.value
        return f"{self.kind.value}({self.reason}, {self.index})"


class _TraceParser:
    def __init__(self, text: str, max_repeat: int):
        self.stream = TokenStream.from_source(text, comment="--")
        self.max_repeat = max_repeat

    def parse(self) -> TraceExpr:
        expr = self.alternation()
        if not self.stream.at_eof():
            raise self.stream.error("unexpected input after trace expression")
        return expr

    def alternation(self) -> TraceExpr:
        items = [self.sequence()]
        while self.stream.accept("|"):
            items.append(self.sequence())
        return items[0] if len(items) == 1 else Alt(tuple(items))

    def sequence(self) -> TraceExpr:
        items = [self.repetition()]
        while self.stream.accept(";"):
            items.append(self.repetition())
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def bound(self) -> int:
        token = self.stream.peek()
        if token.kind != INT:
            raise self.stream.error("expected a repetition bound")
        self.stream.advance()
        return int(token.text)

    def repetition(self) -> TraceExpr:
        s = self.stream
        expr = self.atom()
        while True:
            token = s.peek()
            if s.accept("{"):
                lo = self.bound()
                hi = self.bound() if s.accept(",") else lo
                s.expect("}")
            elif s.accept("?"):
                lo, hi = 0, 1
            elif s.accept("*"):
                lo, hi = 0, self.max_repeat
            elif s.accept("+"):
                lo, hi = 1, self.max_repeat
            else:
                return expr
            if lo > hi:
                raise BoundsError(f"repetition lower bound {lo} exceeds upper bound {hi}", token.span)
            if hi > self.max_repeat:
                raise BoundsError(
                    f"repetition bound {hi} exceeds the maximum of {self.max_repeat}", token.span
                )
            expr = Repeat(expr, lo, hi)

    def literal(self) -> Value:
        s = self.stream
        negative = s.accept("-") is not None
        token = s.peek()
        if token.kind == INT:
            s.advance()
            return -int(token.text) if negative else int(token.text)
        if token.kind == REAL:
            s.advance()
            return -float(token.text) if negative else float(token.text)
        if not negative and s.accept("true", "false"):
            return token.text == "true"
        raise s.error("expected a literal argument")

    def atom(self) -> TraceExpr:
        s = self.stream
        if s.accept("("):
            inner = self.alternation()
            s.expect(")")
            return inner
        op = s.expect_ident("operation call")
        s.expect("(")
        args: List[Value] = []
        if not s.at(")"):
            args.append(self.literal())
            while s.accept(","):
                args.append(self.literal())
        s.expect(")")
        return Call(op.text, tuple(args))


def parse_trace_expr(text: str, max_repeat: int = MAX_REPEAT) -> TraceExpr:
    """
    :raises ParseError: On malformed input.
    :raises BoundsError: When a repetition has lo > hi or hi > ``max_repeat``.
    """
    return _TraceParser(text, max_repeat).parse()


def count_tests(expr: TraceExpr) -> int:
    if isinstance(expr, Call):
        return 1
    if isinstance(expr, Seq):
        return math.prod(count_tests(item) for item in expr.items)
    if isinstance(expr, Alt):
        return sum(count_tests(item) for item in expr.items)
    inner = count_tests(expr.inner)
    return sum(inner**k for k in range(expr.lo, expr.hi + 1))


def _sequences(expr: TraceExpr) -> List[Tuple[CallStep, ...]]:
    if isinstance(expr, Call):
        return [((expr.op, expr.args),)]
    if isinstance(expr, Seq):
        parts = [_sequences(item) for item in expr.items]
        return [sum(combo, ()) for combo in itertools.product(*parts)]
    if isinstance(expr, Alt):
        return [seq for item in expr.items for seq in _sequences(item)]
    inner = _sequences(expr.inner)
    return [
        sum(combo, ())
        for k in range(expr.lo, expr.hi + 1)
        for combo in itertools.product(inner, repeat=k)
    ]


def expand(expr: TraceExpr, max_tests: int = MAX_TESTS) -> List[TestCase]:
    """
    Expand a trace expression into test cases in deterministic order.

    :raises ExpansionBudgetExceeded: When more than ``max_tests`` tests would result.
    """
    total = count_tests(expr)
    if total > max_tests:
        raise ExpansionBudgetExceeded(f"trace expands to {total} tests, more than the budget of {max_tests}")
    tests = [TestCase(index, calls) for index, calls in enumerate(_sequences(expr))]
    logger.debug("expanded %s into %d test(s)", expr, len(tests))
    return tests


def _run(test: TestCase, module: BaseModule, state: Mapping[str, Value]) -> Verdict:
    current: Dict[str, Value] = dict(state)
    for position, (op, args) in enumerate(test.calls):
        try:
            current, _ = exec_operation(module, current, op, args)
        except PreconditionFailure as exc:
            return Verdict.inconclusive(position, exc.message)
        except TreeforgeError as exc:
            return Verdict.failed(exc.kind, position, exc.message)
    return Verdict.passed()


def execute(
    tests: Iterable[TestCase],
    module: BaseModule,
    initial: Optional[Mapping[str, Value]] = None,
) -> List[Tuple[TestCase, Verdict]]:
    """
    Run every test from its own copy of ``initial`` (the module's initial
    state by default). Results come back in test-index order.
    """
    state = dict(initial) if initial is not None else initial_state(module)
    results = [(test, _run(test, module, state)) for test in tests]
    return sorted(results, key=lambda pair: pair[0].index)


def reduce(tests: Sequence[TestCase], factor: float, seed: int = DEFAULT_SEED) -> List[TestCase]:
    """
    Keep ``ceil(factor * len(tests))`` tests picked with a seeded generator,
    in their original order.

    :raises ConfigError: When ``factor`` lies outside (0, 1].
    """
    if not 0.0 < factor <= 1.0:
        raise ConfigError(f"reduction factor must lie in (0, 1], got {factor}")
    total = len(tests)
    if factor == 1.0 or total == 0:
        return list(tests)
    # the decimal the factor was written as, so 0.1 of 30 keeps 3
    keep = max(1, math.ceil(Fraction(str(factor)) * total))
    picked = sorted(random.Random(seed).sample(range(total), keep))
    return [tests[i] for i in picked]


def rerun(
    tests: Iterable[TestCase],
    index: int,
    module: BaseModule,
    initial: Optional[Mapping[str, Value]] = None,
) -> Tuple[TestCase, Verdict]:
    """
    Execute the single test whose expansion index is ``index``.

    :raises ConfigError: When no test in ``tests`` carries that index, as after a reduction.
    """
    for test in tests:
        if test.index == index:
            return execute([test], module, initial)[0]
    raise ConfigError(f"no test with index {index}")


def _calls(expr: TraceExpr) -> Iterable[Call]:
    if isinstance(expr, Call):
        yield expr
    elif isinstance(expr, Repeat):
        yield from _calls(expr.inner)
    else:
        for item in expr.items:
            yield from _calls(item)


def check_trace(expr: TraceExpr, module: BaseModule) -> List[Diagnostic]:
    """Every call must name an operation of ``module`` with matching literal arguments."""
    diagnostics: List[Diagnostic] = []
    for call in _calls(expr):
        op = module.operation(call.op)
        if op is None:
            diagnostics.append(Diagnostic(f"unknown operation '{call.op}'", source="ct"))
            continue
        params = params_of(op)
        if len(params) != len(call.args):
            diagnostics.append(
                Diagnostic(
                    f"'{call.op}' expects {len(params)} argument(s), {len(call.args)} given", source="ct"
                )
            )
            continue
        for (name, wanted), value in zip(params, call.args):
            if value_type(value) != wanted:
                diagnostics.append(
                    Diagnostic(
                        f"argument '{name}' of '{call.op}' must be {wanted}, found {value_type(value)}",
                        source="ct",
                    )
                )
    return diagnostics


def trace_of(module: BaseModule, name: str, max_repeat: int = MAX_REPEAT) -> TraceExpr:
    definition = module.trace(name)
    if definition is None:
        raise UnboundNameError(f"unknown trace '{name}'")
    try:
        return parse_trace_expr(definition["text"], max_repeat)
    except ParseError as exc:
        # positions inside the trace text are relative to the trace line
        raise ParseError(f"in trace '{name}': {exc.message}", definition.span) from exc


def render_tests(tests: Iterable[TestCase]) -> str:
    return "".join(f"{test.index}\t{test}\n" for test in tests)


def render_report(results: Iterable[Tuple[TestCase, Verdict]]) -> str:
    """One ``index<TAB>verdict<TAB>detail`` line per test."""
    lines = []
    for test, verdict in results:
        if verdict.kind is VerdictKind.PASSED:
            detail = str(test)
        else:
            detail = f"call {verdict.index}: {verdict.reason}: {verdict.detail} [{test}]"
        lines.append(f"{test.index}\t{verdict.kind.value}\t{detail}\n")
    return "".join(lines)
