"""
Proc-L: CSP-flavoured processes whose guards are Base-L expressions.

A Proc-L source is a Base-L module followed by process definitions::

    module Shop
    values
      stock = 3
    processes
      process Buy = [stock > 0] & pay -> take -> Skip
      process Idle = Stop

``->`` binds tightest, then ``;``, then ``[]``. Guard conditions stay base
nodes inside the hybrid tree, and every analysis here only handles Proc
alternatives: expressions are sent back through the dispatcher to the base
analyses.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple

from treeforge import BASE_TREE, EXT_TREE
from .astspec import Schema, bundled_schema
from .baselang import SECTIONS, BaseModule, BaseParser
from .errors import (
    ArgumentError,
    DuplicateNameError,
    EvaluationError,
    GuardEvaluationError,
    UnboundNameError,
)
from .interpreter import BASE_INTERPRETER, EvalContext
from .lexer import IDENT, Token
from .pog import BASE_POG, Obligation, PogContext, expression_obligations, gen_pos
from .treekit import Analysis, Diagnostic, Dispatcher, Node, make_node
from .typecheck import BASE_TYPECHECK, TypeEnv, module_env, type_check, type_of

__all__ = [
    "ProcModule",
    "ProcParser",
    "parse_procl",
    "proc_schema",
    "EXT_TYPECHECK",
    "EXT_BEHAVIOUR",
    "EXT_POG",
    "type_check_ext",
    "enumerate_traces",
    "gen_pos_ext",
    "pos_for_exp",
    "type_of_exp",
    "ext_dispatcher",
]

logger = logging.getLogger(__name__)

Trace = Tuple[str, ...]
PROC_KEYWORDS = ("Stop", "Skip")


def proc_schema() -> Schema:
    return bundled_schema("proc_l")


@dataclass(frozen=True)
class ProcModule:
    base: BaseModule
    processes: Tuple[Tuple[str, Node], ...]

    @property
    def name(self) -> str:
        return self.base.name

    def process(self, name: str) -> Node:
        for process_name, body in self.processes:
            if process_name == name:
                return body
        raise UnboundNameError(f"unknown process '{name}'")

    @property
    def process_names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.processes)


class ProcParser(BaseParser):
    sections = SECTIONS + ("processes",)

    def __init__(self, text: str):
        super().__init__(text, proc_schema())
        self.processes: List[Tuple[Token, Node]] = []

    def proc(self, alternative: str, token: Token, **values) -> Node:
        return make_node(self.schema, "Proc", alternative, values, span=token.span)

    def section(self, keyword: Token) -> List[Node]:
        if keyword.text != "processes":
            return super().section(keyword)
        while self.stream.at("process") or self.at_entry():
            self.process_def()
        return []

    def process_def(self) -> None:
        s = self.stream
        s.accept("process")
        token = self.name("process name")
        for previous, _ in self.processes:
            if previous.text == token.text:
                raise DuplicateNameError("process", token.text, previous.span, token.span)
        s.expect("=")
        self.processes.append((token, self.choice()))

    def choice(self) -> Node:
        left = self.sequence()
        while self.stream.at("[]"):
            token = self.stream.advance()
            left = self.proc("ExtChoice", token, left=left, right=self.sequence())
        return left

    def sequence(self) -> Node:
        left = self.prefixed()
        while self.stream.at(";"):
            token = self.stream.advance()
            left = self.proc("Seq", token, first=left, second=self.prefixed())
        return left

    def prefixed(self) -> Node:
        s = self.stream
        token = s.peek()
        if s.accept("Stop"):
            return self.proc("Stop", token)
        if s.accept("Skip"):
            return self.proc("Skip", token)
        if s.accept("("):
            inner = self.choice()
            s.expect(")")
            return inner
        if s.accept("["):
            cond = self.expression()
            s.expect("]")
            s.expect("&")
            return self.proc("Guard", token, cond=cond, body=self.prefixed())
        if token.kind == IDENT and token.text not in PROC_KEYWORDS and s.peek(1).text == "->":
            s.advance()
            s.advance()
            return self.proc("Prefix", token, event=token.text, cont=self.prefixed())
        raise s.error("expected a process")


def parse_procl(text: str) -> ProcModule:
    """
    Parse Proc-L source. The ``processes`` header may be omitted when the
    source holds nothing but process definitions.

    :raises ParseError: With the location of the first syntax error.
    """
    parser = ProcParser(text)
    root = parser.parse_module()
    while parser.stream.at("process"):
        parser.process_def()
    parser.expect_end()
    processes = tuple((token.text, body) for token, body in parser.processes)
    return ProcModule(BaseModule(root, text), processes)


# type checking

EXT_TYPECHECK = Analysis(EXT_TREE, "proc-typecheck")


@EXT_TYPECHECK.handles("Proc", "Stop", "Skip", "Prefix", "ExtChoice", "Seq")
def _check_children(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    for _, child in node.children():
        dispatch(child, env)


@EXT_TYPECHECK.handles("Proc", "Guard")
def _check_guard(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    found = dispatch(node["cond"], env)
    if found is not None and found != "bool":
        env.diagnostics.append(
            Diagnostic(f"guard must be bool, found {found}", node["cond"].span, "proc-typecheck")
        )
    dispatch(node["body"], env)
    return found


def ext_dispatcher(base: Analysis, ext: Analysis, record: bool = False) -> Dispatcher:
    return Dispatcher(record=record).register(BASE_TREE, base).register(EXT_TREE, ext)


def guard_env(module: ProcModule) -> TypeEnv:
    """Guards see the module's values and functions, never its state."""
    return replace(module_env(module.base), state={})


def type_check_ext(module: ProcModule, dispatcher: Optional[Dispatcher] = None) -> List[Diagnostic]:
    """
    Type check the base module, then every process through ``dispatcher``.

    :param dispatcher: Holds the base and Proc-L type checkers; pass one in to
        inspect its counters or log afterwards.
    """
    diagnostics = type_check(module.base)
    dispatcher = dispatcher or ext_dispatcher(BASE_TYPECHECK, EXT_TYPECHECK)
    env = guard_env(module)
    for _, body in module.processes:
        dispatcher(body, env)
    logger.debug("proc type check counters: %s", dict(dispatcher.counters))
    return diagnostics + env.diagnostics


def type_of_exp(exp: Node, module: ProcModule) -> Optional[str]:
    """Type of a standalone guard expression, checked by the base analysis alone."""
    return type_of(exp, guard_env(module))


# behaviour


@dataclass(frozen=True)
class StepContext:
    process: str
    eval: EvalContext


Behaviour = Tuple[List[Tuple[str, Node]], bool]

EXT_BEHAVIOUR = Analysis(EXT_TREE, "proc-behaviour")


@EXT_BEHAVIOUR.handles("Proc", "Stop")
def _stop(node: Node, ctx: StepContext, dispatch: Dispatcher) -> Behaviour:
    return [], False


@EXT_BEHAVIOUR.handles("Proc", "Skip")
def _skip(node: Node, ctx: StepContext, dispatch: Dispatcher) -> Behaviour:
    return [], True


@EXT_BEHAVIOUR.handles("Proc", "Prefix")
def _prefix(node: Node, ctx: StepContext, dispatch: Dispatcher) -> Behaviour:
    return [(node["event"], node["cont"])], False


@EXT_BEHAVIOUR.handles("Proc", "ExtChoice")
def _choice(node: Node, ctx: StepContext, dispatch: Dispatcher) -> Behaviour:
    left_steps, left_done = dispatch(node["left"], ctx)
    right_steps, right_done = dispatch(node["right"], ctx)
    return left_steps + right_steps, left_done or right_done


@EXT_BEHAVIOUR.handles("Proc", "Seq")
def _seq(node: Node, ctx: StepContext, dispatch: Dispatcher) -> Behaviour:
    first_steps, first_done = dispatch(node["first"], ctx)
    steps = [
        (event, make_node(node.schema, "Proc", "Seq", first=after, second=node["second"]))
        for event, after in first_steps
    ]
    if not first_done:
        return steps, False
    second_steps, second_done = dispatch(node["second"], ctx)
    return steps + second_steps, second_done


@EXT_BEHAVIOUR.handles("Proc", "Guard")
def _guard(node: Node, ctx: StepContext, dispatch: Dispatcher) -> Behaviour:
    try:
        open_ = dispatch(node["cond"], ctx.eval)
    except EvaluationError as exc:
        raise GuardEvaluationError(
            f"guard of process '{ctx.process}' failed: {exc.message}", node["cond"].span
        ) from exc
    if not open_:
        return [], False
    return dispatch(node["body"], ctx)


def enumerate_traces(module: ProcModule, process: str, depth: int) -> List[Trace]:
    """
    All event sequences of length at most ``depth`` the process can perform,
    sorted lexicographically. The empty trace is always included.
    """
    if depth < 0:
        raise ArgumentError(f"trace depth must be nonnegative, got {depth}")
    body = module.process(process)
    dispatcher = ext_dispatcher(BASE_INTERPRETER, EXT_BEHAVIOUR)
    ctx = StepContext(process, EvalContext.for_module(module.base))
    traces: Set[Trace] = {()}
    frontier: Set[Tuple[Trace, Node]] = {((), body)}
    for _ in range(depth):
        reached: Set[Tuple[Trace, Node]] = set()
        for trace, state in frontier:
            steps, _ = dispatcher(state, ctx)
            for event, after in steps:
                longer = trace + (event,)
                traces.add(longer)
                reached.add((longer, after))
        if not reached:
            break
        frontier = reached
    logger.debug("%s: %d trace(s) up to depth %d", process, len(traces), depth)
    return sorted(traces)


# proof obligations

EXT_POG = Analysis(EXT_TREE, "proc-pog")


@EXT_POG.handles("Proc", "Stop", "Skip", "Prefix", "ExtChoice", "Seq", "Guard")
def _pog_children(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    for _, child in node.children():
        dispatch(child, ctx)


def gen_pos_ext(module: ProcModule, dispatcher: Optional[Dispatcher] = None) -> List[Obligation]:
    """Obligations of the base module followed by those of every guard, by process."""
    obligations = gen_pos(module.base)
    dispatcher = dispatcher or ext_dispatcher(BASE_POG, EXT_POG)
    for name, body in module.processes:
        ctx = PogContext(owner=name)
        dispatcher(body, ctx)
        obligations.extend(ctx.obligations)
    return obligations


def pos_for_exp(exp: Node, owner: str = "") -> List[Obligation]:
    """Obligations of a standalone expression from the base generator alone."""
    return expression_obligations(exp, owner)
