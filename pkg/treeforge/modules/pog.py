"""
Proof-obligation generator for Base-L.

Two kinds are produced: a DivByZero obligation for every ``/``, ``div`` or
``mod`` whose divisor is not a nonzero literal, and an
ImplicitSatisfiability obligation for every implicit function.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

from treeforge import BASE_TREE
from .baselang import BaseModule, base_schema, params_of, render_exp
from .errors import Span
from .treekit import Analysis, Dispatcher, Node, make_node

__all__ = [
    "ObligationKind",
    "Obligation",
    "PogContext",
    "BASE_POG",
    "gen_pos",
    "expression_obligations",
    "pog_dispatcher",
]

logger = logging.getLogger(__name__)


class ObligationKind(str, Enum):
    DIV_BY_ZERO = "DivByZero"
    IMPLICIT_SATISFIABILITY = "ImplicitSatisfiability"


@dataclass(frozen=True)
class Obligation:
    """
    ``predicate_text`` is always a plain Base-L boolean expression. For
    implicit satisfiability the existential binder is kept in ``binder``.
    """

    kind: ObligationKind
    span: Optional[Span]
    predicate_text: str
    owner: str = ""
    scope: Tuple[Tuple[str, str], ...] = ()
    binder: Optional[Tuple[str, str]] = None

    def render(self) -> str:
        if self.binder is not None:
            name, type_name = self.binder
            return f"exists {name} : {type_name} & {self.predicate_text}"
        return self.predicate_text

    def __str__(self) -> str:
        where = f"{self.span} " if self.span else ""
        return f"{where}{self.kind.value} [{self.owner}] {self.render()}"


@dataclass(frozen=True)
class PogContext:
    owner: str = ""
    scope: Tuple[Tuple[str, str], ...] = ()
    lets: Tuple[Tuple[str, Node], ...] = ()
    obligations: List[Obligation] = field(default_factory=list)

    def enter(self, owner: str, scope=()) -> "PogContext":
        return replace(self, owner=owner, scope=tuple(scope), lets=())


BASE_POG = Analysis(BASE_TREE, "base-pog")
pog = BASE_POG

DIVISIONS = ("/", "div", "mod")


def _is_nonzero_literal(exp: Node) -> bool:
    if exp.alternative in ("IntLit", "RealLit"):
        return exp["value"] != 0
    if exp.alternative == "Unary" and exp["op"] == "-":
        return _is_nonzero_literal(exp["operand"])
    return False


def _closed_predicate(divisor: Node, lets: Tuple[Tuple[str, Node], ...]) -> Node:
    schema = base_schema()
    zero = make_node(schema, "Exp", "IntLit", value=0)
    predicate = make_node(schema, "Exp", "Binary", op="<>", left=divisor, right=zero)
    for name, bound in reversed(lets):
        predicate = make_node(schema, "Exp", "Let", name=name, bound=bound, body=predicate)
    return predicate


@pog.handles_category("Exp")
@pog.handles_category("Stmt")
def _descend(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    for _, child in node.children():
        dispatch(child, ctx)


@pog.handles("Exp", "Binary")
def _binary(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    if node["op"] in DIVISIONS and not _is_nonzero_literal(node["right"]):
        ctx.obligations.append(
            Obligation(
                ObligationKind.DIV_BY_ZERO,
                node.span,
                render_exp(_closed_predicate(node["right"], ctx.lets)),
                ctx.owner,
                ctx.scope,
            )
        )
    dispatch(node["left"], ctx)
    dispatch(node["right"], ctx)


@pog.handles("Exp", "Let")
def _let(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    dispatch(node["bound"], ctx)
    dispatch(node["body"], replace(ctx, lets=ctx.lets + ((node["name"], node["bound"]),)))


def _each(ctx: PogContext, dispatch: Dispatcher, *nodes: Optional[Node]) -> None:
    for node in nodes:
        if node is not None:
            dispatch(node, ctx)


@pog.handles("Def", "Module")
def _module(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    _each(ctx, dispatch, *node["defs"])


@pog.handles("Def", "ValueDef")
def _value_def(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    dispatch(node["value"], ctx.enter(node["name"]))


@pog.handles("Def", "StateDef")
def _state_def(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    dispatch(node["init"], ctx.enter(node["name"]))


@pog.handles("Def", "ExplicitFn")
def _explicit_fn(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    inner = ctx.enter(node["name"], params_of(node))
    _each(inner, dispatch, node["body"], node["pre"])
    if node["post"] is not None:
        dispatch(node["post"], replace(inner, scope=inner.scope + (("RESULT", node["resultType"]),)))


@pog.handles("Def", "ImplicitFn")
def _implicit_fn(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    inner = ctx.enter(node["name"], params_of(node))
    binder = (node["result"], node["resultType"])
    ctx.obligations.append(
        Obligation(
            ObligationKind.IMPLICIT_SATISFIABILITY,
            node.span,
            render_exp(node["post"]),
            node["name"],
            inner.scope,
            binder,
        )
    )
    _each(inner, dispatch, node["pre"])
    dispatch(node["post"], replace(inner, scope=inner.scope + (binder,)))


@pog.handles("Def", "Operation")
def _operation(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    _each(ctx.enter(node["name"], ctx.scope + tuple(params_of(node))), dispatch, node["body"], node["pre"], node["post"])


@pog.handles("Def", "TraceDef", "Param")
def _nothing(node: Node, ctx: PogContext, dispatch: Dispatcher) -> None:
    return None


def pog_dispatcher(record: bool = False) -> Dispatcher:
    return Dispatcher(record=record).register(BASE_TREE, BASE_POG)


def gen_pos(module: BaseModule, dispatcher: Optional[Dispatcher] = None) -> List[Obligation]:
    """All obligations of a module, in definition order."""
    dispatcher = dispatcher or pog_dispatcher()
    state_scope = tuple(module.state_types.items())
    ctx = PogContext(scope=state_scope)
    dispatcher(module.root, ctx)
    logger.debug("%s: %d obligation(s)", module.name, len(ctx.obligations))
    return ctx.obligations


def expression_obligations(
    exp: Node,
    owner: str = "",
    scope: Tuple[Tuple[str, str], ...] = (),
    dispatcher: Optional[Dispatcher] = None,
) -> List[Obligation]:
    """Obligations of a standalone expression."""
    ctx = PogContext(owner=owner, scope=tuple(scope))
    (dispatcher or pog_dispatcher())(exp, ctx)
    return ctx.obligations
