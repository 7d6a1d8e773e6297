"""
Code-generation IR: translation from Base-L, transformation passes and a
pseudo-code backend.

The IR is itself a tree compiled from ``specs/ir.ast``; new node kinds go
in an extension spec, and the backend is an analysis so an extension can
register handlers for them without touching this module.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from treeforge import BASE_TREE, IR_TREE
from .astspec import Schema, bundled_schema
from .baselang import BaseModule, format_value
from .errors import ConfigError, DivisionByZeroError, ImplicitNotGeneratable, IntegerOverflow
from .interpreter import binary_value, unary_value
from .treekit import Analysis, Diagnostic, Dispatcher, Node, make_node, traverse

__all__ = [
    "ir_schema",
    "IR_TRANSLATOR",
    "PSEUDO_EMITTER",
    "Pass",
    "PASSES",
    "DEFAULT_PIPELINE",
    "translate",
    "functions_of",
    "group_mutual_recursion",
    "fold_constants",
    "run_pipeline",
    "check_ir",
    "emit_pseudo",
    "strongly_connected_components",
]

logger = logging.getLogger(__name__)


def ir_schema() -> Schema:
    return bundled_schema("ir")


# translation

IR_TRANSLATOR = Analysis(BASE_TREE, "ir-translate")
to_ir = IR_TRANSLATOR


def _ir(category: str, alternative: str, source: Node, **values) -> Node:
    return make_node(ir_schema(), category, alternative, values, span=source.span)


@to_ir.handles("Exp", "IntLit", "RealLit", "BoolLit")
def _literal(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir("Exp", "Const", node, value=node["value"])


@to_ir.handles("Exp", "Var")
def _var(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir("Exp", "VarRef", node, name=node["name"])


@to_ir.handles("Exp", "Unary")
def _unary(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir("Exp", "UnOp", node, op=node["op"], operand=dispatch(node["operand"], ctx))


@to_ir.handles("Exp", "Binary")
def _binary(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir(
        "Exp", "BinOp", node, op=node["op"], left=dispatch(node["left"], ctx), right=dispatch(node["right"], ctx)
    )


@to_ir.handles("Exp", "If")
def _if(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir(
        "Exp",
        "If",
        node,
        cond=dispatch(node["cond"], ctx),
        then=dispatch(node["then"], ctx),
        orelse=dispatch(node["orelse"], ctx),
    )


@to_ir.handles("Exp", "Let")
def _let(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir(
        "Exp", "Let", node, name=node["name"], bound=dispatch(node["bound"], ctx), body=dispatch(node["body"], ctx)
    )


@to_ir.handles("Exp", "Apply")
def _apply(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    return _ir("Exp", "Call", node, fn=node["fn"], args=[dispatch(arg, ctx) for arg in node["args"]])


@to_ir.handles("Def", "ExplicitFn")
def _explicit_fn(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    params = [_ir("Param", "IrParam", p, name=p["name"], type=p["type"]) for p in node["params"]]
    return _ir(
        "Def",
        "IrFunc",
        node,
        name=node["name"],
        params=params,
        resultType=node["resultType"],
        body=dispatch(node["body"], ctx),
    )


@to_ir.handles("Def", "ImplicitFn")
def _implicit_fn(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    raise ImplicitNotGeneratable(node["name"], node.span)


@to_ir.handles("Def", "Module")
def _module(node: Node, ctx: None, dispatch: Dispatcher) -> Node:
    functions = [
        dispatch(d, ctx) for d in node["defs"] if d.alternative in ("ExplicitFn", "ImplicitFn")
    ]
    return _ir("Module", "IrModule", node, name=node["name"], defs=functions)


def translate(module: BaseModule) -> Node:
    """
    Map every function of ``module`` to an IrFunc; other definitions are ignored.

    :raises ImplicitNotGeneratable: For the first implicit function met.
    """
    dispatcher = Dispatcher().register(BASE_TREE, IR_TRANSLATOR)
    return dispatcher(module.root, None)


# passes


@dataclass(frozen=True)
class Pass:
    name: str
    transform: Callable[[Node], Node]

    def __call__(self, ir: Node) -> Node:
        return self.transform(ir)


def functions_of(ir: Node) -> List[Node]:
    """IrFuncs in module order, with groups flattened."""
    functions: List[Node] = []
    for definition in ir["defs"]:
        if definition.alternative == "IrFuncGroup":
            functions.extend(definition["members"])
        else:
            functions.append(definition)
    return functions


def _callees(fn: Node) -> List[str]:
    return [node["fn"] for node in traverse(fn["body"]) if node.alternative == "Call"]


def strongly_connected_components(graph: Mapping[str, Sequence[str]]) -> List[Tuple[str, ...]]:
    """Tarjan's algorithm. Edges to names outside ``graph`` are ignored."""
    counter = [0]
    stack: List[str] = []
    on_stack: Set[str] = set()
    index: Dict[str, int] = {}
    lowlink: Dict[str, int] = {}
    result: List[Tuple[str, ...]] = []

    def connect(node: str) -> None:
        index[node] = lowlink[node] = counter[0]
        counter[0] += 1
        stack.append(node)
        on_stack.add(node)
        for successor in graph[node]:
            if successor not in graph:
                continue
            if successor not in index:
                connect(successor)
                lowlink[node] = min(lowlink[node], lowlink[successor])
            elif successor in on_stack:
                lowlink[node] = min(lowlink[node], index[successor])
        if lowlink[node] == index[node]:
            component = []
            while True:
                member = stack.pop()
                on_stack.discard(member)
                component.append(member)
                if member == node:
                    break
            result.append(tuple(component))

    for node in graph:
        if node not in index:
            connect(node)
    return result


def group_mutual_recursion(ir: Node) -> Node:
    """
    Put every set of mutually recursive functions in one IrFuncGroup at the
    position of its first member. Self-recursive functions stay ungrouped.
    """
    functions = functions_of(ir)
    order = {fn["name"]: position for position, fn in enumerate(functions)}
    graph = {fn["name"]: _callees(fn) for fn in functions}
    group_of: Dict[str, Tuple[str, ...]] = {}
    for component in strongly_connected_components(graph):
        if len(component) > 1:
            members = tuple(sorted(component, key=order.__getitem__))
            for name in members:
                group_of[name] = members
    by_name = {fn["name"]: fn for fn in functions}
    defs: List[Node] = []
    for fn in functions:
        members = group_of.get(fn["name"])
        if members is None:
            defs.append(fn)
        elif members[0] == fn["name"]:
            defs.append(
                make_node(ir.schema, "Def", "IrFuncGroup", members=[by_name[m] for m in members], span=fn.span)
            )
    logger.debug("grouping: %d group(s)", sum(1 for d in defs if d.alternative == "IrFuncGroup"))
    return make_node(ir.schema, "Module", "IrModule", name=ir["name"], defs=defs, span=ir.span)


def _rebuild(node: Node, **changes) -> Node:
    values = dict(node.fields)
    values.update(changes)
    return make_node(node.schema, node.category, node.alternative, values, span=node.span)


def _const(source: Node, value) -> Node:
    return make_node(source.schema, "Exp", "Const", value=value, span=source.span)


def _fold(exp: Node) -> Node:
    alt = exp.alternative
    if alt == "BinOp":
        left, right = _fold(exp["left"]), _fold(exp["right"])
        if left.alternative == right.alternative == "Const":
            try:
                return _const(exp, binary_value(exp["op"], left["value"], right["value"]))
            except (DivisionByZeroError, IntegerOverflow):
                pass
        return _rebuild(exp, left=left, right=right)
    if alt == "UnOp":
        operand = _fold(exp["operand"])
        if operand.alternative == "Const":
            try:
                return _const(exp, unary_value(exp["op"], operand["value"]))
            except IntegerOverflow:
                pass
        return _rebuild(exp, operand=operand)
    if alt == "If":
        cond = _fold(exp["cond"])
        if cond.alternative == "Const" and isinstance(cond["value"], bool):
            return _fold(exp["then"] if cond["value"] else exp["orelse"])
        return _rebuild(exp, cond=cond, then=_fold(exp["then"]), orelse=_fold(exp["orelse"]))
    if alt == "Let":
        return _rebuild(exp, bound=_fold(exp["bound"]), body=_fold(exp["body"]))
    if alt == "Call":
        return _rebuild(exp, args=[_fold(arg) for arg in exp["args"]])
    return exp


def _fold_def(definition: Node) -> Node:
    if definition.alternative == "IrFuncGroup":
        return _rebuild(definition, members=[_fold_def(m) for m in definition["members"]])
    return _rebuild(definition, body=_fold(definition["body"]))


def fold_constants(ir: Node) -> Node:
    """
    Evaluate operators over constants and select statically known branches,
    bottom-up until nothing changes. Division by a constant zero and integer
    overflow are left for the runtime to raise.
    """
    while True:
        folded = _rebuild(ir, defs=[_fold_def(d) for d in ir["defs"]])
        if folded == ir:
            return folded
        ir = folded


PASSES: Dict[str, Pass] = {
    "fold": Pass("fold", fold_constants),
    "group": Pass("group", group_mutual_recursion),
}
DEFAULT_PIPELINE: Tuple[str, ...] = ("fold", "group")


def run_pipeline(ir: Node, names: Iterable[str] = DEFAULT_PIPELINE) -> Node:
    """
    :raises ConfigError: For a pass name missing from ``PASSES``.
    """
    for name in names:
        selected = PASSES.get(name)
        if selected is None:
            raise ConfigError(f"unknown pass '{name}' (available: {', '.join(PASSES)})")
        ir = selected(ir)
        logger.debug("pass %s done", name)
    return ir


def check_ir(ir: Node) -> List[Diagnostic]:
    """Unique function names, flat groups and resolvable calls."""
    diagnostics: List[Diagnostic] = []
    for definition in ir["defs"]:
        if definition.alternative == "IrFuncGroup":
            for member in definition["members"]:
                if member.alternative != "IrFunc":
                    diagnostics.append(Diagnostic("nested function group", member.span, "irgen"))
    functions = [f for f in functions_of(ir) if f.alternative == "IrFunc"]
    names: Set[str] = set()
    for fn in functions:
        if fn["name"] in names:
            diagnostics.append(Diagnostic(f"duplicate function '{fn['name']}'", fn.span, "irgen"))
        names.add(fn["name"])
    for fn in functions:
        for callee in _callees(fn):
            if callee not in names:
                diagnostics.append(
                    Diagnostic(f"'{fn['name']}' calls unknown function '{callee}'", fn.span, "irgen")
                )
    return diagnostics


# backend

PSEUDO_EMITTER = Analysis(IR_TREE, "pseudo-emitter")
emit = PSEUDO_EMITTER


@emit.handles("Module", "IrModule")
def _emit_module(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    lines = [f"module {node['name']}"]
    lines.extend(dispatch(d, ctx) for d in node["defs"])
    return "\n".join(lines)


@emit.handles("Def", "IrFunc")
def _emit_func(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    params = ", ".join(p["name"] for p in node["params"])
    return f"func {node['name']}({params}) = {dispatch(node['body'], ctx)}"


@emit.handles("Def", "IrFuncGroup")
def _emit_group(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    members = [f"  {dispatch(m, ctx)}" for m in node["members"]]
    return "\n".join(["group {", *members, "}"])


@emit.handles("Exp", "Const")
def _emit_const(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    return format_value(node["value"])


@emit.handles("Exp", "VarRef")
def _emit_var(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    return node["name"]


@emit.handles("Exp", "UnOp")
def _emit_unop(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    return f"({node['op']} {dispatch(node['operand'], ctx)})"


@emit.handles("Exp", "BinOp")
def _emit_binop(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    return f"({node['op']} {dispatch(node['left'], ctx)} {dispatch(node['right'], ctx)})"


@emit.handles("Exp", "If")
def _emit_if(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    parts = (dispatch(node[f], ctx) for f in ("cond", "then", "orelse"))
    return "(if {} {} {})".format(*parts)


@emit.handles("Exp", "Let")
def _emit_let(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    return f"(let {node['name']} {dispatch(node['bound'], ctx)} {dispatch(node['body'], ctx)})"


@emit.handles("Exp", "Call")
def _emit_call(node: Node, ctx: None, dispatch: Dispatcher) -> str:
    args = "".join(f" {dispatch(arg, ctx)}" for arg in node["args"])
    return f"(call {node['fn']}{args})"


def emit_pseudo(ir: Node, dispatcher: Optional[Dispatcher] = None) -> str:
    """
    Render an IR tree as neutral prefix pseudo-code.

    :param dispatcher: Supply one holding extra analyses to render extension nodes.
    """
    dispatcher = dispatcher or Dispatcher().register(IR_TREE, PSEUDO_EMITTER)
    return dispatcher(ir, None) + "\n"
