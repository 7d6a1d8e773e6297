"""
Type checker for Base-L, written as an analysis over the BaseL tree.

Expression handlers return the expression's type name (``int``, ``real`` or
``bool``) or None when an error has already been reported below it, which
keeps one mistake from cascading into a diagnostic per enclosing node.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

from treeforge import BASE_TREE
from .baselang import BaseModule, params_of
from .treekit import Analysis, Diagnostic, Dispatcher, Node

__all__ = [
    "TypeEnv",
    "BASE_TYPECHECK",
    "type_check",
    "type_of",
    "module_env",
    "NUMERIC",
]

logger = logging.getLogger(__name__)

NUMERIC = ("int", "real")
SOURCE = "typecheck"

Signature = Tuple[Tuple[str, ...], str]


@dataclass(frozen=True)
class TypeEnv:
    """Typing context. ``diagnostics`` is shared by every derived env."""

    functions: Mapping[str, Signature] = field(default_factory=dict)
    values: Mapping[str, str] = field(default_factory=dict)
    state: Mapping[str, str] = field(default_factory=dict)
    locals: Mapping[str, str] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def bind(self, **names: str) -> "TypeEnv":
        return replace(self, locals={**self.locals, **names})

    def with_locals(self, names: Mapping[str, str]) -> "TypeEnv":
        return replace(self, locals=dict(names))

    def lookup(self, name: str) -> Optional[str]:
        for scope in (self.locals, self.state, self.values):
            if name in scope:
                return scope[name]
        return None

    def report(self, message: str, node: Node) -> None:
        self.diagnostics.append(Diagnostic(message, node.span, SOURCE))


BASE_TYPECHECK = Analysis(BASE_TREE, "base-typecheck")
check = BASE_TYPECHECK


def _expect(env: TypeEnv, found: Optional[str], wanted: str, what: str, node: Node) -> None:
    if found is not None and found != wanted:
        env.report(f"{what} must be {wanted}, found {found}", node)


@check.handles("Exp", "IntLit")
def _int_lit(node: Node, env: TypeEnv, dispatch: Dispatcher) -> str:
    return "int"


@check.handles("Exp", "RealLit")
def _real_lit(node: Node, env: TypeEnv, dispatch: Dispatcher) -> str:
    return "real"


@check.handles("Exp", "BoolLit")
def _bool_lit(node: Node, env: TypeEnv, dispatch: Dispatcher) -> str:
    return "bool"


@check.handles("Exp", "Var")
def _var(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    found = env.lookup(node["name"])
    if found is None:
        env.report(f"unbound name '{node['name']}'", node)
    return found


@check.handles("Exp", "Unary")
def _unary(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    operand = dispatch(node["operand"], env)
    if operand is None:
        return None
    if node["op"] == "not":
        _expect(env, operand, "bool", "operand of 'not'", node)
        return "bool"
    if operand not in NUMERIC:
        env.report(f"operand of unary '-' must be numeric, found {operand}", node)
        return None
    return operand


def binary_type(op: str, left: str, right: str) -> Tuple[Optional[str], Optional[str]]:
    """Result type of ``left op right``, or (None, message) when ill-typed."""
    numeric = left in NUMERIC and right in NUMERIC
    if op in ("+", "-", "*"):
        if numeric:
            return ("int" if left == right == "int" else "real"), None
    elif op == "/":
        if numeric:
            return "real", None
    elif op in ("div", "mod"):
        if left == right == "int":
            return "int", None
        return None, f"operator '{op}' expects int operands, found {left} and {right}"
    elif op in ("<", "<=", ">", ">="):
        if numeric:
            return "bool", None
    elif op in ("=", "<>"):
        if left == right or numeric:
            return "bool", None
        return None, f"operator '{op}' compares {left} with {right}"
    elif op in ("and", "or"):
        if left == right == "bool":
            return "bool", None
        return None, f"operator '{op}' expects bool operands, found {left} and {right}"
    return None, f"operator '{op}' expects numeric operands, found {left} and {right}"


@check.handles("Exp", "Binary")
def _binary(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    left = dispatch(node["left"], env)
    right = dispatch(node["right"], env)
    if left is None or right is None:
        return None
    result, problem = binary_type(node["op"], left, right)
    if problem:
        env.report(problem, node)
    return result


@check.handles("Exp", "If")
def _if(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    _expect(env, dispatch(node["cond"], env), "bool", "condition", node["cond"])
    then = dispatch(node["then"], env)
    orelse = dispatch(node["orelse"], env)
    if then is None or orelse is None:
        return None
    if then != orelse:
        env.report(f"branches of 'if' differ: {then} and {orelse}", node)
        return None
    return then


@check.handles("Exp", "Let")
def _let(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    bound = dispatch(node["bound"], env)
    if bound is None:
        return None
    return dispatch(node["body"], env.bind(**{node["name"]: bound}))


@check.handles("Exp", "Apply")
def _apply(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    arg_types = [dispatch(arg, env) for arg in node["args"]]
    signature = env.functions.get(node["fn"])
    if signature is None:
        env.report(f"unknown function '{node['fn']}'", node)
        return None
    param_types, result = signature
    if len(arg_types) != len(param_types):
        env.report(
            f"'{node['fn']}' expects {len(param_types)} argument(s), {len(arg_types)} given", node
        )
        return result
    for position, (found, wanted) in enumerate(zip(arg_types, param_types), start=1):
        _expect(env, found, wanted, f"argument {position} of '{node['fn']}'", node)
    return result


# statements


@check.handles("Stmt", "Assign")
def _assign(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    value = dispatch(node["value"], env)
    target = node["target"]
    if target not in env.state:
        env.report(f"assignment to '{target}', which is not a state variable", node)
        return None
    _expect(env, value, env.state[target], f"value assigned to '{target}'", node)


@check.handles("Stmt", "Block")
def _block(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    dispatch(node["first"], env)
    dispatch(node["second"], env)


@check.handles("Stmt", "IfStmt")
def _if_stmt(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    _expect(env, dispatch(node["cond"], env), "bool", "condition", node["cond"])
    dispatch(node["then"], env)
    dispatch(node["orelse"], env)


@check.handles("Stmt", "Return")
def _return(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    dispatch(node["value"], env)


@check.handles("Stmt", "Skip")
def _skip(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    return None


# definitions


def _condition(node: Optional[Node], env: TypeEnv, dispatch: Dispatcher, what: str) -> None:
    if node is not None:
        _expect(env, dispatch(node, env), "bool", what, node)


@check.handles("Def", "ValueDef")
def _value_def(node: Node, env: TypeEnv, dispatch: Dispatcher) -> Optional[str]:
    return dispatch(node["value"], replace(env, state={}, locals={}))


@check.handles("Def", "StateDef")
def _state_def(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    init = dispatch(node["init"], replace(env, state={}, locals={}))
    _expect(env, init, node["type"], f"initial value of '{node['name']}'", node)


@check.handles("Def", "ExplicitFn")
def _explicit_fn(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    scope = replace(env, state={}).with_locals(dict(params_of(node)))
    body = dispatch(node["body"], scope)
    _expect(env, body, node["resultType"], f"body of '{node['name']}'", node)
    _condition(node["pre"], scope, dispatch, "pre-condition")
    _condition(node["post"], scope.bind(RESULT=node["resultType"]), dispatch, "post-condition")


@check.handles("Def", "ImplicitFn")
def _implicit_fn(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    scope = replace(env, state={}).with_locals(dict(params_of(node)))
    _condition(node["pre"], scope, dispatch, "pre-condition")
    _condition(node["post"], scope.bind(**{node["result"]: node["resultType"]}), dispatch, "post-condition")


@check.handles("Def", "Operation")
def _operation(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    scope = env.with_locals(dict(params_of(node)))
    dispatch(node["body"], scope)
    _condition(node["pre"], scope, dispatch, "pre-condition")
    _condition(node["post"], scope, dispatch, "post-condition")


@check.handles("Def", "TraceDef", "Param")
def _nothing(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    return None


@check.handles("Def", "Module")
def _module(node: Node, env: TypeEnv, dispatch: Dispatcher) -> None:
    seen: Dict[str, Node] = {}
    for definition in node["defs"]:
        name = definition["name"]
        if name in seen:
            env.report(f"duplicate definition of '{name}'", definition)
        else:
            seen[name] = definition
    # values are typed in order first, so every later definition sees all of them
    values: Dict[str, str] = {}
    for definition in node["defs"]:
        if definition.alternative == "ValueDef":
            found = dispatch(definition, replace(env, values=dict(values)))
            if found is not None:
                values[definition["name"]] = found
    scope = replace(env, values=values)
    for definition in node["defs"]:
        if definition.alternative != "ValueDef":
            dispatch(definition, scope)


def signatures(module: BaseModule) -> Dict[str, Signature]:
    table: Dict[str, Signature] = {}
    for fn in module.function_defs:
        table.setdefault(fn["name"], (tuple(t for _, t in params_of(fn)), fn["resultType"]))
    return table


def module_env(module: BaseModule, diagnostics: Optional[List[Diagnostic]] = None) -> TypeEnv:
    """Environment of a module's functions, values and state, for standalone expressions."""
    env = TypeEnv(
        functions=signatures(module),
        state=module.state_types,
        diagnostics=diagnostics if diagnostics is not None else [],
    )
    values: Dict[str, str] = {}
    scratch = replace(env, diagnostics=[])
    dispatcher = base_dispatcher()
    for definition in module.value_defs:
        found = dispatcher(definition["value"], replace(scratch, values=values, state={}))
        if found is not None:
            values[definition["name"]] = found
    return replace(env, values=values)


def base_dispatcher(record: bool = False) -> Dispatcher:
    return Dispatcher(record=record).register(BASE_TREE, BASE_TYPECHECK)


def type_check(module: BaseModule, dispatcher: Optional[Dispatcher] = None) -> List[Diagnostic]:
    """
    Type check a whole module.

    :return: Diagnostics in source order; empty when the module is well-typed.
    """
    dispatcher = dispatcher or base_dispatcher()
    env = TypeEnv(functions=signatures(module), state=module.state_types)
    dispatcher(module.root, env)
    logger.debug("type check of %s: %d diagnostic(s)", module.name, len(env.diagnostics))
    return sorted(env.diagnostics, key=lambda d: (d.span.line, d.span.column) if d.span else (0, 0))


def type_of(exp: Node, env: Optional[TypeEnv] = None, dispatcher: Optional[Dispatcher] = None) -> Optional[str]:
    """Type of a standalone expression; problems land in ``env.diagnostics``."""
    env = env if env is not None else TypeEnv()
    return (dispatcher or base_dispatcher())(exp, env)
