"""
Base-L interpreter, written as an analysis over the BaseL tree.

Explicit functions run their body. Implicit functions have no body: in
strict mode calling one is a runtime error, in solve mode the call is
answered by a bounded search for the smallest result satisfying the
post-condition.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from treeforge import BASE_TREE, SOLVER_BOUNDS
from .baselang import BaseModule, Value, format_value, is_implicit, params_of, parse_expression, value_type
from .errors import (
    ArgumentError,
    DivisionByZeroError,
    ImplicitEvaluationError,
    IntegerOverflow,
    NoSolutionInBoundsError,
    PostconditionFailure,
    PreconditionFailure,
    UnboundNameError,
)
from .treekit import Analysis, Dispatcher, Node
from .typecheck import module_env, type_of

__all__ = [
    "Mode",
    "StateStore",
    "EvalContext",
    "BASE_INTERPRETER",
    "INT_MIN",
    "INT_MAX",
    "binary_value",
    "unary_value",
    "evaluate",
    "evaluate_expression",
    "call_function",
    "solve_implicit",
    "exec_operation",
    "module_values",
    "initial_state",
    "interpreter_dispatcher",
]

logger = logging.getLogger(__name__)

AccessHook = Callable[[str, str, Value], None]


class Mode(str, Enum):
    STRICT = "strict"
    SOLVE = "solve"


class StateStore:
    """
    Mutable state of one operation run. Every read and write of a shared
    variable is reported to ``on_access`` as (name, "read"|"write", value).
    """

    def __init__(
        self,
        values: Mapping[str, Value],
        shared: Iterable[str] = (),
        on_access: Optional[AccessHook] = None,
    ):
        self._values: Dict[str, Value] = dict(values)
        self.shared = frozenset(shared)
        self.on_access = on_access

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def read(self, name: str) -> Value:
        value = self._values[name]
        if self.on_access is not None and name in self.shared:
            self.on_access(name, "read", value)
        return value

    def write(self, name: str, value: Value) -> None:
        if name not in self._values:
            raise UnboundNameError(f"'{name}' is not a state variable")
        self._values[name] = value
        if self.on_access is not None and name in self.shared:
            self.on_access(name, "write", value)

    def snapshot(self) -> Dict[str, Value]:
        return dict(self._values)


@dataclass(frozen=True)
class EvalContext:
    functions: Mapping[str, Node] = field(default_factory=dict)
    globals: Mapping[str, Value] = field(default_factory=dict)
    locals: Mapping[str, Value] = field(default_factory=dict)
    store: Optional[StateStore] = None
    mode: Mode = Mode.STRICT
    bounds: Tuple[int, int] = SOLVER_BOUNDS

    @classmethod
    def for_module(
        cls,
        module: Optional[BaseModule],
        mode: Union[Mode, str] = Mode.STRICT,
        bounds: Tuple[int, int] = SOLVER_BOUNDS,
        dispatcher: Optional[Dispatcher] = None,
    ) -> "EvalContext":
        functions = {fn["name"]: fn for fn in module.function_defs} if module else {}
        ctx = cls(functions=functions, mode=Mode(mode), bounds=bounds)
        if module is not None:
            ctx = replace(ctx, globals=module_values(module, ctx, dispatcher))
        return ctx

    def bind(self, **names: Value) -> "EvalContext":
        return replace(self, locals={**self.locals, **names})

    def function_scope(self, names: Mapping[str, Value]) -> "EvalContext":
        return replace(self, locals=dict(names), store=None)

    def lookup(self, name: str) -> Value:
        if name in self.locals:
            return self.locals[name]
        if self.store is not None and name in self.store:
            return self.store.read(name)
        if name in self.globals:
            return self.globals[name]
        raise UnboundNameError(f"unbound name '{name}'")


@dataclass(frozen=True)
class Returned:
    value: Value


BASE_INTERPRETER = Analysis(BASE_TREE, "base-interpreter")
interp = BASE_INTERPRETER


INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


def _in_range(value: Value, op: str) -> Value:
    if isinstance(value, int) and not isinstance(value, bool) and not INT_MIN <= value <= INT_MAX:
        raise IntegerOverflow(f"integer overflow in '{op}': {value} is outside the 64-bit range")
    return value


def _truncated_div(left: int, right: int) -> int:
    quotient = abs(left) // abs(right)
    return quotient if (left >= 0) == (right > 0) else -quotient


def unary_value(op: str, operand: Value) -> Value:
    """
    :raises IntegerOverflow: When negating the smallest 64-bit integer.
    """
    if op == "not":
        return not operand
    return _in_range(-operand, op)


def binary_value(op: str, left: Value, right: Value) -> Value:
    """
    Apply a strict binary operator. ``and``/``or`` are short-circuited by the
    interpreter and only reach here with both operands evaluated.

    :raises DivisionByZeroError: For ``/``, ``div`` or ``mod`` by zero.
    :raises IntegerOverflow: For an int result outside the 64-bit range.
    """
    if op in ("/", "div", "mod") and right == 0:
        raise DivisionByZeroError(f"division by zero in '{op}'")
    both_int = not isinstance(left, float) and not isinstance(right, float)
    if op == "+":
        return _in_range(left + right, op) if both_int else float(left) + float(right)
    if op == "-":
        return _in_range(left - right, op) if both_int else float(left) - float(right)
    if op == "*":
        return _in_range(left * right, op) if both_int else float(left) * float(right)
    if op == "/":
        return float(left) / float(right)
    if op == "div":
        return _in_range(_truncated_div(left, right), op)
    if op == "mod":
        return left % right
    if op == "=":
        return left == right
    if op == "<>":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    if op == "and":
        return left and right
    if op == "or":
        return left or right
    raise ValueError(f"unknown operator {op!r}")


@interp.handles("Exp", "IntLit", "RealLit", "BoolLit")
def _literal(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    return node["value"]


@interp.handles("Exp", "Var")
def _var(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    return ctx.lookup(node["name"])


@interp.handles("Exp", "Unary")
def _unary(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    return unary_value(node["op"], dispatch(node["operand"], ctx))


@interp.handles("Exp", "Binary")
def _binary(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    op = node["op"]
    left = dispatch(node["left"], ctx)
    if op == "and" and not left:
        return False
    if op == "or" and left:
        return True
    return binary_value(op, left, dispatch(node["right"], ctx))


@interp.handles("Exp", "If")
def _if(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    branch = "then" if dispatch(node["cond"], ctx) else "orelse"
    return dispatch(node[branch], ctx)


@interp.handles("Exp", "Let")
def _let(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    bound = dispatch(node["bound"], ctx)
    return dispatch(node["body"], ctx.bind(**{node["name"]: bound}))


@interp.handles("Exp", "Apply")
def _apply(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Value:
    fn = ctx.functions.get(node["fn"])
    if fn is None:
        raise UnboundNameError(f"unknown function '{node['fn']}'")
    args = [dispatch(arg, ctx) for arg in node["args"]]
    return apply_function(fn, args, ctx, dispatch)


def _call_text(name: str, args: Sequence[Value]) -> str:
    return f"{name}({', '.join(format_value(a) for a in args)})"


def _check_pre(fn: Node, scope: EvalContext, dispatch: Dispatcher, args: Sequence[Value]) -> None:
    if fn["pre"] is not None and not dispatch(fn["pre"], scope):
        raise PreconditionFailure(f"pre-condition of {_call_text(fn['name'], args)} does not hold")


def apply_function(fn: Node, args: Sequence[Value], ctx: EvalContext, dispatch: Dispatcher) -> Value:
    params = params_of(fn)
    if len(args) != len(params):
        raise ArgumentError(f"'{fn['name']}' expects {len(params)} argument(s), {len(args)} given")
    scope = ctx.function_scope({name: value for (name, _), value in zip(params, args)})
    _check_pre(fn, scope, dispatch, args)
    if is_implicit(fn):
        if ctx.mode is not Mode.SOLVE:
            raise ImplicitEvaluationError(
                f"'{fn['name']}' is defined implicitly and cannot be evaluated; use solve mode"
            )
        return _search(fn, scope, dispatch, args)
    result = dispatch(fn["body"], scope)
    if fn["post"] is not None and not dispatch(fn["post"], scope.bind(RESULT=result)):
        raise PostconditionFailure(
            f"post-condition of {_call_text(fn['name'], args)} does not hold for result {format_value(result)}"
        )
    return result


def _candidates(result_type: str, bounds: Tuple[int, int]) -> Iterable[Value]:
    if result_type == "int":
        lo, hi = bounds
        return range(lo, hi + 1)
    if result_type == "bool":
        return (False, True)
    raise ImplicitEvaluationError(f"solving for a {result_type} result is not supported")


def _search(fn: Node, scope: EvalContext, dispatch: Dispatcher, args: Sequence[Value]) -> Value:
    result = fn["result"]
    for candidate in _candidates(fn["resultType"], scope.bounds):
        try:
            holds = dispatch(fn["post"], scope.bind(**{result: candidate}))
        except DivisionByZeroError:
            continue
        if holds:
            logger.debug("solved %s = %s", _call_text(fn["name"], args), format_value(candidate))
            return candidate
    lo, hi = scope.bounds
    raise NoSolutionInBoundsError(lo, hi)


def solve_implicit(
    fn: Node,
    args: Sequence[Value],
    bounds: Tuple[int, int] = SOLVER_BOUNDS,
    module: Optional[BaseModule] = None,
) -> Value:
    """
    Smallest value in ``bounds`` that satisfies the post-condition of ``fn``.

    :param module: Supplies the values and functions the conditions may use.
    :raises PreconditionFailure: The pre-condition does not hold for ``args``.
    :raises NoSolutionInBoundsError: No candidate satisfies the post-condition.
    """
    dispatcher = interpreter_dispatcher()
    ctx = EvalContext.for_module(module, Mode.SOLVE, bounds, dispatcher)
    params = params_of(fn)
    if len(args) != len(params):
        raise ArgumentError(f"'{fn['name']}' expects {len(params)} argument(s), {len(args)} given")
    scope = ctx.function_scope({name: value for (name, _), value in zip(params, args)})
    _check_pre(fn, scope, dispatcher, args)
    return _search(fn, scope, dispatcher, args)


# statements


@interp.handles("Stmt", "Assign")
def _assign(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> None:
    value = dispatch(node["value"], ctx)
    if ctx.store is None:
        raise UnboundNameError(f"'{node['target']}' is not a state variable")
    ctx.store.write(node["target"], value)
    return None


@interp.handles("Stmt", "Block")
def _block(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Optional[Returned]:
    outcome = dispatch(node["first"], ctx)
    if outcome is not None:
        return outcome
    return dispatch(node["second"], ctx)


@interp.handles("Stmt", "IfStmt")
def _if_stmt(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Optional[Returned]:
    branch = "then" if dispatch(node["cond"], ctx) else "orelse"
    return dispatch(node[branch], ctx)


@interp.handles("Stmt", "Return")
def _return(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> Returned:
    return Returned(dispatch(node["value"], ctx))


@interp.handles("Stmt", "Skip")
def _skip(node: Node, ctx: EvalContext, dispatch: Dispatcher) -> None:
    return None


def interpreter_dispatcher(record: bool = False) -> Dispatcher:
    return Dispatcher(record=record).register(BASE_TREE, BASE_INTERPRETER)


def module_values(
    module: BaseModule, ctx: Optional[EvalContext] = None, dispatcher: Optional[Dispatcher] = None
) -> Dict[str, Value]:
    """Evaluate the ``values`` section in order; each value sees the earlier ones."""
    dispatcher = dispatcher or interpreter_dispatcher()
    ctx = ctx or EvalContext(functions={fn["name"]: fn for fn in module.function_defs})
    values: Dict[str, Value] = {}
    for definition in module.value_defs:
        values[definition["name"]] = dispatcher(definition["value"], replace(ctx, globals=values, locals={}))
    return values


def initial_state(module: BaseModule, mode: Union[Mode, str] = Mode.STRICT) -> Dict[str, Value]:
    dispatcher = interpreter_dispatcher()
    ctx = EvalContext.for_module(module, mode, dispatcher=dispatcher)
    return {s["name"]: dispatcher(s["init"], ctx) for s in module.state_defs}


def evaluate_expression(
    exp: Node,
    module: Optional[BaseModule] = None,
    mode: Union[Mode, str] = Mode.STRICT,
    bounds: Tuple[int, int] = SOLVER_BOUNDS,
    dispatcher: Optional[Dispatcher] = None,
    **names: Value,
) -> Value:
    """Evaluate an expression against a module's values and functions plus ``names``."""
    dispatcher = dispatcher or interpreter_dispatcher()
    ctx = EvalContext.for_module(module, mode, bounds, dispatcher)
    return dispatcher(exp, ctx.bind(**names))


def evaluate(
    module: BaseModule,
    call_text: str,
    mode: Union[Mode, str] = Mode.STRICT,
    bounds: Tuple[int, int] = SOLVER_BOUNDS,
) -> Value:
    """
    Evaluate a call such as ``isqrt(10)`` against ``module``.

    :raises ArgumentError: When the call does not type check against the module.
    :raises EvaluationError: For every runtime failure, see the subclasses.
    """
    exp = parse_expression(call_text)
    env = module_env(module)
    env = replace(env, state={})
    type_of(exp, env)
    if env.diagnostics:
        first = env.diagnostics[0]
        raise ArgumentError(first.message, first.span)
    return evaluate_expression(exp, module, mode, bounds)


def call_function(
    module: BaseModule,
    name: str,
    args: Sequence[Value],
    mode: Union[Mode, str] = Mode.STRICT,
    bounds: Tuple[int, int] = SOLVER_BOUNDS,
) -> Value:
    fn = module.function(name)
    if fn is None:
        raise UnboundNameError(f"unknown function '{name}'")
    dispatcher = interpreter_dispatcher()
    ctx = EvalContext.for_module(module, mode, bounds, dispatcher)
    return apply_function(fn, list(args), ctx, dispatcher)


def _check_arguments(op: Node, args: Sequence[Value]) -> None:
    params = params_of(op)
    if len(args) != len(params):
        raise ArgumentError(f"'{op['name']}' expects {len(params)} argument(s), {len(args)} given")
    for (name, wanted), value in zip(params, args):
        found = value_type(value)
        if found != wanted:
            raise ArgumentError(f"argument '{name}' of '{op['name']}' must be {wanted}, found {found}")


def exec_operation(
    module: BaseModule,
    state: Mapping[str, Value],
    op_name: str,
    args: Sequence[Value] = (),
    *,
    on_access: Optional[AccessHook] = None,
    mode: Union[Mode, str] = Mode.STRICT,
    bounds: Tuple[int, int] = SOLVER_BOUNDS,
) -> Tuple[Dict[str, Value], Optional[Value]]:
    """
    Run an operation over a copy of ``state``.

    :return: The new state and the returned value (None when nothing is returned).
    :raises PreconditionFailure: The operation's pre-condition does not hold.
    """
    op = module.operation(op_name)
    if op is None:
        raise UnboundNameError(f"unknown operation '{op_name}'")
    _check_arguments(op, args)
    dispatcher = interpreter_dispatcher()
    store = StateStore(state, module.shared_names, on_access)
    ctx = EvalContext.for_module(module, mode, bounds, dispatcher)
    ctx = replace(ctx, store=store, locals={name: v for (name, _), v in zip(params_of(op), args)})
    if op["pre"] is not None and not dispatcher(op["pre"], ctx):
        raise PreconditionFailure(f"pre-condition of {_call_text(op_name, args)} does not hold")
    outcome = dispatcher(op["body"], ctx)
    if op["post"] is not None and not dispatcher(op["post"], ctx):
        raise PostconditionFailure(f"post-condition of {_call_text(op_name, args)} does not hold")
    return store.snapshot(), (outcome.value if isinstance(outcome, Returned) else None)
