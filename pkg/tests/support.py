"""
Test-only oracles: an IR evaluator, a monolithic water-tank simulation and
a few brute-force enumerators the suite compares the real code against.
"""

import itertools
import random
from typing import Dict, FrozenSet, List, Mapping, Sequence, Set, Tuple

from treeforge.modules.baselang import base_schema
from treeforge.modules.extlang import proc_schema
from treeforge.modules.interpreter import binary_value, unary_value
from treeforge.modules.irgen import functions_of
from treeforge.modules.treekit import Node, make_node


# IR evaluation


def eval_ir(exp: Node, env: Mapping[str, object], functions: Mapping[str, Node]):
    alt = exp.alternative
    if alt == "Const":
        return exp["value"]
    if alt == "VarRef":
        return env[exp["name"]]
    if alt == "UnOp":
        return unary_value(exp["op"], eval_ir(exp["operand"], env, functions))
    if alt == "BinOp":
        op = exp["op"]
        left = eval_ir(exp["left"], env, functions)
        if op == "and" and not left:
            return False
        if op == "or" and left:
            return True
        return binary_value(op, left, eval_ir(exp["right"], env, functions))
    if alt == "If":
        branch = "then" if eval_ir(exp["cond"], env, functions) else "orelse"
        return eval_ir(exp[branch], env, functions)
    if alt == "Let":
        bound = eval_ir(exp["bound"], env, functions)
        return eval_ir(exp["body"], {**env, exp["name"]: bound}, functions)
    if alt == "Call":
        args = [eval_ir(arg, env, functions) for arg in exp["args"]]
        return call_ir(functions[exp["fn"]], args, functions)
    raise AssertionError(f"unexpected IR node {alt}")


def call_ir(fn: Node, args: Sequence[object], functions: Mapping[str, Node]):
    env = {p["name"]: value for p, value in zip(fn["params"], args)}
    return eval_ir(fn["body"], env, functions)


def run_ir(ir: Node, name: str, args: Sequence[object]):
    functions = {fn["name"]: fn for fn in functions_of(ir)}
    return call_ir(functions[name], list(args), functions)


def outcome(thunk):
    """A call's value, or the class name of the treeforge error it raised."""
    try:
        return ("value", thunk())
    except Exception as exc:  # noqa: BLE001
        return ("error", getattr(exc, "kind", type(exc).__name__))


# call graphs


def reachable(graph: Mapping[str, Sequence[str]], start: str) -> Set[str]:
    seen: Set[str] = set()
    stack = list(graph.get(start, ()))
    while stack:
        node = stack.pop()
        if node in seen or node not in graph:
            continue
        seen.add(node)
        stack.extend(graph[node])
    return seen


def mutual_groups(graph: Mapping[str, Sequence[str]]) -> Set[FrozenSet[str]]:
    """Maximal sets of two or more functions that all reach each other."""
    reach = {name: reachable(graph, name) for name in graph}
    groups: Set[FrozenSet[str]] = set()
    for name in graph:
        members = {name} | {other for other in reach[name] if name in reach[other]}
        if len(members) > 1:
            groups.add(frozenset(members))
    return groups


def random_call_graph(rng: random.Random, size: int) -> Dict[str, List[str]]:
    names = [f"f{i}" for i in range(size)]
    return {name: sorted(set(rng.sample(names, rng.randint(0, min(3, size))))) for name in names}


def call_graph_source(graph: Mapping[str, Sequence[str]]) -> str:
    lines = ["module Graph", "functions"]
    for name, callees in graph.items():
        body = " + ".join(f"{callee}(x - 1)" for callee in callees) or "x"
        lines.append(f"  {name}: int -> int")
        lines.append(f"  {name}(x) == if x <= 0 then 0 else {body}")
    return "\n".join(lines) + "\n"


# trace expressions


def brute_force_sequences(expr) -> List[Tuple]:
    """Independent enumerator for trace expressions built from the ctengine types."""
    from treeforge.modules.ctengine import Alt, Call, Repeat, Seq

    if isinstance(expr, Call):
        return [((expr.op, expr.args),)]
    if isinstance(expr, Alt):
        result = []
        for item in expr.items:
            result += brute_force_sequences(item)
        return result
    if isinstance(expr, Seq):
        result = [()]
        for item in expr.items:
            result = [done + more for done in result for more in brute_force_sequences(item)]
        return result
    inner = brute_force_sequences(expr.inner)
    result = []
    for k in range(expr.lo, expr.hi + 1):
        for combo in itertools.product(inner, repeat=k):
            result.append(tuple(step for part in combo for step in part))
    return result


def random_trace_text(rng: random.Random, operators: int) -> str:
    """A trace expression with exactly ``operators`` combinators over calls a() .. d()."""
    if operators == 0:
        return f"{rng.choice('abcd')}()"
    kind = rng.choice(("seq", "alt", "rep"))
    if kind == "rep":
        lo = rng.randint(0, 3)
        hi = rng.randint(lo, 3)
        return f"({random_trace_text(rng, operators - 1)}){{{lo},{hi}}}"
    split = rng.randint(0, operators - 1)
    left = random_trace_text(rng, split)
    right = random_trace_text(rng, operators - 1 - split)
    return f"({left} {';' if kind == 'seq' else '|'} {right})"


# water tank


def hysteresis(level: float, open_: int) -> int:
    if level >= 3.0:
        return 1
    if level <= 2.0:
        return 0
    return open_


def monolithic_watertank(
    steps: int, sync: float = 0.1, period: float = 0.1, h: float = 0.1, level: float = 2.5
) -> List[Tuple[float, float, int]]:
    """
    Single loop interleaving controller and Euler integration. Rows are
    (time, level, valve) after each sync step, starting with time 0.
    """
    valve = open_ = 0
    rows = [(0.0, level, valve)]
    substeps = max(1, round(sync / h))
    dt = sync / substeps
    invocation = 1
    for k in range(steps):
        seen = level
        while invocation * period <= (k + 1) * sync + 1e-9:
            open_ = hysteresis(seen, open_)
            valve = open_
            invocation += 1
        for _ in range(substeps):
            level = level + dt * (0.5 - (1.0 if valve == 1 else 0.0))
        rows.append(((k + 1) * sync, level, valve))
    return rows


# random trees


def random_int_exp(rng: random.Random, depth: int) -> Node:
    schema = base_schema()
    if depth == 0 or rng.random() < 0.3:
        return make_node(schema, "Exp", "IntLit", value=rng.randint(-5, 9))
    if rng.random() < 0.2:
        return make_node(schema, "Exp", "Unary", op="-", operand=random_int_exp(rng, depth - 1))
    return make_node(
        schema,
        "Exp",
        "Binary",
        op=rng.choice("+-*"),
        left=random_int_exp(rng, depth - 1),
        right=random_int_exp(rng, depth - 1),
    )


def random_bool_exp(rng: random.Random, depth: int) -> Node:
    schema = base_schema()
    roll = rng.random()
    if depth == 0 or roll < 0.2:
        return make_node(schema, "Exp", "BoolLit", value=rng.random() < 0.5)
    if roll < 0.6:
        return make_node(
            schema,
            "Exp",
            "Binary",
            op=rng.choice(("<", "<=", "=", "<>")),
            left=random_int_exp(rng, depth - 1),
            right=random_int_exp(rng, depth - 1),
        )
    if roll < 0.8:
        return make_node(schema, "Exp", "Unary", op="not", operand=random_bool_exp(rng, depth - 1))
    return make_node(
        schema,
        "Exp",
        "Binary",
        op=rng.choice(("and", "or")),
        left=random_bool_exp(rng, depth - 1),
        right=random_bool_exp(rng, depth - 1),
    )


def random_proc(rng: random.Random, depth: int) -> Node:
    schema = proc_schema()
    roll = rng.random()
    if depth == 0 or roll < 0.15:
        return make_node(schema, "Proc", rng.choice(("Stop", "Skip")))
    if roll < 0.4:
        return make_node(schema, "Proc", "Prefix", event=rng.choice("abc"), cont=random_proc(rng, depth - 1))
    if roll < 0.6:
        return make_node(
            schema, "Proc", "Guard", cond=random_bool_exp(rng, 3), body=random_proc(rng, depth - 1)
        )
    left, right = random_proc(rng, depth - 1), random_proc(rng, depth - 1)
    if roll < 0.8:
        return make_node(schema, "Proc", "ExtChoice", left=left, right=right)
    return make_node(schema, "Proc", "Seq", first=left, second=right)
