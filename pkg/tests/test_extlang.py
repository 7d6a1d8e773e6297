import random
import pytest

from treeforge.modules.baselang import parse_expression, parse_module, render_exp
from treeforge.modules.errors import (
    ArgumentError,
    DuplicateNameError,
    GuardEvaluationError,
    ParseError,
    UnboundNameError,
)
from treeforge.modules.extlang import (
    EXT_TYPECHECK,
    ProcModule,
    enumerate_traces,
    ext_dispatcher,
    gen_pos_ext,
    parse_procl,
    pos_for_exp,
    type_check_ext,
    type_of_exp,
)
from treeforge.modules.interpreter import evaluate_expression
from treeforge.modules.pog import gen_pos
from treeforge.modules.treekit import traverse
from treeforge.modules.typecheck import BASE_TYPECHECK
from support import random_proc


def oracle_traces(proc, depth, module=None):
    """(traces, terminated traces) of a process, straight from the process algebra."""
    alt = proc.alternative
    if alt == "Stop":
        return {()}, set()
    if alt == "Skip":
        return {()}, {()}
    if alt == "Prefix":
        if depth == 0:
            return {()}, set()
        traces, done = oracle_traces(proc["cont"], depth - 1, module)
        event = (proc["event"],)
        return {()} | {event + t for t in traces}, {event + t for t in done}
    if alt == "ExtChoice":
        left, left_done = oracle_traces(proc["left"], depth, module)
        right, right_done = oracle_traces(proc["right"], depth, module)
        return left | right, left_done | right_done
    if alt == "Guard":
        if evaluate_expression(proc["cond"], module):
            return oracle_traces(proc["body"], depth, module)
        return {()}, set()
    first, first_done = oracle_traces(proc["first"], depth, module)
    traces, done = set(first), set()
    for t in first_done:
        rest, rest_done = oracle_traces(proc["second"], depth - len(t), module)
        traces |= {t + u for u in rest}
        done |= {t + u for u in rest_done}
    return traces, done


def single_process(body) -> ProcModule:
    return ProcModule(parse_module("module R\n"), (("P", body),))


# parsing


def test_shop_processes(shop):
    assert shop.name == "Shop"
    assert shop.process_names == ("Choice", "Ordered", "Blocked", "Closed", "Buy", "Loop", "Split")
    assert shop.process("Choice").alternative == "ExtChoice"
    assert shop.process("Ordered").alternative == "Seq"
    assert shop.process("Ordered")["first"].alternative == "Guard"
    assert shop.base.function("affordable") is not None


def test_processes_header_may_be_omitted():
    module = parse_procl("process P = a -> Stop\nprocess Q = Skip\n")
    assert module.process_names == ("P", "Q")
    assert module.name == "Main"


def test_guard_holds_a_base_expression(shop):
    guard = shop.process("Closed")
    assert guard["cond"].origin == "BaseL"
    assert guard["body"].origin == "ProcL"


def test_unknown_process(shop):
    with pytest.raises(UnboundNameError):
        shop.process("Nope")


def test_duplicate_process():
    with pytest.raises(DuplicateNameError):
        parse_procl("processes\n  process P = Stop\n  process P = Skip\n")


@pytest.mark.parametrize(
    "text",
    [
        "processes\n  process P = a ->\n",
        "processes\n  process P = [true] a -> Stop\n",
        "processes\n  process P = (a -> Stop\n",
    ],
)
def test_process_syntax_errors(text):
    with pytest.raises(ParseError):
        parse_procl(text)


# type checking


def test_shop_is_well_typed(shop, guards):
    assert type_check_ext(shop) == []
    assert type_check_ext(guards) == []


def test_guard_must_be_boolean():
    diagnostics = type_check_ext(parse_procl("processes\n  process P = [1 + 1] & a -> Stop\n"))
    assert len(diagnostics) == 1
    assert diagnostics[0].message == "guard must be bool, found int"


def test_guards_cannot_read_state():
    module = parse_procl("state\n  x : int := 0\nprocesses\n  process P = [x > 0] & a -> Stop\n")
    diagnostics = type_check_ext(module)
    assert len(diagnostics) == 1
    assert "x" in diagnostics[0].message


def test_base_errors_are_reported_too():
    module = parse_procl("functions\n  g: int -> int\n  g(n) == n + true\nprocesses\n  process P = Stop\n")
    assert len(type_check_ext(module)) == 1


def test_type_of_guard_expression(shop):
    assert type_of_exp(parse_expression("affordable(price, budget)"), shop) == "bool"
    assert type_of_exp(parse_expression("budget div price"), shop) == "int"


def test_guard_heavy_module_is_mostly_base_dispatch(guards):
    dispatcher = ext_dispatcher(BASE_TYPECHECK, EXT_TYPECHECK)
    type_check_ext(guards, dispatcher)
    assert dispatcher.share("BaseL") >= 0.9
    proc_nodes = sum(
        1 for _, body in guards.processes for node in traverse(body) if node.origin == "ProcL"
    )
    assert dispatcher.counters["ProcL"] == proc_nodes


# traces


@pytest.mark.parametrize(
    "process, depth, expected",
    [
        ("Choice", 2, [(), ("a",), ("b",)]),
        ("Ordered", 2, [(), ("a",), ("a", "b")]),
        ("Ordered", 1, [(), ("a",)]),
        ("Blocked", 3, [(), ("a",)]),
        ("Closed", 3, [()]),
        ("Buy", 2, [(), ("pay",), ("pay", "take")]),
        ("Loop", 3, [(), ("tick",), ("tick", "halt"), ("tick", "tock"), ("tick", "tock", "tick")]),
        ("Split", 1, [(), ("a",), ("b",)]),
        ("Choice", 0, [()]),
    ],
)
def test_enumerate_traces(shop, process, depth, expected):
    assert enumerate_traces(shop, process, depth) == expected


def test_negative_depth(shop):
    with pytest.raises(ArgumentError):
        enumerate_traces(shop, "Choice", -1)


def test_guard_evaluation_error():
    module = parse_procl("processes\n  process P = [1 div 0 > 0] & a -> Stop\n")
    assert enumerate_traces(module, "P", 0) == [()]
    with pytest.raises(GuardEvaluationError) as info:
        enumerate_traces(module, "P", 1)
    assert "'P'" in info.value.message


def test_traces_are_prefix_closed_and_grow_with_depth(shop):
    for name in shop.process_names:
        previous = set()
        for depth in range(4):
            traces = set(enumerate_traces(shop, name, depth))
            assert all(t[:k] in traces for t in traces for k in range(len(t)))
            assert previous <= traces
            assert {t for t in traces if len(t) < depth} == {t for t in previous if len(t) < depth}
            previous = traces


def test_traces_match_the_process_algebra():
    rng = random.Random(7)
    for _ in range(150):
        body = random_proc(rng, 5)
        module = single_process(body)
        expected, _ = oracle_traces(body, 4, module.base)
        assert enumerate_traces(module, "P", 4) == sorted(expected)


# proof obligations


def test_guard_obligations(shop):
    obligations = gen_pos_ext(shop)
    base = gen_pos(shop.base)
    assert obligations[: len(base)] == base
    split = [o for o in obligations if o.owner == "Split"]
    assert [o.render() for o in split] == ["stock <> 0", "price <> 0"]


def test_guard_obligations_match_the_base_generator(shop):
    extended = [o for o in gen_pos_ext(shop) if o.owner in shop.process_names]
    direct = []
    for name, body in shop.processes:
        for node in traverse(body):
            if node.alternative == "Guard":
                direct.extend(pos_for_exp(node["cond"], name))
    assert [(o.owner, o.render(), o.span) for o in extended] == [(o.owner, o.render(), o.span) for o in direct]


def test_obligation_free_process_module(guards):
    assert gen_pos_ext(guards) == []
    assert render_exp(guards.process("Tick")["cond"]).endswith("> 0")
