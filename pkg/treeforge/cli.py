import re
import typer

from collections import Counter
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from treeforge.__version__ import __version__
from treeforge import BUNDLED_SPECS, DEFAULT_SEED, MAX_REPEAT, MAX_TESTS, SOLVER_BOUNDS, TIME_EPSILON
from .modules.astspec import Schema, bundled_schema, compile_spec, describe_schema
from .modules.baselang import BaseModule, format_value, parse_module
from .modules.ctengine import (
    VerdictKind,
    check_trace,
    execute,
    expand,
    reduce,
    render_report,
    render_tests,
    rerun,
    trace_of,
)
from .modules.cosim import (
    DeSession,
    cosimulate,
    export_access_log,
    parse_scenario,
    render_timeline,
)
from .modules.errors import ConfigError, TreeforgeError
from .modules.extlang import ProcModule, enumerate_traces, gen_pos_ext, parse_procl, type_check_ext
from .modules.helpers import (
    add_rows_to_table,
    console,
    create_table,
    emit_diagnostics,
    feedback_message,
    setup_logging,
)
from .modules.interpreter import Mode, evaluate
from .modules.irgen import emit_pseudo, run_pipeline, translate
from .modules.pog import gen_pos
from .modules.treekit import Diagnostic
from .modules.typecheck import type_check
from .modules.utils import parse_bounds, parse_factor, read_source, split_names

from rich.traceback import install

install()

"""
====================================================================
treeforge - Extensible ASTs and Analyses for Small Formal Notations
====================================================================

Compiles tree specification files into schemas, parses the Base-L and
Proc-L demo notations into hybrid trees, and runs extension-aware analyses
over them: type checking, evaluation (with a bounded solver for implicit
functions), proof obligations, combinatorial testing, code generation and
co-simulation.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success,
1 findings (diagnostics, failed tests, runtime errors), 2 usage or IO errors.

Examples:

$ treeforge spec check ext.ast --extends base_l
$ treeforge check demo.bl
$ treeforge eval demo.bl --call "isqrt(10)" --solve
$ treeforge po demo.bl
$ treeforge ct run counter.bl --trace T1 --reduce 0.5 --seed 7
$ treeforge traces shop.pl --process Buy --depth 3
$ treeforge codegen demo.bl --passes fold,group --emit pseudo
$ treeforge cosim watertank.cosim --access-log
$ treeforge about version

"""

__version__ = __version__

__all__ = ["treeforge_cli"]

treeforge_cli = typer.Typer(no_args_is_help=True)
spec_group = typer.Typer()
ct_group = typer.Typer()
about_group = typer.Typer()

treeforge_cli.add_typer(
    spec_group,
    name="spec",
    help="Work with tree specification files.",
    no_args_is_help=True,
)

treeforge_cli.add_typer(
    ct_group,
    name="ct",
    help="Combinatorial testing from trace definitions.",
    no_args_is_help=True,
)

treeforge_cli.add_typer(
    about_group,
    name="about",
    help="Details about treeforge.",
    no_args_is_help=True,
)

_PROCESSES = re.compile(r"^\s*process(es)?\b", re.MULTILINE)


@treeforge_cli.callback()
def main_callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log pipeline events to stderr"),
):
    setup_logging(verbose)


@contextmanager
def reporting(filename: str) -> Iterator[None]:
    """Map treeforge errors to exit codes: ConfigError is 2, everything else 1."""
    try:
        yield
    except ConfigError as exc:
        feedback_message(str(exc), "error")
        raise typer.Exit(code=2)
    except TreeforgeError as exc:
        typer.echo(Diagnostic(exc.message, exc.span, exc.kind).render(filename), err=True)
        raise typer.Exit(code=1)


def _fail_on(diagnostics, filename: str) -> None:
    if emit_diagnostics(diagnostics, filename):
        raise typer.Exit(code=1)


def _write(text: str, output: Optional[Path]) -> None:
    if output is None:
        typer.echo(text, nl=False)
        return
    try:
        output.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {output}: {exc}")


def load_module(path: Path) -> Union[BaseModule, ProcModule]:
    text = read_source(path)
    if _PROCESSES.search(text):
        return parse_procl(text)
    return parse_module(text)


def load_checked_base(path: Path) -> BaseModule:
    module = load_module(path)
    if isinstance(module, ProcModule):
        module = module.base
    _fail_on(type_check(module), str(path))
    return module


def _base_schema(extends: str) -> Schema:
    if extends in BUNDLED_SPECS:
        return bundled_schema(extends)
    return compile_spec(read_source(Path(extends)))


@spec_group.command("check", help="Compile a tree specification and list its alternatives.")
def spec_check_command(
    file: Path = typer.Argument(..., help="The .ast specification file"),
    extends: Optional[str] = typer.Option(
        None, "--extends", "-e", help="Base schema: a bundled name (base_l, proc_l, ir) or a file"
    ),
):
    """
    Compile a tree specification and list its alternatives.
    :param file: The specification file.
    :param extends: The base schema for extension specifications.
    """
    with reporting(str(file)):
        text = read_source(file)
        base = _base_schema(extends) if extends else None
        schema = compile_spec(text, base)
        lines = [f"tree {schema.tree_id}" + (f" extends {schema.base_tree_id}" if schema.base_tree_id else "")]
        lines += ["\t".join(row) for row in describe_schema(schema)]
        typer.echo("\n".join(lines))


@treeforge_cli.command("check", help="Type check a Base-L or Proc-L module.")
def check_command(
    file: Path = typer.Argument(..., help="The module source"),
):
    """
    Type check a module; Proc-L is recognised by its process definitions.
    :param file: The module source.
    """
    with reporting(str(file)):
        module = load_module(file)
        if isinstance(module, ProcModule):
            diagnostics = type_check_ext(module)
        else:
            diagnostics = type_check(module)
        _fail_on(diagnostics, str(file))
        typer.echo(f"{module.name}: ok")


@treeforge_cli.command("eval", help="Evaluate a function call against a module.")
def eval_command(
    file: Path = typer.Argument(..., help="The module source"),
    call: str = typer.Option(..., "--call", "-c", help='The call to evaluate, e.g. "f(3)"'),
    solve: bool = typer.Option(False, "--solve", "-s", help="Answer implicit functions with the bounded solver"),
    bounds: Optional[str] = typer.Option(None, "--bounds", "-b", help="Solver bounds as lo,hi"),
):
    """
    Evaluate a function call against a module.
    :param file: The module source.
    :param call: The call text.
    :param solve: Use the bounded solver for implicit functions.
    :param bounds: Solver bounds, defaulting to TREEFORGE_SOLVER_LO/HI.
    """
    with reporting(str(file)):
        solver_bounds = parse_bounds(bounds) if bounds else SOLVER_BOUNDS
        module = load_checked_base(file)
        mode = Mode.SOLVE if solve else Mode.STRICT
        typer.echo(format_value(evaluate(module, call, mode, solver_bounds)))


@treeforge_cli.command("po", help="List the proof obligations of a module.")
def po_command(
    file: Path = typer.Argument(..., help="The module source"),
):
    """
    List the proof obligations of a module.
    :param file: The module source.
    """
    with reporting(str(file)):
        module = load_module(file)
        if isinstance(module, ProcModule):
            _fail_on(type_check_ext(module), str(file))
            obligations = gen_pos_ext(module)
        else:
            _fail_on(type_check(module), str(file))
            obligations = gen_pos(module)
        for ob in obligations:
            typer.echo(f"{ob.span or '?:?'}\t{ob.kind.value}\t{ob.owner}\t{ob.render()}")


def _ct_tests(file: Path, trace: str, factor: Optional[float], seed: int):
    module = load_checked_base(file)
    expr = trace_of(module, trace, MAX_REPEAT)
    _fail_on(check_trace(expr, module), str(file))
    tests = expand(expr, MAX_TESTS)
    if factor is not None:
        tests = reduce(tests, parse_factor(factor), seed)
    return module, tests


@ct_group.command("expand", help="Expand a trace definition into test cases.")
def ct_expand_command(
    file: Path = typer.Argument(..., help="The module source"),
    trace: str = typer.Option(..., "--trace", "-t", help="The trace definition name"),
    factor: Optional[float] = typer.Option(None, "--reduce", "-r", help="Keep this fraction of tests, in (0, 1]"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", help="Seed for --reduce"),
):
    """
    Expand a trace definition into test cases.
    :param file: The module source.
    :param trace: The trace name.
    :param factor: Reduction factor.
    :param seed: Reduction seed.
    """
    with reporting(str(file)):
        _, tests = _ct_tests(file, trace, factor, seed)
        typer.echo(render_tests(tests), nl=False)


@ct_group.command("run", help="Expand a trace definition and execute every test.")
def ct_run_command(
    file: Path = typer.Argument(..., help="The module source"),
    trace: str = typer.Option(..., "--trace", "-t", help="The trace definition name"),
    factor: Optional[float] = typer.Option(None, "--reduce", "-r", help="Keep this fraction of tests, in (0, 1]"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", help="Seed for --reduce"),
    index: Optional[int] = typer.Option(None, "--index", "-i", help="Re-run only the test with this index"),
):
    """
    Expand a trace definition and execute the tests.
    :param file: The module source.
    :param trace: The trace name.
    :param factor: Reduction factor.
    :param seed: Reduction seed.
    :param index: Run a single test by its expansion index.
    """
    with reporting(str(file)):
        module, tests = _ct_tests(file, trace, factor, seed)
        results = [rerun(tests, index, module)] if index is not None else execute(tests, module)
        typer.echo(render_report(results), nl=False)
        tally = Counter(verdict.kind for _, verdict in results)
        summary = create_table(f"{trace}: {len(results)} test(s)", [("Verdict", "cyan"), ("Tests", "white")])
        add_rows_to_table(summary, [(kind.value, tally[kind]) for kind in VerdictKind])
        console.print(summary)
        if any(verdict.kind is VerdictKind.FAILED for _, verdict in results):
            raise typer.Exit(code=1)


@treeforge_cli.command("traces", help="Enumerate the event traces of a Proc-L process.")
def traces_command(
    file: Path = typer.Argument(..., help="The Proc-L source"),
    process: str = typer.Option(..., "--process", "-p", help="The process name"),
    depth: int = typer.Option(3, "--depth", "-d", help="Maximum trace length"),
):
    """
    Enumerate the event traces of a Proc-L process.
    :param file: The Proc-L source.
    :param process: The process name.
    :param depth: Maximum trace length.
    """
    with reporting(str(file)):
        if depth < 0:
            raise ConfigError(f"--depth must be nonnegative, got {depth}")
        module = parse_procl(read_source(file))
        _fail_on(type_check_ext(module), str(file))
        for trace in enumerate_traces(module, process, depth):
            typer.echo(f"<{', '.join(trace)}>")


@treeforge_cli.command("codegen", help="Translate a module to IR, run passes and emit code.")
def codegen_command(
    file: Path = typer.Argument(..., help="The module source"),
    passes: str = typer.Option("fold,group", "--passes", help="Comma-separated passes to run, in order"),
    emit: str = typer.Option("pseudo", "--emit", help="Backend to emit with"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write to this file instead of stdout"),
):
    """
    Translate a module to IR, run passes and emit code.
    :param file: The module source.
    :param passes: Pass names.
    :param emit: Backend name; only ``pseudo`` is available.
    :param output: Output file.
    """
    with reporting(str(file)):
        if emit != "pseudo":
            raise ConfigError(f"unknown backend '{emit}' (available: pseudo)")
        names = split_names(passes)
        module = load_checked_base(file)
        ir = run_pipeline(translate(module), names)
        _write(emit_pseudo(ir), output)


@treeforge_cli.command("cosim", help="Run a co-simulation scenario and print its timeline.")
def cosim_command(
    file: Path = typer.Argument(..., help="The scenario source"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write the timeline to this file"),
    access_log: bool = typer.Option(False, "--access-log", "-a", help="Also print the shared-variable access log"),
):
    """
    Run a co-simulation scenario.
    :param file: The scenario source.
    :param output: Timeline output file.
    :param access_log: Print the access log after the timeline.
    """
    with reporting(str(file)):
        scenario = parse_scenario(read_source(file))
        _fail_on(type_check(scenario.module), str(file))
        session = DeSession.start(scenario.module, scenario.config.agenda, TIME_EPSILON)
        timeline = cosimulate(scenario.module, scenario.config, session, TIME_EPSILON)
        _write(render_timeline(timeline), output)
        if access_log:
            typer.echo(export_access_log(session), nl=False)


@about_group.command("version", help="Current version of the CLI.")
def version_command():
    """
    Current version of the CLI.
    """
    typer.echo(__version__)
