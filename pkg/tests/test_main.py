import pytest

from treeforge.__version__ import __version__
from treeforge.cli import treeforge_cli
from treeforge.modules.ctengine import expand, render_tests, trace_of
from treeforge.modules.irgen import emit_pseudo, run_pipeline, translate
from conftest import fixture_path


def run(runner, *args):
    return runner.invoke(treeforge_cli, [str(a) for a in args])


def lines(text):
    return text.splitlines()


@pytest.mark.parametrize(
    "command, exit_code, expected_output",
    [
        (["--help"], 0, "Usage"),
        (["about", "version"], 0, __version__),
        (["check", fixture_path("demo.bl")], 0, "Demo: ok"),
        (["check", fixture_path("shop.pl")], 0, "Shop: ok"),
        (["check", fixture_path("guards.pl")], 0, "Guards: ok"),
        (["-v", "check", fixture_path("recursion.bl")], 0, "Rec: ok"),
        (["eval", fixture_path("demo.bl"), "--call", "isqrt(10)", "--solve"], 0, "3"),
        (["eval", fixture_path("demo.bl"), "-c", "inv(4)"], 0, "2.5"),
        (["eval", fixture_path("demo.bl"), "-c", "isqrt(10)", "-s", "-b", "3,3"], 0, "3"),
        (["traces", fixture_path("shop.pl"), "-p", "Closed"], 0, "<>"),
    ],
)
def test_commands(runner, command, exit_code, expected_output):
    result = run(runner, *command)
    assert result.exit_code == exit_code
    assert expected_output in result.stdout


def test_invalid_command(runner):
    result = runner.invoke(treeforge_cli, ["frobnicate"])
    assert result.exit_code == 2


def test_type_errors_go_to_stderr(runner):
    path = fixture_path("broken.bl")
    result = run(runner, "check", path)
    assert result.exit_code == 1
    assert result.stdout == ""
    diagnostics = lines(result.stderr)
    assert len(diagnostics) == 1
    assert diagnostics[0].startswith(f"{path}:4:")
    assert "[typecheck] operator '+' expects numeric operands" in diagnostics[0]


def test_missing_file_is_a_usage_error(runner, tmp_path):
    result = run(runner, "check", tmp_path / "absent.bl")
    assert result.exit_code == 2
    assert result.stdout == ""


@pytest.mark.parametrize(
    "options, exit_code, fragment",
    [
        (["-c", "isqrt(10)"], 1, "[ImplicitEvaluationError]"),
        (["-c", "isqrt(10)", "-s", "-b", "4,10"], 1, "[NoSolutionInBounds]"),
        (["-c", "inv(0)"], 1, "[DivisionByZero]"),
        (["-c", "f(true)"], 1, "[ArgumentError]"),
        (["-c", "isqrt(10)", "-s", "-b", "10,4"], 2, ""),
    ],
)
def test_eval_failures(runner, options, exit_code, fragment):
    result = run(runner, "eval", fixture_path("demo.bl"), *options)
    assert result.exit_code == exit_code
    assert result.stdout == ""
    assert fragment in result.stderr


def test_eval_integer_overflow(runner, tmp_path):
    source = tmp_path / "big.bl"
    source.write_text("functions\n  big: int -> int\n  big(n) == 9223372036854775807 + n\n", encoding="utf-8")
    result = run(runner, "eval", source, "-c", "big(1)")
    assert result.exit_code == 1
    assert result.stdout == ""
    assert f"{source}:3:" in result.stderr
    assert "[IntegerOverflow]" in result.stderr
    assert run(runner, "eval", source, "-c", "big(0)").stdout.strip() == "9223372036854775807"


def test_eval_refuses_ill_typed_module(runner):
    result = run(runner, "eval", fixture_path("broken.bl"), "-c", "g(1)")
    assert result.exit_code == 1
    assert len(lines(result.stderr)) == 1


def test_po(runner):
    result = run(runner, "po", fixture_path("demo.bl"))
    assert result.exit_code == 0
    rows = [line.split("\t") for line in lines(result.stdout)]
    assert [(row[1], row[2]) for row in rows] == [
        ("DivByZero", "inv"),
        ("ImplicitSatisfiability", "isqrt"),
        ("ImplicitSatisfiability", "positive"),
        ("DivByZero", "setdiv"),
    ]
    assert rows[1][3] == "exists r : int & r * r <= n and (r + 1) * (r + 1) > n"


def test_po_on_processes(runner):
    result = run(runner, "po", fixture_path("shop.pl"))
    assert result.exit_code == 0
    assert [line.split("\t")[2:] for line in lines(result.stdout)] == [
        ["Split", "stock <> 0"],
        ["Split", "price <> 0"],
    ]


def test_ct_expand(runner, demo):
    result = run(runner, "ct", "expand", fixture_path("demo.bl"), "--trace", "Counter")
    assert result.exit_code == 0
    assert result.stdout == render_tests(expand(trace_of(demo, "Counter")))


def test_ct_expand_reduced(runner):
    args = ("ct", "expand", fixture_path("demo.bl"), "-t", "Wide", "-r", "0.1", "--seed", "7")
    first, second = run(runner, *args), run(runner, *args)
    assert first.exit_code == 0
    assert len(lines(first.stdout)) == 4
    assert first.stdout == second.stdout


def test_ct_run_reports_failures(runner):
    result = run(runner, "ct", "run", fixture_path("demo.bl"), "-t", "Mixed")
    assert result.exit_code == 1
    report = lines(result.stdout)
    assert len(report) == 6
    assert [line.split("\t")[1] for line in report] == [
        "PASSED",
        "PASSED",
        "FAILED",
        "FAILED",
        "PASSED",
        "PASSED",
    ]
    assert "Verdict" in result.stderr


@pytest.mark.parametrize(
    "trace, options, exit_code, rows",
    [
        ("Counter", [], 0, 3),
        ("Blocked", [], 0, 1),
        ("Mixed", ["-i", "4"], 0, 1),
        ("Mixed", ["-i", "2"], 1, 1),
    ],
)
def test_ct_run(runner, trace, options, exit_code, rows):
    result = run(runner, "ct", "run", fixture_path("demo.bl"), "-t", trace, *options)
    assert result.exit_code == exit_code
    assert len(lines(result.stdout)) == rows


@pytest.mark.parametrize(
    "options, exit_code",
    [
        (["-t", "Missing"], 1),
        (["-t", "Wide", "-r", "1.5"], 2),
        (["-t", "Mixed", "-i", "99"], 2),
        (["-t", "Mixed", "-r", "0.5", "-i", "99"], 2),
    ],
)
def test_ct_errors(runner, options, exit_code):
    result = run(runner, "ct", "run", fixture_path("demo.bl"), *options)
    assert result.exit_code == exit_code
    assert result.stdout == ""


def test_traces(runner):
    result = run(runner, "traces", fixture_path("shop.pl"), "--process", "Ordered", "--depth", "2")
    assert result.exit_code == 0
    assert result.stdout == "<>\n<a>\n<a, b>\n"


@pytest.mark.parametrize(
    "options, exit_code",
    [(["-p", "Ordered", "--depth=-1"], 2), (["-p", "Nope"], 1)],
)
def test_traces_errors(runner, options, exit_code):
    result = run(runner, "traces", fixture_path("shop.pl"), *options)
    assert result.exit_code == exit_code


def test_codegen(runner, recursion):
    result = run(runner, "codegen", fixture_path("recursion.bl"))
    assert result.exit_code == 0
    assert result.stdout == emit_pseudo(run_pipeline(translate(recursion)))
    assert "group {" in result.stdout


def test_codegen_to_file(runner, tmp_path):
    target = tmp_path / "rec.pseudo"
    result = run(runner, "codegen", fixture_path("recursion.bl"), "--passes", "fold", "-o", target)
    assert result.exit_code == 0
    assert result.stdout == ""
    text = target.read_text(encoding="utf-8")
    assert text.startswith("module Rec\n")
    assert "group" not in text


@pytest.mark.parametrize(
    "file, options, exit_code",
    [
        ("recursion.bl", ["--emit", "c"], 2),
        ("recursion.bl", ["--passes", "fold,inline"], 2),
        ("demo.bl", [], 1),
    ],
)
def test_codegen_errors(runner, file, options, exit_code):
    result = run(runner, "codegen", fixture_path(file), *options)
    assert result.exit_code == exit_code
    assert result.stdout == ""


def test_cosim(runner):
    result = run(runner, "cosim", fixture_path("watertank.cosim"))
    assert result.exit_code == 0
    timeline = lines(result.stdout)
    assert len(timeline) == 202
    assert timeline[0] == "t\tlevel\tshared:level\tshared:valve\tevents"
    assert timeline[-1].startswith("20.0\t")


def test_cosim_is_byte_deterministic(runner):
    first = run(runner, "cosim", fixture_path("watertank.cosim"), "--access-log")
    second = run(runner, "cosim", fixture_path("watertank.cosim"), "--access-log")
    assert first.exit_code == 0
    assert first.stdout == second.stdout
    assert len(lines(first.stdout)) == 202 + 400


@pytest.mark.parametrize("epsilon", [0.0, -1e-9])
def test_cosim_rejects_nonpositive_epsilon(runner, monkeypatch, epsilon):
    monkeypatch.setattr("treeforge.cli.TIME_EPSILON", epsilon)
    result = run(runner, "cosim", fixture_path("watertank.cosim"))
    assert result.exit_code == 2
    assert result.stdout == ""
    assert "TREEFORGE_TIME_EPSILON" in result.stderr


def test_spec_check(runner):
    result = run(runner, "spec", "check", fixture_path("events.ast"), "--extends", "base_l")
    assert result.exit_code == 0
    output = lines(result.stdout)
    assert output[0] == "tree Events extends BaseL"
    assert "Event\tEmit\tEvents\t(name: ident, payload: base::Exp)" in output
    assert "Exp\tIntLit\tBaseL\t(value: int)" in output


@pytest.mark.parametrize(
    "options, exit_code",
    [([], 1), (["-e", "missing.ast"], 2)],
)
def test_spec_check_errors(runner, options, exit_code):
    result = run(runner, "spec", "check", fixture_path("events.ast"), *options)
    assert result.exit_code == exit_code
