import pytest

from pathlib import Path
from typer.testing import CliRunner

from treeforge.modules.baselang import parse_module
from treeforge.modules.cosim import parse_scenario
from treeforge.modules.extlang import parse_procl

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


@pytest.fixture
def runner():
    # Click 8.2 separates stderr by default and dropped the flag
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def demo():
    return parse_module(fixture_text("demo.bl"))


@pytest.fixture(scope="session")
def recursion():
    return parse_module(fixture_text("recursion.bl"))


@pytest.fixture(scope="session")
def shop():
    return parse_procl(fixture_text("shop.pl"))


@pytest.fixture(scope="session")
def guards():
    return parse_procl(fixture_text("guards.pl"))


@pytest.fixture
def watertank():
    return parse_scenario(fixture_text("watertank.cosim"))
