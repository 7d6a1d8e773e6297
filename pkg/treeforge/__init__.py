import os
from pathlib import Path
from typing import Dict, List, Final, Optional, Tuple
from dotenv import load_dotenv


def find_env_file() -> Optional[Path]:
    """
    Locate the first .env file among the predefined search locations.

    :return: The path of the .env file, or None when no location holds one.
    """
    env_locations: Dict[str, List[str]] = {
        "common": [
            "./.env",
            "~/.config/treeforge/.env",
            "~/.treeforge/.env",
        ],
        "nt": [
            "~/AppData/Roaming/treeforge/.env",
        ],
        "posix": [
            "~/.local/share/treeforge/.env",
        ],
    }

    search_paths = env_locations["common"] + env_locations.get(os.name, [])

    for path in search_paths:
        env_path = Path(path).expanduser().resolve()
        if env_path.is_file():
            return env_path
    return None


def load_environment_variables() -> Optional[Path]:
    """
    Load TREEFORGE_* settings from the first .env file found.

    Values already present in the process environment win over the file.
    A missing file is not an error; built-in defaults apply.

    :return: The loaded file path, if any.
    """
    env_path = find_env_file()
    if env_path is not None:
        load_dotenv(env_path, override=False)
    return env_path


ENV_FILE: Final = load_environment_variables()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        return default


# Define constants
SOLVER_BOUNDS: Final[Tuple[int, int]] = (
    _env_int("TREEFORGE_SOLVER_LO", -1000),
    _env_int("TREEFORGE_SOLVER_HI", 1000),
)
MAX_TESTS: Final = _env_int("TREEFORGE_MAX_TESTS", 100000)
MAX_REPEAT: Final = _env_int("TREEFORGE_MAX_REPEAT", 8)
DEFAULT_SEED: Final = _env_int("TREEFORGE_SEED", 0)
TIME_EPSILON: Final = _env_float("TREEFORGE_TIME_EPSILON", 1e-9)
LOG_LEVEL: Final = os.getenv("TREEFORGE_LOG_LEVEL", "WARNING").upper()

BASE_TREE: Final = "BaseL"
EXT_TREE: Final = "ProcL"
IR_TREE: Final = "IR"

BUNDLED_SPECS: Final = {
    "base_l": "base_l.ast",
    "proc_l": "proc_l.ast",
    "ir": "ir.ast",
}
