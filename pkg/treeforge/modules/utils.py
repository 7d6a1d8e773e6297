from pathlib import Path
from typing import List, Tuple

from .errors import ConfigError


def split_names(text: str) -> List[str]:
    """Split a comma-separated flag value, dropping blanks."""
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_bounds(text: str) -> Tuple[int, int]:
    """
    Parse a ``lo,hi`` flag value.

    :raises ConfigError: When the value is not two integers with lo <= hi.
    """
    parts = split_names(text)
    try:
        lo, hi = (int(part) for part in parts)
    except ValueError:
        raise ConfigError(f"bounds must be two integers 'lo,hi', got {text!r}")
    if lo > hi:
        raise ConfigError(f"lower bound {lo} exceeds upper bound {hi}")
    return lo, hi


def parse_factor(value: float) -> float:
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"reduction factor must lie in (0, 1], got {value}")
    return value


def read_source(path: Path) -> str:
    """
    Read a UTF-8 input file.

    :raises ConfigError: When the file is missing or unreadable.
    """
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
