import logging
import typer

from typing import Any, Iterable, Optional, Sequence, Tuple
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from treeforge import LOG_LEVEL
from .treekit import Diagnostic

# stdout is reserved for results; everything human-facing goes to stderr.
console = Console(stderr=True)


def feedback_message(message: str, type: str = "info") -> None:
    """
    Display a feedback message with appropriate styling based on the message type.

    :param message: The message to display.
    :param type: The type of the message (info, warning, error, exception). Defaults to "info".
    """
    options = {
        "types": {
            "info": "green",
            "warning": "yellow",
            "error": "red",
            "exception": "red",
        },
        "titles": {
            "info": "Information",
            "warning": "Warning",
            "error": "Error Message",
            "exception": "Exception Message",
        },
    }

    feedback_message_table = Table(style=options["types"][type])
    feedback_message_table.add_column(options["titles"][type])
    feedback_message_table.add_row(message)

    console.print(feedback_message_table)
    if type == "exception":
        raise typer.Exit(code=2)
    return None


def create_table(title: str, columns: Sequence[Tuple[str, str]]) -> Table:
    table = Table(title=title, title_justify="left")
    for col_name, style in columns:
        table.add_column(col_name, style=style)
    return table


def add_rows_to_table(table: Table, rows: Iterable[Sequence[Any]]) -> None:
    for row in rows:
        table.add_row(*(str(cell) for cell in row))


def setup_logging(verbose: bool = False, level: Optional[str] = None) -> None:
    """
    Route library logging through a RichHandler on the stderr console.

    :param verbose: Force DEBUG output.
    :param level: Level name; defaults to TREEFORGE_LOG_LEVEL.
    """
    chosen = "DEBUG" if verbose else (level or LOG_LEVEL)
    logging.basicConfig(
        level=getattr(logging, chosen, logging.WARNING),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


def emit_diagnostics(diagnostics: Iterable[Diagnostic], filename: str) -> int:
    """Write one diagnostic per line to stderr; returns how many were written."""
    count = 0
    for diagnostic in diagnostics:
        typer.echo(diagnostic.render(filename), err=True)
        count += 1
    return count
