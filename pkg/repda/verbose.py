"""Verbose output for long numerical runs.

Every helper returns immediately unless config.VERBOSE is set.
"""

import dataclasses
import json
import time
from contextlib import contextmanager
from enum import Enum
from typing import Any, Iterator

import numpy as np
from rich.panel import Panel
from rich.syntax import Syntax

from . import config
from .display import console

PREFIX = "  [dim bold]\\[verbose][/dim bold]"


def _jsonable(value: Any) -> Any:
    """json.dumps fallback for arrays, numpy scalars, enums and dataclasses."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return dataclasses.asdict(value)
    return str(value)


def format_elapsed(elapsed: float) -> str:
    if elapsed < 1.0:
        return f"{elapsed * 1000:.0f}ms"
    if elapsed < 120.0:
        return f"{elapsed:.2f}s"
    minutes, seconds = divmod(elapsed, 60.0)
    return f"{int(minutes)}m{seconds:04.1f}s"


def vlog(message: str):
    if config.VERBOSE:
        console.print(f"{PREFIX} {message}")


def vlog_json(label: str, data: Any):
    """Show an instance document or result dict as highlighted JSON."""
    if not config.VERBOSE:
        return
    text = data if isinstance(data, str) else json.dumps(data, indent=2, default=_jsonable)
    console.print(
        Panel(
            Syntax(text, "json", theme="monokai", line_numbers=False),
            title=f"[bold]{label}[/bold]",
            title_align="left",
            border_style="dim",
            expand=False,
        )
    )


def vlog_timing(label: str, elapsed: float):
    if config.VERBOSE:
        console.print(f"{PREFIX} {label}: [bold cyan]{format_elapsed(elapsed)}[/bold cyan]")


@contextmanager
def vtimer(label: str) -> Iterator[None]:
    """Time the enclosed block and report it with vlog_timing, even if it raises."""
    start = time.monotonic()
    try:
        yield
    finally:
        vlog_timing(label, time.monotonic() - start)
