import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from rich.console import Console
from rich.control import Control
from rich.panel import Panel
from rich.segment import ControlType
from rich.syntax import Syntax
from rich.table import Table

# Global console instance with constrained width for better readability
console = Console(width=100)


def display_logo():
    """Display the repda ASCII logo."""
    from . import __version__

    logo = f"""
[bold cyan]
  ██████╗ ███████╗██████╗ ██████╗  █████╗
  ██╔══██╗██╔════╝██╔══██╗██╔══██╗██╔══██╗
  ██████╔╝█████╗  ██████╔╝██║  ██║███████║
  ██╔══██╗██╔══╝  ██╔═══╝ ██║  ██║██╔══██║
  ██║  ██║███████╗██║     ██████╔╝██║  ██║
  ╚═╝  ╚═╝╚══════╝╚═╝     ╚═════╝ ╚═╝  ╚═╝[/bold cyan]
[dim]   Representative domain adaptation toolkit v{__version__}[/dim]
"""
    console.print(logo)


def display_config_panel(settings: Dict[str, Any]):
    """Display the effective settings of this invocation in a panel."""

    config_table = Table.grid(padding=(0, 2))
    config_table.add_column(style="bold cyan", justify="right")
    config_table.add_column(style="white")

    for key, value in settings.items():
        shown = "[dim]Not configured[/dim]" if value is None else str(value)
        config_table.add_row(f"{key}:", shown)

    console.print()
    console.print(
        Panel(
            config_table,
            title="[bold]Configuration[/bold]",
            title_align="left",
            border_style="cyan",
            padding=(1, 2),
        )
    )
    console.print()


def display_step(
    step_num: int, total_steps: int, title: str, status: str = "in_progress", update: bool = False
):
    """Display a step indicator with status.

    Args:
        step_num: Current step number
        total_steps: Total number of steps
        title: Step title
        status: One of 'in_progress', 'success', 'skip', 'fail'
        update: If True, updates the previous line instead of creating a new one
    """
    icons = {"in_progress": ">", "success": "+", "skip": "-", "fail": "x"}

    colors = {"in_progress": "yellow", "success": "green", "skip": "dim", "fail": "red"}

    icon = icons.get(status, "*")
    color = colors.get(status, "white")

    step_text = (
        f"[{color}]{icon} Step {step_num}/{total_steps}:[/{color}] "
        f"[bold {color}]{title}[/bold {color}]"
    )

    if update:
        # Move cursor up one line and clear it, then print the updated status
        console.control(Control((ControlType.CURSOR_UP, 1), (ControlType.ERASE_IN_LINE, 2)))
        console.print(step_text)
    else:
        console.print(step_text)


def _fmt(value: Any) -> str:
    if value is None:
        return "[dim]-[/dim]"
    if isinstance(value, bool):
        return "[green]yes[/green]" if value else "[red]no[/red]"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def display_key_values(title: str, values: Dict[str, Any], border_style: str = "blue"):
    """A two-column panel of named values (risk reports, divergences, estimates)."""
    table = Table.grid(padding=(0, 2))
    table.add_column(style="bold cyan", justify="right")
    table.add_column(style="white")
    for key, value in values.items():
        if isinstance(value, (dict, list)):
            continue
        table.add_row(f"{key}:", _fmt(value))
    console.print()
    panel = Panel(table, title=f"[bold]{title}[/bold]", border_style=border_style, expand=False)
    console.print(panel)


def display_bound_results(results: Sequence[Any]):
    """One row per bound: value, its two terms, and whether every precondition held."""
    table = Table(title="Generalization bounds", title_justify="left", header_style="bold cyan")
    for column in ("kind", "value", "(1-tau) D", "stochastic", "preconditions"):
        table.add_column(column, justify="right" if column != "kind" else "left")
    for result in results:
        document = result.to_dict() if hasattr(result, "to_dict") else dict(result)
        table.add_row(
            str(document.get("kind")),
            _fmt(document.get("value")),
            _fmt(document.get("discrepancy_term")),
            _fmt(document.get("stochastic_term")),
            _fmt(document.get("preconditions_ok")),
        )
    console.print()
    console.print(table)
    for result in results:
        issues = getattr(result, "details", {}).get("issues") or []
        for issue in issues:
            console.print(f"  [yellow]! {result.kind}: {issue}[/yellow]")


def display_tail_reports(reports: Sequence[Any], title: str = "Tail checks"):
    """Summarize each tail report on one line: status, thresholds checked, worst margin."""
    table = Table(title=title, title_justify="left", header_style="bold cyan")
    table.add_column("#", justify="right")
    table.add_column("check")
    table.add_column("status")
    table.add_column("rows", justify="right")
    table.add_column("max empirical - bound", justify="right")

    for i, report in enumerate(reports):
        checked = report.checked
        margin = max((row.empirical_p - row.bound for row in checked), default=None)
        status = report.status
        color = {"passed": "green", "failed": "red"}.get(status, "yellow")
        table.add_row(
            str(i),
            report.kind,
            f"[{color}]{status}[/{color}]",
            f"{len(checked)}/{len(report.rows)}",
            _fmt(margin),
        )
    console.print()
    console.print(table)


def display_tail_rows(report: Any):
    """Every threshold row of one tail report."""
    table = Table(title=report.kind, title_justify="left", header_style="bold cyan")
    for column in ("xi", "empirical", "wilson99", "bound", "pass"):
        table.add_column(column, justify="right")
    for row in report.rows:
        verdict = row.status if row.status != "ok" else _fmt(row.passed)
        table.add_row(
            _fmt(row.xi), _fmt(row.empirical_p), _fmt(row.wilson_upper), _fmt(row.bound), verdict
        )
    console.print(table)


def display_curve(curve: Any):
    """Final-step mean discrepancy for every (w, tau) of a convergence curve."""
    if not curve.rows:
        console.print(Panel("The curve has no rows.", title="Convergence", border_style="yellow"))
        return
    last = curve.n_totals[-1]
    finals = {(r.w, r.tau): r.mean_discrepancy for r in curve.rows if r.n_total == last}
    table = Table(
        title=f"Mean discrepancy at N1 + N2 = {last}",
        title_justify="left",
        header_style="bold cyan",
    )
    table.add_column("w \\ tau", style="bold cyan", justify="right")
    for tau in curve.tau_grid:
        table.add_column(f"{tau:g}", justify="right")
    for w in curve.w_grid:
        table.add_row(f"{w:g}", *(_fmt(finals.get((w, tau))) for tau in curve.tau_grid))
    console.print()
    console.print(table)


def display_findings(findings: Any):
    """Flags and rankings of a curve analysis."""
    table = Table.grid(padding=(0, 2))
    table.add_column(style="bold cyan", justify="right")
    table.add_column(style="white")
    for name, flag in findings.flags.items():
        table.add_row(f"{name}:", _fmt(flag))
    table.add_row("optimal tau:", _fmt(findings.optimal_tau))
    table.add_row("balanced w:", _fmt(findings.balanced_w))
    for w, ranking in findings.tau_ranking.items():
        table.add_row(f"tau order (w={w:g}):", ", ".join(f"{t:g}" for t in ranking))
    console.print()
    console.print(Panel(table, title="[bold]Findings[/bold]", border_style="magenta", expand=False))


def display_files(paths: Sequence[Union[str, Path]], out_dir: Optional[Path] = None):
    """List written files, relative to ``out_dir`` when given."""
    console.print()
    console.print("[bold underline]Written[/bold underline]")
    for path in paths:
        path = Path(path)
        shown = path.relative_to(out_dir) if out_dir and path.is_relative_to(out_dir) else path
        console.print(f"  [green]+[/green] {shown}")
    console.print()


def display_json(document: Any, title: str = "Result"):
    """Display a JSON document with syntax highlighting."""
    json_str = json.dumps(document, indent=2, default=str)
    console.print()
    console.print(
        Panel(
            Syntax(json_str, "json", theme="monokai", line_numbers=False),
            title=f"[bold]{title}[/bold]",
            border_style="blue",
            expand=False,
        )
    )
