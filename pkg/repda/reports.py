"""Writing curves, tail reports and bound results to CSV, JSON and SVG."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bounds import BoundResult, TailBound  # noqa: E402
from .deviation import TAIL_CSV_FIELDS, TailReport  # noqa: E402
from .errors import ConfigError, ReportWriteError, ValidationError  # noqa: E402
from .experiment import CURVE_CSV_FIELDS, ConvergenceCurve, ConvergenceRow  # noqa: E402

logger = logging.getLogger(__name__)

BOUND_CSV_FIELDS = ("kind", "value", "discrepancy_term", "stochastic_term", "preconditions_ok")

# Fixed ids and no timestamp keep the SVG bytes a function of the data alone.
SVG_RC = {"svg.hashsalt": "repda", "svg.fonttype": "path", "font.size": 9}

Reportable = Union[ConvergenceCurve, TailReport, BoundResult, Sequence[Any]]


def _ensure_dir(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(out_dir, e) from e
    return out_dir


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> Path:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ReportWriteError(path, e) from e
    return path


def _write_json(path: Path, document: Any) -> Path:
    try:
        with open(path, "w") as f:
            json.dump(document, f, indent=2, default=_json_default)
            f.write("\n")
    except OSError as e:
        raise ReportWriteError(path, e) from e
    return path


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "to_dict"):
        return value.to_dict()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _summary(kind: str, details: Dict[str, Any], **extra: Any) -> Dict[str, Any]:
    from . import __version__

    return {"kind": kind, "version": __version__, **details, **extra}


def write_curve_csv(curve: ConvergenceCurve, path: Path) -> Path:
    """``n_total,w,tau,mean_discrepancy,std_discrepancy,repeats``; header only when empty."""
    return _write_csv(Path(path), CURVE_CSV_FIELDS, [row.csv_row() for row in curve.rows])


def read_curve_csv(path: Path, n_target_fit: int = 100) -> ConvergenceCurve:
    """Load a curve written by ``write_curve_csv``."""
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != CURVE_CSV_FIELDS:
                raise ConfigError(f"{path} is not a convergence curve (header {reader.fieldnames})")
            rows = [
                ConvergenceRow(
                    int(r["n_total"]),
                    float(r["w"]),
                    float(r["tau"]),
                    float(r["mean_discrepancy"]),
                    float(r["std_discrepancy"]),
                    int(r["repeats"]),
                )
                for r in reader
            ]
    except OSError as e:
        raise ConfigError(f"Could not read curve {path}: {e}") from None
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Malformed curve row in {path}: {e}") from None
    return ConvergenceCurve(tuple(rows), n_target_fit)


def _label(value: float) -> str:
    return f"{value:g}"


def plot_curve_families(curve: ConvergenceCurve, out_dir: Path) -> List[Path]:
    """One SVG per tau (a line per w) and one per w (a line per tau)."""
    if not curve.rows:
        return []
    out_dir = _ensure_dir(out_dir)
    families = [
        ("tau", tau, [(f"w={_label(w)}", curve.series(w, tau)) for w in curve.w_grid])
        for tau in curve.tau_grid
    ] + [
        ("w", w, [(f"tau={_label(tau)}", curve.series(w, tau)) for tau in curve.tau_grid])
        for w in curve.w_grid
    ]
    paths = []
    with matplotlib.rc_context(SVG_RC):
        for name, value, lines in families:
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            for label, (sizes, mean, _) in lines:
                ax.plot(sizes, mean, marker="o", markersize=3, linewidth=1.2, label=label)
            ax.set_xlabel("N1 + N2")
            ax.set_ylabel("|combined risk - held-out risk|")
            ax.set_title(f"{name} = {_label(value)}")
            ax.spines["right"].set_visible(False)
            ax.spines["top"].set_visible(False)
            ax.legend(frameon=False)
            fig.tight_layout()
            path = out_dir / f"curve-{name}-{_label(value)}.svg"
            try:
                fig.savefig(path, format="svg", metadata={"Date": None})
            except OSError as e:
                raise ReportWriteError(path, e) from e
            finally:
                plt.close(fig)
            paths.append(path)
    logger.debug("wrote %d curve plots to %s", len(paths), out_dir)
    return paths


def emit_curve(curve: ConvergenceCurve, out_dir: Path, fmt: str = "csv") -> List[Path]:
    out_dir = _ensure_dir(out_dir)
    if fmt == "json":
        data = out_dir / "curve.json"
        _write_json(data, [dict(zip(CURVE_CSV_FIELDS, _row_values(r))) for r in curve.rows])
    else:
        data = write_curve_csv(curve, out_dir / "curve.csv")
    summary = _write_json(
        out_dir / "summary.json",
        _summary(
            "convergence", curve.details, n_target_fit=curve.n_target_fit, rows=len(curve.rows)
        ),
    )
    return [data, summary, *plot_curve_families(curve, out_dir)]


def _row_values(row: ConvergenceRow) -> List[Any]:
    return [row.n_total, row.w, row.tau, row.mean_discrepancy, row.std_discrepancy, row.repeats]


def write_tail_csv(report: TailReport, path: Path) -> Path:
    """``xi,empirical_p,wilson99,bound,pass`` rows of one report."""
    return _write_csv(Path(path), TAIL_CSV_FIELDS, [row.csv_row() for row in report.rows])


def emit_tail_reports(
    reports: Sequence[TailReport], out_dir: Path, fmt: str = "csv", name: str = "tail"
) -> List[Path]:
    """One CSV per report (``<name>-<index>-<kind>.csv``) plus a JSON summary of all of them."""
    out_dir = _ensure_dir(out_dir)
    paths = []
    if fmt == "csv":
        for i, report in enumerate(reports):
            paths.append(write_tail_csv(report, out_dir / f"{name}-{i:02d}-{report.kind}.csv"))
    passed = all(r.passed for r in reports)
    document = _summary(
        name,
        {},
        passed=passed,
        reports=[r.to_dict() for r in reports],
    )
    paths.append(_write_json(out_dir / f"{name}.json", document))
    return paths


def emit_bound_results(
    results: Sequence[Union[BoundResult, TailBound]], out_dir: Path, fmt: str = "csv"
) -> List[Path]:
    out_dir = _ensure_dir(out_dir)
    documents = [_bound_dict(r) for r in results]
    paths = []
    if fmt == "csv":
        rows = [[str(d.get(k)) for k in BOUND_CSV_FIELDS] for d in documents]
        paths.append(_write_csv(out_dir / "bounds.csv", BOUND_CSV_FIELDS, rows))
    paths.append(_write_json(out_dir / "bounds.json", _summary("bounds", {}, results=documents)))
    return paths


def _bound_dict(result: Union[BoundResult, TailBound]) -> Dict[str, Any]:
    if isinstance(result, BoundResult):
        return result.to_dict()
    return {
        "kind": result.kind,
        "value": result.value,
        "raw": result.raw,
        "log_value": result.log_value,
        "preconditions_ok": result.preconditions_ok,
        **result.details,
    }


def emit_report(report: Reportable, out_dir: Path, fmt: str = "csv") -> List[Path]:
    """Write any report kind; returns the files written."""
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be 'csv' or 'json', got {fmt!r}")
    if isinstance(report, ConvergenceCurve):
        return emit_curve(report, out_dir, fmt)
    if isinstance(report, TailReport):
        return emit_tail_reports([report], out_dir, fmt, report.kind)
    if isinstance(report, (BoundResult, TailBound)):
        return emit_bound_results([report], out_dir, fmt)
    items = list(report)
    if items and all(isinstance(r, TailReport) for r in items):
        return emit_tail_reports(items, out_dir, fmt)
    if all(isinstance(r, (BoundResult, TailBound)) for r in items):
        return emit_bound_results(items, out_dir, fmt)
    raise ValidationError(f"Cannot emit a report of type {type(report).__name__}")


def write_json(path: Path, document: Any, kind: Optional[str] = None) -> Path:
    """Write ``document`` (wrapped in a versioned summary when ``kind`` is given)."""
    path = Path(path)
    _ensure_dir(path.parent)
    return _write_json(path, _summary(kind, {}, result=document) if kind else document)
