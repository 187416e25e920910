"""Unit tests for repda.reports."""

import json

import pytest

from repda.bounds import BoundInput, TailBound, hoeffding_bound
from repda.deviation import TailReport, TailRow
from repda.errors import ConfigError, ValidationError
from repda.experiment import ConvergenceCurve, ConvergenceRow
from repda.reports import emit_curve, emit_report, read_curve_csv, write_json
from repda.risk import MixtureWeights


@pytest.fixture
def small_curve():
    """Two w values, one tau, two sizes."""
    rows = tuple(
        ConvergenceRow(n, w, 0.3, 1.0 / n, 0.01, 4) for w in (0.25, 0.5) for n in (400, 800)
    )
    return ConvergenceCurve(rows, 100, {"seed": 3})


@pytest.fixture
def tail_report():
    """A report with one ok row and one skipped row."""
    rows = (
        TailRow(0.1, 3, 100, 0.03, 0.008, 0.1, 0.5, True, True),
        TailRow(0.01, 50, 100, 0.5, 0.37, 0.63, 1.0, True, False, "skipped"),
    )
    return TailReport("hoeffding", rows)


class TestCurveReports:
    """Test curve CSV, summary and plots."""

    def test_files_written(self, small_curve, tmp_path):
        """Test the CSV, the summary and one SVG per tau and per w."""
        paths = emit_curve(small_curve, tmp_path)
        names = sorted(p.name for p in paths)
        assert names == [
            "curve-tau-0.3.svg",
            "curve-w-0.25.svg",
            "curve-w-0.5.svg",
            "curve.csv",
            "summary.json",
        ]
        lines = (tmp_path / "curve.csv").read_text().splitlines()
        assert lines[0] == "n_total,w,tau,mean_discrepancy,std_discrepancy,repeats"
        assert lines[1] == "400,0.25,0.3,0.0025,0.01,4"

    def test_summary(self, small_curve, tmp_path):
        """Test the versioned summary document."""
        emit_curve(small_curve, tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["kind"] == "convergence"
        assert summary["rows"] == 4
        assert summary["seed"] == 3

    def test_empty_curve(self, tmp_path):
        """Test that an empty curve writes only the header and no plots."""
        paths = emit_curve(ConvergenceCurve(()), tmp_path)
        assert [p.name for p in paths] == ["curve.csv", "summary.json"]
        assert (tmp_path / "curve.csv").read_text().splitlines() == [
            "n_total,w,tau,mean_discrepancy,std_discrepancy,repeats"
        ]

    def test_svg_bytes_deterministic(self, small_curve, tmp_path):
        """Test that plotting the same curve twice gives identical bytes."""
        emit_curve(small_curve, tmp_path / "a")
        emit_curve(small_curve, tmp_path / "b")
        first = (tmp_path / "a" / "curve-w-0.5.svg").read_bytes()
        assert first == (tmp_path / "b" / "curve-w-0.5.svg").read_bytes()

    def test_csv_bytes_deterministic(self, small_curve, tmp_path):
        """Test that emitting a curve twice, or again after reading it, gives identical CSV."""
        emit_report(small_curve, tmp_path / "a")
        emit_report(small_curve, tmp_path / "b")
        first = (tmp_path / "a" / "curve.csv").read_bytes()
        assert first == (tmp_path / "b" / "curve.csv").read_bytes()
        emit_report(read_curve_csv(tmp_path / "a" / "curve.csv"), tmp_path / "c")
        assert first == (tmp_path / "c" / "curve.csv").read_bytes()

    def test_read_back(self, small_curve, tmp_path):
        """Test loading a written curve."""
        emit_curve(small_curve, tmp_path)
        loaded = read_curve_csv(tmp_path / "curve.csv")
        assert loaded.rows == small_curve.rows

    def test_read_bad_header(self, tmp_path):
        """Test that a file with another header is rejected."""
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError):
            read_curve_csv(path)

    def test_json_format(self, small_curve, tmp_path):
        """Test the JSON alternative to the CSV."""
        emit_report(small_curve, tmp_path, "json")
        rows = json.loads((tmp_path / "curve.json").read_text())
        assert rows[0] == {
            "n_total": 400,
            "w": 0.25,
            "tau": 0.3,
            "mean_discrepancy": 0.0025,
            "std_discrepancy": 0.01,
            "repeats": 4,
        }


class TestTailAndBoundReports:
    """Test tail and bound emitters."""

    def test_tail_csv(self, tail_report, tmp_path):
        """Test the per-report CSV and the JSON summary."""
        paths = emit_report(tail_report, tmp_path)
        assert [p.name for p in paths] == ["hoeffding-00-hoeffding.csv", "hoeffding.json"]
        lines = paths[0].read_text().splitlines()
        assert lines[0] == "xi,empirical_p,wilson99,bound,pass"
        assert lines[1].endswith(",true")
        assert lines[2].endswith(",skipped")
        summary = json.loads(paths[1].read_text())
        assert summary["passed"] is True
        assert summary["reports"][0]["status"] == "passed"

    def test_suite_name(self, tail_report, tmp_path):
        """Test that a list of reports is numbered under one name."""
        paths = emit_report([tail_report, tail_report], tmp_path)
        assert [p.name for p in paths] == [
            "tail-00-hoeffding.csv",
            "tail-01-hoeffding.csv",
            "tail.json",
        ]

    def test_bounds(self, tmp_path):
        """Test the bounds CSV and JSON."""
        inp = BoundInput((1, 3200), MixtureWeights(0.0, (1.0,)), ln_uen=5.0)
        tail = TailBound("bennett", 0.25, 0.25, -1.386, True, {"xi": 0.5})
        paths = emit_report([hoeffding_bound(inp), tail], tmp_path)
        assert [p.name for p in paths] == ["bounds.csv", "bounds.json"]
        lines = paths[0].read_text().splitlines()
        assert lines[0] == "kind,value,discrepancy_term,stochastic_term,preconditions_ok"
        assert lines[2] == "bennett,0.25,None,None,True"
        results = json.loads(paths[1].read_text())["results"]
        assert results[1]["xi"] == 0.5

    def test_bad_format(self, tail_report, tmp_path):
        """Test that only csv and json are accepted."""
        with pytest.raises(ValidationError):
            emit_report(tail_report, tmp_path, "xml")

    def test_write_json_wraps_kind(self, tmp_path):
        """Test the versioned wrapper of write_json."""
        path = write_json(tmp_path / "nested" / "out.json", {"a": 1}, "divergence")
        document = json.loads(path.read_text())
        assert document["kind"] == "divergence"
        assert document["result"] == {"a": 1}
        assert document["version"] == "0.1.0"
