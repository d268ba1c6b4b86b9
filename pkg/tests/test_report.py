"""Tests for the report module."""

import os
import re
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from cxr_preproc.dataset import FINDINGS
from cxr_preproc.evaluation import AVERAGE_ROW
from cxr_preproc.evaluation import aggregate
from cxr_preproc.evaluation import roc_curve
from cxr_preproc.evaluation import write_auc_table
from cxr_preproc.evaluation import write_correlation_csv
from cxr_preproc.report import ReportError
from cxr_preproc.report import find_run_dir
from cxr_preproc.report import format_auc_table
from cxr_preproc.report import render_report
from cxr_preproc.report import roc_gid

SVG_NS = "{http://www.w3.org/2000/svg}"
NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:e-?\d+)?")


def _write_run(run_dir: Path, seed: int = 0) -> dict[str, np.ndarray]:
    """Minimal run directory with two resamples of the normal experiment."""
    rng = np.random.default_rng(seed)
    (run_dir / "roc").mkdir(parents=True)
    (run_dir / "correlation").mkdir()
    aucs: dict[str, list] = {f.value: [] for f in FINDINGS}
    curves = {}
    for r in range(2):
        labels = np.array([0, 1] * 10)
        scores = np.clip(0.3 * labels + rng.uniform(0.0, 0.7, size=20), 0.0, 1.0)
        curve = roc_curve(scores, labels)
        for finding in FINDINGS:
            aucs[finding.value].append(0.8 + 0.01 * r)
        curve.to_frame().to_csv(
            run_dir / "roc" / f"normal__mass__r{r}.csv", index=False, float_format="%.17g", lineterminator="\n"
        )
        curves[roc_gid("normal", "mass", r)] = np.column_stack([curve.fpr, curve.tpr])
    write_auc_table({"normal": aggregate(aucs)}, run_dir / "auc_report.csv")
    write_correlation_csv(
        np.array([[1.0, 0.5], [0.5, 1.0]]), ["normal-m0", "normal-m1"], run_dir / "correlation" / "en_normal__r0.csv"
    )
    return curves


def _path_vertices(svg: Path, gid: str) -> np.ndarray:
    root = ET.parse(svg).getroot()
    group = next(g for g in root.iter(f"{SVG_NS}g") if g.get("id") == gid)
    path = next(group.iter(f"{SVG_NS}path"))
    values = [float(v) for v in NUMBER.findall(path.get("d"))]
    return np.array(values).reshape(-1, 2)


class TestFormatAucTable:
    """Test the fixed-width AUC table."""

    def test_plus_minus_style(self):
        """Test leading zeros are dropped and the SD follows the mean."""
        table = pd.DataFrame(
            {"normal_mean": [0.8912, 0.5], "normal_sd": [0.0131, np.nan], "normal_n_valid": [5, 1]},
            index=pd.Index(["mass", AVERAGE_ROW], name="finding"),
        )
        text = format_auc_table(table)
        assert ".891 ± .013" in text
        assert "AVG *" in text
        assert "pneumothorax excluded" in text
        assert ".500" in text and ".500 ±" not in text

    def test_missing_mean(self):
        """Test undefined AUCs print as n/a."""
        table = pd.DataFrame(
            {"bs_mean": [np.nan], "bs_sd": [np.nan]}, index=pd.Index(["pneumothorax"], name="finding")
        )
        assert "n/a" in format_auc_table(table)


class TestFindRunDir:
    """Test run directory discovery."""

    def test_empty_output(self, tmp_path):
        """Test an empty directory has no completed run."""
        with pytest.raises(ReportError):
            find_run_dir(tmp_path)
        with pytest.raises(ReportError):
            find_run_dir(tmp_path / "absent")

    def test_incomplete_runs_are_skipped(self, tmp_path):
        """Test only runs with an AUC report count."""
        (tmp_path / "run-aaa").mkdir()
        _write_run(tmp_path / "run-bbb")
        assert find_run_dir(tmp_path) == tmp_path / "run-bbb"
        assert find_run_dir(tmp_path / "run-bbb") == tmp_path / "run-bbb"

    def test_newest_run(self, tmp_path):
        """Test the most recently completed run is chosen."""
        _write_run(tmp_path / "run-new")
        _write_run(tmp_path / "run-old")
        os.utime(tmp_path / "run-old" / "auc_report.csv", (1_000_000, 1_000_000))
        os.utime(tmp_path / "run-new" / "auc_report.csv", (2_000_000, 2_000_000))
        assert find_run_dir(tmp_path) == tmp_path / "run-new"


class TestRenderReport:
    """Test plot and summary rendering."""

    def test_outputs(self, tmp_path):
        """Test one ROC plot per experiment and finding plus the heatmaps."""
        run_dir = tmp_path / "run-x"
        _write_run(run_dir)
        summary = render_report(tmp_path)
        assert summary.run_dir == run_dir
        assert [p.name for p in summary.roc_plots] == ["roc__normal__mass.svg"]
        assert [p.name for p in summary.correlation_plots] == ["en_normal__r0.svg"]
        assert ".805 ± .007" in summary.summary_file.read_text(encoding="utf-8")

    def test_regeneration_is_byte_identical(self, tmp_path):
        """Test rendering the same run twice gives identical files."""
        run_dir = tmp_path / "run-x"
        _write_run(run_dir)
        first = render_report(run_dir)
        before = {p.name: p.read_bytes() for p in (*first.roc_plots, *first.correlation_plots)}
        second = render_report(run_dir)
        after = {p.name: p.read_bytes() for p in (*second.roc_plots, *second.correlation_plots)}
        assert before == after

    def test_polyline_matches_roc_points(self, tmp_path):
        """Test the plotted vertices are an affine image of the ROC points."""
        run_dir = tmp_path / "run-x"
        curves = _write_run(run_dir)
        svg = render_report(run_dir).roc_plots[0]

        # The chance diagonal fixes the data-to-pixel map.
        (x0, y0), (x1, y1) = _path_vertices(svg, "chance")[[0, -1]]
        for gid, points in curves.items():
            vertices = _path_vertices(svg, gid)
            assert vertices.shape == points.shape
            expected_x = x0 + points[:, 0] * (x1 - x0)
            expected_y = y0 + points[:, 1] * (y1 - y0)
            np.testing.assert_allclose(vertices[:, 0], expected_x, atol=1e-3)
            np.testing.assert_allclose(vertices[:, 1], expected_y, atol=1e-3)

    def test_missing_artifacts(self, tmp_path):
        """Test a run without ROC files is reported as incomplete."""
        run_dir = tmp_path / "run-x"
        _write_run(run_dir)
        for csv in (run_dir / "roc").glob("*.csv"):
            csv.unlink()
        (run_dir / "roc").rmdir()
        with pytest.raises(ReportError, match="roc"):
            render_report(run_dir)

    def test_malformed_roc_file(self, tmp_path):
        """Test a ROC file without the expected columns."""
        run_dir = tmp_path / "run-x"
        _write_run(run_dir)
        (run_dir / "roc" / "normal__mass__r0.csv").write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(ReportError, match="Malformed"):
            render_report(run_dir)
