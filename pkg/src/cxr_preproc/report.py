"""Human-readable summaries and SVG plots of a completed run."""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.evaluation import AVERAGE_ROW
from cxr_preproc.evaluation import RocCurve
from cxr_preproc.evaluation import read_correlation_csv
from cxr_preproc.utils.logging import LoggerMixin

AUC_REPORT = "auc_report.csv"
ROC_DIR = "roc"
CORRELATION_DIR = "correlation"
PLOT_DIR = "plots"
SUMMARY_FILE = "summary.txt"

# Fixed hash salt and no date stamp keep SVG output byte-identical.
SVG_RC: dict[str, Any] = {
    "svg.hashsalt": "cxr-preproc",
    "svg.fonttype": "path",
    "path.simplify": False,
}
SVG_METADATA = {"Date": None}


class ReportError(CxrPreprocError):
    """Raised when run artifacts are missing or incomplete."""

    pass


@dataclass
class ReportSummary:
    run_dir: Path
    roc_plots: list[Path] = field(default_factory=list)
    correlation_plots: list[Path] = field(default_factory=list)
    summary_file: Path | None = None


def roc_gid(experiment: str, finding: str, resample: int) -> str:
    return f"roc-{experiment}-{finding}-r{resample}"


def plot_roc_curves(curves: Sequence[tuple[str, RocCurve]], title: str, path: Path | str) -> Path:
    """One SVG with a polyline per (gid, curve) pair and the chance diagonal."""
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(4.0, 4.0))
        ax = fig.subplots()
        ax.plot([0.0, 1.0], [0.0, 1.0], color="0.7", linestyle="--", linewidth=0.8, gid="chance")
        for gid, curve in curves:
            ax.plot(curve.fpr, curve.tpr, linewidth=1.2, gid=gid)
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.0)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_title(title)
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    return path


def plot_correlation_heatmap(frame: pd.DataFrame, title: str, path: Path | str) -> Path:
    """Heatmap of a x100 correlation matrix with the values written in the cells."""
    path = Path(path)
    values = frame.to_numpy(dtype=np.float64)
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(4.5, 4.0), layout="constrained")
        ax = fig.subplots()
        mesh = ax.pcolormesh(np.ma.masked_invalid(values), cmap="viridis", vmin=-100.0, vmax=100.0)
        for (i, j), v in np.ndenumerate(values):
            text = "n/a" if math.isnan(v) else f"{v:.0f}"
            ax.text(
                j + 0.5, i + 0.5, text, ha="center", va="center", fontsize=7, color="white"
            )
        ticks = np.arange(len(frame.columns)) + 0.5
        ax.set_xticks(
            ticks, labels=list(frame.columns), rotation=45, ha="right", fontsize=7
        )
        ax.set_yticks(np.arange(len(frame.index)) + 0.5, labels=list(frame.index), fontsize=7)
        ax.invert_yaxis()
        ax.set_title(title)
        fig.colorbar(mesh, ax=ax)
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    return path


def _format_cell(mean: Any, sd: Any) -> str:
    if mean is None or (isinstance(mean, float) and math.isnan(mean)):
        return "n/a"
    text = f"{mean:.3f}".lstrip("0")
    if sd is None or (isinstance(sd, float) and math.isnan(sd)):
        return text
    return f"{text} ± {f'{sd:.3f}'.lstrip('0')}"


def format_auc_table(table: pd.DataFrame) -> str:
    """Render an AUC table as fixed-width text in the '.891 ± .013' style."""
    experiments = [c[: -len("_mean")] for c in table.columns if c.endswith("_mean")]
    width = max([14, *(len(e) + 2 for e in experiments)])
    lines = ["finding".ljust(18) + "".join(e.rjust(width) for e in experiments)]
    for finding, row in table.iterrows():
        label = f"{finding} *" if finding == AVERAGE_ROW else str(finding)
        cells = [_format_cell(row[f"{e}_mean"], row[f"{e}_sd"]) for e in experiments]
        lines.append(label.ljust(18) + "".join(c.rjust(width) for c in cells))
    lines.append("* average over findings, pneumothorax excluded")
    return "\n".join(lines) + "\n"


def find_run_dir(output: Path | str) -> Path:
    """The newest completed run directory under output (or output itself).

    Raises:
        ReportError: If no completed run exists
    """
    output = Path(output)
    if (output / AUC_REPORT).is_file():
        return output
    runs = []
    if output.is_dir():
        runs = [p for p in sorted(output.glob("run-*")) if (p / AUC_REPORT).is_file()]
    if not runs:
        raise ReportError(f"No completed run found under {output}")
    return max(runs, key=lambda p: ((p / AUC_REPORT).stat().st_mtime, p.name))


class RunReporter(LoggerMixin):
    """Render the text table and SVG plots of one run directory."""

    def __init__(self, run_dir: Path | str) -> None:
        self.run_dir = Path(run_dir)

    def _require(self, relative: str) -> Path:
        path = self.run_dir / relative
        if not path.exists():
            raise ReportError(f"Run artifact missing: {path}")
        return path

    def render(self) -> ReportSummary:
        table = pd.read_csv(self._require(AUC_REPORT), index_col=0)
        roc_dir = self._require(ROC_DIR)
        plot_dir = self.run_dir / PLOT_DIR
        plot_dir.mkdir(exist_ok=True)
        summary = ReportSummary(self.run_dir)

        groups: dict[tuple[str, str], list[tuple[str, RocCurve]]] = {}
        # ROC files are named <experiment>__<finding>__r<resample>.csv
        for csv in sorted(roc_dir.glob("*.csv")):
            try:
                experiment, finding, resample = csv.stem.split("__")
                frame = pd.read_csv(csv)
                curve = RocCurve(
                    frame["fpr"].to_numpy(),
                    frame["tpr"].to_numpy(),
                    frame["threshold"].to_numpy(),
                )
            except (ValueError, KeyError) as e:
                raise ReportError(f"Malformed ROC file {csv}: {e}") from e
            groups.setdefault((experiment, finding), []).append(
                (roc_gid(experiment, finding, int(resample.lstrip("r"))), curve)
            )
        for (experiment, finding), curves in sorted(groups.items()):
            path = plot_dir / f"roc__{experiment}__{finding}.svg"
            summary.roc_plots.append(
                plot_roc_curves(curves, f"{experiment}: {finding}", path)
            )

        correlation_dir = self.run_dir / CORRELATION_DIR
        for csv in sorted(correlation_dir.glob("*.csv")) if correlation_dir.is_dir() else []:
            frame = read_correlation_csv(csv)
            summary.correlation_plots.append(
                plot_correlation_heatmap(frame, csv.stem, plot_dir / f"{csv.stem}.svg")
            )

        summary.summary_file = self.run_dir / SUMMARY_FILE
        summary.summary_file.write_text(format_auc_table(table), encoding="utf-8")
        self.logger.info(
            "Report rendered",
            run_dir=str(self.run_dir),
            roc_plots=len(summary.roc_plots),
            correlation_plots=len(summary.correlation_plots),
        )
        return summary


def render_report(output: Path | str) -> ReportSummary:
    """Render the report of the newest completed run under output."""
    return RunReporter(find_run_dir(output)).render()
