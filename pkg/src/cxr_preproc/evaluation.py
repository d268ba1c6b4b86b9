"""ROC statistics, cross-resample aggregation, correlation and ensembling."""

from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import structlog
from scipy import stats
from sklearn import metrics

from cxr_preproc.dataset import FINDINGS
from cxr_preproc.dataset import Finding
from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.errors import ShapeError
from cxr_preproc.utils.validators import validate_unit_interval

logger = structlog.get_logger(__name__)

EXCLUDED_FROM_AVERAGE: tuple[str, ...] = (Finding.PNEUMOTHORAX.value,)
AVERAGE_ROW = "AVG"
CORRELATION_SCALE = 100.0


class UndefinedMetricError(CxrPreprocError, ValueError):
    """Raised when a statistic is undefined for the given data."""

    def __init__(self, message: str, finding: Optional[str] = None) -> None:
        super().__init__(message if finding is None else f"{message} [{finding}]")
        self.finding = finding


class EnsembleError(CxrPreprocError, ValueError):
    """Raised for ensembles with too few members."""

    pass


@dataclass(frozen=True)
class Provenance:
    """Where a prediction matrix came from."""

    variant: str
    resample: int
    model_id: str
    members: tuple[str, ...] = ()

    def key(self) -> tuple[str, int, str]:
        return (self.variant, self.resample, self.model_id)


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """Scores for the test ids of one resample, one column per finding."""

    sample_ids: tuple[str, ...]
    scores: np.ndarray
    provenance: Provenance
    columns: tuple[str, ...] = field(default=tuple(f.value for f in FINDINGS))

    def __post_init__(self) -> None:
        scores = np.array(self.scores, dtype=np.float64, copy=True)
        ids = tuple(self.sample_ids)
        if scores.ndim != 2 or scores.shape != (len(ids), len(self.columns)):
            raise ShapeError(
                f"Scores of shape {scores.shape} do not match "
                f"{len(ids)} ids x {len(self.columns)} columns"
            )
        validate_unit_interval(scores, "prediction scores")
        scores.setflags(write=False)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "scores", scores)

    def column(self, finding: str) -> np.ndarray:
        return self.scores[:, self.columns.index(str(Finding(finding).value))]

    def relabel(self, provenance: Provenance) -> "PredictionMatrix":
        return PredictionMatrix(self.sample_ids, self.scores, provenance, self.columns)

    def to_csv(self, path: Path | str) -> None:
        """Write scores with the provenance in leading comment lines."""
        p = self.provenance
        frame = pd.DataFrame(self.scores, columns=list(self.columns))
        frame.insert(0, "id", list(self.sample_ids))
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            fh.write(f"# variant={p.variant}\n# resample={p.resample}\n# model_id={p.model_id}\n")
            fh.write(f"# members={';'.join(p.members)}\n")
            frame.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: Path | str) -> "PredictionMatrix":
        meta: dict[str, str] = {}
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
        frame = pd.read_csv(
            path, comment="#", dtype={"id": str}, float_precision="round_trip"
        )
        members = tuple(m for m in meta.get("members", "").split(";") if m)
        provenance = Provenance(
            meta.get("variant", ""),
            int(meta.get("resample", 0)),
            meta.get("model_id", ""),
            members,
        )
        columns = tuple(c for c in frame.columns if c != "id")
        scores = frame[list(columns)].to_numpy(dtype=np.float64)
        return cls(tuple(frame["id"]), scores, provenance, columns)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Operating points from (0, 0) to (1, 1)."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self) -> None:
        if self.fpr.shape != self.tpr.shape or self.fpr.size < 2:
            raise ShapeError("ROC curve needs matching coordinate arrays with at least two points")
        if (self.fpr[0], self.tpr[0]) != (0.0, 0.0) or (self.fpr[-1], self.tpr[-1]) != (1.0, 1.0):
            raise ValueError("ROC curve must run from (0, 0) to (1, 1)")
        if np.any(np.diff(self.fpr) < 0) or np.any(np.diff(self.tpr) < 0):
            raise ValueError("ROC coordinates must be non-decreasing")

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(float(x), float(y)) for x, y in zip(self.fpr, self.tpr)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"fpr": self.fpr, "tpr": self.tpr, "threshold": self.thresholds})


def roc_curve(
    scores: Sequence[float] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    finding: Optional[str] = None,
) -> RocCurve:
    """Sweep thresholds over the distinct scores, highest first.

    Tied scores move true and false positives together, so a tie group is a
    single diagonal segment.

    Args:
        scores: Predicted scores
        labels: Binary ground truth
        finding: Name carried by the error on single-class labels

    Returns:
        Curve starting at (0, 0) and ending at (1, 1)

    Raises:
        UndefinedMetricError: If only one class is present
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError(
            f"Scores {scores.shape} and labels {labels.shape} must be matching vectors"
        )
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("Labels must be binary")
    positives = int(labels.sum())
    if positives == 0 or positives == labels.size:
        raise UndefinedMetricError("ROC undefined for single-class labels", finding)
    fpr, tpr, thresholds = metrics.roc_curve(labels, scores, drop_intermediate=False)
    return RocCurve(fpr, tpr, thresholds)


def auc(c: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    return float(metrics.auc(c.fpr, c.tpr))


def auc_score(
    scores: Sequence[float] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    finding: Optional[str] = None,
) -> Optional[float]:
    """AUC of a score vector, or None when only one class is present."""
    try:
        return auc(roc_curve(scores, labels, finding))
    except UndefinedMetricError as e:
        logger.warning("AUC undefined", finding=finding, reason=str(e))
        return None


@dataclass(frozen=True)
class AucSummary:
    mean: Optional[float]
    sd: Optional[float]
    n_valid: int


@dataclass(frozen=True)
class AucReport:
    """Cross-resample mean and SD per finding, plus the AVG row."""

    findings: dict[str, AucSummary]
    average: AucSummary
    excluded: tuple[str, ...] = EXCLUDED_FROM_AVERAGE

    def rows(self) -> dict[str, AucSummary]:
        return {**self.findings, AVERAGE_ROW: self.average}


def _summarize(values: Sequence[float]) -> AucSummary:
    if not values:
        return AucSummary(None, None, 0)
    array = np.asarray(values, dtype=np.float64)
    sd = float(np.std(array, ddof=1)) if array.size >= 2 else None
    return AucSummary(float(array.mean()), sd, int(array.size))


def aggregate(
    aucs: Mapping[str, Sequence[Optional[float]]], excluded: Sequence[str] = EXCLUDED_FROM_AVERAGE
) -> AucReport:
    """Summarize per-resample AUCs.

    Undefined AUCs (None) are left out of their finding's mean and counted in
    n_valid. The AVG mean is the mean of the per-finding means over the
    findings not excluded; its SD is taken over per-resample averages of
    resamples where all those findings are defined.

    Args:
        aucs: finding -> AUC per resample (None where undefined)
        excluded: Findings left out of the AVG row

    Returns:
        AucReport
    """
    findings = {
        name: _summarize([v for v in values if v is not None]) for name, values in aucs.items()
    }
    included = [n for n in aucs if n not in excluded and findings[n].mean is not None]
    if not included:
        return AucReport(findings, AucSummary(None, None, 0), tuple(excluded))
    n_resamples = max(len(aucs[n]) for n in included)
    per_resample = []
    for r in range(n_resamples):
        values = [aucs[n][r] if r < len(aucs[n]) else None for n in included]
        if all(v is not None for v in values):
            per_resample.append(float(np.mean(values)))
    mean = float(np.mean([findings[n].mean for n in included]))
    sd = float(np.std(per_resample, ddof=1)) if len(per_resample) >= 2 else None
    return AucReport(findings, AucSummary(mean, sd, len(per_resample)), tuple(excluded))


def pearson(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Product-moment correlation.

    Raises:
        UndefinedMetricError: On zero variance in either input
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ShapeError("pearson needs two vectors of equal length >= 2")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedMetricError("Correlation undefined for zero variance")
    return float(np.clip(stats.pearsonr(x, y).statistic, -1.0, 1.0))


def _check_aligned(preds: Sequence[PredictionMatrix]) -> None:
    first = preds[0]
    for p in preds[1:]:
        if p.sample_ids != first.sample_ids or p.scores.shape != first.scores.shape:
            raise ShapeError(
                f"Prediction matrices {first.provenance.model_id!r} and "
                f"{p.provenance.model_id!r} are not aligned"
            )


def _pairwise(vectors: Sequence[np.ndarray]) -> np.ndarray:
    k = len(vectors)
    matrix = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            try:
                r = pearson(vectors[i], vectors[j])
            except UndefinedMetricError:
                r = np.nan
            matrix[i, j] = matrix[j, i] = r
    return matrix


def correlation_matrix(preds: Sequence[PredictionMatrix]) -> np.ndarray:
    """Pairwise Pearson coefficients of the row-major flattened predictions.

    Undefined cells are NaN.
    """
    if not preds:
        raise ShapeError("correlation_matrix needs at least one prediction matrix")
    _check_aligned(preds)
    return _pairwise([p.scores.ravel() for p in preds])


def per_finding_correlation(preds: Sequence[PredictionMatrix]) -> dict[str, np.ndarray]:
    """One correlation matrix per finding column."""
    if not preds:
        raise ShapeError("per_finding_correlation needs at least one prediction matrix")
    _check_aligned(preds)
    return {
        name: _pairwise([p.scores[:, j] for p in preds]) for j, name in enumerate(preds[0].columns)
    }


def mean_off_diagonal(matrix: np.ndarray) -> float:
    """Mean of the finite off-diagonal entries."""
    mask = ~np.eye(matrix.shape[0], dtype=bool) & np.isfinite(matrix)
    return float(matrix[mask].mean()) if mask.any() else float("nan")


def correlation_frame(matrix: np.ndarray, labels: Sequence[str]) -> pd.DataFrame:
    """Correlation matrix scaled by 100 with labelled rows and columns."""
    return pd.DataFrame(matrix * CORRELATION_SCALE, index=list(labels), columns=list(labels))


def write_correlation_csv(matrix: np.ndarray, labels: Sequence[str], path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# Pearson correlation x {CORRELATION_SCALE:g}\n")
        correlation_frame(matrix, labels).to_csv(fh, float_format="%.6f", lineterminator="\n")


def read_correlation_csv(path: Path | str) -> pd.DataFrame:
    """Read a matrix written by write_correlation_csv (values stay x100)."""
    return pd.read_csv(path, comment="#", index_col=0)


def ensemble_average(
    preds: Sequence[PredictionMatrix], variant: str = "ensemble"
) -> PredictionMatrix:
    """Element-wise mean of aligned prediction matrices.

    Members are summed in sorted provenance order, so the result does not
    depend on the order they are passed in.

    Raises:
        EnsembleError: With fewer than two members
        ShapeError: If ids or shapes differ
    """
    if len(preds) < 2:
        raise EnsembleError("An ensemble needs at least two members")
    _check_aligned(preds)
    ordered = sorted(preds, key=lambda p: (p.provenance.key(), p.scores.tobytes()))
    total = np.zeros_like(ordered[0].scores)
    for p in ordered:
        total = total + p.scores
    mean = total / len(ordered)
    members = tuple(p.provenance.model_id for p in ordered)
    provenance = Provenance(
        variant, ordered[0].provenance.resample, f"{variant}[{'+'.join(members)}]", members
    )
    return PredictionMatrix(ordered[0].sample_ids, mean, provenance, ordered[0].columns)


def relative_change(before: float, after: float) -> float:
    """Relative change in percent."""
    if before == 0:
        raise UndefinedMetricError("Relative change from zero is undefined")
    return 100.0 * (after - before) / before


def auc_table(reports: Mapping[str, AucReport]) -> pd.DataFrame:
    """Findings (plus AVG) by experiment, with mean, sd and n_valid columns."""
    columns: dict[str, list[Optional[float]]] = {}
    index: list[str] = []
    for experiment, report in reports.items():
        rows = report.rows()
        index = list(rows)
        columns[f"{experiment}_mean"] = [s.mean for s in rows.values()]
        columns[f"{experiment}_sd"] = [s.sd for s in rows.values()]
        columns[f"{experiment}_n_valid"] = [s.n_valid for s in rows.values()]
    frame = pd.DataFrame(columns, index=pd.Index(index, name="finding"))
    return frame


def write_auc_table(reports: Mapping[str, AucReport], path: Path | str) -> None:
    auc_table(reports).to_csv(path, float_format="%.6f", lineterminator="\n")
