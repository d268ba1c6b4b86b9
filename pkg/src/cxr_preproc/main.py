"""Command line entry point and experiment orchestration."""

import argparse
import functools
import sys
import time
from collections.abc import Callable
from collections.abc import Iterable
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from datetime import datetime
from datetime import timezone
from pathlib import Path
from typing import Any
from typing import Optional
from typing import TypeVar

import pandas as pd
import structlog
import yaml
from pydantic import BaseModel

from cxr_preproc import __version__
from cxr_preproc.config import MAX_ENSEMBLE_MEMBERS
from cxr_preproc.config import SINGLE_EXPERIMENT_VARIANTS
from cxr_preproc.config import Experiment
from cxr_preproc.config import PipelineConfig
from cxr_preproc.config import config_hash
from cxr_preproc.config import load_pipeline_config
from cxr_preproc.config import parse_pipeline_config
from cxr_preproc.config import settings
from cxr_preproc.dataset import FINDINGS
from cxr_preproc.dataset import InputDigest
from cxr_preproc.dataset import LabelTable
from cxr_preproc.dataset import PreprocessingOps
from cxr_preproc.dataset import Resample
from cxr_preproc.dataset import SplitPlan
from cxr_preproc.dataset import Variant
from cxr_preproc.dataset import VariantCache
from cxr_preproc.dataset import digest_inputs
from cxr_preproc.dataset import load_labels
from cxr_preproc.dataset import make_splits
from cxr_preproc.dataset import materialize_with_status
from cxr_preproc.dataset import prevalence_table
from cxr_preproc.dataset import resolve_image
from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.errors import ExitCode
from cxr_preproc.evaluation import AucReport
from cxr_preproc.evaluation import PredictionMatrix
from cxr_preproc.evaluation import Provenance
from cxr_preproc.evaluation import UndefinedMetricError
from cxr_preproc.evaluation import aggregate
from cxr_preproc.evaluation import auc
from cxr_preproc.evaluation import correlation_matrix
from cxr_preproc.evaluation import ensemble_average
from cxr_preproc.evaluation import mean_off_diagonal
from cxr_preproc.evaluation import per_finding_correlation
from cxr_preproc.evaluation import relative_change
from cxr_preproc.evaluation import roc_curve
from cxr_preproc.evaluation import write_auc_table
from cxr_preproc.evaluation import write_correlation_csv
from cxr_preproc.imaging import load_image
from cxr_preproc.model import ModelConfig
from cxr_preproc.model import TrainConfig
from cxr_preproc.model import TrainingData
from cxr_preproc.model import TrainingLog
from cxr_preproc.model import average_validation_loss
from cxr_preproc.model import predict_matrix
from cxr_preproc.model import save_checkpoint
from cxr_preproc.model import train
from cxr_preproc.report import PLOT_DIR
from cxr_preproc.report import ReportSummary
from cxr_preproc.report import render_report
from cxr_preproc.synthetic import SyntheticConfig
from cxr_preproc.synthetic import generate_corpus
from cxr_preproc.utils.logging import LoggerMixin
from cxr_preproc.utils.logging import log_data_operation
from cxr_preproc.utils.logging import log_error_with_context
from cxr_preproc.utils.logging import log_execution_time
from cxr_preproc.utils.logging import setup_logging

logger = structlog.get_logger(__name__)

R = TypeVar("R")

# Seed offsets of different variants never collide with ensemble members.
VARIANT_SEED_STRIDE = 10 * MAX_ENSEMBLE_MEMBERS


class PipelineError(CxrPreprocError):
    """Exception raised during pipeline execution."""

    pass


class JobRecord(BaseModel):
    """Artifacts of one trained model; written last, so it marks completion."""

    key: str
    variant: Variant
    member: int
    resample: int
    config_hash: str
    checksum: str
    checkpoint: str
    predictions: str
    training_log: str
    started_at: datetime
    finished_at: datetime


class ResampleRecord(BaseModel):
    resample: int
    model_checksums: dict[str, str]
    prediction_file: str
    aucs: dict[str, Optional[float]]


class ExperimentRecord(BaseModel):
    """Per-experiment outcome across resamples."""

    experiment: Experiment
    config_hash: str
    resamples: list[ResampleRecord]
    started_at: datetime
    finished_at: datetime


@dataclass(frozen=True, order=True)
class ModelJob:
    """One model to train: image variant, ensemble member and resample."""

    variant: Variant
    member: int
    resample: int

    @property
    def model_id(self) -> str:
        return f"{self.variant.value}-m{self.member}"

    @property
    def key(self) -> str:
        return f"{self.model_id}-r{self.resample}"

    @property
    def seed_offset(self) -> int:
        """Shift applied to the model and training seeds; unique per resample."""
        return VARIANT_SEED_STRIDE * list(Variant).index(self.variant) + self.member

    def seeded_configs(self, config: PipelineConfig) -> tuple[ModelConfig, TrainConfig]:
        """Architecture and optimizer settings with this job's seeds."""
        offset = self.seed_offset
        mc = config.model.model_copy(update={"seed": config.model.seed + offset})
        tc = config.train.model_copy(update={"seed": config.train.seed + offset})
        return mc, tc


@dataclass
class SampleOutcome:
    sample_id: str
    computed: int = 0
    cached: int = 0
    fallbacks: int = 0
    error: Optional[str] = None


@dataclass
class PreprocessSummary:
    samples: int = 0
    computed: int = 0
    cached: int = 0
    fallbacks: int = 0
    failures: list[str] = field(default_factory=list)
    execution_time_seconds: float = 0.0


@dataclass
class RunSummary:
    run_dir: Path
    jobs_trained: int
    jobs_reused: int
    reports: dict[str, AucReport]
    execution_time_seconds: float = 0.0


def variant_cache(config: PipelineConfig, images: Optional[str] = None) -> VariantCache:
    """Variant cache keyed by the pre-processing settings and the image digest."""
    payload: dict[str, Any] = config.preprocessing.model_dump(mode="json")
    if images is not None:
        payload = {"preprocessing": payload, "images": images}
    return VariantCache(config.paths.cache_dir, config_hash(payload))


@dataclass(frozen=True)
class JobContext:
    """Everything a training worker needs besides the job and its split."""

    config: PipelineConfig
    run_dir: Path
    cache: VariantCache
    experiment_hash: str


def _write_csv(frame: pd.DataFrame, path: Path, float_format: str = "%.17g") -> None:
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")


def _map(
    func: Callable[..., R], args: Sequence[tuple[Any, ...]], workers: int
) -> list[R]:
    # Results come back in submission order either way.
    if workers <= 1 or len(args) <= 1:
        return [func(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, *zip(*args)))


def preprocess_sample(
    sample_id: str, image_path: Optional[Path], cache: VariantCache, ops: PreprocessingOps
) -> SampleOutcome:
    """Materialize the missing variants of one sample."""
    outcome = SampleOutcome(sample_id)
    missing = [v for v in Variant if not cache.has(sample_id, v)]
    outcome.cached = len(Variant) - len(missing)
    if not missing:
        return outcome
    if image_path is None:
        outcome.error = "no image file"
        return outcome
    try:
        img = load_image(image_path)
        for variant in missing:
            result, fell_back = materialize_with_status(img, variant, ops)
            cache.store(sample_id, variant, result)
            outcome.computed += 1
            outcome.fallbacks += int(fell_back)
    except (CxrPreprocError, OSError) as e:
        outcome.error = str(e)
    return outcome


def execute_job(job: ModelJob, split: Resample, context: JobContext) -> JobRecord:
    """Train, predict and persist one model."""
    started = datetime.now(timezone.utc)
    config, run_dir = context.config, context.run_dir
    labels = load_labels(config.paths.label_file)
    ids = (*split.train_ids, *split.test_ids)
    images = {sid: context.cache.load(sid, job.variant) for sid in ids}
    mc, tc = job.seeded_configs(config)
    model, log = train(TrainingData(images, labels), split, tc, mc, config.augment)
    preds = predict_matrix(
        model,
        images,
        split.test_ids,
        config.augment,
        Provenance(job.variant.value, split.index, job.model_id),
    )

    paths = {name: run_dir / name for name in ("models", "logs", "predictions", "jobs")}
    for path in paths.values():
        path.mkdir(parents=True, exist_ok=True)
    checkpoint = paths["models"] / f"{job.key}.ckpt"
    checksum = save_checkpoint(model, checkpoint, tc)
    log.to_csv(paths["logs"] / f"{job.key}.csv")
    preds.to_csv(paths["predictions"] / f"{job.key}.csv")
    record = JobRecord(
        key=job.key,
        variant=job.variant,
        member=job.member,
        resample=job.resample,
        config_hash=context.experiment_hash,
        checksum=checksum,
        checkpoint=f"models/{job.key}.ckpt",
        predictions=f"predictions/{job.key}.csv",
        training_log=f"logs/{job.key}.csv",
        started_at=started,
        finished_at=datetime.now(timezone.utc),
    )
    (paths["jobs"] / f"{job.key}.json").write_text(
        record.model_dump_json(indent=2), encoding="utf-8"
    )
    return record


class ExperimentPipeline(LoggerMixin):
    """Pre-processing, training and evaluation of the experiment protocol."""

    def __init__(self, config: PipelineConfig, workers: Optional[int] = None) -> None:
        self.config = config
        self.workers = workers or settings.workers

    @functools.cached_property
    def inputs(self) -> InputDigest:
        """Content digest of the label file and images, taken once per pipeline."""
        paths = self.config.paths
        table = load_labels(paths.label_file)
        return digest_inputs(paths.label_file, paths.image_dir, table.sample_ids)

    @functools.cached_property
    def experiment_hash(self) -> str:
        return self.config.experiment_hash(f"{self.inputs.labels}:{self.inputs.images}")

    @functools.cached_property
    def cache(self) -> VariantCache:
        return variant_cache(self.config, self.inputs.images)

    @property
    def run_dir(self) -> Path:
        return self.config.paths.output_dir / f"run-{self.experiment_hash[:12]}"

    @log_execution_time("preprocess")
    def preprocess(self) -> PreprocessSummary:
        """Materialize all four variants of every labelled sample.

        Cache hits are skipped; unreadable images are listed and the run
        continues.
        """
        start = time.perf_counter()
        self.config.validate_paths()
        table = load_labels(self.config.paths.label_file)
        cache = self.cache
        ops = PreprocessingOps.from_config(self.config.preprocessing)
        args = [
            (sid, resolve_image(self.config.paths.image_dir, sid), cache, ops)
            for sid in table.sample_ids
        ]
        summary = PreprocessSummary(samples=len(args))
        for outcome in _map(preprocess_sample, args, self.workers):
            summary.computed += outcome.computed
            summary.cached += outcome.cached
            summary.fallbacks += outcome.fallbacks
            if outcome.error is not None:
                summary.failures.append(f"{outcome.sample_id}: {outcome.error}")
                self.logger.warning(
                    "Sample failed", sample_id=outcome.sample_id, error=outcome.error
                )
        summary.execution_time_seconds = round(time.perf_counter() - start, 2)
        log_data_operation(
            "preprocess",
            summary.samples,
            computed=summary.computed,
            cached=summary.cached,
            fallbacks=summary.fallbacks,
            failures=len(summary.failures),
        )
        return summary

    def plan(self, table: LabelTable) -> SplitPlan:
        splits = self.config.splits
        return make_splits(table.sample_ids, splits.n_resamples, splits.train_frac, splits.seed)

    def jobs(self, plan: SplitPlan) -> list[ModelJob]:
        """Distinct models required by the selected experiments."""
        jobs: set[ModelJob] = set()
        for r in range(plan.n_resamples):
            for experiment in self.config.experiments:
                if experiment in SINGLE_EXPERIMENT_VARIANTS:
                    jobs.add(ModelJob(SINGLE_EXPERIMENT_VARIANTS[experiment], 0, r))
                elif experiment is Experiment.EN_NORMAL:
                    members = range(self.config.en_normal_members)
                    jobs.update(ModelJob(Variant.NORMAL, m, r) for m in members)
                else:
                    jobs.update(ModelJob(v, 0, r) for v in SINGLE_EXPERIMENT_VARIANTS.values())
        return sorted(jobs, key=lambda j: (j.resample, list(Variant).index(j.variant), j.member))

    def _completed(self, job: ModelJob) -> Optional[JobRecord]:
        path = self.run_dir / "jobs" / f"{job.key}.json"
        if not path.is_file():
            return None
        try:
            record = JobRecord.model_validate_json(path.read_text(encoding="utf-8"))
        except ValueError:
            return None
        if record.config_hash != self.experiment_hash:
            return None
        if not (self.run_dir / record.predictions).is_file():
            return None
        return record

    def _check_cache(self, table: LabelTable) -> None:
        missing = self.cache.missing(table.sample_ids, self.config.required_variants())
        if missing:
            sid, variant = missing[0]
            raise PipelineError(
                f"Variant cache incomplete: {len(missing)} entries missing "
                f"(e.g. {sid}/{variant.value}). "
                "Run `cxr-preproc preprocess --config <file>` first."
            )

    @log_execution_time("run")
    def run(self) -> RunSummary:
        """Train every required model, then evaluate and write reports."""
        start = time.perf_counter()
        table = load_labels(self.config.paths.label_file)
        self._check_cache(table)
        run_dir = self.run_dir
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.yaml").write_text(self.config.to_yaml(), encoding="utf-8")
        plan = self.plan(table)
        plan.save(run_dir / "splits.yaml")

        jobs = self.jobs(plan)
        records: dict[ModelJob, JobRecord] = {}
        pending: list[ModelJob] = []
        for job in jobs:
            done = self._completed(job)
            if done is not None:
                records[job] = done
            else:
                pending.append(job)
        self.logger.info(
            "Jobs planned", total=len(jobs), pending=len(pending), run_dir=str(run_dir)
        )
        context = JobContext(self.config, run_dir, self.cache, self.experiment_hash)
        args = [(job, plan.resamples[job.resample], context) for job in pending]
        for job, record in zip(pending, _map(execute_job, args, self.workers)):
            records[job] = record
        log_data_operation("train", len(pending), reused=len(jobs) - len(pending))

        reports = self.evaluate(table, plan, records)
        return RunSummary(
            run_dir, len(pending), len(jobs) - len(pending), reports,
            round(time.perf_counter() - start, 2),
        )

    def _experiment_predictions(
        self, experiment: Experiment, r: int, preds: dict[ModelJob, PredictionMatrix]
    ) -> tuple[PredictionMatrix, list[ModelJob]]:
        if experiment in SINGLE_EXPERIMENT_VARIANTS:
            job = ModelJob(SINGLE_EXPERIMENT_VARIANTS[experiment], 0, r)
            p = preds[job]
            return p.relabel(Provenance(experiment.value, r, p.provenance.model_id)), [job]
        if experiment is Experiment.EN_NORMAL:
            members = [ModelJob(Variant.NORMAL, m, r) for m in range(self.config.en_normal_members)]
        else:
            members = [ModelJob(v, 0, r) for v in SINGLE_EXPERIMENT_VARIANTS.values()]
        return ensemble_average([preds[j] for j in members], experiment.value), members

    def evaluate(
        self, table: LabelTable, plan: SplitPlan, records: dict[ModelJob, JobRecord]
    ) -> dict[str, AucReport]:
        """Compute AUCs, correlations and losses from stored predictions."""
        run_dir = self.run_dir
        for name in ("roc", "correlation/per_finding", "experiments", "predictions"):
            (run_dir / name).mkdir(parents=True, exist_ok=True)
        preds = {
            job: PredictionMatrix.from_csv(run_dir / rec.predictions)
            for job, rec in records.items()
        }
        experiments = [e.value for e in self.config.experiments]
        aucs: dict[str, dict[str, list[Optional[float]]]] = {
            e: {f.value: [] for f in FINDINGS} for e in experiments
        }
        resample_records: dict[str, list[ResampleRecord]] = {e: [] for e in experiments}
        long_rows: list[dict[str, Any]] = []
        correlation_rows: list[dict[str, Any]] = []

        for resample in plan.resamples:
            r = resample.index
            for experiment in self.config.experiments:
                name = experiment.value
                matrix, members = self._experiment_predictions(experiment, r, preds)
                y = table.rows(matrix.sample_ids)
                per_finding: dict[str, Optional[float]] = {}
                for k, finding in enumerate(FINDINGS):
                    try:
                        curve = roc_curve(matrix.scores[:, k], y[:, k], finding.value)
                    except UndefinedMetricError as e:
                        self.logger.warning(
                            "AUC undefined", experiment=name, resample=r, error=str(e)
                        )
                        value = None
                    else:
                        value = auc(curve)
                        roc_file = run_dir / "roc" / f"{name}__{finding.value}__r{r}.csv"
                        _write_csv(curve.to_frame(), roc_file)
                    per_finding[finding.value] = value
                    aucs[name][finding.value].append(value)
                    long_rows.append(
                        {"experiment": name, "resample": r, "finding": finding.value, "auc": value}
                    )
                prediction_file = f"predictions/{name}__r{r}.csv"
                matrix.to_csv(run_dir / prediction_file)
                resample_records[name].append(
                    ResampleRecord(
                        resample=r,
                        model_checksums={j.model_id: records[j].checksum for j in members},
                        prediction_file=prediction_file,
                        aucs=per_finding,
                    )
                )
                if len(members) > 1:
                    mean_r = self._write_correlations(name, r, [preds[j] for j in members])
                    correlation_rows.append(
                        {"experiment": name, "resample": r, "mean_off_diagonal": mean_r}
                    )

        reports = {e: aggregate(aucs[e]) for e in experiments}
        write_auc_table(reports, run_dir / "auc_report.csv")
        (run_dir / "auc_report.yaml").write_text(
            yaml.safe_dump(
                {
                    e: {name: vars(s) for name, s in report.rows().items()}
                    for e, report in reports.items()
                },
                sort_keys=False,
            ),
            encoding="utf-8",
        )
        _write_csv(pd.DataFrame(long_rows), run_dir / "auc_per_resample.csv")
        if correlation_rows:
            _write_csv(pd.DataFrame(correlation_rows), run_dir / "correlation_summary.csv")
        self._write_relative_changes(reports)
        self._write_average_losses(records)
        self._write_experiment_records(resample_records, records)
        log_data_operation("evaluate", len(experiments), resamples=plan.n_resamples)
        return reports

    def _write_correlations(
        self, experiment: str, r: int, member_preds: list[PredictionMatrix]
    ) -> float:
        """Write the member correlation matrices; returns the mean off-diagonal."""
        directory = self.run_dir / "correlation"
        labels = [p.provenance.model_id for p in member_preds]
        matrix = correlation_matrix(member_preds)
        write_correlation_csv(matrix, labels, directory / f"{experiment}__r{r}.csv")
        for finding, m in per_finding_correlation(member_preds).items():
            path = directory / "per_finding" / f"{experiment}__{finding}__r{r}.csv"
            write_correlation_csv(m, labels, path)
        return mean_off_diagonal(matrix)

    def _write_relative_changes(self, reports: dict[str, AucReport]) -> None:
        baseline = reports.get(Experiment.NORMAL.value)
        if baseline is None:
            return
        rows = []
        for experiment, report in reports.items():
            if experiment == Experiment.NORMAL.value:
                continue
            for name, summary in report.rows().items():
                before = baseline.rows()[name].mean
                change = (
                    relative_change(before, summary.mean)
                    if before and summary.mean is not None
                    else None
                )
                rows.append({"experiment": experiment, "finding": name, "change_pct": change})
        if rows:
            _write_csv(pd.DataFrame(rows), self.run_dir / "relative_change.csv", "%.6f")

    def _write_average_losses(self, records: dict[ModelJob, JobRecord]) -> None:
        by_model: dict[str, list[TrainingLog]] = {}
        for job in sorted(records):
            log = TrainingLog.from_csv(self.run_dir / records[job].training_log)
            by_model.setdefault(job.model_id, []).append(log)
        for model_id, logs in by_model.items():
            frame = average_validation_loss(logs)
            path = self.run_dir / "logs" / f"average_val_loss__{model_id}.csv"
            _write_csv(frame, path, "%.10g")
            best = frame.loc[frame["mean_val_loss"].idxmin()]
            self.logger.info(
                "Cross-resample validation loss",
                model_id=model_id,
                best_epoch=int(best["epoch"]),
                mean_val_loss=float(best["mean_val_loss"]),
            )

    def _write_experiment_records(
        self, resample_records: dict[str, list[ResampleRecord]], records: dict[ModelJob, JobRecord]
    ) -> None:
        started = min(r.started_at for r in records.values())
        finished = max(r.finished_at for r in records.values())
        for experiment, rows in resample_records.items():
            record = ExperimentRecord(
                experiment=Experiment(experiment),
                config_hash=self.experiment_hash,
                resamples=rows,
                started_at=started,
                finished_at=finished,
            )
            (self.run_dir / "experiments" / f"{experiment}.json").write_text(
                record.model_dump_json(indent=2), encoding="utf-8"
            )


def cmd_preprocess(config: PipelineConfig, workers: Optional[int] = None) -> PreprocessSummary:
    """Materialize the variant cache and print a summary."""
    pipeline = ExperimentPipeline(config, workers)
    summary = pipeline.preprocess()
    table = load_labels(config.paths.label_file)

    print("\n🩻 Pre-processing finished")
    print(f"📦 Samples: {summary.samples}")
    print(f"🛠️  Computed variants: {summary.computed}")
    print(f"♻️  Cache hits: {summary.cached}")
    print(f"↩️  Segmentation fallbacks: {summary.fallbacks}")
    print(f"❌ Failures: {len(summary.failures)}")
    for failure in summary.failures:
        print(f"   - {failure}")
    print("\nLabel prevalence:")
    print(prevalence_table(table).to_string(float_format=lambda v: f"{v:.1f}"))
    return summary


def cmd_run(config: PipelineConfig, workers: Optional[int] = None) -> RunSummary:
    """Run the experiments and write reports, then render plots."""
    pipeline = ExperimentPipeline(config, workers)
    summary = pipeline.run()
    render_report(summary.run_dir)

    print("\n🎉 Experiments completed")
    print(f"📁 Run directory: {summary.run_dir}")
    print(f"🏋️  Models trained: {summary.jobs_trained}")
    print(f"♻️  Models reused: {summary.jobs_reused}")
    for experiment, report in summary.reports.items():
        mean = report.average.mean
        print(f"📊 {experiment}: AVG AUC {'n/a' if mean is None else f'{mean:.3f}'}")
    return summary


def cmd_report(output: Path) -> ReportSummary:
    """Render plots and the summary table for the newest run under output."""
    summary = render_report(output)
    if summary.summary_file is not None:
        print(summary.summary_file.read_text(encoding="utf-8"))
    n_plots = len(summary.roc_plots) + len(summary.correlation_plots)
    print(f"🗺️  Plots: {n_plots} SVG files in {summary.run_dir / PLOT_DIR}")
    return summary


def cmd_synthesize(output: Path, n_images: int, size: int, seed: int) -> LabelTable:
    """Write a synthetic corpus."""
    table = generate_corpus(output, SyntheticConfig(n_images=n_images, size=size, seed=seed))
    print(f"✅ Wrote {len(table)} synthetic images to {output}")
    return table


def cmd_validate(config_path: Path) -> PipelineConfig:
    """Load the config and check its paths."""
    config = load_pipeline_config(config_path)
    config.validate_paths()
    experiment_hash = ExperimentPipeline(config).experiment_hash
    print(f"✅ Configuration valid (experiment hash {experiment_hash[:12]})")
    return config


def _parse_experiments(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _load_config(path: Path, experiments: Optional[Iterable[str]] = None) -> PipelineConfig:
    config = load_pipeline_config(path)
    if experiments is not None:
        raw = config.model_dump(mode="json")
        raw["experiments"] = list(experiments)
        config = parse_pipeline_config(raw)
    config.validate_paths()
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cxr-preproc", description="Chest X-ray pre-processing experiments"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="Write a synthetic corpus")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--n", type=int, default=600, dest="n_images")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", help="Validate a pipeline config")
    p.add_argument("--config", type=Path, required=True)

    p = sub.add_parser("preprocess", help="Materialize the variant cache")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("run", help="Train and evaluate the experiments")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--experiments", type=_parse_experiments, default=None)

    p = sub.add_parser("report", help="Render plots and the summary table")
    p.add_argument("--output", type=Path, required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging()

    try:
        if args.command == "synthesize":
            cmd_synthesize(args.output, args.n_images, args.size, args.seed)
        elif args.command == "validate":
            cmd_validate(args.config)
        elif args.command == "preprocess":
            summary = cmd_preprocess(_load_config(args.config), args.workers)
            if summary.failures:
                return int(ExitCode.DATA)
        elif args.command == "run":
            cmd_run(_load_config(args.config, args.experiments), args.workers)
        elif args.command == "report":
            cmd_report(args.output)
    except CxrPreprocError as e:
        log_error_with_context(logger, e, {"command": args.command}, operation=args.command)
        print(f"\n❌ {args.command} failed: {e}")
        return int(e.exit_code)
    except KeyboardInterrupt:
        print(f"\n⚠️  {args.command} interrupted by user")
        return int(ExitCode.INTERRUPTED)
    return int(ExitCode.SUCCESS)


if __name__ == "__main__":
    sys.exit(main())
