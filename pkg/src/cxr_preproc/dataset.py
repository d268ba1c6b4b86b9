"""Label ingestion, split planning and pre-processing variant management."""

import hashlib
import os
import tempfile
from collections.abc import Callable
from collections.abc import Iterable
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Optional

import numpy as np
import pandas as pd
import structlog
import yaml
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator
from tenacity import retry
from tenacity import retry_if_exception_type
from tenacity import stop_after_attempt
from tenacity import wait_exponential

from cxr_preproc import imaging
from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.imaging import BoundingBox
from cxr_preproc.imaging import Image
from cxr_preproc.imaging import SegmentationError
from cxr_preproc.utils.validators import DataValidationError
from cxr_preproc.utils.validators import find_duplicates
from cxr_preproc.utils.validators import parse_binary_cell

logger = structlog.get_logger(__name__)

SPLIT_PLAN_VERSION = 1
IMAGE_SUFFIXES = (".pgm", ".png", ".tif", ".tiff")


class LabelFormatError(CxrPreprocError):
    """Exception raised for malformed label files."""

    pass


class SplitError(CxrPreprocError, ValueError):
    """Exception raised for invalid split requests or split files."""

    pass


class CacheError(CxrPreprocError):
    """Exception raised for unusable cache entries."""

    pass


class Finding(str, Enum):
    """The eight annotated findings; member order is the column order."""

    PLEURAL_EFFUSION = "pleural_effusion"
    INFILTRATE = "infiltrate"
    CONGESTION = "congestion"
    ATELECTASIS = "atelectasis"
    PNEUMOTHORAX = "pneumothorax"
    CARDIOMEGALY = "cardiomegaly"
    MASS = "mass"
    FOREIGN_OBJECT = "foreign_object"


FINDINGS: tuple[Finding, ...] = tuple(Finding)
LABEL_COLUMNS: tuple[str, ...] = ("id", *(f.value for f in FINDINGS))

# Positive counts of the 3125-study Indiana revision.
INDIANA_STUDY_COUNT = 3125
INDIANA_POSITIVE_COUNTS: dict[Finding, int] = {
    Finding.PLEURAL_EFFUSION: 147,
    Finding.INFILTRATE: 152,
    Finding.CONGESTION: 170,
    Finding.ATELECTASIS: 212,
    Finding.PNEUMOTHORAX: 11,
    Finding.CARDIOMEGALY: 529,
    Finding.MASS: 447,
    Finding.FOREIGN_OBJECT: 1121,
}


class Variant(str, Enum):
    """Image versions a model can be trained on."""

    NORMAL = "normal"
    BONE_SUPPRESSED = "bone_suppressed"
    LUNG_CROPPED = "lung_cropped"
    COMBINED = "combined"


@dataclass(frozen=True, eq=False)
class LabelTable:
    """Binary finding matrix with one row per sample."""

    sample_ids: tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self) -> None:
        ids = tuple(str(i) for i in self.sample_ids)
        labels = np.array(self.labels, dtype=np.uint8, copy=True)
        if labels.ndim != 2 or labels.shape != (len(ids), len(FINDINGS)):
            raise LabelFormatError(
                f"Label matrix shape {labels.shape} does not match {len(ids)} ids"
            )
        if np.any(labels > 1):
            raise LabelFormatError("Labels must be binary")
        duplicates = find_duplicates(ids)
        if duplicates:
            raise LabelFormatError(f"Duplicate sample id {duplicates[0]!r}")
        labels.setflags(write=False)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {sid: i for i, sid in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.sample_ids)

    def column(self, finding: Finding) -> np.ndarray:
        """Labels of one finding."""
        return self.labels[:, FINDINGS.index(Finding(finding))]

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        """Label rows for the given ids, in the given order."""
        index: dict[str, int] = self._index  # type: ignore[attr-defined]
        try:
            return self.labels[[index[i] for i in ids]]
        except KeyError as e:
            raise LabelFormatError(f"Unknown sample id {e.args[0]!r}") from e

    def to_csv(self, path: Path | str) -> None:
        """Write the table in the label CSV schema."""
        frame = pd.DataFrame(self.labels, columns=LABEL_COLUMNS[1:])
        frame.insert(0, "id", list(self.sample_ids))
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def load_labels(path: Path | str) -> LabelTable:
    """Load a label CSV strictly.

    Args:
        path: CSV with header ``id,<eight findings>``

    Returns:
        Parsed label table

    Raises:
        LabelFormatError: On unreadable files, missing or unexpected columns,
            duplicate ids or cells other than 0/1
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise LabelFormatError(f"Cannot read label file {path}: {e}") from e

    missing = [c for c in LABEL_COLUMNS if c not in frame.columns]
    if missing:
        raise LabelFormatError(f"Missing column(s) in {path}: {', '.join(missing)}")
    unexpected = [c for c in frame.columns if c not in LABEL_COLUMNS]
    if unexpected:
        raise LabelFormatError(f"Unexpected column(s) in {path}: {', '.join(unexpected)}")

    ids = frame["id"].tolist()
    if any(not sid for sid in ids):
        raise LabelFormatError(f"Empty sample id in {path}")
    duplicates = find_duplicates(ids)
    if duplicates:
        raise LabelFormatError(f"Duplicate sample id {duplicates[0]!r} in {path}")

    cells = frame[list(LABEL_COLUMNS[1:])].to_numpy(dtype=object)
    invalid = ~np.isin(cells, ["0", "1"])
    if invalid.any():
        row, col = np.argwhere(invalid)[0]
        try:
            parse_binary_cell(cells[row, col], ids[row], LABEL_COLUMNS[1 + col])
        except DataValidationError as e:
            raise LabelFormatError(str(e)) from e

    table = LabelTable(tuple(ids), (cells == "1").astype(np.uint8))
    logger.info("Labels loaded", path=str(path), samples=len(table))
    return table


def prevalence(table: LabelTable, finding: Finding) -> float:
    """Fraction of samples positive for a finding.

    Raises:
        LabelFormatError: If the table is empty
    """
    if len(table) == 0:
        raise LabelFormatError("Prevalence of an empty table is undefined")
    return float(table.column(finding).sum()) / len(table)


def prevalence_table(table: LabelTable) -> pd.DataFrame:
    """Positive and negative counts plus prevalence in percent, per finding."""
    positives = [int(table.column(f).sum()) for f in FINDINGS]
    return pd.DataFrame(
        {
            "positive": positives,
            "negative": [len(table) - p for p in positives],
            "prevalence_pct": [100.0 * prevalence(table, f) for f in FINDINGS],
        },
        index=pd.Index([f.value for f in FINDINGS], name="finding"),
    )


def synthesize_labels(
    counts: Mapping[Finding, int], n: int, seed: int, prefix: str = "img"
) -> LabelTable:
    """Label table with exact marginal counts and independent co-occurrence.

    Each finding's positives are a uniform sample without replacement, drawn
    from its own generator stream.

    Args:
        counts: Positive count per finding (missing findings get 0)
        n: Number of samples
        seed: Generator seed
        prefix: Sample id prefix

    Returns:
        Synthetic label table
    """
    width = max(4, len(str(n)))
    ids = tuple(f"{prefix}{i + 1:0{width}d}" for i in range(n))
    labels = np.zeros((n, len(FINDINGS)), dtype=np.uint8)
    for k, finding in enumerate(FINDINGS):
        count = int(counts.get(finding, 0))
        if not 0 <= count <= n:
            raise LabelFormatError(f"Count {count} for {finding.value} outside [0, {n}]")
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        labels[rng.choice(n, size=count, replace=False), k] = 1
    return LabelTable(ids, labels)


class SplitConfig(BaseModel):
    """Resampling protocol settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_resamples: int = Field(default=5, ge=1)
    train_frac: float = Field(default=0.7, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


@dataclass(frozen=True)
class Resample:
    """One train/test partition; ids keep the order of the source id list."""

    index: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


@dataclass(frozen=True)
class SplitPlan:
    """Independent train/test partitions of the same id list."""

    seed: int
    train_frac: float
    resamples: tuple[Resample, ...]

    @property
    def n_resamples(self) -> int:
        return len(self.resamples)

    def save(self, path: Path | str) -> None:
        """Write the plan as versioned YAML."""
        payload = {
            "version": SPLIT_PLAN_VERSION,
            "seed": self.seed,
            "train_frac": self.train_frac,
            "test_frac": round(1.0 - self.train_frac, 12),
            "n_resamples": self.n_resamples,
            "resamples": [
                {"index": r.index, "train": list(r.train_ids), "test": list(r.test_ids)}
                for r in self.resamples
            ],
        }
        Path(path).write_text(yaml.safe_dump(payload, sort_keys=False), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "SplitPlan":
        """Read a plan written by save.

        Raises:
            SplitError: On unreadable files or an unknown version
        """
        try:
            payload: dict[str, Any] = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
            if payload.get("version") != SPLIT_PLAN_VERSION:
                raise SplitError(f"Unsupported split plan version {payload.get('version')!r}")
            resamples = tuple(
                Resample(int(r["index"]), tuple(r["train"]), tuple(r["test"]))
                for r in payload["resamples"]
            )
            return cls(int(payload["seed"]), float(payload["train_frac"]), resamples)
        except (OSError, yaml.YAMLError, KeyError, TypeError, AttributeError) as e:
            raise SplitError(f"Cannot read split plan {path}: {e}") from e


def make_splits(
    ids: Sequence[str], n_resamples: int = 5, train_frac: float = 0.7, seed: int = 0
) -> SplitPlan:
    """Unstratified resampling into train and test partitions.

    Resample r shuffles with a PCG64 generator seeded by (seed, r); the first
    round(train_frac * n) shuffled ids form the training set.

    Args:
        ids: Unique sample identifiers
        n_resamples: Number of independent partitions
        train_frac: Training fraction in (0, 1)
        seed: Non-negative base seed

    Returns:
        Reproducible split plan

    Raises:
        SplitError: On fewer than two ids, duplicates or train_frac outside (0, 1)
    """
    ids = tuple(ids)
    n = len(ids)
    if n < 2:
        raise SplitError("At least two ids are required to split")
    if not 0.0 < train_frac < 1.0:
        raise SplitError(f"train_frac must be in (0, 1), got {train_frac}")
    if find_duplicates(ids):
        raise SplitError("Sample ids must be unique")
    n_train = min(max(int(np.floor(train_frac * n + 0.5)), 1), n - 1)

    resamples = []
    for r in range(n_resamples):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, r])))
        permutation = rng.permutation(n)
        train_idx = np.sort(permutation[:n_train])
        test_idx = np.sort(permutation[n_train:])
        resamples.append(
            Resample(r, tuple(ids[i] for i in train_idx), tuple(ids[i] for i in test_idx))
        )
    logger.debug("Split plan created", samples=n, train=n_train, resamples=n_resamples)
    return SplitPlan(seed, train_frac, tuple(resamples))


class PreprocessConfig(BaseModel):
    """Settings of the two pre-processing operators."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    bone_strength: float = Field(default=1.0, ge=0.0, le=1.0)
    sigma1: float = Field(default=2.0, gt=0.0)
    sigma2: float = Field(default=8.0, gt=0.0)
    lung_border: int = Field(default=100, ge=0)
    min_region_fraction: float = Field(default=0.005, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_sigmas(self) -> "PreprocessConfig":
        if self.sigma1 >= self.sigma2:
            raise ValueError("sigma1 must be smaller than sigma2")
        return self


@dataclass(frozen=True)
class PreprocessingOps:
    """Operator handles used to build variants.

    The bundled suppression and segmentation functions are proxies; any
    callables with the same signatures can be dropped in.
    """

    strength: float = 1.0
    sigma1: float = 2.0
    sigma2: float = 8.0
    border: int = 100
    min_region_fraction: float = 0.005
    suppress: Callable[..., Image] = field(default=imaging.suppress_bones)
    segment: Callable[..., imaging.Mask] = field(default=imaging.segment_lung_fields)

    @classmethod
    def from_config(cls, config: PreprocessConfig) -> "PreprocessingOps":
        return cls(
            strength=config.bone_strength,
            sigma1=config.sigma1,
            sigma2=config.sigma2,
            border=config.lung_border,
            min_region_fraction=config.min_region_fraction,
        )

    def suppress_bones(self, img: Image) -> Image:
        return self.suppress(img, self.strength, self.sigma1, self.sigma2)

    def lung_box(self, img: Image) -> BoundingBox:
        mask = self.segment(img, self.min_region_fraction)
        return imaging.lung_bounding_box(mask, self.border)


def materialize_with_status(
    img: Image, variant: Variant, ops: PreprocessingOps
) -> tuple[Image, bool]:
    """Build a variant and report whether the segmentation fallback was used."""
    variant = Variant(variant)
    if variant is Variant.NORMAL:
        return Image(img.pixels), False
    source = img
    if variant in (Variant.BONE_SUPPRESSED, Variant.COMBINED):
        source = ops.suppress_bones(img)
        if variant is Variant.BONE_SUPPRESSED:
            return source, False
    try:
        box = ops.lung_box(source)
    except SegmentationError as e:
        logger.warning(
            "Segmentation failed, using uncropped image",
            variant=variant.value,
            error=str(e),
        )
        return source, True
    return imaging.crop(source, box), False


def materialize_variant(img: Image, variant: Variant, ops: PreprocessingOps) -> Image:
    """Build one of the four image versions.

    normal is the identity, bone_suppressed applies suppression, lung_cropped
    crops to the lung box and combined suppresses before cropping. A failed
    segmentation falls back to the uncropped image with a warning.

    Args:
        img: Loaded radiograph
        variant: Requested version
        ops: Operator handles

    Returns:
        Variant image
    """
    return materialize_with_status(img, variant, ops)[0]


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.1, min=0.1, max=1),
    reraise=True,
)
def _replace(source: Path, target: Path) -> None:
    os.replace(source, target)


class VariantCache:
    """On-disk variant store keyed by sample id, variant and operator hash."""

    def __init__(self, root: Path | str, ops_hash: str) -> None:
        self.root = Path(root) / ops_hash[:16]
        self.ops_hash = ops_hash

    def path_for(self, sample_id: str, variant: Variant) -> Path:
        if not sample_id or os.sep in sample_id or sample_id.startswith("."):
            raise CacheError(f"Sample id {sample_id!r} is not usable as a file name")
        return self.root / Variant(variant).value / f"{sample_id}.npy"

    def has(self, sample_id: str, variant: Variant) -> bool:
        return self.path_for(sample_id, variant).is_file()

    def load(self, sample_id: str, variant: Variant) -> Image:
        """Read a cached variant.

        Raises:
            CacheError: If the entry is missing or unreadable
        """
        path = self.path_for(sample_id, variant)
        try:
            return Image(np.load(path, allow_pickle=False))
        except (OSError, ValueError) as e:
            raise CacheError(f"Cannot read cache entry {path}: {e}") from e

    def store(self, sample_id: str, variant: Variant, img: Image) -> Path:
        """Write a variant atomically (temp file, then rename into place)."""
        target = self.path_for(sample_id, variant)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.save(fh, np.ascontiguousarray(img.pixels), allow_pickle=False)
            _replace(Path(tmp_name), target)
        except OSError as e:
            Path(tmp_name).unlink(missing_ok=True)
            raise CacheError(f"Cannot write cache entry {target}: {e}") from e
        return target

    def missing(
        self, sample_ids: Iterable[str], variants: Iterable[Variant]
    ) -> list[tuple[str, Variant]]:
        """Entries not yet materialized."""
        variants = list(variants)
        return [(sid, v) for sid in sample_ids for v in variants if not self.has(sid, v)]


def resolve_image(image_dir: Path, sample_id: str) -> Optional[Path]:
    """First existing image file for sample_id, trying each supported suffix."""
    for suffix in IMAGE_SUFFIXES:
        candidate = image_dir / f"{sample_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def _sha256(path: Path) -> str:
    with path.open("rb") as fh:
        if hasattr(hashlib, "file_digest"):
            return hashlib.file_digest(fh, "sha256").hexdigest()
        # Python < 3.11 fallback; yields the identical digest.
        digest = hashlib.sha256()
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
        return digest.hexdigest()


@dataclass(frozen=True)
class InputDigest:
    """Content digests of the label file and of the images it references."""

    labels: str
    images: str


def digest_inputs(label_file: Path, image_dir: Path, sample_ids: Sequence[str]) -> InputDigest:
    """Hash the label file and every referenced image by content.

    Missing or unreadable images contribute a marker instead of their bytes, so
    supplying them later changes the image digest.

    Raises:
        LabelFormatError: If the label file cannot be read
    """
    try:
        labels = _sha256(label_file)
    except OSError as e:
        raise LabelFormatError(f"Cannot read label file {label_file}: {e}") from e
    images = hashlib.sha256()
    for sample_id in sample_ids:
        path = resolve_image(image_dir, sample_id)
        entry = "missing"
        if path is not None:
            try:
                entry = f"{path.suffix}:{_sha256(path)}"
            except OSError:
                entry = "unreadable"
        images.update(f"{sample_id}\t{entry}\n".encode("utf-8"))
    return InputDigest(labels, images.hexdigest())
