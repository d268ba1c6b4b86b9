"""Training-time augmentation and deterministic test-time transforms."""

import math
from dataclasses import dataclass

import numpy as np
import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator

from cxr_preproc import imaging
from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.imaging import BoundingBox
from cxr_preproc.imaging import Image

logger = structlog.get_logger(__name__)

PATCH_RETRIES = 10

Rng = np.random.Generator


class AugmentError(CxrPreprocError, ValueError):
    """Exception raised for transform requests that cannot be satisfied."""

    pass


class AugConfig(BaseModel):
    """Augmentation and test-time transform parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    area_min: float = Field(default=0.8, gt=0.0, le=1.0)
    area_max: float = Field(default=1.0, gt=0.0, le=1.0)
    aspect_min: float = Field(default=3.0 / 4.0, gt=0.0)
    aspect_max: float = Field(default=4.0 / 3.0, gt=0.0)
    flip_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    max_rotation: float = Field(default=7.0, ge=0.0, le=45.0)
    train_size: int = Field(default=56, ge=1)
    test_size: int = Field(default=64, ge=1)
    crop_size: int = Field(default=56, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "AugConfig":
        if self.area_min > self.area_max:
            raise ValueError("area_min must not exceed area_max")
        if self.aspect_min > self.aspect_max:
            raise ValueError("aspect_min must not exceed aspect_max")
        return self


def make_rng(seed: int, *stream: int) -> Rng:
    """PCG64 generator for a seed and a stream path such as (epoch, sample)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


@dataclass(frozen=True)
class PatchGeometry:
    """Outcome of one patch draw."""

    box: BoundingBox
    area_fraction: float
    aspect: float
    fallback: bool


@dataclass(frozen=True)
class AugmentParams:
    """All random decisions for one augmented sample."""

    patch: PatchGeometry
    flip: bool
    angle: float


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def sample_patch(width: int, height: int, rng: Rng, cfg: AugConfig) -> PatchGeometry:
    """Draw a patch with uniform area fraction and log-uniform aspect ratio.

    The patch is clamped to the image; draws that round to an empty side are
    retried, and after ten such draws the full image is used.
    """
    area = width * height
    log_lo, log_hi = math.log(cfg.aspect_min), math.log(cfg.aspect_max)
    a = r = 1.0
    for _ in range(PATCH_RETRIES):
        a = float(rng.uniform(cfg.area_min, cfg.area_max))
        r = math.exp(float(rng.uniform(log_lo, log_hi)))
        w = min(_round_half_up(math.sqrt(a * area * r)), width)
        h = min(_round_half_up(math.sqrt(a * area / r)), height)
        if w >= 1 and h >= 1:
            x0 = int(rng.integers(0, width - w + 1))
            y0 = int(rng.integers(0, height - h + 1))
            return PatchGeometry(BoundingBox(x0, y0, x0 + w, y0 + h), a, r, False)
    logger.debug("Patch draw fell back to the full image", width=width, height=height)
    return PatchGeometry(BoundingBox.full(width, height), a, r, True)


def random_patch(img: Image, rng: Rng, cfg: AugConfig) -> Image:
    """Crop a random patch covering area_min..area_max of the image area."""
    return imaging.crop(img, sample_patch(img.width, img.height, rng, cfg).box)


def sample_augmentation(width: int, height: int, rng: Rng, cfg: AugConfig) -> AugmentParams:
    """Draw patch, flip and rotation; the draw count never depends on outcomes."""
    patch = sample_patch(width, height, rng, cfg)
    flip = bool(rng.random() < cfg.flip_prob)
    angle = float(rng.uniform(-cfg.max_rotation, cfg.max_rotation))
    return AugmentParams(patch, flip, angle)


def apply_augmentation(img: Image, params: AugmentParams, cfg: AugConfig) -> Image:
    """Patch, resize to train_size, optional flip, then rotate."""
    out = imaging.crop(img, params.patch.box)
    out = imaging.resize(out, cfg.train_size, cfg.train_size)
    if params.flip:
        out = imaging.horizontal_flip(out)
    return imaging.rotate(out, params.angle)


def augment(img: Image, rng: Rng, cfg: AugConfig) -> Image:
    """Stochastic training transform.

    Args:
        img: Variant image of any size
        rng: Per-sample generator
        cfg: Augmentation parameters

    Returns:
        train_size x train_size image
    """
    return apply_augmentation(img, sample_augmentation(img.width, img.height, rng, cfg), cfg)


def test_transform(img: Image, cfg: AugConfig) -> tuple[Image, ...]:
    """Resize to test_size and cut the five crops (TL, TR, BL, BR, C).

    Raises:
        AugmentError: If crop_size exceeds test_size
    """
    if cfg.crop_size > cfg.test_size:
        raise AugmentError(f"crop_size {cfg.crop_size} exceeds test_size {cfg.test_size}")
    resized = imaging.resize(img, cfg.test_size, cfg.test_size)
    return imaging.five_crop(resized, cfg.crop_size)


# Not a pytest test function.
test_transform.__test__ = False  # type: ignore[attr-defined]


def validation_transform(img: Image, cfg: AugConfig) -> Image:
    """Deterministic resize to the model input used for validation loss."""
    return imaging.resize(img, cfg.train_size, cfg.train_size)
