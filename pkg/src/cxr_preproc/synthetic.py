"""Synthetic chest radiograph corpus for desk-scale runs.

Images show a bright body with two dark elliptical lung fields, sinusoidal
rib stripes and sensor noise. Findings leave simple imprints (bright mass
blobs, brighter lung bases, a widened heart, and so on). Mass-like distractor
blobs are scattered in the margins outside the lungs, so cropping to the
lung fields removes label-independent clutter.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field

from cxr_preproc import imaging
from cxr_preproc.augment import make_rng
from cxr_preproc.dataset import FINDINGS
from cxr_preproc.dataset import INDIANA_POSITIVE_COUNTS
from cxr_preproc.dataset import INDIANA_STUDY_COUNT
from cxr_preproc.dataset import Finding
from cxr_preproc.dataset import LabelTable
from cxr_preproc.dataset import synthesize_labels
from cxr_preproc.imaging import BoundingBox
from cxr_preproc.imaging import Image

logger = structlog.get_logger(__name__)

TISSUE = 0.72
LUNG = 0.28
HEART = 0.82
MASS_GAIN = 0.35
LABELS_FILE = "labels.csv"
IMAGE_DIR = "images"


class SyntheticConfig(BaseModel):
    """Corpus generation settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_images: int = Field(default=600, ge=2)
    size: int = Field(default=64, ge=32)
    seed: int = Field(default=0, ge=0)
    mass_prevalence: float = Field(default=0.15, ge=0.0, le=1.0)
    rib_period: float = Field(default=6.0, gt=0.0)
    rib_amplitude: float = Field(default=0.06, ge=0.0)
    noise_sigma: float = Field(default=0.02, ge=0.0)
    max_distractors: int = Field(default=2, ge=0)


@dataclass(frozen=True)
class Lung:
    cx: float
    cy: float
    ax: float
    ay: float

    def mask(self, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        return ((xx - self.cx) / self.ax) ** 2 + ((yy - self.cy) / self.ay) ** 2 <= 1.0


def finding_counts(cfg: SyntheticConfig) -> dict[Finding, int]:
    """Positive counts at the reference prevalences, with mass overridden."""
    counts = {
        f: int(np.floor(c / INDIANA_STUDY_COUNT * cfg.n_images + 0.5))
        for f, c in INDIANA_POSITIVE_COUNTS.items()
    }
    counts[Finding.MASS] = int(np.floor(cfg.mass_prevalence * cfg.n_images + 0.5))
    return counts


def _blob(canvas: np.ndarray, y: int, x: int, gain: float) -> None:
    # 3x3 blob with softened corners.
    kernel = gain * np.array([[0.5, 1.0, 0.5], [1.0, 1.0, 1.0], [0.5, 1.0, 0.5]])
    canvas[y - 1 : y + 2, x - 1 : x + 2] += kernel


def _point_in(
    rng: np.random.Generator,
    lung: Lung,
    yy: np.ndarray,
    xx: np.ndarray,
    shrink: float = 0.7,
) -> tuple[int, int]:
    inner = Lung(lung.cx, lung.cy, lung.ax * shrink, lung.ay * shrink).mask(yy, xx)
    ys, xs = np.nonzero(inner)
    k = int(rng.integers(0, ys.size))
    return int(ys[k]), int(xs[k])


def lung_extent(lungs: tuple[Lung, Lung], size: int) -> BoundingBox:
    x0 = int(np.floor(min(lung.cx - lung.ax for lung in lungs)))
    x1 = int(np.ceil(max(lung.cx + lung.ax for lung in lungs))) + 1
    y0 = int(np.floor(min(lung.cy - lung.ay for lung in lungs)))
    y1 = int(np.ceil(max(lung.cy + lung.ay for lung in lungs))) + 1
    return BoundingBox(max(x0, 0), max(y0, 0), min(x1, size), min(y1, size))


def render_radiograph(
    findings: np.ndarray, rng: np.random.Generator, cfg: SyntheticConfig
) -> Image:
    """Render one image for a binary finding vector (FINDINGS order)."""
    s = cfg.size
    present = {f for f, v in zip(FINDINGS, findings) if v}
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    canvas = np.full((s, s), TISSUE) + 0.04 * (yy / s - 0.5)

    jitter = rng.uniform(-0.03, 0.03, size=2) * s
    scale = rng.uniform(0.92, 1.08)
    cy = 0.5 * s + jitter[1]
    lungs = [
        Lung(0.5 * s + sign * 0.14 * s + jitter[0], cy, 0.10 * s * scale, 0.20 * s * scale)
        for sign in (-1, 1)
    ]
    if Finding.ATELECTASIS in present:
        k = int(rng.integers(0, 2))
        lung = lungs[k]
        lungs[k] = Lung(lung.cx, lung.cy - 0.25 * lung.ay, lung.ax, 0.7 * lung.ay)

    lung_value = LUNG + (0.1 if Finding.CONGESTION in present else 0.0)
    masks = [lung.mask(yy, xx) for lung in lungs]
    for lung, mask in zip(lungs, masks):
        canvas[mask] = lung_value
        if Finding.PLEURAL_EFFUSION in present:
            canvas[mask & (yy > lung.cy + 0.45 * lung.ay)] = 0.45
    if Finding.PNEUMOTHORAX in present:
        lung = lungs[int(rng.integers(0, 2))]
        canvas[lung.mask(yy, xx) & (yy < lung.cy - 0.3 * lung.ay)] = 0.12

    heart_ax = 0.07 * s * (1.6 if Finding.CARDIOMEGALY in present else 1.0)
    heart = ((xx - 0.5 * s) / heart_ax) ** 2 + ((yy - (cy + 0.1 * s)) / (0.12 * s)) ** 2 <= 1.0
    canvas[heart] = HEART

    if Finding.INFILTRATE in present:
        y, x = _point_in(rng, lungs[int(rng.integers(0, 2))], yy, xx)
        canvas += 0.18 * np.exp(-((yy - y) ** 2 + (xx - x) ** 2) / (2 * (0.05 * s) ** 2))
    if Finding.MASS in present:
        y, x = _point_in(rng, lungs[int(rng.integers(0, 2))], yy, xx)
        _blob(canvas, y, x, MASS_GAIN)

    box = lung_extent((lungs[0], lungs[1]), s)
    if Finding.FOREIGN_OBJECT in present:
        y = int(rng.integers(box.y0 + 2, box.y1 - 2))
        x = int(rng.integers(box.x0 + 2, box.x1 - 2))
        canvas[y - 1 : y + 2, x - 1 : x + 2] = 1.0

    # Distractors stay clear of the lung extent plus a small margin.
    margin = 5
    inside_x = (xx >= box.x0 - margin) & (xx < box.x1 + margin)
    inside_y = (yy >= box.y0 - margin) & (yy < box.y1 + margin)
    candidates = np.argwhere(
        ~(inside_x & inside_y) & (xx >= 2) & (xx < s - 2) & (yy >= 2) & (yy < s - 2)
    )
    for _ in range(int(rng.integers(0, cfg.max_distractors + 1))):
        y, x = candidates[int(rng.integers(0, len(candidates)))]
        _blob(canvas, int(y), int(x), MASS_GAIN)

    phase = rng.uniform(0.0, 2.0 * np.pi)
    canvas += cfg.rib_amplitude * np.sin(2.0 * np.pi * yy / cfg.rib_period + phase)
    canvas += rng.normal(0.0, cfg.noise_sigma, size=canvas.shape)
    return Image(np.clip(canvas, 0.0, 1.0))


def generate_corpus(out_dir: Path | str, cfg: SyntheticConfig) -> LabelTable:
    """Write images/<id>.pgm and labels.csv under out_dir.

    Args:
        out_dir: Target directory (created if needed)
        cfg: Generation settings

    Returns:
        Label table of the written corpus
    """
    out_dir = Path(out_dir)
    image_dir = out_dir / IMAGE_DIR
    image_dir.mkdir(parents=True, exist_ok=True)
    table = synthesize_labels(finding_counts(cfg), cfg.n_images, cfg.seed)
    for i, sample_id in enumerate(table.sample_ids):
        img = render_radiograph(table.labels[i], make_rng(cfg.seed, 1, i), cfg)
        imaging.write_image(img, image_dir / f"{sample_id}.pgm")
    table.to_csv(out_dir / LABELS_FILE)
    logger.info("Synthetic corpus written", path=str(out_dir), images=len(table), size=cfg.size)
    return table
