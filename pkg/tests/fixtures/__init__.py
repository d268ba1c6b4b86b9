"""Test fixtures for the CXR pre-processing pipeline."""

from pathlib import Path

import numpy as np

from cxr_preproc.augment import AugConfig
from cxr_preproc.dataset import FINDINGS
from cxr_preproc.dataset import LabelTable
from cxr_preproc.imaging import BoundingBox
from cxr_preproc.imaging import Image
from cxr_preproc.imaging import Mask
from cxr_preproc.model import ModelConfig
from cxr_preproc.model import TrainConfig

FIXTURE_DIR = Path(__file__).parent
INDIANA_LABELS = FIXTURE_DIR / "indiana_labels.csv"

# Three-blob mask: two large fields and one small blob in the corner.
THREE_BLOB_SIZE = 512
THREE_BLOB_RECTS = {
    "left": (150, 100, 250, 300),  # x0, y0, x1, y1 (exclusive), area 20000
    "right": (300, 120, 400, 450),  # area 33000
    "small": (20, 460, 40, 480),  # area 400
}


def get_ramp(width: int = 4, height: int = 4) -> Image:
    """Row-major ramp 0 .. 1."""
    n = width * height
    return Image.from_data(width, height, np.arange(n) / (n - 1))


def get_smooth_bump(size: int = 64, sigma: float = 8.0) -> Image:
    """Gaussian bump centred in the image."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    return Image(np.exp(-((yy - c) ** 2 + (xx - c) ** 2) / (2.0 * sigma**2)))


def get_stripe_image(width: int = 128, height: int = 32, period: float = 16.0,
                     amplitude: float = 0.2) -> tuple[Image, np.ndarray]:
    """Vertical cosine stripes around 0.5 and the unit stripe pattern.

    Stripes are symmetric about the pixel edges at both borders, so reflect
    padding continues them exactly when width is a multiple of period / 2.
    """
    x = np.arange(width, dtype=np.float64)
    pattern = np.cos(2.0 * np.pi * (x + 0.5) / period)
    stripes = np.broadcast_to(pattern, (height, width))
    return Image(0.5 + amplitude * stripes), np.array(stripes)


def get_two_ellipse_image(size: int = 128, lung: float = 0.2,
                          background: float = 0.9) -> tuple[Image, Mask]:
    """Two dark ellipses on a bright background, plus their true mask."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    truth = np.zeros((size, size), dtype=bool)
    for cx in (0.31 * size, 0.69 * size):
        truth |= ((xx - cx) / (0.13 * size)) ** 2 + ((yy - 0.5 * size) / (0.3 * size)) ** 2 <= 1.0
    pixels = np.where(truth, lung, background)
    return Image(pixels), Mask(truth)


def get_two_field_image(size: int = 64) -> tuple[Image, BoundingBox]:
    """Two dark rectangles on a bright background and their joint tight box."""
    pixels = np.full((size, size), 0.9)
    pixels[10:50, 8:24] = 0.2
    pixels[12:46, 40:56] = 0.2
    return Image(pixels), BoundingBox(8, 10, 56, 50)


def get_three_blob_mask() -> Mask:
    pixels = np.zeros((THREE_BLOB_SIZE, THREE_BLOB_SIZE), dtype=bool)
    for x0, y0, x1, y1 in THREE_BLOB_RECTS.values():
        pixels[y0:y1, x0:x1] = True
    return Mask(pixels)


def write_pgm(path: Path, values: np.ndarray, maxval: int = 255) -> Path:
    """Write a binary PGM (big-endian samples for 16-bit)."""
    height, width = values.shape
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    path.write_bytes(header + np.asarray(values, dtype=dtype).tobytes())
    return path


def get_label_table(n: int = 20, seed: int = 0) -> LabelTable:
    """Random binary table where every finding has both classes."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=(n, len(FINDINGS)))
    labels[0] = 0
    labels[1] = 1
    return LabelTable(tuple(f"s{i:03d}" for i in range(n)), labels)


def get_label_csv_text(rows: list[str]) -> str:
    header = "id," + ",".join(f.value for f in FINDINGS)
    return "\n".join([header, *rows]) + "\n"


def get_tiny_model_config(seed: int = 0, n_outputs: int = 3) -> ModelConfig:
    """8x8 input, two convolution blocks."""
    return ModelConfig(
        input_size=8,
        conv_blocks=[(3, 3, 2), (4, 3, 2)],
        n_outputs=n_outputs,
        seed=seed,
    )


def get_small_aug_config(size: int = 16) -> AugConfig:
    return AugConfig(train_size=size, test_size=size + 4, crop_size=size)


def get_fast_train_config(**overrides: float) -> TrainConfig:
    values = {"lr": 0.01, "batch_size": 10, "max_epochs": 20, "seed": 0}
    values.update(overrides)
    return TrainConfig(**values)
