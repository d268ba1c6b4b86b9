"""Image representation and geometric/photometric operators.

Every operator is a pure function: inputs are never modified and outputs are
new read-only arrays. Intensities are float64 in [0, 1].
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage
from skimage.filters import threshold_otsu

from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.utils.validators import validate_unit_interval

logger = structlog.get_logger(__name__)

_EIGHT_BIT_MODES = ("L",)
_SIXTEEN_BIT_MODES = ("I;16", "I;16B", "I;16L", "I")
_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class ImagingError(CxrPreprocError, ValueError):
    """Exception raised when an operator precondition is violated."""

    pass


class ImageFormatError(ImagingError):
    """Exception raised for unreadable or unsupported raster files."""

    pass


class SegmentationError(ImagingError):
    """Exception raised when no lung field can be found."""

    pass


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Image:
    """2-D grayscale raster, rows first."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ImagingError(f"Image must be a non-empty 2-D array, got {pixels.shape}")
        validate_unit_interval(pixels, "image intensities")
        object.__setattr__(self, "pixels", _readonly(pixels))

    @classmethod
    def from_data(cls, width: int, height: int, data: list[float] | np.ndarray) -> "Image":
        """Build an image from row-major intensities."""
        flat = np.asarray(data, dtype=np.float64)
        if flat.size != width * height:
            raise ImagingError(
                f"Data length {flat.size} does not match {width}x{height}"
            )
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def data(self) -> np.ndarray:
        """Row-major intensities."""
        return self.pixels.ravel()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Mask:
    """Boolean raster where True marks lung field pixels."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=bool)
        if pixels.ndim != 2:
            raise ImagingError(f"Mask must be a 2-D array, got {pixels.shape}")
        object.__setattr__(self, "pixels", _readonly(pixels))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def data(self) -> np.ndarray:
        return self.pixels.ravel()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, inclusive x0/y0 and exclusive x1/y1."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ImagingError(f"Degenerate bounding box {self}")

    @classmethod
    def full(cls, width: int, height: int) -> "BoundingBox":
        """Box covering a whole image."""
        return cls(0, 0, width, height)

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def fits(self, width: int, height: int) -> bool:
        """Return True if the box lies inside a width x height image."""
        return self.x1 <= width and self.y1 <= height

    def offset(self, dx: int, dy: int) -> "BoundingBox":
        """Translate the box."""
        return BoundingBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def contains(self, other: "BoundingBox") -> bool:
        """Return True if other lies inside this box."""
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )


@dataclass(frozen=True, eq=False)
class Region:
    """4-connected pixel set, stored as sorted row-major indices."""

    indices: np.ndarray
    image_width: int

    def __post_init__(self) -> None:
        indices = np.sort(np.asarray(self.indices, dtype=np.int64))
        if indices.size == 0:
            raise ImagingError("Region must contain at least one pixel")
        object.__setattr__(self, "indices", _readonly(indices))

    @property
    def area(self) -> int:
        return int(self.indices.size)

    def bounding_box(self) -> BoundingBox:
        """Tight box around the region."""
        rows, cols = np.divmod(self.indices, self.image_width)
        return BoundingBox(
            int(cols.min()), int(rows.min()), int(cols.max()) + 1, int(rows.max()) + 1
        )


def _min_max_normalize(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def load_image(path: Path | str) -> Image:
    """Load a single-channel raster and min-max normalize it to [0, 1].

    8-bit sources are scaled by 1/255 and 16-bit sources by 1/65535 before
    normalization. Constant images map to all zeros.

    Args:
        path: PGM (P5) or grayscale PNG file

    Returns:
        Normalized image

    Raises:
        ImageFormatError: If the file is unreadable, has an unsupported mode
            or bit depth, or has zero area
    """
    try:
        with PILImage.open(path) as pil:
            pil.load()
            mode = pil.mode
            raw = np.asarray(pil)
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as e:
        raise ImageFormatError(f"Cannot read image {path}: {e}") from e

    if mode in _EIGHT_BIT_MODES:
        scale = 1.0 / 255.0
    elif mode in _SIXTEEN_BIT_MODES:
        scale = 1.0 / 65535.0
    else:
        raise ImageFormatError(f"Unsupported image mode {mode!r} in {path}")
    if raw.ndim != 2 or raw.size == 0:
        raise ImageFormatError(f"Zero-area or multi-channel image in {path}")

    values = raw.astype(np.float64) * scale
    return Image(_min_max_normalize(values))


def quantize(img: Image) -> np.ndarray:
    """Quantize [0, 1] to 0-255, rounding halves away from zero."""
    return np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)


def write_image(img: Image, path: Path | str) -> None:
    """Write an image as 8-bit binary PGM."""
    PILImage.fromarray(quantize(img)).save(path, format="PPM")


def write_mask(mask: Mask, path: Path | str) -> None:
    """Write a mask as binary PGM with values {0, 255}."""
    PILImage.fromarray(mask.pixels.astype(np.uint8) * 255).save(path, format="PPM")


def resize(img: Image, w: int, h: int) -> Image:
    """Bilinear resize with half-pixel-centered sampling.

    Sample positions falling outside the source grid are clamped to the edge.

    Args:
        img: Source image
        w: Target width
        h: Target height

    Returns:
        Image of exactly w x h pixels

    Raises:
        ImagingError: If a target dimension is below 1
    """
    if w < 1 or h < 1:
        raise ImagingError(f"Target size must be positive, got {w}x{h}")
    if (w, h) == (img.width, img.height):
        return Image(img.pixels)
    ys = (np.arange(h) + 0.5) * (img.height / h) - 0.5
    xs = (np.arange(w) + 0.5) * (img.width / w) - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    out = ndimage.map_coordinates(img.pixels, [grid_y, grid_x], order=1, mode="nearest")
    return Image(np.clip(out, 0.0, 1.0))


def crop(img: Image, box: BoundingBox) -> Image:
    """Copy the pixels inside a box, no resampling.

    Raises:
        ImagingError: If the box extends beyond the image
    """
    if not box.fits(img.width, img.height):
        raise ImagingError(f"{box} outside {img.width}x{img.height} image")
    return Image(img.pixels[box.y0 : box.y1, box.x0 : box.x1])


def horizontal_flip(img: Image) -> Image:
    """Reverse the column order of every row."""
    return Image(img.pixels[:, ::-1])


def rotate(img: Image, angle: float) -> Image:
    """Rotate about the image center with bilinear interpolation.

    Samples that fall outside the source are filled with 0. Positive angles
    rotate counter-clockwise as displayed.

    Args:
        img: Source image
        angle: Rotation in degrees, |angle| <= 45

    Returns:
        Rotated image with unchanged dimensions
    """
    if abs(angle) > 45.0:
        raise ImagingError(f"Rotation angle {angle} outside [-45, 45]")
    if angle == 0:
        return Image(img.pixels)
    theta = np.deg2rad(angle)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy = (img.height - 1) / 2.0
    cx = (img.width - 1) / 2.0
    grid_y, grid_x = np.meshgrid(
        np.arange(img.height, dtype=np.float64) - cy,
        np.arange(img.width, dtype=np.float64) - cx,
        indexing="ij",
    )
    src_x = cx + grid_x * cos_t - grid_y * sin_t
    src_y = cy + grid_x * sin_t + grid_y * cos_t
    out = ndimage.map_coordinates(
        img.pixels, [src_y, src_x], order=1, mode="constant", cval=0.0
    )
    return Image(np.clip(out, 0.0, 1.0))


def five_crop_boxes(width: int, height: int, size: int) -> tuple[BoundingBox, ...]:
    """Boxes of the five crops in the order TL, TR, BL, BR, C."""
    if size < 1 or size > min(width, height):
        raise ImagingError(f"Crop size {size} does not fit a {width}x{height} image")
    cx = (width - size) // 2
    cy = (height - size) // 2
    return (
        BoundingBox(0, 0, size, size),
        BoundingBox(width - size, 0, width, size),
        BoundingBox(0, height - size, size, height),
        BoundingBox(width - size, height - size, width, height),
        BoundingBox(cx, cy, cx + size, cy + size),
    )


def five_crop(img: Image, size: int) -> tuple[Image, ...]:
    """The four corner crops and the center crop, each size x size.

    Raises:
        ImagingError: If size exceeds the smaller image dimension
    """
    return tuple(crop(img, box) for box in five_crop_boxes(img.width, img.height, size))


def connected_components(mask: Mask) -> list[Region]:
    """4-connected regions of a mask, largest first.

    Ties in area are ordered by the first pixel in raster order.
    """
    labels, count = ndimage.label(mask.pixels, structure=_FOUR_CONNECTED)
    if count == 0:
        return []
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(1, count + 2))
    regions = [
        Region(order[bounds[k] : bounds[k + 1]], mask.width) for k in range(count)
    ]
    regions.sort(key=lambda r: (-r.area, int(r.indices[0])))
    return regions


def lung_bounding_box(mask: Mask, border: int = 100) -> BoundingBox:
    """Box around the two largest regions, grown by a border and clamped.

    With a single region that region alone is used.

    Args:
        mask: Lung field mask
        border: Pixels added to every side before clamping

    Returns:
        Bounding box valid for the mask's image

    Raises:
        SegmentationError: If the mask has no region
    """
    if border < 0:
        raise ImagingError(f"Border must be non-negative, got {border}")
    regions = connected_components(mask)
    if not regions:
        raise SegmentationError("Lung mask is empty")
    indices = np.concatenate([r.indices for r in regions[:2]])
    rows, cols = np.divmod(indices, mask.width)
    return BoundingBox(
        max(0, int(cols.min()) - border),
        max(0, int(rows.min()) - border),
        min(mask.width, int(cols.max()) + 1 + border),
        min(mask.height, int(rows.max()) + 1 + border),
    )


def segment_lung_fields(img: Image, min_region_fraction: float = 0.005) -> Mask:
    """Classical lung field proxy: Otsu threshold, opening, small-region removal.

    Lung fields are dark, so pixels at or below the Otsu level are selected.
    With inverted contrast the background is selected instead.

    Args:
        img: Radiograph
        min_region_fraction: Regions smaller than this fraction of the image
            area are dropped

    Returns:
        Lung field mask

    Raises:
        SegmentationError: If the image is uniform or nothing survives
    """
    pixels = img.pixels
    if pixels.min() == pixels.max():
        raise SegmentationError("Uniform image has no lung contrast")
    level = threshold_otsu(pixels)
    selected = ndimage.binary_opening(pixels <= level, structure=np.ones((3, 3), bool))
    min_area = min_region_fraction * img.width * img.height
    kept = np.zeros(pixels.size, dtype=bool)
    for region in connected_components(Mask(selected)):
        if region.area < min_area:
            break
        kept[region.indices] = True
    if not kept.any():
        raise SegmentationError("No lung field region above the minimum area")
    return Mask(kept.reshape(pixels.shape))


def band_pass(img: Image, sigma1: float = 2.0, sigma2: float = 8.0) -> np.ndarray:
    """Difference of two Gaussian blurs (fine minus coarse)."""
    if not 0 < sigma1 < sigma2:
        raise ImagingError(f"Need 0 < sigma1 < sigma2, got {sigma1}, {sigma2}")
    fine = ndimage.gaussian_filter(img.pixels, sigma=sigma1, mode="reflect")
    coarse = ndimage.gaussian_filter(img.pixels, sigma=sigma2, mode="reflect")
    return fine - coarse


def suppress_bones(
    img: Image, strength: float, sigma1: float = 2.0, sigma2: float = 8.0
) -> Image:
    """Band-attenuation proxy for rib and clavicle suppression.

    Subtracts strength times the difference-of-Gaussians component and clamps
    to [0, 1]. Strength 0 returns the input unchanged.

    Args:
        img: Radiograph
        strength: Attenuation in [0, 1]
        sigma1: Fine Gaussian standard deviation in pixels
        sigma2: Coarse Gaussian standard deviation in pixels

    Returns:
        Suppressed image
    """
    if not 0.0 <= strength <= 1.0:
        raise ImagingError(f"Strength must be in [0, 1], got {strength}")
    if strength == 0:
        return Image(img.pixels)
    return Image(np.clip(img.pixels - strength * band_pass(img, sigma1, sigma2), 0.0, 1.0))


def dice(a: Mask, b: Mask) -> float:
    """Dice overlap of two masks of equal size."""
    if a.pixels.shape != b.pixels.shape:
        raise ImagingError("Masks differ in size")
    total = int(a.pixels.sum()) + int(b.pixels.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a.pixels, b.pixels).sum()) / total
