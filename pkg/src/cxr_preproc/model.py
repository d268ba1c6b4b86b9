"""Small multi-label convolutional classifier with exact gradients and Adam.

Layout: convolution blocks (same padding, ReLU), global average pooling and a
dense head with a sigmoid per finding. All arithmetic runs in float64;
checkpoints store little-endian float32.
"""

import hashlib
import json
import math
import struct
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any
from typing import Optional

import numpy as np
import pandas as pd
import structlog
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator
from pydantic import model_validator
from scipy.special import expit

from cxr_preproc.augment import AugConfig
from cxr_preproc.augment import augment
from cxr_preproc.augment import make_rng
from cxr_preproc.augment import test_transform
from cxr_preproc.augment import validation_transform
from cxr_preproc.dataset import LabelTable
from cxr_preproc.dataset import Resample
from cxr_preproc.errors import CxrPreprocError
from cxr_preproc.errors import NumericalError
from cxr_preproc.errors import ShapeError
from cxr_preproc.evaluation import PredictionMatrix
from cxr_preproc.evaluation import Provenance
from cxr_preproc.imaging import Image
from cxr_preproc.utils.validators import ensure_disjoint
from cxr_preproc.utils.validators import validate_finite

logger = structlog.get_logger(__name__)

Params = dict[str, np.ndarray]

BCE_EPSILON = 1e-7
# Sigmoid outputs are kept this far from 0 and 1 so forward stays in the open interval.
PROB_FLOOR = 1e-12
CHECKPOINT_MAGIC = b"CXRMODEL"
CHECKPOINT_VERSION = 1

# Generator stream tags
HEAD_STREAM = 1_000
VALIDATION_STREAM = 2_000
EPOCH_STREAM = 3_000
SAMPLE_STREAM = 4_000

PREDICT_CHUNK = 32


class TrainingError(CxrPreprocError):
    """Exception raised when a training job cannot start."""

    pass


class CheckpointError(CxrPreprocError):
    """Exception raised for unreadable checkpoints."""

    pass


class ConvBlock(BaseModel):
    """One convolution layer: output channels, odd kernel size and stride."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    channels: int = Field(ge=1)
    kernel: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)

    @field_validator("kernel")
    @classmethod
    def _odd_kernel(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("kernel size must be odd")
        return v


def _default_blocks() -> tuple[ConvBlock, ...]:
    return (
        ConvBlock(channels=8, kernel=3, stride=2),
        ConvBlock(channels=16, kernel=3, stride=2),
        ConvBlock(channels=32, kernel=3, stride=2),
    )


class ModelConfig(BaseModel):
    """Architecture of the classifier."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    input_size: int = Field(default=56, ge=1)
    conv_blocks: tuple[ConvBlock, ...] = Field(default_factory=_default_blocks)
    n_outputs: int = Field(default=8, ge=1)
    seed: int = Field(default=0, ge=0)

    @field_validator("conv_blocks", mode="before")
    @classmethod
    def _blocks_from_lists(cls, value: Any) -> Any:
        # Accept [channels, kernel, stride] triples as well as mappings.
        if isinstance(value, (list, tuple)):
            return [
                dict(zip(("channels", "kernel", "stride"), b))
                if isinstance(b, (list, tuple))
                else b
                for b in value
            ]
        return value

    @model_validator(mode="after")
    def _check_strides(self) -> "ModelConfig":
        if not self.conv_blocks:
            raise ValueError("at least one convolution block is required")
        total = math.prod(b.stride for b in self.conv_blocks)
        if self.input_size % total:
            raise ValueError(
                f"input_size {self.input_size} is not divisible by the stride product {total}"
            )
        return self


class TrainConfig(BaseModel):
    """Optimizer and schedule settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(default=0.005, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=15, ge=1)
    max_epochs: int = Field(default=20, ge=1)
    plateau_patience: int = Field(default=3, ge=1)
    lr_factor: float = Field(default=0.5, gt=0.0, lt=1.0)
    min_lr: float = Field(default=1e-5, gt=0.0)
    val_frac: float = Field(default=0.1, ge=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


@dataclass(frozen=True, eq=False)
class Model:
    """Trainable parameters plus the architecture they belong to."""

    config: ModelConfig
    params: Params

    def __post_init__(self) -> None:
        params = {name: np.asarray(value, dtype=np.float64) for name, value in self.params.items()}
        for name, value in params.items():
            if not np.all(np.isfinite(value)):
                raise NumericalError(f"Parameter {name} contains non-finite values")
        object.__setattr__(self, "params", params)

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates plus the step counter."""

    m: Params
    v: Params
    t: int = 0

    @classmethod
    def zeros_like(cls, model: Model) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in model.params.items()},
            {k: np.zeros_like(p) for k, p in model.params.items()},
        )


def init_model(cfg: ModelConfig) -> Model:
    """Initialize a model deterministically from cfg.seed.

    Convolutions use He normal initialization, the head LeCun normal; biases
    start at zero. Each layer draws from its own generator stream.

    Raises:
        ShapeError: If the stride schedule does not divide input_size
    """
    total = math.prod(b.stride for b in cfg.conv_blocks)
    if not cfg.conv_blocks or cfg.input_size % total:
        raise ShapeError("Incompatible stride schedule for the input size")
    params: Params = {}
    in_channels = 1
    for i, block in enumerate(cfg.conv_blocks):
        rng = make_rng(cfg.seed, i)
        fan_in = in_channels * block.kernel * block.kernel
        params[f"conv{i}.weight"] = rng.normal(
            0.0, math.sqrt(2.0 / fan_in), (block.channels, in_channels, block.kernel, block.kernel)
        )
        params[f"conv{i}.bias"] = np.zeros(block.channels)
        in_channels = block.channels
    head_rng = make_rng(cfg.seed, len(cfg.conv_blocks))
    params.update(_head_params(head_rng, in_channels, cfg.n_outputs))
    return Model(cfg, params)


def _head_params(rng: np.random.Generator, fan_in: int, n_outputs: int) -> Params:
    return {
        "head.weight": rng.normal(0.0, math.sqrt(1.0 / fan_in), (n_outputs, fan_in)),
        "head.bias": np.zeros(n_outputs),
    }


def replace_head(m: Model, n_outputs: int, seed: int) -> Model:
    """New dense head with n_outputs units; the convolutional trunk is kept."""
    trunk = {k: v.copy() for k, v in m.params.items() if not k.startswith("head.")}
    fan_in = m.config.conv_blocks[-1].channels
    trunk.update(_head_params(make_rng(seed, HEAD_STREAM), fan_in, n_outputs))
    return Model(m.config.model_copy(update={"n_outputs": n_outputs}), trunk)


def _conv_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int
) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    f, c, k, _ = w.shape
    pad = k // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * k * k)
    out = cols @ w.reshape(f, -1).T + b
    return out.reshape(n, out_h, out_w, f).transpose(0, 3, 1, 2), cols


def _conv_backward(
    dout: np.ndarray, cols: np.ndarray, x_shape: tuple[int, ...], w: np.ndarray, stride: int,
    need_dx: bool = True,
) -> tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    n, f, out_h, out_w = dout.shape
    _, c, k, _ = w.shape
    flat = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (flat.T @ cols).reshape(w.shape)
    db = flat.sum(axis=0)
    if not need_dx:
        return None, dw, db
    pad = k // 2
    height, width = x_shape[2], x_shape[3]
    dcols = (flat @ w.reshape(f, -1)).reshape(n, out_h, out_w, c, k, k)
    dpadded = np.zeros((n, c, height + 2 * pad, width + 2 * pad))
    for i in range(k):
        for j in range(k):
            dpadded[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += (
                dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return dpadded[:, :, pad : pad + height, pad : pad + width], dw, db


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass."""

    inputs: list[np.ndarray] = field(default_factory=list)
    cols: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    features: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None


def _as_batch(m: Model, batch: np.ndarray | Sequence[Image]) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        array = np.asarray(batch, dtype=np.float64)
    else:
        array = np.stack([img.pixels for img in batch]).astype(np.float64)
    if array.ndim == 2:
        array = array[None]
    size = m.config.input_size
    if array.ndim != 3 or array.shape[1:] != (size, size):
        raise ShapeError(f"Expected a batch of {size}x{size} images, got {array.shape}")
    return array


def forward_with_cache(
    m: Model, batch: np.ndarray | Sequence[Image]
) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass that also returns the values backward needs."""
    x = _as_batch(m, batch)[:, None, :, :]
    cache = ForwardCache()
    for i, block in enumerate(m.config.conv_blocks):
        cache.inputs.append(x)
        w, b = m.params[f"conv{i}.weight"], m.params[f"conv{i}.bias"]
        z, cols = _conv_forward(x, w, b, block.stride)
        cache.cols.append(cols)
        cache.pre_activations.append(z)
        x = np.maximum(z, 0.0)
    cache.features = x.mean(axis=(2, 3))
    logits = cache.features @ m.params["head.weight"].T + m.params["head.bias"]
    cache.probs = np.clip(expit(logits), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return cache.probs, cache


def forward(m: Model, batch: np.ndarray | Sequence[Image]) -> np.ndarray:
    """Per-finding probabilities in (0, 1), shape (batch, n_outputs).

    Raises:
        ShapeError: If an image is not input_size x input_size
    """
    return forward_with_cache(m, batch)[0]


def bce_loss(probs: np.ndarray, labels: np.ndarray, eps: float = BCE_EPSILON) -> float:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps]."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ShapeError(f"Probability shape {probs.shape} does not match labels {labels.shape}")
    p = np.clip(probs, eps, 1.0 - eps)
    return float(np.mean(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))))


def loss_and_gradients(
    m: Model, batch: np.ndarray | Sequence[Image], labels: np.ndarray, eps: float = BCE_EPSILON
) -> tuple[float, Params]:
    """Loss and the exact gradient of the clamped loss for every parameter."""
    probs, cache = forward_with_cache(m, batch)
    labels = np.asarray(labels, dtype=np.float64)
    loss = bce_loss(probs, labels, eps)
    n, k = probs.shape
    # The clamp has zero slope outside [eps, 1 - eps].
    active = (probs >= eps) & (probs <= 1.0 - eps)
    dlogits = (probs - labels) * active / (n * k)

    grads: Params = {}
    grads["head.weight"] = dlogits.T @ cache.features
    grads["head.bias"] = dlogits.sum(axis=0)
    dfeatures = dlogits @ m.params["head.weight"]
    last = cache.pre_activations[-1]
    da = np.broadcast_to(
        dfeatures[:, :, None, None] / (last.shape[2] * last.shape[3]), last.shape
    )
    for i in reversed(range(len(m.config.conv_blocks))):
        dz = da * (cache.pre_activations[i] > 0.0)
        dx, dw, db = _conv_backward(
            dz, cache.cols[i], cache.inputs[i].shape, m.params[f"conv{i}.weight"],
            m.config.conv_blocks[i].stride, need_dx=i > 0,
        )
        grads[f"conv{i}.weight"] = dw
        grads[f"conv{i}.bias"] = db
        da = dx
    return loss, {name: grads[name] for name in m.params}


def backward(
    m: Model, batch: np.ndarray | Sequence[Image], labels: np.ndarray, eps: float = BCE_EPSILON
) -> Params:
    """Gradient of the mean clamped BCE with respect to every parameter."""
    return loss_and_gradients(m, batch, labels, eps)[1]


def adam_step(
    m: Model,
    s: AdamState,
    g: Mapping[str, np.ndarray],
    cfg: TrainConfig,
    lr: Optional[float] = None,
) -> tuple[Model, AdamState]:
    """One bias-corrected Adam update.

    Raises:
        NumericalError: If any gradient is non-finite; carries the step index
    """
    t = s.t + 1
    for name, grad in g.items():
        if not validate_finite(np.asarray(grad), name):
            raise NumericalError(f"Non-finite gradient for {name}", step=t)
    lr = cfg.lr if lr is None else lr
    b1, b2 = cfg.beta1, cfg.beta2
    params: Params = {}
    first: Params = {}
    second: Params = {}
    for name, theta in m.params.items():
        grad = np.asarray(g[name], dtype=np.float64)
        first[name] = b1 * s.m[name] + (1.0 - b1) * grad
        second[name] = b2 * s.v[name] + (1.0 - b2) * grad * grad
        m_hat = first[name] / (1.0 - b1**t)
        v_hat = second[name] / (1.0 - b2**t)
        params[name] = theta - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return Model(m.config, params), AdamState(first, second, t)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainingLog:
    """Per-epoch losses and the learning rate used during the epoch."""

    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def best_epoch(self) -> int:
        return min(self.records, key=lambda r: (r.val_loss, r.epoch)).epoch

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.epoch, r.train_loss, r.val_loss, r.lr) for r in self.records],
            columns=["epoch", "train_loss", "val_loss", "lr"],
        )

    def to_csv(self, path: Path | str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: Path | str) -> "TrainingLog":
        frame = pd.read_csv(path, float_precision="round_trip")
        return cls(
            [
                EpochRecord(
                    int(row.epoch), float(row.train_loss), float(row.val_loss), float(row.lr)
                )
                for row in frame.itertuples(index=False)
            ]
        )


@dataclass(frozen=True)
class TrainingData:
    """Variant images keyed by sample id plus the label table."""

    images: Mapping[str, Image]
    labels: LabelTable


def carve_validation(
    train_ids: Sequence[str], val_frac: float, seed: int, resample: int
) -> tuple[list[str], list[str]]:
    """Split training ids into fitting and validation ids, keeping source order."""
    n = len(train_ids)
    n_val = 0
    if n >= 2 and val_frac > 0:
        n_val = min(max(int(math.floor(val_frac * n + 0.5)), 1), n - 1)
    chosen = set(make_rng(seed, resample, VALIDATION_STREAM).permutation(n)[:n_val].tolist())
    fit = [sid for i, sid in enumerate(train_ids) if i not in chosen]
    val = [sid for i, sid in enumerate(train_ids) if i in chosen]
    return fit, val


def train(
    data: TrainingData, split: Resample, tc: TrainConfig, mc: ModelConfig, ac: AugConfig
) -> tuple[Model, TrainingLog]:
    """Train one model on a resample's training partition.

    A validation subset is carved from the training ids. Each epoch shuffles
    the remaining ids, augments every sample with a generator keyed by
    (epoch, sample), and takes one Adam step per minibatch. The learning rate
    is multiplied by lr_factor after plateau_patience epochs without a
    validation improvement, never dropping below min_lr. The returned model is
    the snapshot with the lowest validation loss.

    Args:
        data: Images and labels; test images may be present but are never read
        split: Resample whose train_ids are used
        tc: Optimizer settings
        mc: Architecture
        ac: Augmentation settings

    Returns:
        Best snapshot and the per-epoch log

    Raises:
        TrainingError: On an empty training set or missing images
        LeakageError: If a test id reaches the fitting or validation set
        NumericalError: On a non-finite loss or gradient
    """
    train_ids = list(split.train_ids)
    if not train_ids:
        raise TrainingError(f"Resample {split.index} has an empty training set")
    absent = [sid for sid in train_ids if sid not in data.images]
    if absent:
        raise TrainingError(f"No image for training id {absent[0]!r}")

    fit_ids, val_ids = carve_validation(train_ids, tc.val_frac, tc.seed, split.index)
    ensure_disjoint(split.test_ids, train=fit_ids, validation=val_ids)

    fit_labels = data.labels.rows(fit_ids).astype(np.float64)
    val_batch: Optional[np.ndarray] = None
    val_labels = data.labels.rows(val_ids).astype(np.float64)
    if val_ids:
        val_batch = np.stack(
            [validation_transform(data.images[sid], ac).pixels for sid in val_ids]
        )

    model = init_model(mc)
    state = AdamState.zeros_like(model)
    log = TrainingLog()
    lr = tc.lr
    best_model, best_loss, stale = model, math.inf, 0

    for epoch in range(1, tc.max_epochs + 1):
        order = make_rng(tc.seed, split.index, EPOCH_STREAM, epoch).permutation(len(fit_ids))
        total = 0.0
        for start in range(0, len(order), tc.batch_size):
            idx = order[start : start + tc.batch_size]
            batch = np.stack(
                [
                    augment(
                        data.images[fit_ids[i]],
                        make_rng(tc.seed, split.index, SAMPLE_STREAM, epoch, int(i)),
                        ac,
                    ).pixels
                    for i in idx
                ]
            )
            loss, grads = loss_and_gradients(model, batch, fit_labels[idx])
            if not math.isfinite(loss):
                raise NumericalError("Non-finite training loss", step=state.t + 1)
            model, state = adam_step(model, state, grads, tc, lr=lr)
            total += loss * len(idx)
        train_loss = total / len(fit_ids)
        val_loss = train_loss
        if val_batch is not None:
            val_loss = bce_loss(forward(model, val_batch), val_labels)
        if not math.isfinite(val_loss):
            raise NumericalError("Non-finite validation loss", step=state.t)
        log.append(EpochRecord(epoch, train_loss, val_loss, lr))
        logger.debug(
            "Epoch finished",
            resample=split.index,
            epoch=epoch,
            train_loss=train_loss,
            val_loss=val_loss,
            lr=lr,
        )

        if val_loss < best_loss:
            best_model, best_loss, stale = model, val_loss, 0
        else:
            stale += 1
            if stale >= tc.plateau_patience:
                reduced = lr * tc.lr_factor
                if reduced >= tc.min_lr:
                    lr = reduced
                    logger.info("Learning rate reduced", resample=split.index, epoch=epoch, lr=lr)
                stale = 0

    logger.info(
        "Training finished",
        resample=split.index,
        epochs=len(log),
        best_epoch=log.best_epoch,
        best_val_loss=best_loss,
    )
    return best_model, log


def _test_crops(img: Image, ac: AugConfig) -> tuple[Image, ...]:
    crops = test_transform(img, ac)
    # All five crops coincide when crop_size == test_size.
    return crops[:1] if ac.crop_size == ac.test_size else crops


def predict_five_crop(m: Model, img: Image, ac: AugConfig) -> np.ndarray:
    """Mean of the model's predictions over the five test-time crops."""
    return forward(m, _test_crops(img, ac)).mean(axis=0)


def predict_matrix(
    m: Model, images: Mapping[str, Image], sample_ids: Sequence[str], ac: AugConfig,
    provenance: Provenance,
) -> PredictionMatrix:
    """Five-crop predictions for the given ids, in order."""
    rows: list[np.ndarray] = []
    for start in range(0, len(sample_ids), PREDICT_CHUNK):
        chunk = sample_ids[start : start + PREDICT_CHUNK]
        crops = [crop for sid in chunk for crop in _test_crops(images[sid], ac)]
        probs = forward(m, crops).reshape(len(chunk), len(crops) // len(chunk), -1)
        rows.extend(probs.mean(axis=1))
    scores = np.vstack(rows) if rows else np.zeros((0, m.config.n_outputs))
    return PredictionMatrix(tuple(sample_ids), scores, provenance)


def average_validation_loss(logs: Sequence[TrainingLog]) -> pd.DataFrame:
    """Per-epoch mean validation loss across resamples."""
    frame = pd.concat([log.to_frame() for log in logs], ignore_index=True)
    grouped = frame.groupby("epoch")["val_loss"]
    return pd.DataFrame(
        {"mean_val_loss": grouped.mean(), "n_resamples": grouped.size()}
    ).reset_index()


def save_checkpoint(m: Model, path: Path | str, tc: Optional[TrainConfig] = None) -> str:
    """Write a checkpoint and return its SHA-256.

    Layout: magic, version and header length (little-endian uint32), a JSON
    header with architecture and parameter shapes, then each parameter as
    little-endian float32 in header order.
    """
    header = {
        "architecture": m.config.model_dump(mode="json"),
        "parameters": [{"name": k, "shape": list(v.shape)} for k, v in m.params.items()],
        "train_config": tc.model_dump(mode="json") if tc is not None else None,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for value in m.params.values():
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return checkpoint_checksum(path)


def load_checkpoint(path: Path | str) -> tuple[Model, Optional[TrainConfig]]:
    """Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointError: On a bad magic, unknown version or truncated payload
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a model checkpoint")
    offset = len(CHECKPOINT_MAGIC)
    version, header_len = struct.unpack_from("<II", raw, offset)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    offset += 8
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    params: Params = {}
    for entry in header["parameters"]:
        shape = tuple(entry["shape"])
        count = math.prod(shape)
        if offset + 4 * count > len(raw):
            raise CheckpointError(f"Checkpoint {path} is truncated")
        values = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        params[entry["name"]] = values.reshape(shape).astype(np.float64)
        offset += 4 * count
    train_config = header.get("train_config")
    return (
        Model(ModelConfig.model_validate(header["architecture"]), params),
        TrainConfig.model_validate(train_config) if train_config else None,
    )


def checkpoint_checksum(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
