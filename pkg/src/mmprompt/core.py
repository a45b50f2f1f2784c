"""Domain types shared by every module, plus cross-modality resampling."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class ModalityKind(enum.Enum):
    VISIBLE = "visible"
    DEPTH = "depth"
    THERMAL = "thermal"
    EVENT = "event"

    @classmethod
    def parse(cls, tag: str) -> "ModalityKind":
        from .errors import UnknownModalityError

        key = str(tag).strip().lower()
        aliases = {"rgb": "visible", "color": "visible", "d": "depth", "t": "thermal",
                   "ir": "thermal", "e": "event", "events": "event"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise UnknownModalityError(f"unknown modality tag {tag!r}")


@dataclass(frozen=True, eq=False)
class PixelImage:
    """Raster of intensities in [0, 1], stored as a read-only (H, W, C) float64 array.

    ``raw_scale`` records the factor that maps stored values back to the
    sensor's raw units (255 for 8-bit files, 65535 for 16-bit ones); it is
    what lets a fixed normalization range be given in raw units.
    """

    data: np.ndarray
    raw_scale: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be 2-D or 3-D, got shape {arr.shape}")
        h, w, c = arr.shape
        if h <= 0 or w <= 0:
            raise ValueError("image dimensions must be positive")
        if c not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {c}")
        if not (arr.min() >= 0.0 and arr.max() <= 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        if arr.flags.writeable:
            arr = arr.view()
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, width, height, channels, values, raw_scale=1.0):
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != width * height * channels:
            raise ValueError("value count does not match width*height*channels")
        return cls(arr.reshape(height, width, channels), raw_scale)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, PixelImage):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, top-left origin, half-open extent [x, x+w) x [y, y+h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"box {name} must be finite")
            object.__setattr__(self, name, v)
        if self.w < 0 or self.h < 0:
            raise ValueError("box width and height must be non-negative")

    @classmethod
    def from_center(cls, cx, cy, w, h):
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self):
        return self.w * self.h

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)

    def translate(self, dx, dy):
        return BBox(self.x + dx, self.y + dy, self.w, self.h)


@dataclass(frozen=True)
class Annotation:
    box: BBox | None
    present: bool

    def __post_init__(self):
        if self.present != (self.box is not None):
            raise ValueError("annotation must carry a box exactly when the target is present")

    @classmethod
    def absent(cls):
        return cls(None, False)

    @classmethod
    def of(cls, box):
        return cls(box, True)


@dataclass
class ModalSequence:
    """Index-aligned per-modality frame streams with ground truth.

    ``aux_norm`` maps a modality to the normalization policy recorded for it
    (e.g. a fixed sensor range from a manifest); modalities without an entry
    fall back to the prompt configuration's default.
    """

    streams: dict
    annotations: list
    name: str = "sequence"
    aux_norm: dict = field(default_factory=dict)

    def __post_init__(self):
        if ModalityKind.VISIBLE not in self.streams:
            raise ValueError("sequence has no visible stream")
        lengths = {kind: len(frames) for kind, frames in self.streams.items()}
        n = lengths[ModalityKind.VISIBLE]
        if n < 1:
            raise ValueError("sequence must contain at least one frame")
        bad = {k.value: m for k, m in lengths.items() if m != n}
        if bad:
            raise ValueError(f"stream lengths differ from visible ({n}): {bad}")
        if len(self.annotations) != n:
            raise ValueError(f"{len(self.annotations)} annotations for {n} frames")
        if any(f.channels != 3 for f in self.streams[ModalityKind.VISIBLE]):
            raise ValueError("visible frames must have 3 channels")

    def __len__(self):
        return len(self.streams[ModalityKind.VISIBLE])

    @property
    def visible(self):
        return self.streams[ModalityKind.VISIBLE]

    @property
    def modalities(self):
        return list(self.streams)

    @property
    def frame_size(self):
        f = self.visible[0]
        return f.width, f.height


def clamp_unit(v: float) -> float:
    return min(1.0, max(0.0, v))


def resample_bilinear(img: PixelImage, target_w: int, target_h: int) -> PixelImage:
    """Bilinear resize with pixel centers at (i + 0.5) / n; edge samples clamp."""
    if int(target_w) != target_w or int(target_h) != target_h:
        raise ValueError("target dimensions must be integers")
    if target_w <= 0 or target_h <= 0:
        raise ValueError("target dimensions must be positive")
    if (target_w, target_h) == (img.width, img.height):
        return img
    out = _kernels.resample_bilinear(np.ascontiguousarray(img.data), int(target_h), int(target_w))
    return PixelImage(np.clip(out, 0.0, 1.0), img.raw_scale)


def to_three_channels(img: PixelImage) -> PixelImage:
    if img.channels == 3:
        return img
    return PixelImage(np.repeat(img.data, 3, axis=2), img.raw_scale)


def quantize_u8(img_or_array) -> np.ndarray:
    """Scale [0, 1] values to 8-bit with round-half-away-from-zero."""
    arr = img_or_array.data if isinstance(img_or_array, PixelImage) else np.asarray(img_or_array)
    return np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
