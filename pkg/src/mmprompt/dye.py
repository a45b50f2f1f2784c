"""Dyeing: map any modality frame to a 3-channel color image."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ModalityKind, PixelImage
from .errors import ConfigError


class ColormapKind(enum.Enum):
    JET = "jet"
    RED = "red"
    GRAY = "gray"
    EVENT_POLARITY = "event"
    PASSTHROUGH = "passthrough"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        key = {"grey": "gray", "polarity": "event", "none": "passthrough"}.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ConfigError(f"unknown colormap {name!r}")


@dataclass(frozen=True)
class NormPolicy:
    """How raw single-channel values are scaled into [0, 1] before colormapping.

    ``mode`` is ``"fixed"`` (``lo``/``hi`` in raw sensor units), ``"percentile"``
    (``lo``/``hi`` are percentiles of each frame) or ``"minmax"`` (per frame).
    """

    mode: str
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.mode not in ("fixed", "percentile", "minmax"):
            raise ConfigError(f"unknown normalization mode {self.mode!r}")
        if self.mode == "fixed" and not self.lo < self.hi:
            raise ConfigError("fixed range needs lo < hi")
        if self.mode == "percentile" and not (0 <= self.lo < self.hi <= 100):
            raise ConfigError("percentiles need 0 <= p_lo < p_hi <= 100")

    @classmethod
    def fixed(cls, lo, hi):
        return cls("fixed", float(lo), float(hi))

    @classmethod
    def percentile(cls, p_lo=2.0, p_hi=98.0):
        return cls("percentile", float(p_lo), float(p_hi))

    @classmethod
    def minmax(cls):
        return cls("minmax", 0.0, 1.0)

    def to_dict(self):
        if self.mode == "fixed":
            return {"mode": "fixed", "lo": self.lo, "hi": self.hi}
        if self.mode == "percentile":
            return {"mode": "percentile", "p_lo": self.lo, "p_hi": self.hi}
        return {"mode": "minmax"}

    @classmethod
    def from_dict(cls, d):
        mode = str(d.get("mode", "")).lower()
        if mode in ("fixed", "fixedrange"):
            return cls.fixed(d["lo"], d["hi"])
        if mode == "percentile":
            return cls.percentile(d.get("p_lo", 2.0), d.get("p_hi", 98.0))
        if mode == "minmax":
            return cls.minmax()
        raise ConfigError(f"unknown normalization mode {d.get('mode')!r}")


DEFAULT_NORM = NormPolicy.percentile(2.0, 98.0)

EVENT_POSITIVE = (1.0, 0.0, 0.0)
EVENT_NEGATIVE = (0.0, 0.0, 1.0)
EVENT_BACKGROUND = (0.5, 0.5, 0.5)


def _affine_unit(values, lo, hi):
    if hi == lo:
        return np.full(values.shape, 0.5)
    return np.clip((values - lo) / (hi - lo), 0.0, 1.0)


def normalize(img: PixelImage, policy: NormPolicy) -> PixelImage:
    """Map a single-channel frame affinely into [0, 1], then clamp.

    A degenerate range (all values equal) maps to 0.5 everywhere.
    """
    if img.channels != 1:
        raise ValueError("normalize expects a single-channel image")
    if policy.mode == "fixed":
        raw = img.data * img.raw_scale
        out = _affine_unit(raw, policy.lo, policy.hi)
    elif policy.mode == "minmax":
        out = _affine_unit(img.data, float(img.data.min()), float(img.data.max()))
    else:
        lo, hi = np.percentile(img.data, [policy.lo, policy.hi])
        out = _affine_unit(img.data, float(lo), float(hi))
    return PixelImage(out)


def _check_unit(v):
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"colormap input {v} outside [0, 1]")
    return v


def jet(v: float):
    """Piecewise-linear JET: (0,0,.5) -> blue -> cyan -> green -> yellow -> red -> (.5,0,0)."""
    v = _check_unit(v)
    r, g, b = _kernels.jet(np.array([v]))[0]
    return (float(r), float(g), float(b))


def red(v: float):
    v = _check_unit(v)
    return (v, 0.0, 0.0)


def gray(v: float):
    v = _check_unit(v)
    return (v, v, v)


def event_polarity_colors(encoded, background=EVENT_BACKGROUND):
    """Color an encoded polarity map: 1 -> positive (red), 0 -> negative (blue), 0.5 -> background."""
    encoded = np.asarray(encoded)
    out = np.empty(encoded.shape + (3,))
    out[...] = background
    out[encoded > 0.5] = EVENT_POSITIVE
    out[encoded < 0.5] = EVENT_NEGATIVE
    return out


def apply_colormap(values: np.ndarray, kind: ColormapKind) -> np.ndarray:
    """Vectorized colormap on an array of [0, 1] values; returns shape ``values.shape + (3,)``."""
    values = np.asarray(values, dtype=np.float64)
    if kind is ColormapKind.JET:
        return _kernels.jet(values)
    if kind is ColormapKind.RED:
        out = np.zeros(values.shape + (3,))
        out[..., 0] = values
        return out
    if kind in (ColormapKind.GRAY, ColormapKind.PASSTHROUGH):
        return np.repeat(values[..., None], 3, axis=-1)
    if kind is ColormapKind.EVENT_POLARITY:
        return event_polarity_colors(values)
    raise ConfigError(f"unsupported colormap {kind}")


def default_colormap(kind: ModalityKind) -> ColormapKind:
    if kind is ModalityKind.EVENT:
        return ColormapKind.EVENT_POLARITY
    if kind is ModalityKind.VISIBLE:
        return ColormapKind.GRAY
    return ColormapKind.JET


def color(frame: PixelImage, kind: ModalityKind, cmap=None, policy: NormPolicy | None = None) -> PixelImage:
    """Dye a frame of the given modality into a 3-channel image.

    3-channel frames are returned unchanged. Single-channel frames are
    normalized with ``policy`` and mapped per pixel through ``cmap``.
    Event frames hold encoded polarity ((p + 1) / 2) and skip normalization
    under the polarity colormap.
    """
    cmap = default_colormap(kind) if cmap is None else ColormapKind.parse(cmap)
    if cmap is ColormapKind.EVENT_POLARITY and kind is not ModalityKind.EVENT:
        raise ConfigError(f"event colormap cannot dye a {kind.value} frame")
    if frame.channels == 3:
        return frame
    if kind is ModalityKind.VISIBLE:
        return PixelImage(np.repeat(frame.data, 3, axis=2))
    if cmap is ColormapKind.EVENT_POLARITY:
        return PixelImage(event_polarity_colors(frame.data[:, :, 0]))
    values = normalize(frame, policy if policy is not None else DEFAULT_NORM).data[:, :, 0]
    return PixelImage(apply_colormap(values, cmap))
