"""Event-camera streams: CSV parsing, polarity accumulation, red/blue rendering."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import PixelImage
from .dye import EVENT_BACKGROUND, EVENT_NEGATIVE, EVENT_POSITIVE
from .errors import ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EventRecord:
    t: int
    x: int
    y: int
    polarity: int


@dataclass(frozen=True, eq=False)
class PolarityImage:
    width: int
    height: int
    values: np.ndarray  # (height, width) int8 in {-1, 0, 1}

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8)
        if v.shape != (self.height, self.width):
            raise ValueError("polarity values do not match width/height")
        if not np.isin(v, (-1, 0, 1)).all():
            raise ValueError("polarity values must be -1, 0 or +1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, PolarityImage):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


class EventArray:
    """Columnar event storage (t, x, y, p as int64 arrays) used by the loaders."""

    def __init__(self, t, x, y, p):
        self.t = np.asarray(t, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.int64)
        self.y = np.asarray(y, dtype=np.int64)
        self.p = np.asarray(p, dtype=np.int64)

    @classmethod
    def from_records(cls, records):
        if isinstance(records, EventArray):
            return records
        if len(records) == 0:
            return cls([], [], [], [])
        cols = np.array([(e.t, e.x, e.y, e.polarity) for e in records], dtype=np.int64)
        return cls(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3])

    def to_records(self):
        return [EventRecord(int(t), int(x), int(y), int(p))
                for t, x, y, p in zip(self.t, self.x, self.y, self.p)]

    def __len__(self):
        return len(self.t)


def _text_of(source):
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _is_number(tok):
    try:
        int(tok)
    except ValueError:
        return False
    return True


def parse_event_array(source, width=None, height=None) -> EventArray:
    """Parse ``t,x,y,p`` lines. p = 0 is read as -1 (OFF encoding).

    A header line is recognised by a non-numeric first field. Blank lines
    are skipped. Non-monotonic timestamps only log a warning.
    """
    text = _text_of(source)
    ts, xs, ys, ps = [], [], [], []
    warned = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [s.strip() for s in line.split(",")]
        if lineno == 1 and not _is_number(parts[0]):
            continue
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields t,x,y,p, got {len(parts)}", lineno)
        try:
            t, x, y, p = (int(s) for s in parts)
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
        if p not in (1, 0, -1):
            raise ParseError(f"polarity must be 1, 0 or -1, got {p}", lineno)
        if x < 0 or y < 0 or (width is not None and x >= width) or (height is not None and y >= height):
            raise ParseError(f"event at ({x}, {y}) outside sensor {width}x{height}", lineno)
        if ts and t < ts[-1] and not warned:
            log.warning("event timestamps decrease at line %d", lineno)
            warned = True
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(1 if p == 1 else -1)
    return EventArray(ts, xs, ys, ps)


def parse_event_stream(source, width=None, height=None):
    """Parse a CSV event stream into a list of :class:`EventRecord`."""
    return parse_event_array(source, width, height).to_records()


def serialize_events(events, header=None, off_as_zero=False) -> str:
    arr = EventArray.from_records(events)
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    for t, x, y, p in zip(arr.t, arr.x, arr.y, arr.p):
        q = 0 if (off_as_zero and p < 0) else int(p)
        buf.write(f"{int(t)},{int(x)},{int(y)},{q}\n")
    return buf.getvalue()


def accumulate_sum(events, t0, t1, width, height) -> np.ndarray:
    """Per-pixel integer sum of polarities for events with t0 <= t < t1."""
    arr = EventArray.from_records(events)
    if len(arr) and (arr.x.max() >= width or arr.y.max() >= height or arr.x.min() < 0 or arr.y.min() < 0):
        raise ValueError("event coordinates outside the accumulation grid")
    return _kernels.polarity_sum(arr.t, arr.x, arr.y, arr.p, int(t0), int(t1), int(width), int(height))


def accumulate(events, t0, t1, width, height, mode="net") -> PolarityImage:
    """Collapse events in [t0, t1) into a polarity image.

    ``mode="net"`` takes the sign of the summed polarities at each pixel;
    ``mode="latest"`` keeps the polarity of the most recent event.
    """
    if not t0 < t1:
        raise ValueError("accumulation window needs t0 < t1")
    if mode == "net":
        vals = np.sign(accumulate_sum(events, t0, t1, width, height))
    elif mode == "latest":
        arr = EventArray.from_records(events)
        vals = _kernels.polarity_latest(arr.t, arr.x, arr.y, arr.p, int(t0), int(t1), int(width), int(height))
    else:
        raise ValueError(f"unknown accumulation mode {mode!r}")
    return PolarityImage(int(width), int(height), vals.astype(np.int8))


def polarity_to_color(p: PolarityImage, background=EVENT_BACKGROUND) -> PixelImage:
    out = np.empty((p.height, p.width, 3))
    out[...] = background
    out[p.values > 0] = EVENT_POSITIVE
    out[p.values < 0] = EVENT_NEGATIVE
    return PixelImage(out)


def encode_polarity(p: PolarityImage) -> PixelImage:
    """Single-channel encoding (p + 1) / 2 used to store event frames in a sequence."""
    return PixelImage((p.values.astype(np.float64) + 1.0) / 2.0)


def decode_polarity(img: PixelImage) -> PolarityImage:
    v = img.data[:, :, 0]
    vals = np.where(v > 0.5, 1, np.where(v < 0.5, -1, 0)).astype(np.int8)
    return PolarityImage(img.width, img.height, vals)
