"""Manifest-driven loading of multi-modal sequences and ground-truth parsing.

Manifest (JSON)::

    {
      "name": "bag",
      "groundtruth": "groundtruth.txt",
      "event_window_us": 33333,            # optional
      "timestamps": "times.txt",           # optional, one µs value per visible frame
      "streams": [
        {"kind": "visible", "pattern": "color/*.png", "bit_depth": 8},
        {"kind": "depth", "pattern": "depth/*.png", "bit_depth": 16,
         "norm": {"mode": "fixed", "lo": 0, "hi": 8000}},
        {"kind": "event", "pattern": "events.csv", "sensor_size": [346, 260]}
      ]
    }

Patterns are relative to the manifest's directory, use ``*`` globbing and
are sorted lexicographically. A stream whose pattern matches a ``.csv``
file is read as an event stream and accumulated into one polarity frame
per visible frame.
"""
from __future__ import annotations

import glob
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import Annotation, BBox, ModalityKind, ModalSequence, PixelImage, quantize_u8, resample_bilinear
from .dye import NormPolicy
from .errors import (EmptyPatternError, FrameReadError, LengthMismatchError, ManifestError,
                     NoVisibleStreamError, ParseError)
from .events import EventArray, accumulate, encode_polarity, parse_event_array, serialize_events

EVENT_NORM = NormPolicy.fixed(0.0, 1.0)


@dataclass
class StreamSpec:
    kind: ModalityKind
    pattern: str
    bit_depth: int = 8
    norm: NormPolicy | None = None
    files: list = field(default_factory=list)
    sensor_size: tuple | None = None
    accumulate: str = "net"

    @property
    def is_event_csv(self):
        return len(self.files) == 1 and str(self.files[0]).lower().endswith(".csv")


@dataclass
class Manifest:
    name: str
    modalities: list
    groundtruth_path: Path
    event_window_us: int | None = None
    timestamps_path: Path | None = None
    path: Path | None = None

    def stream(self, kind):
        for s in self.modalities:
            if s.kind is kind:
                return s
        return None

    @property
    def n_frames(self):
        return len(self.stream(ModalityKind.VISIBLE).files)


def _expand(root, pattern):
    full = pattern if os.path.isabs(pattern) else os.path.join(root, pattern)
    return [Path(p) for p in sorted(glob.glob(full))]


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise FrameReadError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    return manifest_from_dict(raw, path.parent, path)


def manifest_from_dict(raw, root, path=None) -> Manifest:
    root = str(root)
    if not isinstance(raw, dict) or "streams" not in raw:
        raise ManifestError("manifest needs a 'streams' array")
    specs = []
    for entry in raw["streams"]:
        kind = ModalityKind.parse(entry.get("kind", ""))
        bit_depth = int(entry.get("bit_depth", 8))
        if bit_depth not in (8, 16):
            raise ManifestError(f"bit_depth must be 8 or 16, got {bit_depth}")
        norm = NormPolicy.from_dict(entry["norm"]) if entry.get("norm") else None
        pattern = entry.get("pattern")
        if not pattern:
            raise ManifestError(f"{kind.value} stream has no pattern")
        files = _expand(root, pattern)
        if not files:
            raise EmptyPatternError(f"pattern {pattern!r} for the {kind.value} stream matched no files")
        size = entry.get("sensor_size")
        specs.append(StreamSpec(kind, pattern, bit_depth, norm, files,
                                tuple(int(v) for v in size) if size else None,
                                entry.get("accumulate", "net")))
    visible = [s for s in specs if s.kind is ModalityKind.VISIBLE]
    if not visible:
        raise NoVisibleStreamError("no visible stream")
    if len(visible) > 1:
        raise ManifestError("more than one visible stream")
    kinds = [s.kind for s in specs]
    if len(set(kinds)) != len(kinds):
        raise ManifestError("a modality appears more than once")
    n = len(visible[0].files)
    for s in specs:
        if s.kind is ModalityKind.EVENT and s.is_event_csv:
            continue
        if len(s.files) != n:
            raise LengthMismatchError(
                f"{s.kind.value} pattern matched {len(s.files)} files but visible has {n}")
    if "groundtruth" not in raw:
        raise ManifestError("manifest has no groundtruth entry")
    gt = Path(raw["groundtruth"])
    ts = raw.get("timestamps")
    window = raw.get("event_window_us")
    return Manifest(
        name=str(raw.get("name") or (Path(path).parent.name if path else "sequence")),
        modalities=specs,
        groundtruth_path=gt if gt.is_absolute() else Path(root) / gt,
        event_window_us=int(window) if window is not None else None,
        timestamps_path=(Path(ts) if os.path.isabs(ts) else Path(root) / ts) if ts else None,
        path=Path(path) if path else None,
    )


# ---------------------------------------------------------------------------
# ground truth


def parse_groundtruth(source: str):
    """One line per frame: ``x,y,w,h`` or ``nan,nan,nan,nan`` / empty for target-absent."""
    lines = source.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    out = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            out.append(Annotation.absent())
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"expected x,y,w,h, got {line!r}", lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"non-numeric token in {line!r}", lineno) from None
        nans = [math.isnan(v) for v in vals]
        if all(nans):
            out.append(Annotation.absent())
            continue
        if any(nans) or any(math.isinf(v) for v in vals):
            raise ParseError(f"partially missing box {line!r}", lineno)
        x, y, w, h = vals
        if w < 0 or h < 0:
            raise ParseError(f"negative box size in {line!r}", lineno)
        out.append(Annotation.of(BBox(x, y, w, h)))
    return out


def _num(v):
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def serialize_groundtruth(annotations) -> str:
    rows = []
    for a in annotations:
        if a.present:
            rows.append(",".join(_num(v) for v in a.box.as_tuple()))
        else:
            rows.append("nan,nan,nan,nan")
    return "".join(r + "\n" for r in rows)


# ---------------------------------------------------------------------------
# images


def read_image(path, bit_depth=8) -> PixelImage:
    """Read a PNG as a [0, 1] PixelImage; 8-bit files are divided by 255, 16-bit by 65535."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("P", "LA", "RGBA", "CMYK", "YCbCr"):
                im = im.convert("RGB")
                mode = "RGB"
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise FrameReadError(f"cannot read image {path}: {exc}") from exc
    if mode in ("1", "L", "RGB"):
        depth = 8
    elif mode in ("I;16", "I;16B", "I;16L", "I"):
        depth = 16
    else:
        raise FrameReadError(f"unsupported image mode {mode} in {path}")
    if depth != bit_depth:
        raise FrameReadError(f"{path} is {depth}-bit but the manifest declares {bit_depth}-bit")
    scale = 255.0 if depth == 8 else 65535.0
    arr = arr.astype(np.float64)
    if arr.max(initial=0) > scale or arr.min(initial=0) < 0:
        raise FrameReadError(f"{path} has values outside the {depth}-bit range")
    return PixelImage(arr / scale, raw_scale=scale)


def write_image_u8(img, path):
    arr = quantize_u8(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def write_image_u16(img, path):
    arr = img.data if isinstance(img, PixelImage) else np.asarray(img)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ValueError("16-bit output supports single-channel images only")
        arr = arr[:, :, 0]
    q = np.floor(np.clip(arr, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(q).save(path)


def write_frames(frames, directory, prefix=""):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = directory / f"{prefix}{i:05d}.png"
        write_image_u8(f, p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# sequences


def _read_timestamps(path, n):
    try:
        vals = [int(float(line)) for line in Path(path).read_text().split() if line.strip()]
    except OSError as exc:
        raise FrameReadError(f"cannot read timestamps {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"bad timestamp in {path}: {exc}") from exc
    if len(vals) != n:
        raise LengthMismatchError(f"{len(vals)} timestamps for {n} visible frames")
    return np.array(vals, dtype=np.int64)


def _event_frames(spec, m, n, vis_w, vis_h):
    path = spec.files[0]
    sw, sh = spec.sensor_size or (vis_w, vis_h)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FrameReadError(f"cannot read event stream {path}: {exc}") from exc
    ev = parse_event_array(text, sw, sh)
    if (sw, sh) != (vis_w, vis_h):
        ev = EventArray(ev.t, (ev.x * vis_w) // sw, (ev.y * vis_h) // sh, ev.p)
    if m.timestamps_path is not None:
        ts = _read_timestamps(m.timestamps_path, n)
        if m.event_window_us is not None:
            window = m.event_window_us
        elif n >= 2:
            window = int(np.median(np.diff(ts)))
        else:
            raise ManifestError("a single-frame sequence needs event_window_us")
        starts = ts - window
    else:
        if m.event_window_us is None:
            raise ManifestError("event streams need timestamps or event_window_us")
        window = m.event_window_us
        starts = np.arange(n, dtype=np.int64) * window
    if window <= 0:
        raise ManifestError("event window must be positive")
    return [encode_polarity(accumulate(ev, int(s), int(s) + window, vis_w, vis_h, spec.accumulate))
            for s in starts]


def load_sequence(m: Manifest) -> ModalSequence:
    """Load every stream, align auxiliary frames to the visible resolution, attach ground truth."""
    vis_spec = m.stream(ModalityKind.VISIBLE)
    visible = []
    for p in vis_spec.files:
        img = read_image(p, vis_spec.bit_depth)
        if img.channels == 1:
            img = PixelImage(np.repeat(img.data, 3, axis=2), img.raw_scale)
        visible.append(img)
    n = len(visible)
    vis_h, vis_w = visible[0].height, visible[0].width
    streams = {ModalityKind.VISIBLE: visible}
    norms = {}
    for spec in m.modalities:
        if spec.kind is ModalityKind.VISIBLE:
            continue
        if spec.kind is ModalityKind.EVENT and spec.is_event_csv:
            frames = _event_frames(spec, m, n, vis_w, vis_h)
            norms[spec.kind] = EVENT_NORM
        else:
            frames = []
            for p in spec.files:
                img = read_image(p, spec.bit_depth)
                if (img.width, img.height) != (vis_w, vis_h):
                    img = resample_bilinear(img, vis_w, vis_h)
                frames.append(img)
            if spec.norm is not None:
                norms[spec.kind] = spec.norm
            elif spec.kind is ModalityKind.EVENT:
                norms[spec.kind] = EVENT_NORM
        if len(frames) != n:
            raise LengthMismatchError(f"{spec.kind.value} stream has {len(frames)} frames, visible has {n}")
        streams[spec.kind] = frames
    try:
        gt_text = Path(m.groundtruth_path).read_text()
    except OSError as exc:
        raise FrameReadError(f"cannot read ground truth {m.groundtruth_path}: {exc}") from exc
    annotations = parse_groundtruth(gt_text)
    if len(annotations) != n:
        raise LengthMismatchError(f"{len(annotations)} ground-truth lines for {n} frames")
    return ModalSequence(streams, annotations, m.name, norms)


def load(path) -> ModalSequence:
    return load_sequence(load_manifest(path))


def save_sequence(seq: ModalSequence, directory, event_window_us=1000) -> Path:
    """Write a sequence in manifest layout; returns the manifest path.

    Visible frames go to 8-bit PNG, depth/thermal to 16-bit PNG with a
    fixed normalization range covering the stored values, and encoded event
    frames to an event CSV whose per-frame windows reproduce them exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    streams = [{"kind": "visible", "pattern": "visible/*.png", "bit_depth": 8}]
    write_frames(seq.visible, directory / "visible")
    manifest = {"name": seq.name, "groundtruth": "groundtruth.txt", "streams": streams}
    for kind, frames in seq.streams.items():
        if kind is ModalityKind.VISIBLE:
            continue
        sub = directory / kind.value
        if kind is ModalityKind.EVENT and all(f.channels == 1 for f in frames):
            ts, xs, ys, ps = [], [], [], []
            for i, f in enumerate(frames):
                v = f.data[:, :, 0]
                for sign in (1, -1):
                    yy, xx = np.nonzero(v > 0.5) if sign > 0 else np.nonzero(v < 0.5)
                    ts.extend([i * event_window_us] * len(xx))
                    xs.extend(xx.tolist())
                    ys.extend(yy.tolist())
                    ps.extend([sign] * len(xx))
            order = np.argsort(np.asarray(ts, dtype=np.int64), kind="stable")
            arr = EventArray(np.asarray(ts)[order], np.asarray(xs)[order], np.asarray(ys)[order],
                             np.asarray(ps)[order])
            (directory / "events.csv").write_text(serialize_events(arr, header="t,x,y,p"))
            (directory / "timestamps.txt").write_text(
                "".join(f"{(i + 1) * event_window_us}\n" for i in range(len(frames))))
            manifest["timestamps"] = "timestamps.txt"
            manifest["event_window_us"] = event_window_us
            w, h = seq.frame_size
            streams.append({"kind": "event", "pattern": "events.csv", "sensor_size": [w, h]})
        elif all(f.channels == 1 for f in frames):
            sub.mkdir(parents=True, exist_ok=True)
            for i, f in enumerate(frames):
                write_image_u16(f, sub / f"{i:05d}.png")
            entry = {"kind": kind.value, "pattern": f"{kind.value}/*.png", "bit_depth": 16}
            policy = seq.aux_norm.get(kind)
            if policy is not None:
                if policy.mode == "fixed":
                    scale = frames[0].raw_scale
                    policy = NormPolicy.fixed(policy.lo / scale * 65535.0, policy.hi / scale * 65535.0)
                entry["norm"] = policy.to_dict()
            streams.append(entry)
        else:
            write_frames(frames, sub)
            streams.append({"kind": kind.value, "pattern": f"{kind.value}/*.png", "bit_depth": 8})
    (directory / "groundtruth.txt").write_text(serialize_groundtruth(seq.annotations))
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
