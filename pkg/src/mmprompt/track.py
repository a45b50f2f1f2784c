"""Tracker contract and the native correlation-filter reference tracker.

A tracker is initialised on the first frame with the first box and then
stepped frame by frame; it never sees anything but (prompted) frames.
"""
from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .core import BBox, PixelImage, quantize_u8
from .errors import ConfigError, ParseError
from .metrics import CONFIDENCE_SENTINEL

LUMA = np.array([0.299, 0.587, 0.114])
PSR_EXCLUDE_HALF = 5  # 11x11 region around the peak


@dataclass(frozen=True)
class TrackerOutput:
    box: BBox
    confidence: float
    reported: bool

    def __post_init__(self):
        if not math.isfinite(self.confidence) or self.confidence < 0:
            raise ValueError("confidence must be finite and non-negative")


@dataclass(frozen=True)
class TrackerParams:
    learn_rate: float = 0.125
    reg_eps: float = 1e-3
    response_sigma: float | None = None  # default sqrt(w*h)/16
    psr_threshold: float = 5.0
    padding: float = 2.0
    n_perturb: int = 8
    perturb_amount: float = 0.1
    color_filters: bool = True
    seed: int = 0

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class CorrelationFilterState:
    numerator: np.ndarray    # (C, hh, ww) complex
    denominator: np.ndarray  # (hh, ww) real, >= reg_eps, shared by the channels
    window_w: int
    window_h: int
    learn_rate: float
    reg_eps: float
    response_sigma: float
    current_center: tuple
    target_size: tuple
    psr_threshold: float
    color_filters: bool
    hann: np.ndarray = field(repr=False)


def window_size(w, h, padding=2.0):
    def one(v):
        n = int(math.floor(v * padding + 0.5))
        n += n % 2
        return max(n, 8)

    return one(w), one(h)


def _origin(c, n):
    # index coordinate of the target centre is c - 0.5; it lands on window index n/2 + frac
    pos = c - 0.5 - n / 2.0
    o = math.floor(pos + 0.5)
    return o, pos - o


def _crop(arr, cx, cy, ww, hh):
    """Window of size (hh, ww) around (cx, cy), shifted to stay inside the frame.

    Returns the patch and its top-left index. Frames smaller than the window
    are edge-replicated.
    """
    H, W = arr.shape[:2]
    x0, _ = _origin(cx, ww)
    y0, _ = _origin(cy, hh)
    if W >= ww:
        x0 = min(max(x0, 0), W - ww)
    if H >= hh:
        y0 = min(max(y0, 0), H - hh)
    if x0 >= 0 and y0 >= 0 and x0 + ww <= W and y0 + hh <= H:
        return arr[y0:y0 + hh, x0:x0 + ww], x0, y0
    rows = np.clip(np.arange(y0, y0 + hh), 0, H - 1)
    cols = np.clip(np.arange(x0, x0 + ww), 0, W - 1)
    return arr[np.ix_(rows, cols)], x0, y0


def _features(patch, color_filters, hann):
    """(hh, ww, 3) raw patch -> (C, hh, ww) windowed features.

    Min-max scaling to [0, 1] comes first so the features (and hence PSR)
    are unchanged by any affine intensity change a*v + b with a > 0.
    """
    x = patch if color_filters else (patch @ LUMA)[:, :, None]
    x = np.moveaxis(x, 2, 0).astype(np.float64)
    lo, hi = x.min(), x.max()
    if hi > lo:
        x = (x - lo) / (hi - lo)
    else:
        x = np.zeros_like(x)
    x = np.log1p(x)
    x = x - x.mean(axis=(1, 2), keepdims=True)
    norm = np.sqrt((x * x).sum())
    if norm > 0:
        x = x / norm
    return x * hann


def _gaussian_spectrum(ww, hh, fx, fy, sigma):
    ys = np.arange(hh) - (hh / 2.0 + fy)
    xs = np.arange(ww) - (ww / 2.0 + fx)
    g = np.exp(-(ys[:, None] ** 2 + xs[None, :] ** 2) / (2.0 * sigma * sigma))
    return np.fft.fft2(g)


def _perturb(patch, rng, amount):
    hh, ww = patch.shape[:2]
    ang = (rng.random() - 0.5) * amount * 2.0
    c, s = math.cos(ang), math.sin(ang)
    m = np.array([[c, -s], [s, c]]) + (rng.random((2, 2)) - 0.5) * amount
    center = np.array([(hh - 1) / 2.0, (ww - 1) / 2.0])
    offset = center - m @ center
    out = np.empty_like(patch)
    for ch in range(patch.shape[2]):
        out[:, :, ch] = ndimage.affine_transform(patch[:, :, ch], m, offset=offset, order=1, mode="reflect")
    return out


def _frame_array(frame):
    arr = frame.data if isinstance(frame, PixelImage) else np.asarray(frame, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr


def tracker_init(frame, b1: BBox, params: TrackerParams | None = None) -> CorrelationFilterState:
    params = params or TrackerParams()
    arr = _frame_array(frame)
    H, W = arr.shape[:2]
    if b1.w <= 0 or b1.h <= 0:
        raise ValueError("initial box must have positive area")
    if b1.x < 0 or b1.y < 0 or b1.x + b1.w > W or b1.y + b1.h > H:
        raise ValueError(f"initial box {b1.as_tuple()} is not inside the {W}x{H} frame")
    ww, hh = window_size(b1.w, b1.h, params.padding)
    sigma = params.response_sigma if params.response_sigma is not None else math.sqrt(b1.w * b1.h) / 16.0
    hann = np.outer(np.hanning(hh), np.hanning(ww))
    cx, cy = b1.center
    patch, x0, y0 = _crop(arr, cx, cy, ww, hh)
    fx = (cx - 0.5 - ww / 2.0) - x0
    fy = (cy - 0.5 - hh / 2.0) - y0
    G = _gaussian_spectrum(ww, hh, fx, fy, sigma)
    rng = np.random.default_rng(params.seed)
    nc = 3 if params.color_filters else 1
    num = np.zeros((nc, hh, ww), dtype=np.complex128)
    den = np.zeros((hh, ww), dtype=np.float64)
    for _ in range(params.n_perturb):
        F = np.fft.fft2(_features(_perturb(patch, rng, params.perturb_amount), params.color_filters, hann))
        num += G[None] * np.conj(F)
        den += (F.real ** 2 + F.imag ** 2).sum(axis=0)
    k = max(params.n_perturb, 1)
    return CorrelationFilterState(
        numerator=num / k,
        denominator=den / k + params.reg_eps,
        window_w=ww,
        window_h=hh,
        learn_rate=params.learn_rate,
        reg_eps=params.reg_eps,
        response_sigma=sigma,
        current_center=(cx, cy),
        target_size=(b1.w, b1.h),
        psr_threshold=params.psr_threshold,
        color_filters=params.color_filters,
        hann=hann,
    )


def _subpixel(r_m, r_0, r_p):
    d = r_m - 2.0 * r_0 + r_p
    if d >= 0:
        return 0.0
    return 0.5 * (r_m - r_p) / d


def correlation_response(state: CorrelationFilterState, frame):
    """Real correlation response over the window at the current centre, plus the window origin."""
    arr = _frame_array(frame)
    cx, cy = state.current_center
    patch, x0, y0 = _crop(arr, cx, cy, state.window_w, state.window_h)
    F = np.fft.fft2(_features(patch, state.color_filters, state.hann))
    H = state.numerator / state.denominator[None]
    resp = np.real(np.fft.ifft2((H * F).sum(axis=0)))
    return resp, x0, y0


def peak_to_sidelobe(resp):
    py, px = np.unravel_index(int(np.argmax(resp)), resp.shape)
    peak = float(resp[py, px])
    mean, std = _kernels.sidelobe_stats(resp, int(py), int(px), PSR_EXCLUDE_HALF)
    if not std > 1e-12:
        return 0.0, (py, px)
    return (peak - mean) / std, (py, px)


def tracker_step(state: CorrelationFilterState, frame) -> TrackerOutput:
    arr = _frame_array(frame)
    H, W = arr.shape[:2]
    resp, x0, y0 = correlation_response(state, arr)
    psr, (py, px) = peak_to_sidelobe(resp)
    reported = psr >= state.psr_threshold
    tw, th = state.target_size
    if reported:
        hh, ww = resp.shape
        dy = _subpixel(resp[py - 1, px], resp[py, px], resp[(py + 1) % hh, px]) if 0 < py < hh - 1 else 0.0
        dx = _subpixel(resp[py, px - 1], resp[py, px], resp[py, (px + 1) % ww]) if 0 < px < ww - 1 else 0.0
        cx = min(max(x0 + px + dx + 0.5, 0.0), float(W))
        cy = min(max(y0 + py + dy + 0.5, 0.0), float(H))
        state.current_center = (cx, cy)
        _update(state, arr)
    cx, cy = state.current_center
    return TrackerOutput(BBox.from_center(cx, cy, tw, th), float(max(psr, 0.0)), bool(reported))


def _update(state, arr):
    ww, hh = state.window_w, state.window_h
    cx, cy = state.current_center
    patch, x0, y0 = _crop(arr, cx, cy, ww, hh)
    fx = (cx - 0.5 - ww / 2.0) - x0
    fy = (cy - 0.5 - hh / 2.0) - y0
    G = _gaussian_spectrum(ww, hh, fx, fy, state.response_sigma)
    F = np.fft.fft2(_features(patch, state.color_filters, state.hann))
    eta = state.learn_rate
    state.numerator = (1.0 - eta) * state.numerator + eta * (G[None] * np.conj(F))
    state.denominator = (1.0 - eta) * state.denominator + eta * ((F.real ** 2 + F.imag ** 2).sum(axis=0) + state.reg_eps)


def _echo(b1):
    return TrackerOutput(b1, CONFIDENCE_SENTINEL, True)


def run_tracker(frames, b1: BBox, params: TrackerParams | None = None):
    """Frame 0 echoes ``b1`` with the maximal confidence; later frames come from tracker_step."""
    if len(frames) == 0:
        raise ValueError("no frames to track")
    state = tracker_init(frames[0], b1, params)
    out = [_echo(b1)]
    for frame in frames[1:]:
        out.append(tracker_step(state, frame))
    return out


# ---------------------------------------------------------------------------
# pluggable trackers


class Tracker:
    """Minimal tracker protocol: ``init(frame, box)`` then ``step(frame)`` per frame."""

    name = "base"

    def init(self, frame, box):
        raise NotImplementedError

    def step(self, frame) -> TrackerOutput:
        raise NotImplementedError

    def params(self):
        return {}

    def run(self, frames, b1, annotations=None):
        self.init(frames[0], b1)
        return [_echo(b1)] + [self.step(f) for f in frames[1:]]


class MosseTracker(Tracker):
    name = "mosse"

    def __init__(self, params: TrackerParams | None = None):
        self._params = params or TrackerParams()
        self.state = None

    def init(self, frame, box):
        self.state = tracker_init(frame, box, self._params)

    def step(self, frame):
        return tracker_step(self.state, frame)

    def params(self):
        return self._params.to_dict()


class OracleTracker(Tracker):
    """Scripted stub that reads the ground truth: reports exactly where the target is present."""

    name = "oracle"
    confidence = 1.0

    def __init__(self, always_report=False):
        self.always_report = always_report
        if always_report:
            self.name = "always"

    def run(self, frames, b1, annotations=None):
        if annotations is None:
            raise ConfigError(f"the {self.name} tracker needs ground-truth annotations")
        out = [_echo(b1)]
        last = b1
        for ann in annotations[1:len(frames)]:
            if ann.present:
                last = ann.box
                out.append(TrackerOutput(ann.box, self.confidence, True))
            else:
                out.append(TrackerOutput(last, self.confidence, self.always_report))
        return out


def parse_tracker_output(text, n_frames=None):
    """Parse ``x,y,w,h,confidence`` lines; a nan coordinate means 'not reported'."""
    out = []
    last = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected x,y,w,h,confidence, got {line!r}", lineno)
        try:
            x, y, w, h, c = (float(p) for p in parts)
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno) from None
        if any(math.isnan(v) for v in (x, y, w, h)):
            if last is None:
                raise ParseError("first line must carry a box", lineno)
            out.append(TrackerOutput(last, 0.0 if math.isnan(c) else max(c, 0.0), False))
            continue
        if w < 0 or h < 0:
            raise ParseError("negative box size", lineno)
        last = BBox(x, y, w, h)
        c = CONFIDENCE_SENTINEL if math.isinf(c) else c
        out.append(TrackerOutput(last, max(c, 0.0), True))
    if n_frames is not None and len(out) != n_frames:
        raise ParseError(f"tracker produced {len(out)} lines for {n_frames} frames")
    return out


def format_tracker_output(outputs):
    lines = []
    for o in outputs:
        if o.reported:
            b = o.box
            lines.append(f"{b.x!r},{b.y!r},{b.w!r},{b.h!r},{o.confidence!r}")
        else:
            lines.append(f"nan,nan,nan,nan,{o.confidence!r}")
    return "\n".join(lines) + "\n"


class ExternalTracker(Tracker):
    """Run a third-party tracker as a subprocess.

    The command is invoked as ``<command> <frames_dir> <x,y,w,h>`` where
    ``frames_dir`` holds the frames as ``00000.png, 00001.png, ...`` (8-bit
    RGB). It must print one ``x,y,w,h,confidence`` line per frame, frame 0
    included, to standard output.
    """

    name = "external"

    def __init__(self, command, timeout=None):
        self.command = command
        self.timeout = timeout

    def params(self):
        return {"command": self.command}

    def run(self, frames, b1, annotations=None):
        from PIL import Image

        with tempfile.TemporaryDirectory(prefix="mmprompt-ext-") as tmp:
            for i, f in enumerate(frames):
                Image.fromarray(quantize_u8(f)).save(os.path.join(tmp, f"{i:05d}.png"))
            box = f"{b1.x!r},{b1.y!r},{b1.w!r},{b1.h!r}"
            argv = shlex.split(self.command) + [tmp, box]
            res = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout, check=True)
        out = parse_tracker_output(res.stdout, len(frames))
        out[0] = _echo(b1)
        return out


TRACKERS = ("mosse", "oracle", "always", "external")


def make_tracker(name, params: TrackerParams | None = None, command=None) -> Tracker:
    name = name.lower()
    if name == "mosse":
        return MosseTracker(params)
    if name == "oracle":
        return OracleTracker()
    if name in ("always", "always-report"):
        return OracleTracker(always_report=True)
    if name == "external":
        if not command:
            raise ConfigError("the external tracker needs a command")
        return ExternalTracker(command)
    raise ConfigError(f"unknown tracker {name!r}; choose from {', '.join(TRACKERS)}")
