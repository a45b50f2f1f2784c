"""Seeded generator of multi-modal sequences with controllable information content.

Every random component (background, target path, distractor paths, pixel
noise) draws from its own child stream of the config seed, so changing one
component leaves the others bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .core import Annotation, BBox, ModalityKind, ModalSequence, PixelImage
from .dye import NormPolicy
from .errors import ConfigError

CAMOUFLAGE = "camouflage"
RGB_EASY = "rgb_easy"
OCCLUSION = "occlusion"
SCENARIOS = (CAMOUFLAGE, RGB_EASY, OCCLUSION)


@dataclass(frozen=True)
class LinearBounce:
    speed: float = 1.5


@dataclass(frozen=True)
class RandomWalk:
    step_sigma: float = 1.0


@dataclass(frozen=True)
class SynthConfig:
    width: int = 128
    height: int = 128
    n_frames: int = 200
    target_size: tuple = (20, 20)
    motion: LinearBounce | RandomWalk = field(default_factory=LinearBounce)
    rgb_contrast: float = 1.0
    aux_contrast: float = 0.9
    noise_sigma: float = 0.0
    n_distractors: int = 0
    absent_spans: tuple = ()
    scenario: str = RGB_EASY
    seed: int = 0
    # extensions beyond the core knobs
    aux_kind: ModalityKind = ModalityKind.DEPTH
    n_aux_distractors: int = 0
    aux_distractor_rgb: float = 1.0
    texture_amplitude: float = 0.3
    aux_level: float = 0.05
    motion_seed: int | None = None

    def __post_init__(self):
        tw, th = self.target_size
        if tw <= 0 or th <= 0:
            raise ValueError("target size must be positive")
        if tw > self.width or th > self.height:
            raise ValueError(f"target {tw}x{th} does not fit a {self.width}x{self.height} frame")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        for name in ("rgb_contrast", "aux_contrast"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.aux_level + self.aux_contrast > 1.0 + 1e-12:
            raise ValueError("aux_level + aux_contrast must not exceed 1")
        spans = tuple(tuple(int(v) for v in s) for s in self.absent_spans)
        for start, end in spans:
            if not 0 <= start < end <= self.n_frames:
                raise ValueError(f"absent span {(start, end)} outside [0, {self.n_frames})")
        object.__setattr__(self, "absent_spans", spans)
        if isinstance(self.aux_kind, str):
            object.__setattr__(self, "aux_kind", ModalityKind.parse(self.aux_kind))
        if self.aux_kind is ModalityKind.VISIBLE:
            raise ValueError("auxiliary modality cannot be visible")

    def absent_mask(self):
        mask = np.zeros(self.n_frames, dtype=bool)
        for start, end in self.absent_spans:
            mask[start:end] = True
        return mask


def value_noise(rng, height, width, cell=16, octaves=2):
    """Smooth lattice noise in [0, 1]: cubic-interpolated random lattices, summed over octaves."""
    out = np.zeros((height, width))
    total = 0.0
    amp = 1.0
    for _ in range(octaves):
        gh = int(math.ceil(height / cell)) + 2
        gw = int(math.ceil(width / cell)) + 2
        lattice = rng.random((gh, gw))
        up = ndimage.zoom(lattice, cell, order=3, mode="reflect", grid_mode=True)
        out += amp * up[:height, :width]
        total += amp
        amp *= 0.5
        cell = max(cell // 2, 2)
    out /= total
    lo, hi = out.min(), out.max()
    return (out - lo) / (hi - lo) if hi > lo else np.full_like(out, 0.5)


def _path(rng, cfg, motion, size):
    """Top-left positions (float) of a rectangle of ``size`` moving inside the frame."""
    w, h = size
    max_x, max_y = cfg.width - w, cfg.height - h
    pos = np.array([rng.uniform(0, max_x), rng.uniform(0, max_y)])
    out = np.empty((cfg.n_frames, 2))
    if isinstance(motion, LinearBounce):
        ang = rng.uniform(0, 2 * math.pi)
        vel = motion.speed * np.array([math.cos(ang), math.sin(ang)])
    else:
        vel = np.zeros(2)
    lim = np.array([max_x, max_y], dtype=float)
    for i in range(cfg.n_frames):
        out[i] = pos
        if isinstance(motion, RandomWalk):
            vel = rng.normal(0.0, motion.step_sigma, 2)
        pos = pos + vel
        for k in range(2):
            if pos[k] < 0:
                pos[k] = -pos[k]
                vel[k] = -vel[k]
            elif pos[k] > lim[k]:
                pos[k] = 2 * lim[k] - pos[k]
                vel[k] = -vel[k]
            pos[k] = min(max(pos[k], 0.0), lim[k])
    return out


def _int_box(pos, size):
    return int(round(pos[0])), int(round(pos[1])), int(size[0]), int(size[1])


def generate(cfg: SynthConfig) -> ModalSequence:
    """Render a sequence: textured background, target, distractors, auxiliary map, ground truth."""
    ss = np.random.SeedSequence(cfg.seed)
    r_bg, r_target, r_motion, r_distract, r_noise, r_aux_distract = (np.random.default_rng(s) for s in ss.spawn(6))
    if cfg.motion_seed is not None:
        r_motion = np.random.default_rng(cfg.motion_seed)
    H, W = cfg.height, cfg.width
    tw, th = cfg.target_size

    base = r_bg.uniform(0.3, 0.7, 3)
    tex = np.stack([value_noise(r_bg, H, W) for _ in range(3)], axis=2)
    background = np.clip(base + cfg.texture_amplitude * (tex - 0.5), 0.0, 1.0)

    # the target's own appearance: a colour far from the background plus fine texture
    target_color = np.where(base > 0.5, r_target.uniform(0.0, 0.2, 3), r_target.uniform(0.8, 1.0, 3))
    target_look = np.clip(target_color + 0.3 * (r_target.random((th, tw, 3)) - 0.5), 0.0, 1.0)

    target_path = _path(r_motion, cfg, cfg.motion, (tw, th))
    distractor_paths = [_path(r_distract, cfg, LinearBounce(r_distract.uniform(0.8, 2.0)), (tw, th))
                        for _ in range(cfg.n_distractors)]
    aux_paths, aux_looks = [], []
    for _ in range(cfg.n_aux_distractors):
        aux_paths.append(_path(r_aux_distract, cfg, LinearBounce(r_aux_distract.uniform(0.8, 2.0)), (tw, th)))
        col = r_aux_distract.uniform(0.0, 1.0, 3)
        aux_looks.append(np.clip(col + 0.3 * (r_aux_distract.random((th, tw, 3)) - 0.5), 0.0, 1.0))

    absent = cfg.absent_mask()
    c = cfg.rgb_contrast
    hot = cfg.aux_level + cfg.aux_contrast
    visible, aux, annotations = [], [], []
    prev_mask = np.zeros((H, W), dtype=bool)

    for i in range(cfg.n_frames):
        rgb = background.copy()
        amap = np.full((H, W), cfg.aux_level)
        for path, look in zip(aux_paths, aux_looks):
            x, y, w, h = _int_box(path[i], (tw, th))
            k = cfg.aux_distractor_rgb
            rgb[y:y + h, x:x + w] = (1.0 - k) * background[y:y + h, x:x + w] + k * look
            amap[y:y + h, x:x + w] = hot
        for path in distractor_paths:
            x, y, w, h = _int_box(path[i], (tw, th))
            region = background[y:y + h, x:x + w]
            rgb[y:y + h, x:x + w] = (1.0 - c) * region + c * target_look
        x, y, w, h = _int_box(target_path[i], (tw, th))
        mask = np.zeros((H, W), dtype=bool)
        if absent[i]:
            annotations.append(Annotation.absent())
        else:
            region = background[y:y + h, x:x + w]
            rgb[y:y + h, x:x + w] = (1.0 - c) * region + c * target_look
            amap[y:y + h, x:x + w] = hot
            mask[y:y + h, x:x + w] = True
            annotations.append(Annotation.of(BBox(x, y, w, h)))
        if cfg.noise_sigma > 0:
            rgb = rgb + r_noise.normal(0.0, cfg.noise_sigma, rgb.shape)
            amap = amap + r_noise.normal(0.0, cfg.noise_sigma, amap.shape)
        visible.append(PixelImage(np.clip(rgb, 0.0, 1.0)))
        if cfg.aux_kind is ModalityKind.EVENT:
            pol = mask.astype(np.int8) - prev_mask.astype(np.int8) if i > 0 else np.zeros((H, W), np.int8)
            aux.append(PixelImage((pol.astype(np.float64) + 1.0) / 2.0))
        else:
            aux.append(PixelImage(np.clip(amap, 0.0, 1.0)))
        prev_mask = mask

    return ModalSequence(
        streams={ModalityKind.VISIBLE: visible, cfg.aux_kind: aux},
        annotations=annotations,
        name=f"{cfg.scenario}-{cfg.seed:04d}",
        aux_norm={cfg.aux_kind: NormPolicy.fixed(0.0, 1.0)},
    )


SUITES = ("camouflage", "mixed", "longterm")


def scenario_config(scenario, seed, **overrides) -> SynthConfig:
    """Preset knobs for each scenario at the default 128x128, 200-frame scale."""
    if scenario == CAMOUFLAGE:
        kw = dict(rgb_contrast=0.02, aux_contrast=0.9, noise_sigma=0.02, n_distractors=2,
                  n_aux_distractors=2, aux_distractor_rgb=0.25, texture_amplitude=0.05)
    elif scenario == RGB_EASY:
        kw = dict(rgb_contrast=1.0, aux_contrast=0.03, noise_sigma=0.02, n_distractors=1)
    elif scenario == OCCLUSION:
        kw = dict(rgb_contrast=0.6, aux_contrast=0.6, noise_sigma=0.02, n_distractors=1)
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    kw.update(scenario=scenario, seed=seed)
    kw.update(overrides)
    return SynthConfig(**kw)


def _absent_spans(rng, n_frames, fraction=0.2, max_len=10):
    """Non-overlapping spans of <= max_len frames covering at least ``fraction`` of the sequence.

    Frame 0 is never absent (it carries the initial box).
    """
    need = int(math.ceil(fraction * n_frames))
    n_spans = max(1, int(math.ceil(need / max_len)))
    if n_frames < 2 or n_spans * (max_len + 1) >= n_frames:
        raise ValueError("sequence too short for the requested absent spans")
    lengths = [max_len] * (need // max_len) + ([need % max_len] if need % max_len else [])
    k = len(lengths)
    # one spare frame between spans; sorted offsets keep them ordered and disjoint
    slack = n_frames - 1 - sum(lengths) - (k - 1)
    offsets = np.sort(rng.integers(0, slack + 1, k))
    spans = []
    for j, (length, off) in enumerate(zip(lengths, offsets)):
        start = 1 + int(off) + sum(lengths[:j]) + j
        spans.append((start, start + length))
    return tuple(spans)


def suite_configs(name, n_seeds, base_seed=0, **overrides):
    """Configs for a named suite: camouflage, mixed (half RGB-easy, half camouflage), longterm (occlusions)."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if name == "camouflage":
        return [scenario_config(CAMOUFLAGE, base_seed + k, **overrides) for k in range(n_seeds)]
    if name == "mixed":
        half = n_seeds // 2
        return [scenario_config(RGB_EASY if k < n_seeds - half else CAMOUFLAGE, base_seed + k, **overrides)
                for k in range(n_seeds)]
    if name == "longterm":
        cfgs = []
        for k in range(n_seeds):
            cfg = scenario_config(OCCLUSION, base_seed + k, **overrides)
            spans = _absent_spans(np.random.default_rng([cfg.seed, 7]), cfg.n_frames)
            cfgs.append(replace(cfg, absent_spans=spans))
        return cfgs
    raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")


def make_suite(name, n_seeds, base_seed=0, **overrides):
    return [(cfg, generate(cfg)) for cfg in suite_configs(name, n_seeds, base_seed, **overrides)]
