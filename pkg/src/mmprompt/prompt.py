"""Prompt compositor: blend dyed auxiliary frames into the visible stream."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ModalityKind, ModalSequence, PixelImage
from .dye import ColormapKind, NormPolicy, color, default_colormap
from .errors import ConfigError

DEFAULT_LAMBDA = 0.05
LAMBDA_GRID = (0.0, 0.01, 0.05, 0.1, 0.2)
WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Dual:
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class Triple:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        _check_triple(self.alpha, self.beta, self.gamma)


AUX_ORDER = (ModalityKind.DEPTH, ModalityKind.THERMAL, ModalityKind.EVENT)


@dataclass(frozen=True)
class PromptConfig:
    """Blend weights plus per-modality colormaps.

    ``aux`` names the auxiliary modalities in blend order (one for Dual, two
    for Triple); None picks them from the sequence in depth, thermal, event
    order. ``norm``, when set, overrides any per-stream policy the sequence
    carries.
    """

    weights: Dual | Triple = field(default_factory=Dual)
    aux: tuple | None = None
    colormaps: dict = field(default_factory=dict)
    norm: NormPolicy | None = None

    def __post_init__(self):
        if self.aux is not None:
            aux = tuple(ModalityKind.parse(a) if isinstance(a, str) else a for a in self.aux)
            if len(aux) != self.n_aux:
                raise ConfigError(f"{type(self.weights).__name__} weights need {self.n_aux} "
                                  f"auxiliary modalities, got {len(aux)}")
            if ModalityKind.VISIBLE in aux:
                raise ConfigError("the visible stream cannot be an auxiliary modality")
            object.__setattr__(self, "aux", aux)
        cmaps = {(ModalityKind.parse(k) if isinstance(k, str) else k): ColormapKind.parse(v)
                 for k, v in self.colormaps.items()}
        object.__setattr__(self, "colormaps", cmaps)

    @property
    def n_aux(self):
        return 1 if isinstance(self.weights, Dual) else 2

    def aux_for(self, seq: ModalSequence):
        if self.aux is not None:
            return self.aux
        found = [k for k in AUX_ORDER if k in seq.streams]
        if len(found) < self.n_aux:
            raise ConfigError(f"sequence {seq.name!r} has {len(found)} auxiliary stream(s); "
                              f"{type(self.weights).__name__} weights need {self.n_aux}")
        return tuple(found[:self.n_aux])

    def colormap_for(self, kind):
        return self.colormaps.get(kind, default_colormap(kind))

    def to_dict(self):
        if isinstance(self.weights, Dual):
            w = {"lambda": self.weights.lam}
        else:
            w = {"alpha": self.weights.alpha, "beta": self.weights.beta, "gamma": self.weights.gamma}
        return {
            "weights": w,
            "aux": None if self.aux is None else [a.value for a in self.aux],
            "colormaps": {k.value: v.value for k, v in sorted(self.colormaps.items(), key=lambda kv: kv[0].value)},
            "norm": None if self.norm is None else self.norm.to_dict(),
        }


def _check_triple(alpha, beta, gamma):
    if min(alpha, beta, gamma) < 0:
        raise ConfigError("triple weights must be non-negative")
    if abs(alpha + beta + gamma - 1.0) > WEIGHT_SUM_TOL:
        raise ConfigError(f"triple weights must sum to 1, got {alpha + beta + gamma!r}")


def _check_pair(v, a):
    if v.shape != a.shape:
        raise ValueError(f"image shapes differ: {v.shape} vs {a.shape}")
    if v.channels != 3:
        raise ValueError("compositor inputs must be dyed 3-channel images")


def compose_dual(v: PixelImage, a: PixelImage, lam: float) -> PixelImage:
    """lam * a + (1 - lam) * v, per pixel and channel.

    Evaluated as v + lam * (a - v) and clipped to the [min, max] of the two
    inputs so the result is exactly convex; lam = 0 and lam = 1 return the
    inputs themselves.
    """
    _check_pair(v, a)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 0.0:
        return v
    if lam == 1.0:
        return a
    vd, ad = v.data, a.data
    out = vd + lam * (ad - vd)
    np.clip(out, np.minimum(vd, ad), np.maximum(vd, ad), out=out)
    return PixelImage(out)


def compose_triple(v, a1, a2, alpha, beta, gamma) -> PixelImage:
    """alpha * a1 + beta * a2 + gamma * v with alpha + beta + gamma = 1."""
    _check_pair(v, a1)
    _check_pair(v, a2)
    _check_triple(alpha, beta, gamma)
    if beta == 0.0:
        return compose_dual(v, a1, alpha)
    if alpha == 0.0:
        return compose_dual(v, a2, beta)
    vd, d1, d2 = v.data, a1.data, a2.data
    out = vd + alpha * (d1 - vd) + beta * (d2 - vd)
    lo = np.minimum(np.minimum(vd, d1), d2)
    hi = np.maximum(np.maximum(vd, d1), d2)
    np.clip(out, lo, hi, out=out)
    return PixelImage(out)


def _policy(seq, cfg, kind):
    if cfg.norm is not None:
        return cfg.norm
    return seq.aux_norm.get(kind)


def dye_stream(seq: ModalSequence, kind, cfg: PromptConfig | None = None):
    cfg = cfg or PromptConfig()
    if kind not in seq.streams:
        raise ConfigError(f"sequence {seq.name!r} has no {kind.value} stream")
    cmap = cfg.colormap_for(kind)
    policy = _policy(seq, cfg, kind)
    return [color(f, kind, cmap, policy) for f in seq.streams[kind]]


def compose_frames(visible, aux_streams, weights):
    """Blend pre-dyed streams frame by frame."""
    if isinstance(weights, Dual):
        (aux,) = aux_streams
        return [compose_dual(v, a, weights.lam) for v, a in zip(visible, aux)]
    a1s, a2s = aux_streams
    return [compose_triple(v, a1, a2, weights.alpha, weights.beta, weights.gamma)
            for v, a1, a2 in zip(visible, a1s, a2s)]


def prompt_sequence(seq: ModalSequence, cfg: PromptConfig, dyed=None) -> list:
    """Prompted frame i = blend(Color(V_i), Color(A_i)); the first frame is treated like every other.

    ``dyed`` is an optional dict cache of dyed streams shared across calls
    that differ only in weights.
    """
    if cfg.aux is None and isinstance(cfg.weights, Dual) and cfg.weights.lam == 0.0 \
            and not any(k in seq.streams for k in AUX_ORDER):
        # visible-only baseline on an RGB-only sequence
        return list(_cached(seq, cfg, ModalityKind.VISIBLE, dyed))
    aux_kinds = cfg.aux_for(seq)
    for kind in aux_kinds:
        if kind not in seq.streams:
            raise ConfigError(f"sequence {seq.name!r} is missing the {kind.value} stream")
    cache = {} if dyed is None else dyed
    visible = _cached(seq, cfg, ModalityKind.VISIBLE, cache)
    return compose_frames(visible, [_cached(seq, cfg, k, cache) for k in aux_kinds], cfg.weights)


def _cached(seq, cfg, kind, cache):
    if cache is None:
        return dye_stream(seq, kind, cfg)
    key = (kind, cfg.colormap_for(kind), _policy(seq, cfg, kind))
    if key not in cache:
        cache[key] = dye_stream(seq, kind, cfg)
    return cache[key]
