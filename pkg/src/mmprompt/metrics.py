"""Short-term (success / precision plots) and long-term (Pr / Re / F) evaluation."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BBox
from .errors import ProtocolError

SUCCESS_GRID = np.arange(101) / 100.0
PRECISION_GRID = np.arange(51, dtype=np.float64)
PRECISION_AT = 20


@dataclass(frozen=True)
class EvalCurves:
    thresholds: tuple
    values: tuple
    summary: float

    def __post_init__(self):
        if len(self.thresholds) != len(self.values):
            raise ValueError("thresholds and values differ in length")


@dataclass(frozen=True)
class LtScore:
    pr: float
    re: float
    f: float
    tau_star: float


def iou(a: BBox, b: BBox) -> float:
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def center_error(a: BBox, b: BBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def f_score(pr: float, re: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if pr == re:
        return float(pr)
    s = pr + re
    if s == 0:
        return 0.0
    return 2.0 * (pr * re) / s


def _box_of(pred):
    return pred.box if hasattr(pred, "box") else pred


def _present_pairs(preds, gts):
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth frames")
    pairs = [(_box_of(p), g.box) for p, g in zip(preds, gts) if g.present]
    if not pairs:
        raise ProtocolError("no frames with the target present")
    return pairs


def success_curve(preds, gts) -> EvalCurves:
    """Fraction of target-present frames with IoU >= s, s in {0, 0.01, ..., 1}; summary is the mean (AUC)."""
    ious = np.array([iou(p, g) for p, g in _present_pairs(preds, gts)])
    counts = _kernels.count_at_least(ious, SUCCESS_GRID)
    values = counts / len(ious)
    # mean of the values, as one division of integers so it is exactly rounded
    auc = int(counts.sum()) / (len(ious) * len(SUCCESS_GRID))
    return EvalCurves(tuple(SUCCESS_GRID.tolist()), tuple(values.tolist()), auc)


def precision_curve(preds, gts) -> EvalCurves:
    """Fraction of target-present frames with center error <= t px, t in {0..50}; summary at 20 px."""
    errs = np.array([center_error(p, g) for p, g in _present_pairs(preds, gts)])
    values = _kernels.count_at_most(errs, PRECISION_GRID) / len(errs)
    return EvalCurves(tuple(PRECISION_GRID.tolist()), tuple(values.tolist()), float(values[PRECISION_AT]))


def lt_pr_re_f(preds, gts):
    """Long-term precision / recall / F over confidence thresholds.

    ``preds`` are TrackerOutput-like (``box``, ``confidence``, ``reported``).
    Thresholds are the sorted distinct confidences plus +inf. A frame counts
    as reported at threshold tau when it is reported and its confidence is
    >= tau. Pr is 1 when nothing is reported. Returns the score at the first
    threshold maximizing F, and the Pr / Re / F curves.
    """
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth frames")
    present = np.array([g.present for g in gts], dtype=bool)
    n_present = int(present.sum())
    if n_present == 0:
        raise ProtocolError("no frames with the target present")
    reported = np.array([bool(p.reported) for p in preds], dtype=bool)
    conf = np.array([float(p.confidence) for p in preds], dtype=np.float64)
    overlaps = np.array([iou(p.box, g.box) if g.present else 0.0 for p, g in zip(preds, gts)])
    thresholds = np.append(np.unique(conf), math.inf)
    sums, counts = _kernels.lt_sums(overlaps, present, reported, conf, thresholds)

    pr = np.empty(len(thresholds))
    re = np.empty(len(thresholds))
    f = np.empty(len(thresholds))
    for k in range(len(thresholds)):
        pr[k] = sums[k] / counts[k] if counts[k] > 0 else 1.0
        re[k] = sums[k] / n_present
        f[k] = f_score(pr[k], re[k])
    best = int(np.argmax(f))
    score = LtScore(float(pr[best]), float(re[best]), float(f[best]), float(thresholds[best]))
    th = tuple(thresholds.tolist())
    curves = {
        "pr": EvalCurves(th, tuple(pr.tolist()), score.pr),
        "re": EvalCurves(th, tuple(re.tolist()), score.re),
        "f": EvalCurves(th, tuple(f.tolist()), score.f),
    }
    return score, curves


CONFIDENCE_SENTINEL = sys.float_info.max
