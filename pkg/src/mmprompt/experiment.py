"""Sequence-level evaluation: prompt -> track -> metrics, fanned out over worker processes.

Results are always merged in sequence-name order, so the number of workers
never changes the output.
"""
from __future__ import annotations

import datetime
import logging
import math
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import __version__
from .core import ModalityKind
from .errors import ProtocolError
from .ingest import load
from .metrics import lt_pr_re_f, precision_curve, success_curve
from .prompt import PromptConfig, dye_stream, prompt_sequence
from .synth import SynthConfig, generate
from .track import TrackerParams, make_tracker

log = logging.getLogger(__name__)

METRIC_KEYS = ("success_auc", "precision_at_20", "pr", "re", "f")


@dataclass(frozen=True)
class SequenceSource:
    """Where a sequence comes from: a manifest on disk or a synthetic config regenerated in the worker."""

    manifest: str | None = None
    synth: SynthConfig | None = None

    def __post_init__(self):
        if (self.manifest is None) == (self.synth is None):
            raise ValueError("give exactly one of manifest / synth")

    @property
    def label(self):
        if self.manifest is not None:
            return str(self.manifest)
        return f"synth:{self.synth.scenario}-{self.synth.seed:04d}"

    def load(self):
        return load(self.manifest) if self.manifest is not None else generate(self.synth)

    def describe(self):
        if self.manifest is not None:
            return str(self.manifest)
        d = asdict(self.synth)
        d["aux_kind"] = self.synth.aux_kind.value
        d["motion"] = {"type": type(self.synth.motion).__name__, **asdict(self.synth.motion)}
        d["target_size"] = list(d["target_size"])
        d["absent_spans"] = [list(s) for s in d["absent_spans"]]
        return d


@dataclass(frozen=True)
class TrackerSpec:
    name: str = "mosse"
    params: TrackerParams = field(default_factory=TrackerParams)
    command: str | None = None

    def build(self):
        return make_tracker(self.name, self.params, self.command)

    def params_dict(self):
        return self.build().params()


@dataclass
class SequenceResult:
    name: str
    status: str                 # "ok" or "failed"
    n_frames: int = 0
    metrics: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)   # success, precision, lt_pr, lt_re, lt_f
    error: str | None = None

    def record(self):
        out = {"name": self.name, "status": self.status, "n_frames": self.n_frames}
        out.update(self.metrics)
        if self.error is not None:
            out["error"] = self.error
        return out


def prompted_frames(seq, cfg: PromptConfig | None, dyed=None):
    """Frames the tracker sees; ``cfg=None`` means the dyed visible stream alone."""
    if cfg is None:
        return dye_stream(seq, ModalityKind.VISIBLE)
    return prompt_sequence(seq, cfg, dyed)


def evaluate_sequence(seq, cfg: PromptConfig | None, tracker: TrackerSpec, dyed=None) -> SequenceResult:
    frames = prompted_frames(seq, cfg, dyed)
    first = seq.annotations[0]
    if not first.present:
        raise ProtocolError(f"sequence {seq.name!r}: the target must be present in frame 0")
    preds = tracker.build().run(frames, first.box, seq.annotations)
    succ = success_curve(preds, seq.annotations)
    prec = precision_curve(preds, seq.annotations)
    lt, lt_curves = lt_pr_re_f(preds, seq.annotations)
    metrics = {
        "success_auc": succ.summary,
        "precision_at_20": prec.summary,
        "pr": lt.pr,
        "re": lt.re,
        "f": lt.f,
        "tau_star": lt.tau_star,
    }
    curves = {"success": succ, "precision": prec,
              "lt_pr": lt_curves["pr"], "lt_re": lt_curves["re"], "lt_f": lt_curves["f"]}
    return SequenceResult(seq.name, "ok", len(seq), metrics, curves)


def _failed(name, exc):
    log.info("sequence %s failed: %s", name, exc)
    return SequenceResult(name, "failed", error=f"{type(exc).__name__}: {exc}")


def _work(job):
    """Evaluate one source under every prompt config; dyed streams are shared across configs."""
    source, cfgs, tracker = job
    try:
        seq = source.load()
    except Exception as exc:  # recorded, not raised: one bad sequence must not sink the run
        return [_failed(source.label, exc) for _ in cfgs]
    dyed = {}
    out = []
    for cfg in cfgs:
        try:
            out.append(evaluate_sequence(seq, cfg, tracker, dyed))
        except Exception as exc:
            out.append(_failed(seq.name, exc))
    return out


def evaluate_grid(sources, cfgs, tracker: TrackerSpec, jobs=1):
    """Results per prompt config, each a list of SequenceResult sorted by name."""
    jobs_list = [(s, list(cfgs), tracker) for s in sources]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_source = list(pool.map(_work, jobs_list))
    else:
        per_source = [_work(j) for j in jobs_list]
    grid = []
    for k in range(len(cfgs)):
        rows = [(res[k].name, i, res[k]) for i, res in enumerate(per_source)]
        rows.sort(key=lambda r: (r[0], r[1]))
        grid.append([r[2] for r in rows])
    return grid


def evaluate(sources, cfg, tracker: TrackerSpec, jobs=1):
    return evaluate_grid(sources, [cfg], tracker, jobs)[0]


def aggregate(results):
    """Unweighted mean over successful sequences, summed in the given (name) order."""
    ok = [r for r in results if r.status == "ok"]
    out = {"n_sequences": len(results), "n_ok": len(ok), "n_failed": len(results) - len(ok)}
    for key in METRIC_KEYS:
        if ok:
            total = 0.0
            for r in ok:
                total += r.metrics[key]
            out[key] = total / len(ok)
        else:
            out[key] = None
    return out


def mean_curve(results, key):
    """Pointwise mean of one short-term curve over successful sequences (shared grids only)."""
    ok = [r.curves[key] for r in results if r.status == "ok"]
    if not ok:
        return None
    n = len(ok[0].values)
    vals = []
    for j in range(n):
        total = 0.0
        for c in ok:
            total += c.values[j]
        vals.append(total / len(ok))
    return ok[0].thresholds, tuple(vals)


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def jsonable(obj):
    """Recursively replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return _json_float(obj)


@dataclass
class RunRecord:
    manifest_paths: list
    prompt_config: dict | None
    tracker_name: str
    tracker_params: dict
    per_sequence_results: list
    aggregate: dict
    toolkit_version: str = __version__
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    timestamp: str = field(default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat())

    @classmethod
    def build(cls, sources, cfg, tracker: TrackerSpec, results):
        return cls(
            manifest_paths=[s.describe() for s in sources],
            prompt_config=None if cfg is None else cfg.to_dict(),
            tracker_name=tracker.name,
            tracker_params=tracker.params_dict(),
            per_sequence_results=[r.record() for r in results],
            aggregate=aggregate(results),
        )

    def payload(self):
        """Everything except run_id and timestamp: identical across repeated runs."""
        return jsonable({
            "toolkit_version": self.toolkit_version,
            "manifest_paths": self.manifest_paths,
            "prompt_config": self.prompt_config,
            "tracker_name": self.tracker_name,
            "tracker_params": self.tracker_params,
            "per_sequence_results": self.per_sequence_results,
            "aggregate": self.aggregate,
        })

    def to_dict(self):
        d = {"run_id": self.run_id, "timestamp": self.timestamp}
        d.update(self.payload())
        return d
