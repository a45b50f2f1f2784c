"""``mmprompt`` command line: synth, dye, prompt, track, eval, ablate.

Exit codes: 0 success, 1 one or more sequences failed to evaluate,
2 configuration error, 3 I/O or input-format error (including bad manifests).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .core import ModalityKind
from .dye import ColormapKind, NormPolicy
from .errors import ConfigError, ManifestError, MMPromptError, ParseError, ProtocolError
from .experiment import (METRIC_KEYS, RunRecord, SequenceSource, TrackerSpec, aggregate, evaluate_grid,
                         jsonable, prompted_frames)
from .ingest import load, save_sequence, serialize_groundtruth, write_frames
from .prompt import DEFAULT_LAMBDA, LAMBDA_GRID, Dual, PromptConfig, Triple
from .report import dump_json, format_table, write_run
from .synth import SUITES, generate, suite_configs
from .track import TRACKERS, TrackerParams, format_tracker_output

log = logging.getLogger("mmprompt")

OUT_ENV = "MMPROMPT_OUT"
DEFAULT_OUT = "mmprompt-out"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

AXES = ("lambda", "colormap", "modality")
COLORMAP_ROWS = ("jet", "red", "gray")
MODALITY_ROWS = ("default", "visible-only", "auxiliary-only")

# settings a --config JSON file may carry; flags override them
CONFIG_KEYS = ("lambda", "alpha", "beta", "gamma", "colormap", "aux", "norm", "tracker", "tracker_cmd",
               "tracker_params", "seed", "jobs", "out", "suite", "n_seeds", "n_frames")
BUILTIN = {"tracker": "mosse", "seed": 0, "jobs": 1, "n_seeds": 20}


def _common(p):
    g = p.add_argument_group("prompt")
    g.add_argument("--lambda", dest="lambda", type=float, help=f"auxiliary blend weight (default {DEFAULT_LAMBDA})")
    g.add_argument("--alpha", type=float, help="triple blend: weight of the first auxiliary stream")
    g.add_argument("--beta", type=float, help="triple blend: weight of the second auxiliary stream")
    g.add_argument("--gamma", type=float, help="triple blend: weight of the visible stream")
    g.add_argument("--colormap", help="colormap for auxiliary streams: jet, red, gray, event, passthrough")
    g.add_argument("--aux", help="comma-separated auxiliary modalities in blend order (default: auto)")
    g.add_argument("--norm", help="normalization: percentile[:lo,hi], minmax, fixed:lo,hi")
    g = p.add_argument_group("run")
    g.add_argument("--tracker", help=f"one of {', '.join(TRACKERS)} (default mosse)")
    g.add_argument("--tracker-cmd", dest="tracker_cmd", help="command for --tracker external")
    g.add_argument("--seed", type=int, help="base seed for synthetic suites and tracker perturbations")
    g.add_argument("--jobs", type=int, help="worker processes for sequence-level parallelism")
    g.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    g.add_argument("--config", help="JSON file with the same settings as the flags")
    g.add_argument("-v", "--verbose", action="store_true")


def _sources_args(p):
    p.add_argument("manifests", nargs="*", help="manifest files or directories containing them")
    p.add_argument("--suite", help=f"synthetic suite instead of manifests: {', '.join(SUITES)}")
    p.add_argument("--n-seeds", dest="n_seeds", type=int, help="sequences in the synthetic suite (default 20)")
    p.add_argument("--n-frames", dest="n_frames", type=int, help="frames per synthetic sequence")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmprompt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic suite to disk as manifests")
    _common(p)
    p.add_argument("--suite", help=f"one of {', '.join(SUITES)} (default camouflage)")
    p.add_argument("--n-seeds", dest="n_seeds", type=int)
    p.add_argument("--n-frames", dest="n_frames", type=int)

    p = sub.add_parser("dye", help="colour one modality of a sequence")
    _common(p)
    p.add_argument("manifest")
    p.add_argument("--modality", help="stream to dye (default: the first auxiliary stream)")

    p = sub.add_parser("prompt", help="write prompted frames and a derived manifest")
    _common(p)
    p.add_argument("manifest")

    p = sub.add_parser("track", help="run a tracker on prompted frames")
    _common(p)
    p.add_argument("manifest")

    p = sub.add_parser("eval", help="prompt, track and score sequences")
    _common(p)
    _sources_args(p)

    p = sub.add_parser("ablate", help="one evaluation per grid point along an axis")
    _common(p)
    _sources_args(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    p.add_argument("--grid", help="comma-separated grid (default depends on the axis)")
    return parser


# ---------------------------------------------------------------------------
# settings


def load_settings(args):
    """Built-in defaults < config file < flags."""
    settings = dict(BUILTIN)
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(raw) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        settings.update({k: v for k, v in raw.items() if v is not None})
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    settings.setdefault("out", os.environ.get(OUT_ENV) or DEFAULT_OUT)
    if settings["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    return settings


def parse_norm(text):
    if isinstance(text, dict):
        return NormPolicy.from_dict(text)
    mode, _, rest = text.partition(":")
    try:
        nums = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ConfigError(f"bad normalization {text!r}") from None
    if mode == "minmax" and not nums:
        return NormPolicy.minmax()
    if mode == "percentile" and len(nums) in (0, 2):
        return NormPolicy.percentile(*nums)
    if mode == "fixed" and len(nums) == 2:
        return NormPolicy.fixed(*nums)
    raise ConfigError(f"bad normalization {text!r}; use percentile[:lo,hi], minmax or fixed:lo,hi")


def _listish(v):
    if v is None:
        return None
    if isinstance(v, str):
        return [s.strip() for s in v.split(",") if s.strip()]
    return list(v)


def prompt_config(settings, lam=None, colormap=None):
    """PromptConfig from merged settings; ``lam`` / ``colormap`` override them (ablation rows)."""
    triple = [settings.get(k) for k in ("alpha", "beta", "gamma")]
    if lam is None and any(v is not None for v in triple):
        if any(v is None for v in triple):
            raise ConfigError("--alpha, --beta and --gamma must be given together")
        if settings.get("lambda") is not None:
            raise ConfigError("--lambda cannot be combined with --alpha/--beta/--gamma")
        weights = Triple(*(float(v) for v in triple))
    else:
        weights = Dual(float(lam if lam is not None else settings.get("lambda", DEFAULT_LAMBDA)))
    cmap = colormap or settings.get("colormap")
    colormaps = {}
    if cmap is not None:
        kind = ColormapKind.parse(cmap)
        colormaps = {m: kind for m in (ModalityKind.DEPTH, ModalityKind.THERMAL)}
        if kind is not ColormapKind.EVENT_POLARITY:
            colormaps[ModalityKind.EVENT] = kind
    aux = _listish(settings.get("aux"))
    norm = settings.get("norm")
    return PromptConfig(weights=weights, aux=None if aux is None else tuple(aux), colormaps=colormaps,
                        norm=None if norm is None else parse_norm(norm))


def tracker_spec(settings):
    extra = settings.get("tracker_params") or {}
    known = {f.name for f in fields(TrackerParams)}
    bad = sorted(set(extra) - known)
    if bad:
        raise ConfigError(f"unknown tracker parameters: {', '.join(bad)}")
    params = replace(TrackerParams(), seed=int(settings["seed"]), **extra)
    name = str(settings["tracker"]).lower()
    if name not in TRACKERS:
        raise ConfigError(f"unknown tracker {name!r}; choose from {', '.join(TRACKERS)}")
    return TrackerSpec(name, params, settings.get("tracker_cmd"))


def _expand_manifests(paths):
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            found = sorted(p.rglob("manifest.json"))
            if not found:
                raise FileNotFoundError(f"no manifest.json under {p}")
            out.extend(found)
        else:
            out.append(p)
    return [str(p) for p in out]


def sources_from(settings, manifests):
    suite = settings.get("suite")
    if suite and manifests:
        raise ConfigError("give manifests or --suite, not both")
    if suite:
        overrides = {}
        if settings.get("n_frames"):
            overrides["n_frames"] = int(settings["n_frames"])
        cfgs = suite_configs(suite, int(settings["n_seeds"]), int(settings["seed"]), **overrides)
        return [SequenceSource(synth=c) for c in cfgs]
    if not manifests:
        raise ConfigError("no sequences: give manifest paths or --suite")
    return [SequenceSource(manifest=m) for m in _expand_manifests(manifests)]


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, settings):
    out = Path(settings["out"])
    suite = settings.get("suite") or "camouflage"
    overrides = {"n_frames": int(settings["n_frames"])} if settings.get("n_frames") else {}
    cfgs = suite_configs(suite, int(settings["n_seeds"]), int(settings["seed"]), **overrides)
    for cfg in cfgs:
        seq = generate(cfg)
        path = save_sequence(seq, out / seq.name)
        print(path)
    return EXIT_OK


def cmd_dye(args, settings):
    from .prompt import dye_stream

    seq = load(args.manifest)
    cfg = prompt_config(settings)
    if args.modality:
        kind = ModalityKind.parse(args.modality)
    else:
        aux = [k for k in seq.modalities if k is not ModalityKind.VISIBLE]
        kind = aux[0] if aux else ModalityKind.VISIBLE
    frames = dye_stream(seq, kind, cfg)
    out = Path(settings["out"]) / kind.value
    write_frames(frames, out)
    print(out)
    return EXIT_OK


def cmd_prompt(args, settings):
    seq = load(args.manifest)
    cfg = prompt_config(settings)
    frames = prompted_frames(seq, cfg)
    out = Path(settings["out"])
    write_frames(frames, out / "frames")
    (out / "groundtruth.txt").write_text(serialize_groundtruth(seq.annotations))
    manifest = {
        "name": f"{seq.name}-prompted",
        "groundtruth": "groundtruth.txt",
        "streams": [{"kind": "visible", "pattern": "frames/*.png", "bit_depth": 8}],
        "prompt_config": jsonable(cfg.to_dict()),
        "source": str(args.manifest),
    }
    dump_json(manifest, out / "manifest.json")
    print(out / "manifest.json")
    return EXIT_OK


def cmd_track(args, settings):
    seq = load(args.manifest)
    cfg = prompt_config(settings)
    frames = prompted_frames(seq, cfg)
    first = seq.annotations[0]
    if not first.present:
        raise ProtocolError("the target must be present in frame 0")
    preds = tracker_spec(settings).build().run(frames, first.box, seq.annotations)
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "predictions.txt").write_text(format_tracker_output(preds))
    print(out / "predictions.txt")
    return EXIT_OK


def _summary_line(agg):
    parts = [f"{agg['n_ok']}/{agg['n_sequences']} ok"]
    for k in METRIC_KEYS:
        if agg.get(k) is not None:
            parts.append(f"{k}={agg[k]:.4f}")
    return "  ".join(parts)


def _run_exit(results):
    return EXIT_OK if all(r.status == "ok" for r in results) else EXIT_FAILED


def cmd_eval(args, settings):
    sources = sources_from(settings, args.manifests)
    cfg = prompt_config(settings)
    tracker = tracker_spec(settings)
    results = evaluate_grid(sources, [cfg], tracker, int(settings["jobs"]))[0]
    record = RunRecord.build(sources, cfg, tracker, results)
    write_run(record, results, settings["out"])
    for r in results:
        if r.status != "ok":
            print(f"FAILED {r.name}: {r.error}", file=sys.stderr)
    print(_summary_line(record.aggregate))
    return _run_exit(results)


def _ablation_rows(axis, grid, settings):
    if axis == "lambda":
        values = [float(v) for v in grid] if grid else list(LAMBDA_GRID)
        return [(f"lambda={v:g}", prompt_config(settings, lam=v)) for v in values]
    if axis == "colormap":
        names = grid or list(COLORMAP_ROWS)
        return [(n, prompt_config(settings, colormap=n)) for n in names]
    names = grid or list(MODALITY_ROWS)
    base = prompt_config(settings)
    if not isinstance(base.weights, Dual):
        raise ConfigError("the modality axis needs dual (--lambda) weights")
    rows = []
    for n in names:
        if n == "default":
            rows.append((n, base))
        elif n in ("visible-only", "visible"):
            rows.append((n, prompt_config(settings, lam=0.0)))
        elif n in ("auxiliary-only", "auxiliary"):
            rows.append((n, prompt_config(settings, lam=1.0)))
        else:
            raise ConfigError(f"unknown modality row {n!r}; choose from {', '.join(MODALITY_ROWS)}")
    return rows


def cmd_ablate(args, settings):
    axis = args.axis
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}; choose from {', '.join(AXES)}")
    rows = _ablation_rows(axis, _listish(args.grid), settings)
    sources = sources_from(settings, args.manifests)
    tracker = tracker_spec(settings)
    grid = evaluate_grid(sources, [cfg for _, cfg in rows], tracker, int(settings["jobs"]))
    out = Path(settings["out"])
    table_rows, payload = [], []
    code = EXIT_OK
    for (label, cfg), results in zip(rows, grid):
        record = RunRecord.build(sources, cfg, tracker, results)
        write_run(record, results, out / axis / label.replace("=", "_"))
        agg = aggregate(results)
        table_rows.append((label, agg))
        payload.append({"row": label, "prompt_config": cfg.to_dict(), "aggregate": agg,
                        "per_sequence_results": record.per_sequence_results})
        code = max(code, _run_exit(results))
    table = format_table(table_rows, METRIC_KEYS, row_header=axis)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"ablation_{axis}.txt").write_text(table)
    dump_json(jsonable({"axis": axis, "tracker_name": tracker.name, "tracker_params": tracker.params_dict(),
                        "manifest_paths": [s.describe() for s in sources], "rows": payload}),
              out / f"ablation_{axis}.json")
    print(table, end="")
    return code


COMMANDS = {"synth": cmd_synth, "dye": cmd_dye, "prompt": cmd_prompt, "track": cmd_track,
            "eval": cmd_eval, "ablate": cmd_ablate}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = load_settings(args)
        return COMMANDS[args.command](args, settings)
    except ManifestError as exc:
        print(f"mmprompt: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ProtocolError) as exc:
        print(f"mmprompt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError) as exc:
        print(f"mmprompt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MMPromptError, ValueError) as exc:
        print(f"mmprompt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
