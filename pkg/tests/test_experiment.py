import json
import math

import pytest

from mmprompt.core import Annotation
from mmprompt.errors import ProtocolError
from mmprompt.experiment import (SequenceResult, SequenceSource, TrackerSpec, aggregate, evaluate,
                                 evaluate_grid, evaluate_sequence, jsonable, mean_curve, RunRecord)
from mmprompt.metrics import EvalCurves
from mmprompt.prompt import Dual, PromptConfig
from mmprompt.synth import generate, scenario_config, suite_configs

SMALL = dict(width=40, height=36, n_frames=10, target_size=(8, 8))


def ok(name, **m):
    base = dict(success_auc=0.0, precision_at_20=0.0, pr=0.0, re=0.0, f=0.0, tau_star=1.0)
    base.update(m)
    return SequenceResult(name, "ok", 5, base)


def test_aggregate_is_mean_of_ok():
    rs = [ok("a", success_auc=0.2, f=0.5), ok("b", success_auc=0.4, f=0.1),
          SequenceResult("c", "failed", error="boom")]
    agg = aggregate(rs)
    assert (agg["n_sequences"], agg["n_ok"], agg["n_failed"]) == (3, 2, 1)
    assert agg["success_auc"] == pytest.approx(0.3) and agg["f"] == pytest.approx(0.3)


def test_aggregate_all_failed():
    agg = aggregate([SequenceResult("c", "failed", error="x")])
    assert agg["success_auc"] is None and agg["n_ok"] == 0


def test_mean_curve():
    a = SequenceResult("a", "ok", curves={"success": EvalCurves((0.0, 1.0), (1.0, 0.0), 0.5)})
    b = SequenceResult("b", "ok", curves={"success": EvalCurves((0.0, 1.0), (0.5, 0.5), 0.5)})
    ts, vs = mean_curve([a, b, SequenceResult("c", "failed")], "success")
    assert ts == (0.0, 1.0) and vs == (0.75, 0.25)
    assert mean_curve([SequenceResult("c", "failed")], "success") is None


def test_jsonable_strict():
    out = jsonable({"a": [math.inf, 1.0], "b": (-math.inf,)})
    assert out == {"a": ["inf", 1.0], "b": ["-inf"]}
    json.dumps(out, allow_nan=False)


def test_frame0_absent_is_protocol_error():
    seq = generate(scenario_config("rgb_easy", 0, **SMALL))
    seq.annotations[0] = Annotation.absent()
    with pytest.raises(ProtocolError):
        evaluate_sequence(seq, PromptConfig(), TrackerSpec())


def test_failed_sequence_recorded(tmp_path):
    sources = [SequenceSource(manifest=str(tmp_path / "missing.json")),
               SequenceSource(synth=scenario_config("rgb_easy", 1, **SMALL))]
    res = evaluate(sources, PromptConfig(), TrackerSpec())
    status = {r.name: r.status for r in res}
    assert sorted(status.values()) == ["failed", "ok"]
    failed = [r for r in res if r.status == "failed"][0]
    assert "missing.json" in failed.name and failed.error
    assert aggregate(res)["n_failed"] == 1


def test_oracle_tracker_perfect():
    seq = generate(suite_configs("longterm", 1, **dict(SMALL, n_frames=30))[0])
    r = evaluate_sequence(seq, PromptConfig(), TrackerSpec("oracle"))
    assert r.metrics["f"] == 1.0 and r.metrics["success_auc"] == 1.0


def test_grid_shares_order_and_jobs_invariant():
    sources = [SequenceSource(synth=c) for c in suite_configs("mixed", 4, **SMALL)]
    cfgs = [PromptConfig(Dual(0.0)), PromptConfig(Dual(0.05))]
    g1 = evaluate_grid(sources, cfgs, TrackerSpec(), jobs=1)
    g2 = evaluate_grid(sources, cfgs, TrackerSpec(), jobs=2)
    for a, b in zip(g1, g2):
        assert [r.name for r in a] == sorted(r.name for r in a)
        assert [r.record() for r in a] == [r.record() for r in b]
    p1 = RunRecord.build(sources, cfgs[1], TrackerSpec(), g1[1])
    p2 = RunRecord.build(sources, cfgs[1], TrackerSpec(), g2[1])
    assert p1.payload() == p2.payload() and p1.run_id != p2.run_id


def test_source_requires_exactly_one():
    with pytest.raises(ValueError):
        SequenceSource()
    with pytest.raises(ValueError):
        SequenceSource(manifest="x", synth=scenario_config("rgb_easy", 0))


def test_describe_is_json():
    d = SequenceSource(synth=scenario_config("camouflage", 3)).describe()
    json.dumps(d)
    assert d["seed"] == 3 and d["motion"]["type"]
