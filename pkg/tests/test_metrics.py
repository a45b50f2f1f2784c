import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmprompt.core import Annotation, BBox
from mmprompt.errors import ProtocolError
from mmprompt.metrics import (CONFIDENCE_SENTINEL, center_error, f_score, iou, lt_pr_re_f, precision_curve,
                              success_curve)
from mmprompt.track import TrackerOutput
from oracles import RandomInstance, oracle_lt_f, oracle_precision, oracle_success

B = BBox


def out(box, conf=1.0, rep=True):
    return TrackerOutput(box, conf, rep)


class TestIoU:
    def test_examples(self):
        assert iou(B(0, 0, 2, 2), B(0, 0, 2, 2)) == 1.0
        assert iou(B(0, 0, 2, 2), B(5, 5, 2, 2)) == 0.0
        assert iou(B(0, 0, 2, 2), B(1, 1, 2, 2)) == pytest.approx(1 / 7, abs=1e-15)

    def test_touching_edges_do_not_overlap(self):
        assert iou(B(0, 0, 2, 2), B(2, 0, 2, 2)) == 0.0

    def test_degenerate(self):
        assert iou(B(0, 0, 0, 5), B(0, 0, 3, 3)) == 0.0
        assert iou(B(0, 0, 0, 0), B(0, 0, 0, 0)) == 0.0

    def test_center_error(self):
        assert center_error(B(0, 0, 2, 2), B(0, 0, 2, 2)) == 0
        assert center_error(B.from_center(0, 0, 2, 2), B.from_center(3, 4, 2, 2)) == 5
        assert center_error(B.from_center(5, 5, 2, 2), B.from_center(5, 5, 8, 1)) == 0


class TestFScore:
    @pytest.mark.parametrize("pr,re,f", [(0.740, 0.765, 0.752), (0.747, 0.767, 0.757), (0.558, 0.543, 0.550)])
    def test_reported_rows(self, pr, re, f):
        assert abs(f_score(pr, re) - f) <= 0.0005

    def test_zero(self):
        assert f_score(0, 0.7) == 0 and f_score(0, 0) == 0

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_symmetry_and_identity(self, a, b):
        assert f_score(a, b) == f_score(b, a)
        assert f_score(a, a) == a
        assert 0 <= f_score(a, b) <= 1


def series(n, good):
    gts = [Annotation.of(B(100, 100, 10, 10)) for _ in range(n)]
    preds = [out(B(100, 100, 10, 10) if good(i) else B(0, 0, 10, 10)) for i in range(n)]
    return preds, gts


class TestShortTerm:
    def test_perfect(self):
        p, g = series(10, lambda i: True)
        assert success_curve(p, g).summary == 1.0
        assert precision_curve(p, g).summary == 1.0

    def test_all_far(self):
        p, g = series(10, lambda i: False)
        s = success_curve(p, g)
        assert s.values[0] == 1.0 and all(v == 0 for v in s.values[1:])
        assert s.summary == pytest.approx(1 / 101, abs=1e-15)
        assert precision_curve(p, g).summary == 0.0

    def test_half(self):
        p, g = series(10, lambda i: i % 2 == 0)
        s = success_curve(p, g)
        assert s.values[0] == 1.0 and set(s.values[1:]) == {0.5}
        assert precision_curve(p, g).summary == 0.5

    def test_absent_frames_excluded(self):
        p, g = series(4, lambda i: True)
        g[1] = Annotation.absent()
        p[1] = out(B(0, 0, 1, 1))
        assert success_curve(p, g).summary == 1.0

    def test_errors(self):
        p, g = series(3, lambda i: True)
        with pytest.raises(ValueError):
            success_curve(p[:2], g)
        with pytest.raises(ProtocolError):
            precision_curve(p, [Annotation.absent()] * 3)

    def test_grids(self):
        p, g = series(2, lambda i: True)
        s, pc = success_curve(p, g), precision_curve(p, g)
        assert len(s.thresholds) == 101 and s.thresholds[1] == 0.01
        assert pc.thresholds == tuple(float(t) for t in range(51))

    @pytest.mark.parametrize("seed", range(25))
    def test_monotone_and_bounded(self, seed):
        inst = RandomInstance.make(seed)
        if not any(g.present for g in inst.gts):
            return
        s, pc = success_curve(inst.preds, inst.gts), precision_curve(inst.preds, inst.gts)
        assert all(a >= b for a, b in zip(s.values, s.values[1:]))
        assert all(a <= b for a, b in zip(pc.values, pc.values[1:]))
        for c in (s, pc):
            assert all(0 <= v <= 1 for v in c.values) and 0 <= c.summary <= 1


class TestLongTerm:
    def test_oracle_tracker(self):
        gts = [Annotation.of(B(i, 0, 5, 5)) if i % 3 else Annotation.absent() for i in range(12)]
        gts[0] = Annotation.of(B(0, 0, 5, 5))
        preds = [out(g.box, 1.0) if g.present else out(B(0, 0, 5, 5), 1.0, False) for g in gts]
        score, curves = lt_pr_re_f(preds, gts)
        assert (score.pr, score.re, score.f) == (1.0, 1.0, 1.0)
        # every tau at or below the oracle's confidence gives perfect scores
        for t, f in zip(curves["f"].thresholds, curves["f"].values):
            if t <= 1.0:
                assert f == 1.0

    def test_reported_on_absent_costs_precision(self):
        gts = [Annotation.of(B(0, 0, 5, 5)), Annotation.absent()]
        preds = [out(B(0, 0, 5, 5)), out(B(0, 0, 5, 5))]
        score, _ = lt_pr_re_f(preds, gts)
        assert (score.pr, score.re, score.tau_star) == (0.5, 1.0, 1.0)

    def test_nothing_reported(self):
        gts = [Annotation.of(B(0, 0, 5, 5))] * 3
        preds = [out(B(0, 0, 5, 5), 0.0, False)] * 3
        score, curves = lt_pr_re_f(preds, gts)
        assert score.f == 0.0 and curves["pr"].values[-1] == 1.0 and curves["re"].values[-1] == 0.0

    def test_inf_threshold_included(self):
        inst = RandomInstance.make(3)
        _, curves = lt_pr_re_f(inst.preds, inst.gts)
        assert curves["f"].thresholds[-1] == math.inf
        assert list(curves["f"].thresholds) == sorted(curves["f"].thresholds)

    def test_errors(self):
        with pytest.raises(ProtocolError):
            lt_pr_re_f([out(B(0, 0, 1, 1))], [Annotation.absent()])
        with pytest.raises(ValueError):
            lt_pr_re_f([], [Annotation.absent()])

    def test_single_frame(self):
        score, _ = lt_pr_re_f([out(B(0, 0, 1, 1))], [Annotation.of(B(0, 0, 1, 1))])
        assert score.f == 1.0

    def test_sentinel_confidence(self):
        assert CONFIDENCE_SENTINEL == np.finfo(np.float64).max

    @pytest.mark.parametrize("seed", range(20))
    def test_f_relation(self, seed):
        inst = RandomInstance.make(seed)
        score, curves = lt_pr_re_f(inst.preds, inst.gts)
        expected = 0.0 if score.pr + score.re == 0 else 2 * score.pr * score.re / (score.pr + score.re)
        assert abs(score.f - expected) <= 1e-12
        assert score.f == max(curves["f"].values)

    @pytest.mark.parametrize("seed", range(10))
    def test_rank_invariance(self, seed):
        inst = RandomInstance.make(seed)
        warped = [TrackerOutput(p.box, math.exp(p.confidence) * 3 + 1, p.reported) for p in inst.preds]
        assert lt_pr_re_f(warped, inst.gts)[0].f == lt_pr_re_f(inst.preds, inst.gts)[0].f


class TestOracleEquivalence:
    """Optimized metrics equal the naive loops exactly, not approximately."""

    @pytest.mark.parametrize("seed", range(100))
    def test_random_instance(self, seed):
        inst = RandomInstance.make(seed)
        assert inst.n_frames <= 200
        assert lt_pr_re_f(inst.preds, inst.gts)[0] == oracle_lt_f(inst)
        ths, vals, auc = oracle_success(inst.preds, inst.gts)
        s = success_curve(inst.preds, inst.gts)
        assert list(s.thresholds) == ths and list(s.values) == vals and s.summary == auc
        ths, vals, p20 = oracle_precision(inst.preds, inst.gts)
        p = precision_curve(inst.preds, inst.gts)
        assert list(p.thresholds) == ths and list(p.values) == vals and p.summary == p20

    def test_hundred_frames(self):
        inst = RandomInstance.make(77, n_frames=100)
        assert lt_pr_re_f(inst.preds, inst.gts)[0] == oracle_lt_f(inst)
