import math
import sys
import textwrap

import numpy as np
import pytest

from mmprompt.core import Annotation, BBox, PixelImage
from mmprompt.errors import ConfigError, ParseError
from mmprompt.metrics import CONFIDENCE_SENTINEL, iou
from mmprompt.synth import value_noise
from mmprompt.track import (ExternalTracker, MosseTracker, OracleTracker, TrackerOutput, TrackerParams,
                            format_tracker_output, make_tracker, parse_tracker_output, peak_to_sidelobe,
                            run_tracker, tracker_init, tracker_step, window_size)


def scene(seed=0, size=96, shift=(0, 0)):
    """Smooth textured frame with a bright patch; ``shift`` translates the whole scene."""
    r = np.random.default_rng(seed)
    tex = np.stack([value_noise(r, size + 40, size + 40, cell=8) for _ in range(3)], axis=2)
    tex[60:76, 50:66] = [0.95, 0.1, 0.1]
    dx, dy = shift
    return PixelImage(np.ascontiguousarray(tex[20 - dy:20 - dy + size, 20 - dx:20 - dx + size]))


B1 = BBox(28, 38, 20, 20)  # covers the bright patch at scene coordinates (30..46, 40..56)


class TestOutputAndParams:
    def test_confidence_checks(self):
        with pytest.raises(ValueError):
            TrackerOutput(BBox(0, 0, 1, 1), -1.0, True)
        with pytest.raises(ValueError):
            TrackerOutput(BBox(0, 0, 1, 1), math.inf, True)

    def test_window_size(self):
        assert window_size(20, 20) == (40, 40)
        assert window_size(3, 2) == (8, 8)
        assert window_size(10.7, 5.2) == (22, 10)
        assert all(v % 2 == 0 for v in window_size(11.3, 13.1))

    def test_defaults(self):
        p = TrackerParams()
        assert (p.learn_rate, p.psr_threshold, p.n_perturb, p.color_filters) == (0.125, 5.0, 8, True)


class TestInit:
    def test_state_invariants(self):
        st = tracker_init(scene(), B1)
        assert st.window_w % 2 == 0 and st.window_h % 2 == 0 and min(st.window_w, st.window_h) >= 8
        assert np.all(np.abs(st.denominator) >= st.reg_eps)
        assert st.response_sigma == pytest.approx(math.sqrt(400) / 16)

    def test_outside_frame(self):
        with pytest.raises(ValueError):
            tracker_init(scene(), BBox(85, 10, 20, 20))
        with pytest.raises(ValueError):
            tracker_init(scene(), BBox(10, 10, 0, 5))

    def test_deterministic(self):
        a, b = tracker_init(scene(), B1), tracker_init(scene(), B1)
        assert np.array_equal(a.numerator, b.numerator) and np.array_equal(a.denominator, b.denominator)
        c = tracker_init(scene(), B1, TrackerParams(seed=1))
        assert not np.array_equal(a.numerator, c.numerator)

    def test_luminance_variant(self):
        st = tracker_init(scene(), B1, TrackerParams(color_filters=False))
        assert st.numerator.shape[0] == 1


class TestStep:
    def test_same_frame_within_one_px(self):
        st = tracker_init(scene(), B1)
        out = tracker_step(st, scene())
        assert out.reported
        assert math.dist(out.box.center, B1.center) <= 1.0

    def test_constant_frame_center_frozen(self):
        flat = PixelImage(np.full((64, 64, 3), 0.4))
        st = tracker_init(flat, BBox(20, 20, 16, 16))
        out = tracker_step(st, flat)
        assert out.confidence == 0.0 and not out.reported
        assert out.box.center == (28.0, 28.0)

    def test_static_sequence_drift(self):
        frames = [scene()] * 51
        outs = run_tracker(frames, B1)
        drift = max(math.dist(o.box.center, B1.center) for o in outs)
        assert drift <= 1.0
        assert all(iou(o.box, B1) >= 0.9 for o in outs)

    def test_translation(self):
        outs = run_tracker([scene(), scene(shift=(5, 3))], B1)
        cx, cy = outs[1].box.center
        assert abs(cx - B1.center[0] - 5) <= 1 and abs(cy - B1.center[1] - 3) <= 1

    @pytest.mark.parametrize("shift", [(2, -3), (-4, 1), (6, 6)])
    def test_shift_equivariance(self, shift):
        base = run_tracker([scene(), scene(shift=(1, 1)), scene(shift=(2, 1))], B1)
        moved = run_tracker([scene(shift=shift), scene(shift=(shift[0] + 1, shift[1] + 1)),
                             scene(shift=(shift[0] + 2, shift[1] + 1))], B1.translate(*shift))
        for a, b in zip(base, moved):
            assert abs(b.box.x - a.box.x - shift[0]) <= 1 and abs(b.box.y - a.box.y - shift[1]) <= 1

    def test_psr_affine_invariance(self):
        fr = scene()
        st1 = tracker_init(fr, B1)
        st2 = tracker_init(fr, B1)
        nxt = scene(shift=(1, 2)).data
        o1 = tracker_step(st1, PixelImage(nxt))
        o2 = tracker_step(st2, PixelImage(0.6 * nxt + 0.2))
        assert abs(o1.confidence - o2.confidence) <= 1e-6

    def test_box_size_fixed_and_frames_untouched(self):
        frames = [scene(), scene(shift=(1, 0)), scene(shift=(2, 0))]
        before = [f.data.copy() for f in frames]
        outs = run_tracker(frames, B1)
        assert all((o.box.w, o.box.h) == (B1.w, B1.h) for o in outs)
        assert all(np.array_equal(b, f.data) for b, f in zip(before, frames))

    def test_window_clamped_at_border(self):
        fr = scene()
        st = tracker_init(fr, BBox(0, 0, 20, 20))
        out = tracker_step(st, fr)
        assert 0 <= out.box.center[0] <= 96 and 0 <= out.box.center[1] <= 96

    def test_peak_to_sidelobe_flat(self):
        assert peak_to_sidelobe(np.zeros((20, 20)))[0] == 0.0


class TestRun:
    def test_single_frame_echo(self):
        outs = run_tracker([scene()], B1)
        assert len(outs) == 1 and outs[0].box == B1
        assert outs[0].confidence == CONFIDENCE_SENTINEL and outs[0].reported

    def test_empty(self):
        with pytest.raises(ValueError):
            run_tracker([], B1)

    def test_deterministic(self):
        frames = [scene(), scene(shift=(1, 1)), scene(shift=(3, 1))]
        assert run_tracker(frames, B1) == run_tracker(frames, B1)

    def test_mosse_class_matches_function(self):
        frames = [scene(), scene(shift=(1, 1))]
        assert MosseTracker().run(frames, B1) == run_tracker(frames, B1)


class TestStubs:
    def gts(self):
        return [Annotation.of(BBox(1, 1, 2, 2)), Annotation.absent(), Annotation.of(BBox(2, 2, 2, 2))]

    def test_oracle(self):
        outs = OracleTracker().run([None] * 3, BBox(1, 1, 2, 2), self.gts())
        assert [o.reported for o in outs] == [True, False, True]
        assert outs[1].box == BBox(1, 1, 2, 2)

    def test_always(self):
        outs = make_tracker("always").run([None] * 3, BBox(1, 1, 2, 2), self.gts())
        assert all(o.reported for o in outs)

    def test_needs_annotations(self):
        with pytest.raises(ConfigError):
            OracleTracker().run([None], BBox(0, 0, 1, 1))

    def test_make_tracker(self):
        assert isinstance(make_tracker("MOSSE"), MosseTracker)
        with pytest.raises(ConfigError):
            make_tracker("stark")
        with pytest.raises(ConfigError):
            make_tracker("external")


class TestExternalProtocol:
    def test_parse_format_roundtrip(self):
        outs = [TrackerOutput(BBox(1.5, 2, 3, 4), 0.25, True), TrackerOutput(BBox(1.5, 2, 3, 4), 0.0, False)]
        assert parse_tracker_output(format_tracker_output(outs)) == outs

    def test_parse_errors(self):
        with pytest.raises(ParseError):
            parse_tracker_output("1,2,3\n")
        with pytest.raises(ParseError):
            parse_tracker_output("1,2,3,x,1\n")
        with pytest.raises(ParseError):
            parse_tracker_output("1,2,3,4,1\n", n_frames=2)
        with pytest.raises(ParseError):
            parse_tracker_output("nan,nan,nan,nan,0\n")

    def test_inf_confidence_becomes_sentinel(self):
        assert parse_tracker_output("0,0,1,1,inf\n")[0].confidence == CONFIDENCE_SENTINEL

    def test_subprocess(self, tmp_path):
        script = tmp_path / "fake.py"
        script.write_text(textwrap.dedent("""
            import os, sys
            frames = sorted(os.listdir(sys.argv[1]))
            x, y, w, h = sys.argv[2].split(",")
            for i, _ in enumerate(frames):
                print(f"{float(x) + i},{y},{w},{h},{i / 10}" if i != 1 else "nan,nan,nan,nan,0")
        """))
        trk = ExternalTracker(f"{sys.executable} {script}")
        outs = trk.run([scene()] * 3, BBox(1, 2, 3, 4))
        assert outs[0].confidence == CONFIDENCE_SENTINEL
        assert not outs[1].reported and outs[1].box == BBox(1, 2, 3, 4)
        assert outs[2].box == BBox(3, 2, 3, 4) and outs[2].confidence == 0.2
