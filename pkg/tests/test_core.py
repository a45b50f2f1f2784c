import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mmprompt.core import (Annotation, BBox, ModalityKind, ModalSequence, PixelImage, clamp_unit,
                           quantize_u8, resample_bilinear, to_three_channels)
from mmprompt.errors import UnknownModalityError
from oracles import oracle_bilinear


def img(a):
    return PixelImage(np.asarray(a, dtype=float))


class TestPixelImage:
    def test_shape_and_readonly(self):
        im = img(np.zeros((4, 5, 3)))
        assert (im.width, im.height, im.channels) == (5, 4, 3)
        with pytest.raises(ValueError):
            im.data[0, 0, 0] = 1.0

    def test_two_d_input_gets_channel_axis(self):
        assert img(np.zeros((2, 3))).shape == (2, 3, 1)

    @pytest.mark.parametrize("bad", [np.full((2, 2, 1), 1.5), np.full((2, 2, 1), -0.1),
                                     np.zeros((2, 2, 2)), np.zeros((0, 2, 1))])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            PixelImage(bad)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            img(np.full((1, 1, 1), np.nan))

    def test_from_flat_is_row_major(self):
        im = PixelImage.from_flat(3, 2, 1, [0, .1, .2, .3, .4, .5])
        assert im.data[1, 0, 0] == .3
        with pytest.raises(ValueError):
            PixelImage.from_flat(3, 2, 1, [0.0] * 5)

    def test_equality(self):
        assert img(np.zeros((2, 2, 1))) == img(np.zeros((2, 2, 1)))
        assert img(np.zeros((2, 2, 1))) != img(np.zeros((2, 2, 3)))


class TestBBoxAnnotation:
    def test_negative_size_rejected(self):
        with pytest.raises(ValueError):
            BBox(0, 0, -1, 2)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            BBox(float("inf"), 0, 1, 1)

    def test_center_and_from_center(self):
        b = BBox.from_center(10, 20, 4, 6)
        assert b.as_tuple() == (8, 17, 4, 6)
        assert b.center == (10, 20)
        assert b.translate(1, -1).center == (11, 19)

    def test_annotation_presence_rule(self):
        assert not Annotation.absent().present
        with pytest.raises(ValueError):
            Annotation(None, True)
        with pytest.raises(ValueError):
            Annotation(BBox(0, 0, 1, 1), False)


class TestModality:
    @pytest.mark.parametrize("tag,kind", [("RGB", ModalityKind.VISIBLE), ("depth", ModalityKind.DEPTH),
                                          ("ir", ModalityKind.THERMAL), ("events", ModalityKind.EVENT)])
    def test_parse(self, tag, kind):
        assert ModalityKind.parse(tag) is kind

    def test_unknown(self):
        with pytest.raises(UnknownModalityError):
            ModalityKind.parse("lidar")


class TestModalSequence:
    def frames(self, n, c=3):
        return [img(np.zeros((4, 4, c))) for _ in range(n)]

    def test_valid(self):
        seq = ModalSequence({ModalityKind.VISIBLE: self.frames(2), ModalityKind.DEPTH: self.frames(2, 1)},
                            [Annotation.of(BBox(0, 0, 1, 1))] * 2)
        assert len(seq) == 2 and seq.frame_size == (4, 4)

    def test_needs_visible(self):
        with pytest.raises(ValueError):
            ModalSequence({ModalityKind.DEPTH: self.frames(1, 1)}, [Annotation.absent()])

    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            ModalSequence({ModalityKind.VISIBLE: self.frames(2), ModalityKind.DEPTH: self.frames(3, 1)},
                          [Annotation.absent()] * 2)
        with pytest.raises(ValueError):
            ModalSequence({ModalityKind.VISIBLE: self.frames(2)}, [Annotation.absent()])

    def test_visible_three_channels(self):
        with pytest.raises(ValueError):
            ModalSequence({ModalityKind.VISIBLE: self.frames(1, 1)}, [Annotation.absent()])


class TestClampUnit:
    @pytest.mark.parametrize("v,expected", [(0.5, 0.5), (-0.2, 0.0), (1.7, 1.0)])
    def test_examples(self, v, expected):
        assert clamp_unit(v) == expected


class TestResample:
    def test_identity_is_bit_identical(self, rng):
        im = img(rng.random((7, 9, 3)))
        out = resample_bilinear(im, 9, 7)
        assert out == im

    def test_constant_stays_constant(self):
        im = img(np.full((5, 3, 1), 0.3))
        out = resample_bilinear(im, 11, 2)
        assert out.shape == (2, 11, 1)
        np.testing.assert_allclose(out.data, 0.3, atol=1e-15)

    def test_two_to_four_upsample(self):
        # sample centres of the 4-wide output map to source x = -0.25, 0.25, 0.75, 1.25
        out = resample_bilinear(img([[[0.0], [1.0]]]), 4, 1).data[0, :, 0]
        np.testing.assert_allclose(out, [0.0, 0.25, 0.75, 1.0], atol=1e-12)
        # the two central samples straddle the midpoint symmetrically
        assert abs((out[1] + out[2]) / 2 - 0.5) <= 1e-9

    def test_two_to_three_midpoint(self):
        out = resample_bilinear(img([[[0.0], [1.0]]]), 3, 1).data[0, :, 0]
        assert abs(out[1] - 0.5) <= 1e-9

    @pytest.mark.parametrize("w,h", [(0, 3), (3, 0), (-1, 2)])
    def test_zero_target_rejected(self, w, h):
        with pytest.raises(ValueError):
            resample_bilinear(img(np.zeros((2, 2, 1))), w, h)

    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3])),
                  elements=st.floats(0, 1)),
           st.integers(1, 9), st.integers(1, 9))
    def test_range_and_oracle(self, data, w, h):
        out = resample_bilinear(PixelImage(data), w, h)
        assert out.shape == (h, w, data.shape[2])
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0
        if (w, h) != (data.shape[1], data.shape[0]):
            np.testing.assert_allclose(out.data, np.clip(oracle_bilinear(data, h, w), 0, 1), atol=1e-12)


def test_to_three_channels_and_quantize():
    im = img(np.array([[[0.5]]]))
    assert to_three_channels(im).shape == (1, 1, 3)
    q = quantize_u8(np.array([0.0, 0.5 / 255, 1.5 / 255, 1.0]))
    assert q.tolist() == [0, 1, 2, 255]
