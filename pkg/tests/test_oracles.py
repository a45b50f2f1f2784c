"""The oracles themselves, on hand-checkable cases."""
import numpy as np
import pytest

from mmprompt.core import Annotation, BBox, PixelImage
from mmprompt.errors import ProtocolError
from mmprompt.track import TrackerOutput
from oracles import (RandomInstance, oracle_bilinear, oracle_compose, oracle_iou, oracle_jet, oracle_lt_f,
                     oracle_success)


def test_single_present_perfect_frame():
    b = BBox(1, 1, 4, 4)
    assert oracle_lt_f([TrackerOutput(b, 1.0, True)], [Annotation.of(b)]).f == 1.0


def test_all_absent_is_protocol_error():
    with pytest.raises(ProtocolError):
        oracle_lt_f([TrackerOutput(BBox(0, 0, 1, 1), 0.0, False)] * 3, [Annotation.absent()] * 3)


def test_random_instance_is_reproducible():
    assert RandomInstance.make(5) == RandomInstance.make(5)
    assert RandomInstance.make(5) != RandomInstance.make(6)
    assert all(RandomInstance.make(s).n_frames <= 200 for s in range(20))


def test_compose_oracle_endpoints(rng):
    v, a = PixelImage(rng.random((3, 3, 3))), PixelImage(rng.random((3, 3, 3)))
    assert oracle_compose(v, a, 0.0) == v
    assert oracle_compose(v, a, 1.0) == a


def test_iou_and_jet_by_hand():
    assert oracle_iou(BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)) == pytest.approx(1 / 7)
    assert oracle_jet(0.0) == (0.0, 0.0, 0.5)
    assert oracle_jet(1.0) == (0.5, 0.0, 0.0)


def test_success_oracle_half():
    g = [Annotation.of(BBox(0, 0, 1, 1))] * 2
    p = [BBox(0, 0, 1, 1), BBox(5, 5, 1, 1)]
    _, vals, auc = oracle_success(p, g)
    assert vals[0] == 1.0 and vals[50] == 0.5 and auc == pytest.approx((1 + 100 * 0.5) / 101)


def test_bilinear_oracle_by_hand():
    out = oracle_bilinear(np.array([[[0.0], [1.0]]]), 1, 4)
    np.testing.assert_allclose(out[0, :, 0], [0, 0.25, 0.75, 1.0])
