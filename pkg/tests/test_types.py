import numpy as np
import pytest

import flowsup as fs


def test_image_bounds_checked():
    with pytest.raises(fs.ParameterError):
        fs.Image(np.full((2, 2, 3), 1.5))
    with pytest.raises(fs.ParameterError):
        fs.Image(np.full((2, 2, 1), -0.1))


def test_image_channel_validation():
    with pytest.raises(fs.DimensionError):
        fs.Image(np.zeros((2, 2, 4)))
    img = fs.Image(np.zeros((2, 3)))
    assert img.channels == 1 and img.height == 2 and img.width == 3


def test_flow_rejects_nonfinite():
    bad = np.zeros((2, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(fs.ParameterError):
        fs.FlowField(bad)
    bad[0, 0, 0] = np.inf
    with pytest.raises(fs.ParameterError):
        fs.FlowField(bad)


def test_mask_values_binary():
    with pytest.raises(fs.ParameterError):
        fs.VisibilityMask(np.full((2, 2), 0.5))
    m = fs.VisibilityMask(np.eye(3))
    assert m.data.sum() == 3


def test_confidence_range():
    with pytest.raises(fs.ParameterError):
        fs.ConfidenceMap(np.full((2, 2), 1.2))
    fs.ConfidenceMap(np.full((2, 2), 0.7))


def test_types_are_immutable():
    img = fs.Image(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0
    flow = fs.FlowField(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        flow.data[0, 0, 0] = 1.0


def test_sequence_shape_checks():
    frames = [fs.Image(np.zeros((4, 5, 1))) for _ in range(3)]
    flows = [fs.FlowField(np.zeros((4, 5, 2))) for _ in range(2)]
    seq = fs.Sequence(frames, forward_flows=flows)
    assert len(seq) == 3
    with pytest.raises(fs.ParameterError):
        fs.Sequence(frames[:1])
    with pytest.raises(fs.DimensionError):
        fs.Sequence(frames, forward_flows=flows[:1])
    with pytest.raises(fs.DimensionError):
        fs.Sequence([frames[0], fs.Image(np.zeros((5, 5, 1)))])
