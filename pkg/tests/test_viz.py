import colorsys

import numpy as np

import flowsup as fs


def test_zero_flow_renders_white():
    color = fs.flow_to_color(fs.FlowField(np.zeros((4, 4, 2))))
    assert np.array_equal(color.data, np.ones((4, 4, 3)))


def test_boundary_of_wheel_fully_saturated():
    m = 3.0
    flow = fs.FlowField(np.full((2, 2, 2), 0.0) + np.array([m, 0.0]))
    color = fs.flow_to_color(flow, max_magnitude=m)
    r, g, b = color.data[0, 0]
    h, s, v = colorsys.rgb_to_hsv(r, g, b)
    assert s == 1.0 and v == 1.0 and h == 0.0


def test_hue_monotone_in_angle():
    # A rotating unit flow must sweep the hue monotonically, wrapping once.
    thetas = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)[1:]
    hues = []
    for theta in thetas:
        flow = fs.FlowField(np.array([[[np.cos(theta), np.sin(theta)]]]))
        r, g, b = fs.flow_to_color(flow, max_magnitude=1.0).data[0, 0]
        hues.append(colorsys.rgb_to_hsv(r, g, b)[0])
    diffs = np.diff(hues)
    assert np.all(diffs > 0)  # no wrap inside (0, 2pi)


def test_output_is_valid_image(rng):
    flow = fs.FlowField(rng.normal(0, 5, (8, 9, 2)))
    color = fs.flow_to_color(flow)
    assert color.data.min() >= 0.0 and color.data.max() <= 1.0
    assert color.data.shape == (8, 9, 3)


def test_auto_magnitude_floor():
    tiny = fs.FlowField(np.full((2, 2, 2), 0.0))
    color = fs.flow_to_color(tiny, max_magnitude=None)
    assert np.array_equal(color.data, np.ones((2, 2, 3)))
