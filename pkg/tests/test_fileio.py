import struct

import numpy as np
import pytest

import flowsup as fs


def test_flo_smallest_wellformed_file():
    flow = fs.FlowField(np.zeros((1, 1, 2)))
    data = fs.write_flo(flow)
    assert len(data) == 20
    magic, w, h = struct.unpack_from("<fii", data)
    assert magic == np.float32(202021.25) and (w, h) == (1, 1)
    assert struct.unpack_from("<ff", data, 12) == (0.0, 0.0)


def test_flo_roundtrips(rng):
    for _ in range(100):
        h = int(rng.integers(1, 9))
        w = int(rng.integers(1, 9))
        values = rng.normal(0, 10, (h, w, 2)).astype(np.float32)
        flow = fs.FlowField(values)
        data = fs.write_flo(flow)
        # write . read is byte-identical
        assert fs.write_flo(fs.read_flo(data)) == data
        # read . write is value-identical
        assert np.array_equal(fs.read_flo(data).data, values.astype(np.float64))


def test_flo_corrupt_magic():
    flow = fs.FlowField(np.zeros((2, 2, 2)))
    data = bytearray(fs.write_flo(flow))
    struct.pack_into("<f", data, 0, 0.0)
    with pytest.raises(fs.FormatError):
        fs.read_flo(bytes(data))


def test_flo_truncated_payload():
    data = fs.write_flo(fs.FlowField(np.zeros((3, 3, 2))))
    with pytest.raises(fs.FormatError):
        fs.read_flo(data[:-4])
    with pytest.raises(fs.FormatError):
        fs.read_flo(data + b"\x00" * 4)


def test_kitti_zero_flow_encoding():
    flow = fs.FlowField(np.zeros((2, 2, 2)))
    valid = fs.VisibilityMask(np.ones((2, 2)))
    decoded, vmask = fs.read_kitti_png(fs.write_kitti_png(flow, valid))
    assert np.array_equal(decoded.data, np.zeros((2, 2, 2)))
    assert np.array_equal(vmask.data, np.ones((2, 2)))


def test_kitti_affine_decode():
    # stored triple (2^15 + 64, 2^15 - 128, 1) decodes to (u, v) = (1, -2)
    flow = fs.FlowField(np.array([[[1.0, -2.0]]]))
    data = fs.write_kitti_png(flow, fs.VisibilityMask(np.ones((1, 1))))
    import cv2
    img = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    assert img.dtype == np.uint16 and img.shape == (1, 1, 3)
    u_code, v_code, valid = img[0, 0, 2], img[0, 0, 1], img[0, 0, 0]
    assert (u_code, v_code, valid) == (2 ** 15 + 64, 2 ** 15 - 128, 1)
    decoded, _ = fs.read_kitti_png(data)
    assert np.array_equal(decoded.data, flow.data)


def test_kitti_roundtrip_bit_exact(rng):
    for _ in range(100):
        h = int(rng.integers(1, 7))
        w = int(rng.integers(1, 7))
        flow = fs.FlowField(rng.uniform(-100, 100, (h, w, 2)))
        valid = fs.VisibilityMask((rng.uniform(0, 1, (h, w)) > 0.5).astype(float))
        first = fs.write_kitti_png(flow, valid)
        again = fs.write_kitti_png(*fs.read_kitti_png(first))
        assert first == again


def test_kitti_rejects_8bit():
    import cv2
    ok, buf = cv2.imencode(".png", np.zeros((2, 2, 3), np.uint8))
    assert ok
    with pytest.raises(fs.FormatError):
        fs.read_kitti_png(buf.tobytes())


def test_kitti_rejects_single_channel():
    import cv2
    ok, buf = cv2.imencode(".png", np.zeros((2, 2), np.uint16))
    assert ok
    with pytest.raises(fs.FormatError):
        fs.read_kitti_png(buf.tobytes())


@pytest.mark.parametrize("ext,depth", [(".png", 8), (".png", 16), (".ppm", 8)])
def test_image_file_roundtrip(tmp_path, rng, ext, depth):
    scale = 255 if depth == 8 else 65535
    codes = rng.integers(0, scale + 1, size=(5, 4, 3))
    img = fs.Image(codes / scale)
    path = tmp_path / f"img{ext}"
    fs.write_image_file(path, img, bit_depth=depth)
    back = fs.read_image_file(path)
    assert np.allclose(back.data, img.data, atol=0.5 / scale)


def test_image_file_grayscale(tmp_path):
    img = fs.Image(np.linspace(0, 1, 16).reshape(4, 4, 1))
    path = tmp_path / "gray.png"
    fs.write_image_file(path, img, bit_depth=16)
    back = fs.read_image_file(path)
    assert back.channels == 1
    assert np.allclose(back.data, img.data, atol=1e-4)


def test_rgba_alpha_stripped(tmp_path):
    import cv2
    rgba = np.zeros((3, 3, 4), np.uint8)
    rgba[:, :, 0] = 255  # blue in BGRA
    rgba[:, :, 3] = 128
    path = tmp_path / "rgba.png"
    cv2.imwrite(str(path), rgba)
    img = fs.read_image_file(path)
    assert img.channels == 3
    assert np.allclose(img.data[:, :, 2], 1.0)  # blue -> RGB last channel
