"""Flow and image file formats.

Supported interchange formats:

* ``.flo`` (Middlebury): little-endian float32 magic 202021.25, int32 width,
  int32 height, then H*W interleaved (u, v) float32 pairs.
* KITTI flow PNG: 16-bit 3-channel PNG storing u = (ch1 - 2^15) / 64,
  v = (ch2 - 2^15) / 64, validity = ch3.
* 8/16-bit PNG and PPM/PGM images, normalized to [0, 1] by the source's
  maximum code value on load.
"""

from __future__ import annotations

import struct
from pathlib import Path

import cv2
import numpy as np

from .errors import FormatError
from .types import FlowField, Image, VisibilityMask

FLO_MAGIC = 202021.25
_FLO_HEADER = struct.Struct("<fii")


def read_flo(data: bytes) -> FlowField:
    """Decode a Middlebury .flo byte stream."""
    if len(data) < _FLO_HEADER.size:
        raise FormatError("flo stream shorter than header")
    magic, width, height = _FLO_HEADER.unpack_from(data)
    if magic != FLO_MAGIC:
        raise FormatError(f"bad flo magic {magic!r}")
    if width <= 0 or height <= 0:
        raise FormatError(f"bad flo dimensions {width}x{height}")
    expected = _FLO_HEADER.size + 8 * width * height
    if len(data) != expected:
        raise FormatError(f"flo payload length {len(data)}, expected {expected}")
    values = np.frombuffer(data, dtype="<f4", offset=_FLO_HEADER.size)
    return FlowField(values.reshape(height, width, 2))


def write_flo(flow: FlowField) -> bytes:
    """Encode a flow field as Middlebury .flo bytes."""
    header = _FLO_HEADER.pack(FLO_MAGIC, flow.width, flow.height)
    return header + flow.data.astype("<f4").tobytes()


def read_flo_file(path) -> FlowField:
    with open(path, "rb") as fh:
        return read_flo(fh.read())


def write_flo_file(path, flow: FlowField) -> None:
    with open(path, "wb") as fh:
        fh.write(write_flo(flow))


def _decode_png(data: bytes, flags: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    img = cv2.imdecode(buf, flags)
    if img is None:
        raise FormatError("could not decode PNG stream")
    return img


def read_kitti_png(data: bytes) -> tuple[FlowField, VisibilityMask]:
    """Decode a KITTI flow PNG into (flow, validity mask)."""
    img = _decode_png(data, cv2.IMREAD_UNCHANGED)
    if img.dtype != np.uint16:
        raise FormatError(f"KITTI flow PNG must be 16-bit, got {img.dtype}")
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError("KITTI flow PNG must have 3 channels")
    # cv2 decodes channels in BGR order; the format is (u, v, valid) in RGB.
    u = (img[:, :, 2].astype(np.float64) - 2 ** 15) / 64.0
    v = (img[:, :, 1].astype(np.float64) - 2 ** 15) / 64.0
    valid = (img[:, :, 0] > 0).astype(np.float64)
    return FlowField(np.stack([u, v], axis=-1)), VisibilityMask(valid)


def write_kitti_png(flow: FlowField, valid: VisibilityMask | None = None) -> bytes:
    """Encode flow (and optional validity) as KITTI 16-bit PNG bytes."""
    if valid is None:
        valid_arr = np.ones((flow.height, flow.width), dtype=np.uint16)
    else:
        if (valid.height, valid.width) != (flow.height, flow.width):
            raise FormatError("validity mask size mismatch")
        valid_arr = valid.data.astype(np.uint16)
    codes = np.rint(flow.data * 64.0 + 2 ** 15)
    if codes.min() < 0 or codes.max() > 65535:
        raise FormatError("flow magnitude exceeds the KITTI 16-bit code range")
    codes = codes.astype(np.uint16)
    bgr = np.stack([valid_arr, codes[:, :, 1], codes[:, :, 0]], axis=-1)
    ok, buf = cv2.imencode(".png", bgr)
    if not ok:
        raise FormatError("PNG encoding failed")
    return buf.tobytes()


def read_kitti_png_file(path) -> tuple[FlowField, VisibilityMask]:
    with open(path, "rb") as fh:
        return read_kitti_png(fh.read())


def write_kitti_png_file(path, flow: FlowField, valid=None) -> None:
    with open(path, "wb") as fh:
        fh.write(write_kitti_png(flow, valid))


def read_image_file(path) -> Image:
    """Read an 8- or 16-bit PNG/PPM/PGM image, normalized to [0, 1]."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"could not read image {path}")
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FormatError(f"unsupported image dtype {img.dtype}")
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        img = img[:, :, ::-1]  # BGR -> RGB
    return Image(img.astype(np.float64) / scale)


def encode_image(image: Image, bit_depth: int = 8, ext: str = ".png") -> bytes:
    """Encode an image as PNG or PPM/PGM bytes, 8- or 16-bit."""
    if bit_depth == 8:
        codes = np.rint(image.data * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        codes = np.rint(image.data * 65535.0).astype(np.uint16)
    else:
        raise FormatError("bit_depth must be 8 or 16")
    if codes.shape[2] == 1:
        codes = codes[:, :, 0]
    else:
        codes = codes[:, :, ::-1]  # RGB -> BGR
    ok, buf = cv2.imencode(ext, codes)
    if not ok:
        raise FormatError(f"could not encode image as {ext}")
    return buf.tobytes()


def write_image_file(path, image: Image, bit_depth: int = 8) -> None:
    """Write an image as PNG or PPM/PGM, 8- or 16-bit."""
    ext = Path(str(path)).suffix or ".png"
    with open(path, "wb") as fh:
        fh.write(encode_image(image, bit_depth, ext))
