"""Reference (inference-only) network blocks with caller-supplied weights.

These are shape- and gating-faithful implementations of the recurrent flow
building blocks: local correlation volume, convolutional GRU fusion, the
self-guided warping block that realigns the previous hidden state, and the
five-level pyramid plumbing. Nothing here is trained; weights are injected
so gate behavior can be pinned exactly in tests.

Temporal feedback is an explicit call sequence: the level l+1 hidden state
from time t-1 is lifted with ``upsample2`` and fed to ``sgw_block`` at level
l for time t, which realigns it against the current feature map before the
GRU fusion.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FormatError, ParameterError
from .warp import warp_array

HIDDEN_CHANNELS = 32
PYRAMID_DIVISORS = (4, 8, 16, 32, 64)

_WEIGHT_MAGIC = b"FSWT"
_WEIGHT_VERSION = 1


@dataclass
class WeightSet:
    """Named convolution kernels/biases. Kernels are (kh, kw, c_in, c_out)."""

    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise ParameterError(f"missing weight tensor {name!r}") from None

    def __setitem__(self, name, value):
        self.tensors[name] = np.asarray(value, dtype=np.float64)

    def __contains__(self, name):
        return name in self.tensors


def save_weights(weights: WeightSet, path) -> None:
    """Flat binary container: magic, version, count, then per-tensor
    (u32 name length, utf-8 name, u32 ndim, u32 dims..., float32-LE values)."""
    with open(path, "wb") as fh:
        fh.write(_WEIGHT_MAGIC)
        fh.write(struct.pack("<II", _WEIGHT_VERSION, len(weights.tensors)))
        for name in sorted(weights.tensors):
            arr = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_weights(path) -> WeightSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _WEIGHT_MAGIC:
        raise FormatError("bad weight container magic")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _WEIGHT_VERSION:
        raise FormatError(f"unsupported weight container version {version}")
    offset = 12
    out = WeightSet()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
        offset += 4 * n
        out.tensors[name] = values.reshape(shape).astype(np.float64)
    if offset != len(data):
        raise FormatError("trailing bytes in weight container")
    return out


def conv2d_same(x: np.ndarray, kernel: np.ndarray, bias=None) -> np.ndarray:
    """3x3-style convolution with zero 'same' padding; x is (H, W, C_in)."""
    kh, kw, c_in, c_out = kernel.shape
    if x.ndim != 3 or x.shape[2] != c_in:
        raise DimensionError(
            f"input channels {x.shape} incompatible with kernel {kernel.shape}")
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    h, w = x.shape[:2]
    out = np.zeros((h, w, c_out))
    for dy in range(kh):
        for dx in range(kw):
            out += padded[dy:dy + h, dx:dx + w] @ kernel[dy, dx]
    if bias is not None:
        out += np.asarray(bias)
    return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def correlation_volume(f1: np.ndarray, f2: np.ndarray, max_disp: int) -> np.ndarray:
    """Local correlation: channel d = mean_c f1(p) * f2(p + d), zero off-frame.

    Displacements (dx, dy) scan [-max_disp, max_disp]^2 in row-major order of
    (dy, dx), giving (2*max_disp+1)^2 output channels.
    """
    if f1.shape != f2.shape:
        raise DimensionError("feature maps must share shape")
    if max_disp < 0:
        raise ParameterError("max_disp must be >= 0")
    h, w, c = f1.shape
    r = max_disp
    padded = np.pad(f2, ((r, r), (r, r), (0, 0)))
    out = np.zeros((h, w, (2 * r + 1) ** 2))
    idx = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = padded[r + dy:r + dy + h, r + dx:r + dx + w]
            out[:, :, idx] = (f1 * shifted).mean(axis=2)
            idx += 1
    return out


def conv_gru_cell(hidden: np.ndarray, inp: np.ndarray, weights: WeightSet) -> np.ndarray:
    """Gated fusion of a previous hidden state with the current feature map.

    z and r gate via sigmoid(conv([hidden, input])); the candidate is
    tanh(conv([r * input, hidden])) and the output blends
    (1 - z) * input + z * candidate.
    """
    if hidden.shape[:2] != inp.shape[:2]:
        raise DimensionError("hidden/input spatial shapes differ")
    hx = np.concatenate([hidden, inp], axis=2)
    z = _sigmoid(conv2d_same(hx, weights["gru.z.weight"], weights["gru.z.bias"]))
    r = _sigmoid(conv2d_same(hx, weights["gru.r.weight"], weights["gru.r.bias"]))
    rx = np.concatenate([r * inp, hidden], axis=2)
    q = np.tanh(conv2d_same(rx, weights["gru.q.weight"], weights["gru.q.bias"]))
    return (1.0 - z) * inp + z * q


def estimate_flow(correlation: np.ndarray, weights: WeightSet) -> np.ndarray:
    """Mini flow estimator: two 3x3 convolutions with a ReLU between."""
    hidden = np.maximum(conv2d_same(correlation, weights["est.conv1.weight"],
                                    weights["est.conv1.bias"]), 0.0)
    return conv2d_same(hidden, weights["est.conv2.weight"], weights["est.conv2.bias"])


def sgw_block(hidden: np.ndarray, feature: np.ndarray, weights: WeightSet,
              max_disp: int = 3) -> np.ndarray:
    """Self-guided warping: realign the hidden state, then GRU-fuse it.

    The hidden state (already upsampled to this level's resolution) is
    correlated with the current feature, a small estimator turns the volume
    into a flow, the hidden state is inverse-warped by that flow, and the
    warped hidden state is fused with the feature by the Conv-GRU cell.
    """
    if hidden.shape != feature.shape:
        raise DimensionError("hidden/feature shapes differ")
    volume = correlation_volume(hidden, feature, max_disp)
    flow = estimate_flow(volume, weights)
    warped_hidden = warp_array(hidden, flow)
    return conv_gru_cell(warped_hidden, feature, weights)


def pyramid_shapes(height: int, width: int) -> list:
    """Five-level pyramid sizes from /4 down to /64; inputs must divide by 64."""
    if height % 64 != 0 or width % 64 != 0:
        raise ParameterError(f"{height}x{width} not divisible by 64")
    return [(height // d, width // d) for d in PYRAMID_DIVISORS]


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """Deterministic 2x average pooling (even spatial sizes)."""
    h, w = x.shape[:2]
    if h % 2 or w % 2:
        raise DimensionError("avg_pool2 needs even spatial sizes")
    return x.reshape(h // 2, 2, w // 2, 2, -1).mean(axis=(1, 3))


def feature_pyramid(image: np.ndarray) -> list:
    """Five feature levels built by repeated average pooling of an image.

    A stand-in for the learned encoder: good enough to verify shapes and
    gating of the recurrent blocks.
    """
    h, w = image.shape[:2]
    pyramid_shapes(h, w)  # validates divisibility
    level = avg_pool2(avg_pool2(image))
    levels = [level]
    for _ in range(4):
        level = avg_pool2(level)
        levels.append(level)
    return levels


def upsample2(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x upsampling, used to lift hidden states a level."""
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def validate_hidden_state(x: np.ndarray) -> np.ndarray:
    """Hidden states carry exactly 32 channels across all pyramid levels."""
    if x.ndim != 3 or x.shape[2] != HIDDEN_CHANNELS:
        raise DimensionError(
            f"hidden state must have {HIDDEN_CHANNELS} channels, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("hidden state contains non-finite values")
    return x
