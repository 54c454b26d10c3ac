"""Grid layer primitives: multi-head self-attention over all cells, harmonic
positional encoding of row/column indices, and the composite block chaining
convolution, attention and an appended encoding while preserving grid size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import ConfigError


@dataclass(frozen=True)
class AttentionConfig:
    head_count: int
    channels: int  # input channel count; split per head into key/query/value thirds

    def __post_init__(self):
        if self.head_count < 1:
            raise ConfigError(f"head_count must be >= 1, got {self.head_count}")
        if self.channels % self.head_count != 0:
            raise ConfigError(f"channels {self.channels} not divisible by {self.head_count} heads")
        if (self.channels // self.head_count) % 3 != 0:
            raise ConfigError(
                f"per-head channels {self.channels // self.head_count} not divisible by 3 (key/query/value split)")

    @property
    def out_channels(self):
        return self.channels // 3


@dataclass(frozen=True)
class PosEncConfig:
    depth: int  # channel count d_e; row/column halves, sin/cos pairs

    def __post_init__(self):
        if self.depth % 4 != 0 or self.depth <= 0:
            raise ConfigError(f"encoding depth must be a positive multiple of 4, got {self.depth}")


def self_attention(z, config):
    """Attention-weighted mixing of every grid cell with every other cell.

    Input channels are split per head into thirds, key first, then query, then
    value. For each output position the logit against position (r, s) is the
    query/key dot product (no scaling), softmax-normalized over all h*w
    positions, and used to average the value vectors. Head outputs are
    concatenated, so an h*w*d input yields h*w*(d/3).
    """
    h, w, d = z.shape
    if d != config.channels:
        raise ConfigError(f"input has {d} channels, config expects {config.channels}")
    n = h * w
    flat = tc.reshape(z, (n, d))
    per_head = d // config.head_count
    third = per_head // 3
    heads = []
    for i in range(config.head_count):
        base = i * per_head
        key = tc.slice_lastdim(flat, base, base + third)
        query = tc.slice_lastdim(flat, base + third, base + 2 * third)
        value = tc.slice_lastdim(flat, base + 2 * third, base + 3 * third)
        logits = tc.matmul(query, tc.transpose2d(key))
        weights = tc.softmax(logits, axis=1)
        heads.append(tc.matmul(weights, value))
    mixed = heads[0] if len(heads) == 1 else tc.concat(heads, axis=1)
    return tc.reshape(mixed, (h, w, d // 3))


def _encoding_array(h, w, depth, dtype):
    quarter = depth // 4
    e = np.zeros((h, w, depth), dtype=dtype)
    rows = np.arange(h, dtype=np.float64)
    cols = np.arange(w, dtype=np.float64)
    for p in range(quarter):
        theta = 1.0 / (10000.0 ** (4.0 * p / depth))
        e[:, :, 2 * p] = np.sin(theta * rows)[:, None]
        e[:, :, 2 * p + 1] = np.cos(theta * rows)[:, None]
        e[:, :, depth // 2 + 2 * p] = np.sin(theta * cols)[None, :]
        e[:, :, depth // 2 + 2 * p + 1] = np.cos(theta * cols)[None, :]
    return e


_ENCODING_CACHE = {}


def positional_encoding(h, w, config, dtype=np.float32):
    """Constant h*w*d_e tensor of harmonic functions of the 0-based cell index.

    First half of the channels encodes the row index, second half the column
    index; within each half channel 2p is sin and 2p+1 is cos at frequency
    1/10000^(4p/d_e).
    """
    key = (h, w, config.depth, np.dtype(dtype).name)
    arr = _ENCODING_CACHE.get(key)
    if arr is None:
        arr = _encoding_array(h, w, config.depth, np.dtype(dtype))
        arr.setflags(write=False)
        _ENCODING_CACHE[key] = arr
    return tc.Tensor(arr, requires_grad=False)


@dataclass(frozen=True)
class CoAtBlockParams:
    kernels: tc.Tensor  # 3*3*c_in*c_out
    bias: tc.Tensor
    attention: AttentionConfig
    pos_enc: PosEncConfig

    def __post_init__(self):
        if self.kernels.shape[3] != self.attention.channels:
            raise ConfigError(
                f"conv produces {self.kernels.shape[3]} channels but attention expects {self.attention.channels}")

    @property
    def out_channels(self):
        return self.attention.out_channels + self.pos_enc.depth


def coat_block(z, params):
    """Convolution (ReLU, skip when channel counts match), then attention,
    then the positional encoding appended along channels. Spatial dims are
    preserved, so the block works on any grid size."""
    h, w, _ = z.shape
    c = tc.relu(tc.conv2d_same(z, params.kernels, params.bias))
    if params.kernels.shape[2] == params.kernels.shape[3]:
        c = tc.add(z, c)
    a = self_attention(c, params.attention)
    e = positional_encoding(h, w, params.pos_enc, dtype=z.dtype)
    return tc.concat([a, e], axis=2)


def conv_relu_skip(z, kernels, bias):
    """Padded conv + ReLU, with the input added back when shapes allow."""
    out = tc.relu(tc.conv2d_same(z, kernels, bias))
    if kernels.shape[2] == kernels.shape[3]:
        out = tc.add(z, out)
    return out
