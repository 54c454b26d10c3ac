"""Model checkpoints: a key=value manifest plus one binary blob per parameter.

Blobs are little-endian float32 payloads prefixed by rank and dimensions as
little-endian uint64, concatenated in canonical parameter-name order. A
round trip is bit-exact; manifests with unknown format versions are
rejected.
"""

from __future__ import annotations

import dataclasses
import os
import struct

import numpy as np

from .coat_model import Model, ModelConfig, build_model
from .errors import ParseError
from . import tensor_core as tc

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.txt"
PARAMS_NAME = "params.bin"

_BOOL_FIELDS = {"desk_scale"}
_STR_FIELDS = {"head_mode"}


def _atomic_write(path, data, binary=False):
    tmp = path + ".tmp"
    mode = "wb" if binary else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def save_checkpoint(model, directory):
    os.makedirs(directory, exist_ok=True)
    lines = [f"format_version={FORMAT_VERSION}"]
    for f in dataclasses.fields(ModelConfig):
        value = getattr(model.config, f.name)
        if f.name in _BOOL_FIELDS:
            value = int(value)
        lines.append(f"{f.name}={value}")
    _atomic_write(os.path.join(directory, MANIFEST_NAME), "\n".join(lines) + "\n")

    chunks = []
    for name in sorted(model.params.names()):
        data = np.ascontiguousarray(model.params[name].data, dtype="<f4")
        chunks.append(struct.pack("<Q", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.tobytes())
    _atomic_write(os.path.join(directory, PARAMS_NAME), b"".join(chunks), binary=True)


def _parse_manifest(path):
    fields = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"manifest line is not key=value: {line!r}", line=lineno)
            key, value = line.split("=", 1)
            fields[key] = value
    version = fields.pop("format_version", None)
    if version != str(FORMAT_VERSION):
        raise ParseError(f"unsupported checkpoint format_version {version!r}")
    kwargs = {}
    for f in dataclasses.fields(ModelConfig):
        if f.name not in fields:
            raise ParseError(f"manifest missing {f.name}=")
        raw = fields.pop(f.name)
        if f.name in _STR_FIELDS:
            kwargs[f.name] = raw
        elif f.name in _BOOL_FIELDS:
            kwargs[f.name] = bool(int(raw))
        else:
            kwargs[f.name] = int(raw)
    if fields:
        raise ParseError(f"unknown manifest keys: {sorted(fields)}")
    return ModelConfig(**kwargs)


def load_checkpoint(directory, dtype=np.float32):
    config = _parse_manifest(os.path.join(directory, MANIFEST_NAME))
    expected = dict(config.parameter_shapes())
    blobs = {}
    with open(os.path.join(directory, PARAMS_NAME), "rb") as fh:
        payload = fh.read()
    offset = 0
    for name in sorted(expected):
        if offset + 8 > len(payload):
            raise ParseError(f"checkpoint truncated before parameter {name!r}")
        (rank,) = struct.unpack_from("<Q", payload, offset)
        offset += 8
        shape = struct.unpack_from(f"<{rank}Q", payload, offset)
        offset += 8 * rank
        if shape != expected[name]:
            raise ParseError(f"parameter {name!r} has shape {shape}, expected {expected[name]}")
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += 4 * count
        blobs[name] = data
    if offset != len(payload):
        raise ParseError(f"{len(payload) - offset} trailing bytes in checkpoint parameters")

    params = tc.ParamStore()
    for name, shape in config.parameter_shapes():
        params.add(name, tc.Tensor(blobs[name].astype(dtype)), trainable=True)
    return Model(config, params)


def clone_model(model, dtype=None):
    """Deep copy (optionally converting precision) without touching disk."""
    dup = build_model(model.config, seed=0, dtype=dtype or model.dtype)
    for name, tensor in model.params.items():
        dup.params[name].data = tensor.data.astype(dup.dtype).copy()
    return dup
