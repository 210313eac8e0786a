"""Binary model checkpoints.

Layout: 8-byte magic, 8-byte little-endian header length, JSON header
(format version, dims, vocab, seed), then every learnable tensor as raw
little-endian float32 in the declared parameter order.  Reload is
bit-exact at float32 precision; in-memory tensors are float64.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .net import ModelDims, SeqModel, param_layout
from .vocab import Vocab

MAGIC = b"TGTRNET1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def serialize_model(model: SeqModel) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "dims": {
            "d_model": model.dims.d_model,
            "n_layers": model.dims.n_layers,
            "n_heads": model.dims.n_heads,
            "d_ff": model.dims.d_ff,
            "max_seq_len": model.dims.max_seq_len,
        },
        "vocab": list(model.vocab.tokens),
        "seed": model.seed,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<Q", len(header_bytes)), header_bytes]
    for name, shape in param_layout(len(model.vocab), model.dims):
        tensor = model.tensors[name]
        if tensor.shape != shape:
            raise CheckpointError(f"tensor {name} has shape {tensor.shape}, expected {shape}")
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    return b"".join(parts)


def save_model(model: SeqModel, path) -> None:
    atomic_write_bytes(path, serialize_model(model))


def load_model(path) -> SeqModel:
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    offset = len(MAGIC)
    (header_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    try:
        header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: bad header: {exc}") from exc
    offset += header_len
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version")

    dims = ModelDims(**header["dims"])
    vocab = Vocab(tuple(header["vocab"]))
    tensors = {}
    for name, shape in param_layout(len(vocab), dims):
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: truncated at tensor {name}")
        raw = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        tensors[name] = raw.reshape(shape).astype(np.float64)
        offset = end
    if offset != len(blob):
        raise CheckpointError(f"{path}: trailing bytes")
    return SeqModel(vocab, dims, tensors, header["seed"])
