"""Binary model files.

Layout (little-endian)::

    b"RNMT" | u32 version | u32 len + JSON header | u32 len + source vocab |
    u32 len + target vocab | u32 n_tensors |
    n_tensors x (u16 len + name | u32 rows | u32 cols | rows*cols f64)

Vocabularies are newline-joined UTF-8 token lists in id order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..corpus import RESERVED, Vocabulary
from .params import HyperParams, Model, param_shapes

MAGIC = b"RNMT"
VERSION = 1


class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    """Wrong magic string or unsupported format version."""


class ModelHeaderError(ModelFormatError):
    """Unreadable header, vocabulary or tensor table."""


class ModelTruncatedError(ModelFormatError):
    def __init__(self, what: str, expected: int, got: int):
        super().__init__(f"truncated model file: {what} needs {expected} bytes, {got} left")
        self.what = what


def _block(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def dumps(model: Model) -> bytes:
    header = json.dumps({"hyperparams": model.hp.to_dict(), "meta": model.meta},
                        sort_keys=True).encode("utf-8")
    out = [MAGIC, struct.pack("<I", VERSION), _block(header)]
    for vocab in (model.source_vocab, model.target_vocab):
        out.append(_block("\n".join(vocab.itos).encode("utf-8")))
    out.append(struct.pack("<I", len(model.params)))
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        if arr.ndim != 2:
            raise ModelFormatError(f"tensor {name} is not 2-D")
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<II", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        left = len(self.data) - self.pos
        if n > left:
            raise ModelTruncatedError(what, n, left)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def _vocab(raw: bytes, which: str) -> Vocabulary:
    try:
        itos = raw.decode("utf-8").split("\n")
    except UnicodeDecodeError as e:
        raise ModelHeaderError(f"{which} vocabulary is not UTF-8") from e
    if tuple(itos[:len(RESERVED)]) != RESERVED or len(set(itos)) != len(itos):
        raise ModelHeaderError(f"{which} vocabulary is malformed")
    return Vocabulary(itos[len(RESERVED):])


def loads(data: bytes) -> Model:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise ModelVersionError("not a model file (bad magic string)")
    version = r.u32("version")
    if version != VERSION:
        raise ModelVersionError(f"unsupported model format version {version} (expected {VERSION})")
    try:
        header = json.loads(r.take(r.u32("header length"), "header").decode("utf-8"))
        hp = HyperParams(**header["hyperparams"])
        meta = header.get("meta", {})
    except ModelTruncatedError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise ModelHeaderError(f"corrupt header: {e}") from e
    sv = _vocab(r.take(r.u32("source vocabulary length"), "source vocabulary"), "source")
    tv = _vocab(r.take(r.u32("target vocabulary length"), "target vocabulary"), "target")
    expected = param_shapes(hp)
    count = r.u32("tensor count")
    if count != len(expected):
        raise ModelHeaderError(f"{count} tensors stored, {len(expected)} expected")
    params = {}
    for k in range(count):
        (nlen,) = struct.unpack("<H", r.take(2, f"tensor #{k} name length"))
        try:
            name = r.take(nlen, f"tensor #{k} name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelHeaderError(f"tensor #{k} name is not UTF-8") from e
        rows, cols = struct.unpack("<II", r.take(8, f"tensor {name} shape"))
        if expected.get(name) != (rows, cols):
            raise ModelHeaderError(f"tensor {name} has shape {(rows, cols)}, "
                                   f"expected {expected.get(name)}")
        buf = r.take(rows * cols * 8, f"tensor {name}")
        params[name] = np.frombuffer(buf, dtype="<f8").reshape(rows, cols).astype(np.float64)
    if r.pos != len(data):
        raise ModelHeaderError(f"{len(data) - r.pos} trailing bytes after the last tensor")
    if len(sv) != hp.src_vocab_size or len(tv) != hp.tgt_vocab_size:
        raise ModelHeaderError("vocabulary sizes disagree with the hyperparameters")
    return Model(hp, params, sv, tv, meta)


def save_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        return loads(fh.read())
