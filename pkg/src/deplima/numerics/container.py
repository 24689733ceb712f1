"""Model parameter container.

Binary layout (all integers little-endian u32):

    magic "DLMA" | version | tensor count
    per tensor: name length | name (UTF-8) | rank | dims... | f64 payload (LE)
    section count
    per section: name length | name | byte length | UTF-8 text

The trailing text sections carry vocabularies and label inventories so one
file holds a complete model. Section content is line-oriented; writers
escape backslash, tab, and newline inside fields.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import BadContainer
from .tensor import Tensor

MAGIC = b"DLMA"
VERSION = 1


def _write_u32(out, value):
    out.write(struct.pack("<I", value))


def _read_u32(buf, offset):
    if offset + 4 > len(buf):
        raise BadContainer("truncated container")
    return struct.unpack_from("<I", buf, offset)[0], offset + 4


def save_container(path, tensors, sections=None):
    """Write named tensors plus named text sections to ``path``.

    tensors: mapping name -> Tensor (or ndarray).
    sections: mapping name -> str.
    """
    sections = sections or {}
    with open(path, "wb") as out:
        out.write(MAGIC)
        _write_u32(out, VERSION)
        _write_u32(out, len(tensors))
        for name, tensor in tensors.items():
            data = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor, float)
            encoded = name.encode("utf-8")
            _write_u32(out, len(encoded))
            out.write(encoded)
            _write_u32(out, data.ndim)
            for d in data.shape:
                _write_u32(out, d)
            out.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
        _write_u32(out, len(sections))
        for name, text in sections.items():
            encoded = name.encode("utf-8")
            _write_u32(out, len(encoded))
            out.write(encoded)
            payload = text.encode("utf-8")
            _write_u32(out, len(payload))
            out.write(payload)


def load_container(path):
    """Read back (tensors, sections); tensors are trainable float64 Tensors."""
    with open(path, "rb") as handle:
        buf = handle.read()
    if buf[:4] != MAGIC:
        raise BadContainer(f"{path}: bad magic {buf[:4]!r}")
    offset = 4
    version, offset = _read_u32(buf, offset)
    if version != VERSION:
        raise BadContainer(f"{path}: unsupported container version {version}")
    count, offset = _read_u32(buf, offset)
    tensors = {}
    for _ in range(count):
        name_len, offset = _read_u32(buf, offset)
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        rank, offset = _read_u32(buf, offset)
        dims = []
        for _ in range(rank):
            d, offset = _read_u32(buf, offset)
            dims.append(d)
        n_values = int(np.prod(dims)) if dims else 1
        end = offset + 8 * n_values
        if end > len(buf):
            raise BadContainer(f"{path}: truncated payload for {name!r}")
        data = np.frombuffer(buf[offset:end], dtype="<f8").astype(np.float64)
        offset = end
        tensors[name] = Tensor(data.reshape(dims), requires_grad=True, name=name)
    sections = {}
    section_count, offset = _read_u32(buf, offset)
    for _ in range(section_count):
        name_len, offset = _read_u32(buf, offset)
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        byte_len, offset = _read_u32(buf, offset)
        sections[name] = buf[offset:offset + byte_len].decode("utf-8")
        offset += byte_len
    return tensors, sections


def escape_field(text):
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_field(text):
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def vocab_section(pairs):
    """Serialize (token, index) pairs one per line, tab-separated."""
    return "".join(f"{escape_field(tok)}\t{idx}\n" for tok, idx in pairs)


def parse_vocab_section(text):
    pairs = []
    for line in text.splitlines():
        if not line:
            continue
        tok, _, idx = line.rpartition("\t")
        pairs.append((unescape_field(tok), int(idx)))
    return pairs
