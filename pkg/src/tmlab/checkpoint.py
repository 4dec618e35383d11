"""Binary checkpoints for training state.

The format is a tiny tagged-value encoding: a 4-byte magic, a version
word, then one recursively encoded value. Dict keys are written sorted,
so equal states serialize to identical bytes. Integers travel as decimal
strings (RNG states exceed 64 bits), arrays as raw little-endian buffers
with explicit dtype and shape. Nothing here is meant for interchange
with other tools; it exists so a resumed run restarts bit-for-bit.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .errors import CorruptionError, FormatError

MAGIC = b"TMLB"
VERSION = 1

_TAG_NONE = b"N"
_TAG_TRUE = b"T"
_TAG_FALSE = b"F"
_TAG_INT = b"I"
_TAG_FLOAT = b"D"
_TAG_STR = b"S"
_TAG_LIST = b"L"
_TAG_DICT = b"M"
_TAG_ARRAY = b"A"

# dtype codes (u8) for arrays; extend only by appending
_DTYPES = (np.dtype("<f8"), np.dtype("<i8"), np.dtype("int8"),
           np.dtype("uint8"), np.dtype("<f4"), np.dtype("<i4"))
_DTYPE_CODE = {dt: i for i, dt in enumerate(_DTYPES)}


def _write_u32(out, n):
    if n < 0 or n > 0xFFFFFFFF:
        raise FormatError(f"length {n} out of u32 range")
    out.write(struct.pack("<I", n))


def _write_value(out, value):
    if value is None:
        out.write(_TAG_NONE)
    elif isinstance(value, bool) or isinstance(value, np.bool_):
        out.write(_TAG_TRUE if value else _TAG_FALSE)
    elif isinstance(value, (int, np.integer)):
        text = str(int(value)).encode("ascii")
        out.write(_TAG_INT)
        _write_u32(out, len(text))
        out.write(text)
    elif isinstance(value, (float, np.floating)):
        out.write(_TAG_FLOAT)
        out.write(struct.pack("<d", float(value)))
    elif isinstance(value, str):
        data = value.encode("utf-8")
        out.write(_TAG_STR)
        _write_u32(out, len(data))
        out.write(data)
    elif isinstance(value, np.ndarray):
        dt = value.dtype.newbyteorder("<") if value.dtype.byteorder == ">" \
            else value.dtype
        arr = np.ascontiguousarray(value, dtype=dt)
        code = _DTYPE_CODE.get(arr.dtype)
        if code is None:
            raise FormatError(f"unsupported array dtype {value.dtype}")
        out.write(_TAG_ARRAY)
        out.write(struct.pack("<BB", code, arr.ndim))
        for dim in arr.shape:
            _write_u32(out, dim)
        out.write(arr.tobytes())
    elif isinstance(value, (list, tuple)):
        out.write(_TAG_LIST)
        _write_u32(out, len(value))
        for item in value:
            _write_value(out, item)
    elif isinstance(value, dict):
        out.write(_TAG_DICT)
        _write_u32(out, len(value))
        for key in sorted(value):
            if not isinstance(key, str):
                raise FormatError(f"dict keys must be strings, got {key!r}")
            _write_value(out, key)
            _write_value(out, value[key])
    else:
        raise FormatError(f"cannot serialize {type(value).__name__}")


def _read_exact(stream, n, what):
    data = stream.read(n)
    if len(data) != n:
        raise CorruptionError(
            f"checkpoint truncated while reading {what} "
            f"({len(data)}/{n} bytes)")
    return data


def _read_u32(stream, what):
    return struct.unpack("<I", _read_exact(stream, 4, what))[0]


def _read_value(stream):
    tag = _read_exact(stream, 1, "tag")
    if tag == _TAG_NONE:
        return None
    if tag == _TAG_TRUE:
        return True
    if tag == _TAG_FALSE:
        return False
    if tag == _TAG_INT:
        n = _read_u32(stream, "int length")
        return int(_read_exact(stream, n, "int digits").decode("ascii"))
    if tag == _TAG_FLOAT:
        return struct.unpack("<d", _read_exact(stream, 8, "float"))[0]
    if tag == _TAG_STR:
        n = _read_u32(stream, "string length")
        return _read_exact(stream, n, "string").decode("utf-8")
    if tag == _TAG_ARRAY:
        code, ndim = struct.unpack("<BB", _read_exact(stream, 2, "array head"))
        if code >= len(_DTYPES):
            raise FormatError(f"unknown array dtype code {code}")
        shape = tuple(_read_u32(stream, "array dim") for _ in range(ndim))
        dt = _DTYPES[code]
        count = 1
        for dim in shape:
            count *= dim
        raw = _read_exact(stream, count * dt.itemsize, "array data")
        return np.frombuffer(raw, dtype=dt).reshape(shape).copy()
    if tag == _TAG_LIST:
        n = _read_u32(stream, "list length")
        return [_read_value(stream) for _ in range(n)]
    if tag == _TAG_DICT:
        n = _read_u32(stream, "dict length")
        out = {}
        for _ in range(n):
            key = _read_value(stream)
            if not isinstance(key, str):
                raise FormatError("dict key is not a string")
            out[key] = _read_value(stream)
        return out
    raise FormatError(f"unknown value tag {tag!r}")


def dumps(state, meta=None):
    """Encode a checkpoint to bytes. meta is an optional flat str->str dict
    kept outside the state so tools can peek at it cheaply."""
    meta = dict(meta or {})
    for k, v in meta.items():
        if not (isinstance(k, str) and isinstance(v, str)):
            raise FormatError("meta must map strings to strings")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", VERSION))
    _write_value(out, meta)
    _write_value(out, state)
    return out.getvalue()


def loads(data):
    """Decode bytes from dumps back into (state, meta)."""
    stream = io.BytesIO(data)
    magic = _read_exact(stream, 4, "magic")
    if magic != MAGIC:
        raise FormatError(
            f"not a checkpoint: expected magic {MAGIC!r}, got {magic!r}")
    version = _read_u32(stream, "version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    meta = _read_value(stream)
    state = _read_value(stream)
    rest = stream.read(1)
    if rest:
        raise CorruptionError("trailing bytes after checkpoint payload")
    return state, meta


def save_checkpoint(path, state, meta=None):
    data = dumps(state, meta)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
