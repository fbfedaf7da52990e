"""Single-file binary container: JSON header followed by raw array blocks.

Layout:  magic 'BRLC' | u32 header length | header JSON (utf-8) | payload.
The header lists each array's name, dtype, and shape in payload order;
all numeric payload is little-endian.  Readers fail closed: a bad magic
or unparseable header raises DataFormatError, an unsupported schema
raises SchemaVersionError, and a payload shorter than the header
announces raises TruncatedFileError.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError, SchemaVersionError, TruncatedFileError

MAGIC = b"BRLC"
SCHEMA_VERSION = 1

_ALLOWED_DTYPES = {"<f4", "<f8", "<i8", "<u4", "<u8"}


def write_container(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays plus a free-form metadata dict to one file."""
    path = Path(path)
    specs = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        shape = list(arr.shape)  # before ascontiguousarray, which promotes 0-d to 1-d
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        if dtype.str not in _ALLOWED_DTYPES:
            raise DataFormatError(f"unsupported dtype {arr.dtype} for array '{name}'")
        arr = arr.astype(dtype, copy=False)
        specs.append({"name": name, "dtype": dtype.str, "shape": shape})
        blobs.append(arr.tobytes())
    header = {"schema_version": SCHEMA_VERSION, "arrays": specs, "meta": meta or {}}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def read_container(path):
    """Read back (arrays, meta); raises the errors documented above."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4:
        raise TruncatedFileError(f"{path}: file shorter than the fixed preamble")
    if raw[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path}: bad magic, not a container file")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if len(raw) < header_end:
        raise TruncatedFileError(f"{path}: header cut short")
    try:
        header = json.loads(raw[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: corrupt header ({exc})") from exc
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema version {version}, expected {SCHEMA_VERSION}")
    arrays = {}
    offset = header_end
    for spec in header.get("arrays", []):
        try:
            name = spec["name"]
            dtype = np.dtype(spec["dtype"])
            shape = tuple(int(s) for s in spec["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: malformed array spec {spec!r}") from exc
        if dtype.str not in _ALLOWED_DTYPES:
            raise DataFormatError(f"{path}: unsupported dtype {dtype} for array '{name}'")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        if len(raw) < offset + nbytes:
            raise TruncatedFileError(
                f"{path}: array '{name}' needs {nbytes} bytes at offset {offset}, file has {len(raw)}"
            )
        arrays[name] = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise DataFormatError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    return arrays, header.get("meta", {})
