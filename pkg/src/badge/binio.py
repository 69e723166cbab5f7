"""Binary container used for model, perturbation, and checkpoint files.

Layout: 4-byte magic, u32 version, u32 header length, JSON header
(utf-8), then the raw float64 little-endian payload of each array in
the order listed under header["arrays"] as [name, shape] pairs.
"""

import json
import struct

import numpy as np

from .errors import FormatError, LengthError

VERSION = 1


def write_blob(path, magic: bytes, header: dict, arrays: dict) -> None:
    if len(magic) != 4:
        raise FormatError("magic must be 4 bytes, got %r" % (magic,))
    meta = dict(header)
    meta["arrays"] = [[name, list(arr.shape)] for name, arr in arrays.items()]
    raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<II", VERSION, len(raw)))
        fh.write(raw)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_blob(path, magic: bytes):
    """Read a container written by write_blob; returns (header, arrays)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise LengthError("file too short for container header: %d bytes" % len(data))
    if data[:4] != magic:
        raise FormatError("bad magic: expected %r, got %r" % (magic, data[:4]))
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise FormatError("unsupported container version %d" % version)
    if len(data) < 12 + hlen:
        raise LengthError("header truncated: declared %d bytes" % hlen)
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError("header is not valid JSON: %s" % exc) from None
    offset = 12 + hlen
    arrays = {}
    for name, shape in header.get("arrays", []):
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(data):
            raise LengthError(
                "payload truncated: array %r needs %d bytes, %d left"
                % (name, nbytes, len(data) - offset)
            )
        flat = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        arrays[name] = flat.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise LengthError("trailing bytes after payload: %d" % (len(data) - offset))
    return header, arrays
