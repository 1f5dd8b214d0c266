"""Flat binary checkpoint files for named parameter arrays.

Layout: 8-byte little-endian unsigned header length, then a JSON header
{"params": [{"name", "shape", "dtype", "offset"}]}, then the raw
little-endian float64 array bytes concatenated in name order. Offsets are
relative to the start of the data section. Writing the same parameters
always produces byte-identical files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import FormatError

_DTYPE = "<f8"


def save_checkpoint(params: dict[str, np.ndarray], path) -> None:
    """Write named arrays; names are sorted so output bytes are canonical."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype=_DTYPE)
        raw = arr.tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "dtype": _DTYPE, "offset": offset}
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"params": entries}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into name -> float64 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise FormatError("checkpoint file too short for its header length field")
    (header_len,) = struct.unpack("<Q", blob[:8])
    if len(blob) < 8 + header_len:
        raise FormatError("checkpoint header truncated")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"checkpoint header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "params" not in header:
        raise FormatError("checkpoint header missing 'params'")
    data = blob[8 + header_len :]
    out: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        try:
            name = entry["name"]
            shape = tuple(int(s) for s in entry["shape"])
            dtype = np.dtype(entry["dtype"])
            offset = int(entry["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed checkpoint entry: {entry!r}") from exc
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset < 0 or offset + nbytes > len(data):
            raise FormatError(f"checkpoint entry {name!r} overruns the data section")
        arr = np.frombuffer(data[offset : offset + nbytes], dtype=dtype).reshape(shape)
        out[name] = arr.astype(np.float64, copy=True)
    return out
