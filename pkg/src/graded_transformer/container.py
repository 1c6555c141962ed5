"""Self-describing, byte-deterministic array container.

Layout: 8-byte magic, 8-byte little-endian header length, JSON header,
then the raw array payloads concatenated in header order.  Arrays are
stored little-endian ('<f8' or '<i8'), C-order.  Identical inputs always
produce identical bytes, which npz archives do not guarantee.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"GTCONT01"
FORMAT_VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    payloads = []
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        dt = "<i8" if np.issubdtype(a.dtype, np.integer) else "<f8"
        a = np.ascontiguousarray(a.astype(_DTYPES[dt]))
        entries.append({"name": name, "dtype": dt, "shape": list(a.shape)})
        payloads.append(a.tobytes())
    header = json.dumps(
        {"version": FORMAT_VERSION, "meta": meta or {}, "arrays": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a container file")
    hlen = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16 : 16 + hlen].decode())
    if header["version"] != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported container version {header['version']}")
    arrays = {}
    offset = 16 + hlen
    for entry in header["arrays"]:
        dt = _DTYPES[entry["dtype"]]
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * dt.itemsize
        buf = raw[offset : offset + nbytes]
        arrays[entry["name"]] = np.frombuffer(buf, dtype=dt).reshape(entry["shape"]).copy()
        offset += nbytes
    return arrays, header["meta"]
