"""Sidecar-header + raw float32 payload files.

``<base>.json`` holds the header, ``<base>.raw`` the little-endian float32
payload in row-major order of the declared axes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = "MSTCT-RAW"
VERSION = 1
DTYPE = "f32le"


def split_paths(path):
    p = Path(path)
    if p.suffix in (".json", ".raw"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".json"), p.with_name(p.name + ".raw")


def write_raw(path, data: np.ndarray, kind: str, order: str, **fields) -> Path:
    """Write ``data`` with a header; returns the header path."""
    hdr_path, raw_path = split_paths(path)
    hdr_path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(data, dtype="<f4")
    if len(order.split(",")) != arr.ndim:
        raise ValueError(f"order {order!r} does not match array rank {arr.ndim}")
    header = {
        "magic": MAGIC,
        "version": VERSION,
        "kind": kind,
        "dims": list(arr.shape),
        "order": order,
        "dtype": DTYPE,
        "payload": raw_path.name,
    }
    header.update(fields)
    raw_path.write_bytes(arr.tobytes())
    hdr_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return hdr_path


def read_raw(path, kind: str | None = None):
    """Return ``(array, header)``; the array is float32."""
    hdr_path, raw_path = split_paths(path)
    if not hdr_path.exists():
        raise FormatError(f"missing header file {hdr_path}")
    try:
        header = json.loads(hdr_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{hdr_path}: header is not valid JSON ({exc})") from exc
    if header.get("magic") != MAGIC:
        raise FormatError(f"{hdr_path}: bad magic {header.get('magic')!r}")
    if header.get("dtype") != DTYPE:
        raise FormatError(f"{hdr_path}: unsupported dtype {header.get('dtype')!r}")
    if kind is not None and header.get("kind") != kind:
        raise FormatError(f"{hdr_path}: expected kind {kind!r}, found {header.get('kind')!r}")
    dims = header.get("dims")
    if not isinstance(dims, list) or not dims or any(not isinstance(n, int) or n < 1 for n in dims):
        raise FormatError(f"{hdr_path}: invalid dims {dims!r}")
    if len(str(header.get("order", "")).split(",")) != len(dims):
        raise FormatError(f"{hdr_path}: order does not match dims")
    raw_path = hdr_path.with_name(header.get("payload", raw_path.name))
    if not raw_path.exists():
        raise FormatError(f"missing payload file {raw_path}")
    payload = raw_path.read_bytes()
    expected = int(np.prod(dims)) * 4
    if len(payload) != expected:
        raise FormatError(f"{raw_path}: payload has {len(payload)} bytes, header implies {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    return arr, header
