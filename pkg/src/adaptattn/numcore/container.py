"""Tensor container file.

Layout: a UTF-8 text header with one ``name dim0 dim1 ...`` line per tensor,
optional ``#key=value`` metadata lines, a blank line, then each tensor's
row-major little-endian float32 payload concatenated in header order.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping

import numpy as np

from adaptattn.errors import DataError

PAYLOAD_DTYPE = np.dtype("<f4")


def save_tensors(path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, str] | None = None) -> None:
    path = Path(path)
    lines = []
    for key, value in (meta or {}).items():
        if "\n" in str(value) or "=" in key:
            raise DataError(f"metadata entry {key!r} cannot be stored in a header line")
        lines.append(f"#{key}={value}")
    payload = []
    for name, arr in tensors.items():
        if not name or any(ch.isspace() for ch in name):
            raise DataError(f"tensor name {name!r} must be non-empty without whitespace")
        arr = np.asarray(arr)
        lines.append(" ".join([name, *(str(n) for n in arr.shape)]))
        payload.append(np.ascontiguousarray(arr, dtype=PAYLOAD_DTYPE).tobytes())
    header = ("\n".join(lines) + "\n\n").encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(header)
            for chunk in payload:
                fh.write(chunk)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write tensor container {path}: {exc.strerror or exc}") from exc


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read a container; returns ``(tensors, meta)`` with float32 arrays."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read tensor container {path}: {exc.strerror or exc}") from exc
    split = raw.find(b"\n\n")
    if split < 0:
        raise DataError(f"{path}: header is not terminated by a blank line")
    try:
        header = raw[:split].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: header is not valid UTF-8") from exc
    offset = split + 2
    tensors: dict[str, np.ndarray] = {}
    meta: dict[str, str] = {}
    for lineno, line in enumerate(header.split("\n"), start=1):
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise DataError(f"{path}: header line {lineno} is malformed metadata: {line!r}")
            meta[key] = value
            continue
        fields = line.split()
        if not fields:
            raise DataError(f"{path}: empty header line {lineno}")
        name, dims = fields[0], fields[1:]
        try:
            shape = tuple(int(d) for d in dims)
        except ValueError as exc:
            raise DataError(f"{path}: header line {lineno} has a non-integer dimension: {line!r}") from exc
        if any(n < 0 for n in shape):
            raise DataError(f"{path}: header line {lineno} has a negative dimension")
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * PAYLOAD_DTYPE.itemsize
        if offset + nbytes > len(raw):
            raise DataError(f"{path}: payload truncated while reading tensor {name!r}")
        tensors[name] = np.frombuffer(raw, dtype=PAYLOAD_DTYPE, count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes after the last tensor")
    return tensors, meta
