"""FTRS binary snapshot files.

Layout, all little endian::

    0   magic   b"FTRS"
    4   version u16 (= 1)
    6   flags   u16 (= 0)
    8   rows    u64
    16  cols    u64
    24  n_times u64 (= cols)
    32  times   f64[n_times]
    ..  payload f64[rows * cols], column major
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..fom.snapshots import Trajectory

MAGIC = b"FTRS"
VERSION = 1
HEADER = struct.Struct("<4sHHQQQ")
# refuse to allocate more than this many doubles from a header
MAX_ENTRIES = 2**34


def encode(traj: Trajectory) -> bytes:
    Q = np.asarray(traj.states, dtype="<f8")
    t = np.asarray(traj.times, dtype="<f8")
    rows, cols = Q.shape
    head = HEADER.pack(MAGIC, VERSION, 0, rows, cols, t.size)
    return head + t.tobytes() + Q.tobytes(order="F")


def _check_header(head: bytes, total: int):
    """Validate the fixed header against the total file size; returns ``(rows, cols)``."""
    if len(head) < HEADER.size:
        raise FormatError(f"file shorter than the {HEADER.size}-byte header", len(head))
    magic, version, flags, rows, cols, n_times = HEADER.unpack_from(head, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if flags != 0:
        raise FormatError(f"unknown flags {flags:#06x}", 6)
    if rows == 0 or cols == 0 or rows > MAX_ENTRIES or cols > MAX_ENTRIES or rows * cols > MAX_ENTRIES:
        raise FormatError(f"implausible dimensions {rows} x {cols}", 8)
    if n_times != cols:
        raise FormatError(f"n_times {n_times} differs from cols {cols}", 24)
    need = HEADER.size + 8 * (n_times + rows * cols)
    if total < need:
        raise FormatError(f"truncated payload: {total} of {need} bytes", total)
    if total > need:
        raise FormatError(f"{total - need} trailing bytes", need)
    return rows, cols


def decode(buf: bytes) -> Trajectory:
    rows, cols = _check_header(buf[:HEADER.size], len(buf))
    off = HEADER.size
    t = np.frombuffer(buf, dtype="<f8", count=cols, offset=off).astype(float)
    off += 8 * cols
    Q = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=off)
    Q = Q.reshape((rows, cols), order="F").astype(float)
    return Trajectory(t, Q)


def save_snapshots(traj: Trajectory, path) -> Path:
    """Write ``traj`` atomically (temporary file in the target directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode(traj)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_snapshots(path) -> Trajectory:
    """Read an FTRS file. The header is checked against the file size before the payload is read."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        _check_header(fh.read(HEADER.size), size)
        fh.seek(0)
        return decode(fh.read())
