"""Binary snapshots and CSV tables.

Snapshot layout (little-endian): ``b"FCHT"``, u32 version (=1), u32 dimension, one u32
per axis with the node count, f64 time, then the ``mu``, ``phi`` and ``S`` arrays as f64
in row-major grid order.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FCHT"
VERSION = 1

SERIES_COLUMNS = ("step", "time", "outer_iters", "outer_ratio", "energy", "mass", "norm_mu",
                  "norm_phi_Bsigma", "norm_s", "res_mu", "res_phi", "res_s")


class SnapshotError(ValueError):
    pass


def encode_snapshot(time: float, mu: np.ndarray, phi: np.ndarray, s: np.ndarray) -> bytes:
    shape = mu.shape
    if phi.shape != shape or s.shape != shape:
        raise SnapshotError("fields have different shapes")
    head = MAGIC + struct.pack(f"<II{len(shape)}Id", VERSION, len(shape), *shape, float(time))
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in (mu, phi, s))
    return head + body


def decode_snapshot(data: bytes):
    """Returns ``(time, mu, phi, s)``; rejects bad magic, version or payload length."""
    if len(data) < 12 or data[:4] != MAGIC:
        raise SnapshotError("not a snapshot file (bad magic)")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if dim not in (1, 2):
        raise SnapshotError(f"unsupported dimension {dim}")
    off = 12
    if len(data) < off + 4 * dim + 8:
        raise SnapshotError("truncated header")
    shape = struct.unpack_from(f"<{dim}I", data, off)
    off += 4 * dim
    (time,) = struct.unpack_from("<d", data, off)
    off += 8
    n = int(np.prod(shape))
    if len(data) - off != 3 * 8 * n:
        raise SnapshotError(f"payload is {len(data) - off} bytes, header implies {24 * n}")
    arrays = np.frombuffer(data, dtype="<f8", offset=off).reshape((3,) + tuple(shape))
    return time, arrays[0].copy(), arrays[1].copy(), arrays[2].copy()


def write_snapshot(path, time, mu, phi, s) -> None:
    Path(path).write_bytes(encode_snapshot(time, mu, phi, s))


def read_snapshot(path):
    return decode_snapshot(Path(path).read_bytes())


def format_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns, rows) -> None:
    """CSV with a header; floats written with ``repr`` so output is exact and stable."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def read_table(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
