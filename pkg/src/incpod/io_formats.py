"""Bit-exact file formats: snapshot streams, weight matrices, checkpoints, CSV.

Streams and checkpoints are little-endian binary for exact f64 round trips;
the weight matrix uses a human-auditable text triplet format (the FEM mass
matrix is tridiagonal per block, so the file stays small).
"""

from __future__ import annotations

import csv
import struct
import zlib

import numpy as np
import scipy.sparse

from .errors import CorruptCheckpointError, CorruptStreamError, FormatError
from .incremental import SvdState, Tolerances
from .weighted_linalg import WeightMatrix

__all__ = [
    "StreamWriter",
    "StreamReader",
    "write_stream",
    "read_stream",
    "read_stream_matrix",
    "write_weight_matrix",
    "read_weight_matrix",
    "checkpoint",
    "restore",
    "write_csv",
]

_STREAM_MAGIC = b"PODS"
_CHECKPOINT_MAGIC = b"PODC"
_VERSION = 1
_STREAM_HEADER = struct.Struct("<4sIQQ")  # magic, version, m, count


class StreamWriter:
    """Column-at-a-time snapshot stream writer.

    ``count=0`` declares an unterminated stream (live/pipe use); a positive
    count is validated against the number of columns written on close.
    """

    def __init__(self, path, m, count=0):
        self.m = int(m)
        self.count = int(count)
        self._written = 0
        self._fh = open(path, "wb")
        self._fh.write(_STREAM_HEADER.pack(_STREAM_MAGIC, _VERSION, self.m, self.count))

    def write_column(self, t, weight, column):
        column = np.ascontiguousarray(column, dtype="<f8")
        if column.shape != (self.m,):
            raise ValueError(f"column has shape {column.shape}, expected ({self.m},)")
        self._fh.write(struct.pack("<dd", float(t), float(weight)))
        self._fh.write(column.tobytes())
        self._written += 1

    def close(self):
        if self._fh is None:
            return
        self._fh.close()
        self._fh = None
        if self.count and self._written != self.count:
            raise ValueError(
                f"declared {self.count} columns but wrote {self._written}"
            )

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class StreamReader:
    """Iterates (t, weight, column) records with O(m) memory."""

    def __init__(self, path):
        self._fh = open(path, "rb")
        header = self._fh.read(_STREAM_HEADER.size)
        if len(header) < _STREAM_HEADER.size:
            self._fh.close()
            raise FormatError("snapshot stream too short for a header")
        magic, version, m, count = _STREAM_HEADER.unpack(header)
        if magic != _STREAM_MAGIC:
            self._fh.close()
            raise FormatError(f"bad magic {magic!r}, expected {_STREAM_MAGIC!r}")
        if version != _VERSION:
            self._fh.close()
            raise FormatError(f"unsupported stream version {version}")
        self.m = m
        self.count = count  # 0 means unterminated

    def __iter__(self):
        record_bytes = 16 + 8 * self.m
        yielded = 0
        while True:
            if self.count and yielded == self.count:
                return
            offset = self._fh.tell()
            blob = self._fh.read(record_bytes)
            if not blob and not self.count:
                return
            if len(blob) < record_bytes:
                raise CorruptStreamError(
                    f"stream truncated mid-record at byte {offset}", offset=offset
                )
            t, weight = struct.unpack_from("<dd", blob)
            column = np.frombuffer(blob, dtype="<f8", offset=16)
            yield t, weight, column
            yielded += 1

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_stream(path, times, weights, columns):
    """Write a complete stream with a known column count."""
    columns = np.asarray(columns)
    with StreamWriter(path, columns.shape[0], count=columns.shape[1]) as w:
        for j in range(columns.shape[1]):
            w.write_column(times[j], weights[j], columns[:, j])


def read_stream(path):
    """Open a stream for one-column-at-a-time iteration."""
    return StreamReader(path)


def read_stream_matrix(path, max_columns=None):
    """Materialize a stream: (times, weights, m x s column matrix).

    ``max_columns`` is an out-of-memory guard; exceeding it raises
    :class:`FormatError` before the bulk of the file is read.
    """
    times, weights, cols = [], [], []
    with StreamReader(path) as reader:
        if max_columns is not None and reader.count > max_columns:
            raise FormatError(
                f"stream declares {reader.count} columns, cap is {max_columns}"
            )
        for t, w, c in reader:
            if max_columns is not None and len(cols) >= max_columns:
                raise FormatError(f"stream exceeds column cap {max_columns}")
            times.append(t)
            weights.append(w)
            cols.append(c.copy())
    if not cols:
        m = reader.m
        return np.zeros(0), np.zeros(0), np.zeros((m, 0))
    return np.asarray(times), np.asarray(weights), np.column_stack(cols)


def write_weight_matrix(path, M):
    """Coordinate text format, lower triangle only, 17 significant digits.

    Header line ``%%WeightMatrix symmetric``, dims line ``m m nnz``, then
    1-based ``i j value`` triplets with i >= j.
    """
    entries = M.entries if isinstance(M, WeightMatrix) else M
    coo = scipy.sparse.coo_matrix(entries)
    mask = coo.row >= coo.col
    rows, cols, vals = coo.row[mask], coo.col[mask], coo.data[mask]
    order = np.lexsort((cols, rows))
    with open(path, "w") as fh:
        fh.write("%%WeightMatrix symmetric\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {rows.size}\n")
        for idx in order:
            fh.write(f"{rows[idx] + 1} {cols[idx] + 1} {vals[idx]:.17g}\n")


def read_weight_matrix(path):
    """Parse the triplet format back into a :class:`WeightMatrix`,
    mirroring the lower triangle."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "%%WeightMatrix symmetric":
            raise FormatError(f"bad weight-matrix header {header!r}")
        dims = fh.readline().split()
        if len(dims) != 3:
            raise FormatError("malformed dims line")
        m1, m2, nnz = (int(v) for v in dims)
        if m1 != m2:
            raise FormatError(f"weight matrix must be square, got {m1} x {m2}")
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            line = fh.readline()
            if not line:
                raise FormatError(f"expected {nnz} entries, file ended early")
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"malformed entry line {line!r}")
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            if i < j:
                raise FormatError(
                    f"upper-triangle entry ({i + 1}, {j + 1}); store the lower triangle"
                )
            v = float(parts[2])
            rows.append(i)
            cols.append(j)
            vals.append(v)
            if i != j:
                rows.append(j)
                cols.append(i)
                vals.append(v)
        if fh.readline():
            raise FormatError("trailing data after declared entries")
    M = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(m1, m1)).tocsr()
    return WeightMatrix(M)


# checkpoint payload header: m, n, k (u64), e, e_comp (f64), T_p, T_sv (u64),
# tol, tol_sv (f64); then V, sigma, W as f64 runs; trailing CRC32 of the
# payload. e_comp is the compensation term of the error-bound accumulator;
# without it a resumed run would not be bitwise identical.
_CKPT_HEAD = struct.Struct("<QQQddQQdd")


def checkpoint(state, path, tols):
    """Persist a state (requires W) so a stream can resume bitwise."""
    if state.W is None:
        raise ValueError("checkpointing requires the right singular vectors")
    m = state.V.shape[0]
    payload = _CKPT_HEAD.pack(
        m,
        state.n,
        state.k,
        state.e,
        state.e_comp,
        state.T_p,
        state.T_sv,
        tols.tol,
        tols.tol_sv,
    )
    payload += np.ascontiguousarray(state.V, dtype="<f8").tobytes()
    payload += np.ascontiguousarray(state.sigma, dtype="<f8").tobytes()
    payload += np.ascontiguousarray(state.W, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def restore(path):
    """Load a checkpoint; returns ``(state, tolerances)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != _CHECKPOINT_MAGIC:
        raise FormatError("not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    payload, crc_bytes = blob[8:-4], blob[-4:]
    (stored_crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(payload) != stored_crc:
        raise CorruptCheckpointError("checkpoint CRC mismatch")
    m, n, k, e, e_comp, t_p, t_sv, tol, tol_sv = _CKPT_HEAD.unpack_from(payload)
    arrays = np.frombuffer(payload, dtype="<f8", offset=_CKPT_HEAD.size)
    if arrays.size != m * k + k + n * k:
        raise CorruptCheckpointError(
            f"payload holds {arrays.size} values, expected {m * k + k + n * k}"
        )
    V = arrays[: m * k].reshape(m, k).copy()
    sigma = arrays[m * k : m * k + k].copy()
    W = arrays[m * k + k :].reshape(n, k).copy()
    state = SvdState(
        V=V, sigma=sigma, W=W, k=k, n=n, e=e, T_p=t_p, T_sv=t_sv, e_comp=e_comp
    )
    return state, Tolerances(tol=tol, tol_sv=tol_sv)


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)) or value is None:
        return "" if value is None else ("true" if value else "false")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows):
    """CSV report: header row, RFC 4180 quoting, 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
