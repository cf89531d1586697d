"""On-disk chunked matrices and out-of-core products.

File layout (little-endian)::

    offset  size  field
    0       4     magic b"GBA1"
    4       4     format version (u32) = 1
    8       8     rows (u64)
    16      8     cols (u64)
    24      8     chunk_rows (u64)
    32      ...   rows*cols float64 values, row-major, no padding

Chunk ``i`` covers rows ``[i*chunk_rows, min((i+1)*chunk_rows, rows))``.
Each access maps only the byte range of one chunk.
"""
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import numeric
from .errors import (BudgetError, ChunkError, CorruptionError, FormatError,
                     ShapeError, StateError, VersionError)
from .numeric import as_mat

MAGIC = b"GBA1"
VERSION = 1
HEADER = struct.Struct("<4sIQQQ")
HEADER_SIZE = HEADER.size  # 32
ITEM = 8
DTYPE = np.dtype("<f8")
DEFAULT_CHUNK_BYTES = 64 * 2**20


def default_chunk_rows(cols):
    return max(1, DEFAULT_CHUNK_BYTES // (cols * ITEM))


@dataclass(frozen=True)
class MemoryBudget:
    """Largest m for which an m×m float64 matrix may be held in RAM."""
    max_square_dim: int

    def check(self, dim):
        if dim > self.max_square_dim:
            raise BudgetError(required=dim, available=self.max_square_dim)


@dataclass(frozen=True)
class BigArray:
    path: str
    rows: int
    cols: int
    chunk_rows: int
    mode: str = "r"
    dtype: np.dtype = DTYPE

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def n_chunks(self):
        return math.ceil(self.rows / self.chunk_rows)

    @property
    def nbytes(self):
        return HEADER_SIZE + self.rows * self.cols * ITEM

    def chunk_bounds(self, index):
        if not 0 <= index < self.n_chunks:
            raise IndexError(f"chunk {index} out of range [0, {self.n_chunks})")
        start = index * self.chunk_rows
        return start, min(start + self.chunk_rows, self.rows)

    def _map(self, index, mode):
        start, stop = self.chunk_bounds(index)
        return np.memmap(self.path, dtype=DTYPE, mode=mode,
                         offset=HEADER_SIZE + start * self.cols * ITEM,
                         shape=(stop - start, self.cols))

    def chunk_view(self, index):
        """Read-only memory map of one chunk (no copy)."""
        return self._map(index, "r")

    def read_chunk(self, index):
        return ba_read_chunk(self, index)

    def write_chunk(self, index, m):
        ba_write_chunk(self, index, m)

    def to_numpy(self):
        """Whole array in RAM; meant for tests and small files."""
        out = np.empty(self.shape)
        for i in range(self.n_chunks):
            start, stop = self.chunk_bounds(i)
            out[start:stop] = self.chunk_view(i)
        return out


def _pack_header(rows, cols, chunk_rows):
    return HEADER.pack(MAGIC, VERSION, rows, cols, chunk_rows)


def ba_create(path, rows, cols, chunk_rows=None):
    """Create a zero-filled file and return a writable handle."""
    if rows < 1 or cols < 1:
        raise FormatError(f"dimensions must be >= 1, got {rows}x{cols}")
    if chunk_rows is None:
        chunk_rows = default_chunk_rows(cols)
    if chunk_rows < 1:
        raise FormatError(f"chunk_rows must be >= 1, got {chunk_rows}")
    path = os.fspath(path)
    with open(path, "wb") as fh:
        fh.write(_pack_header(rows, cols, chunk_rows))
        fh.truncate(HEADER_SIZE + rows * cols * ITEM)
    return BigArray(path, int(rows), int(cols), int(chunk_rows), mode="w")


def ba_open(path, mode="r"):
    if mode not in ("r", "w"):
        raise ValueError(f"mode must be 'r' or 'w', got {mode!r}")
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise CorruptionError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, version, rows, cols, chunk_rows = HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"{path}: unsupported format version {version}")
    if rows < 1 or cols < 1 or chunk_rows < 1:
        raise CorruptionError(f"{path}: invalid header dims {rows}x{cols}/{chunk_rows}")
    expected = HEADER_SIZE + rows * cols * ITEM
    actual = os.path.getsize(path)
    if actual != expected:
        raise CorruptionError(f"{path}: size {actual} bytes, header implies {expected}")
    return BigArray(path, rows, cols, chunk_rows, mode=mode)


def ba_read_chunk(ba, index):
    return np.array(ba.chunk_view(index), dtype=np.float64)


def ba_write_chunk(ba, index, m):
    if ba.mode != "w":
        raise StateError(f"{ba.path} is open read-only")
    start, stop = ba.chunk_bounds(index)
    m = as_mat(m, "chunk")
    if m.shape != (stop - start, ba.cols):
        raise ShapeError(f"chunk {index} must be {(stop - start, ba.cols)}, got {m.shape}")
    mm = ba._map(index, "r+")
    mm[...] = m
    mm.flush()
    del mm


def from_array(path, a, chunk_rows=None):
    """Write an in-memory matrix to ``path`` chunk by chunk."""
    a = as_mat(a)
    ba = ba_create(path, a.shape[0], a.shape[1], chunk_rows)
    for i in range(ba.n_chunks):
        start, stop = ba.chunk_bounds(i)
        ba_write_chunk(ba, i, a[start:stop])
    return ba


def ooc_gram(x, budget):
    """XᵀX accumulated over chunks in ascending order.

    Only the d×d accumulator lives in RAM; chunks are read through memory
    maps and fed straight to a symmetric rank-k update.
    """
    budget.check(x.cols)
    acc = np.zeros((x.cols, x.cols), order="F")
    for i in range(x.n_chunks):
        chunk = x.chunk_view(i)
        numeric.syrk_accumulate(acc, chunk)
        del chunk
    return numeric.symmetrize_upper(acc)


def ooc_xty(x, y, budget):
    """XᵀY accumulated over aligned chunks in ascending order."""
    if x.rows != y.rows or x.chunk_rows != y.chunk_rows:
        raise ShapeError(f"x ({x.rows} rows, chunk {x.chunk_rows}) and y "
                         f"({y.rows} rows, chunk {y.chunk_rows}) are not aligned")
    budget.check(x.cols)
    budget.check(y.cols)
    acc = np.zeros((x.cols, y.cols), order="F")
    for i in range(x.n_chunks):
        numeric.gemm_tn_accumulate(acc, x.chunk_view(i), y.chunk_view(i))
    return np.ascontiguousarray(acc)


def ooc_matmul(a, b, out, workers=1):
    """out = a·b, one chunk of ``a`` per task, up to ``workers`` at once.

    Results go to a temporary sibling file that replaces ``out`` only once
    every chunk succeeded, so a failure leaves ``out`` untouched.  Each
    chunk is computed by the same call regardless of scheduling, so the
    output does not depend on ``workers``.
    """
    b = as_mat(b, "b")
    if a.cols != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    if out.shape != (a.rows, b.shape[1]) or out.chunk_rows != a.chunk_rows:
        raise ShapeError(f"out must be {(a.rows, b.shape[1])} with chunk_rows "
                         f"{a.chunk_rows}, got {out.shape}/{out.chunk_rows}")
    if out.mode != "w":
        raise StateError(f"{out.path} is open read-only")
    tmp = ba_create(out.path + ".partial", out.rows, out.cols, out.chunk_rows)

    def work(i):
        try:
            dst = tmp._map(i, "r+")
            np.matmul(a.chunk_view(i), b, out=dst)
            dst.flush()
            del dst
        except Exception as exc:
            raise ChunkError(i, exc) from exc

    pool = ThreadPoolExecutor(max_workers=max(1, int(workers)))
    try:
        futures = [pool.submit(work, i) for i in range(a.n_chunks)]
        for f in futures:
            f.result()
    except BaseException:
        pool.shutdown(wait=True, cancel_futures=True)
        os.unlink(tmp.path)
        raise
    pool.shutdown()
    os.replace(tmp.path, out.path)
