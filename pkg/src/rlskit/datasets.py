"""Dense CSV and sparse ``label idx:val`` loaders, and streaming conversion
to bigarray files."""
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bigarray
from .errors import FormatError, LabelError, ParseError


@dataclass
class Dataset:
    """Features, contiguous integer labels and the original class values.

    ``classes[k]`` is the raw label that was mapped to id ``k``.  Unpacks as
    ``x, y = dataset``.
    """
    x: np.ndarray
    y: np.ndarray
    classes: np.ndarray

    def __iter__(self):
        return iter((self.x, self.y))

    @property
    def n_classes(self):
        return len(self.classes)


def _parse_float(cell, line, path):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", line, path) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {cell!r}", line, path)
    return v


def _parse_label(cell, line, path):
    v = _parse_float(cell, line, path)
    if v != int(v):
        raise ParseError(f"label {cell!r} is not integral", line, path)
    return int(v)


def iter_dense_csv(path, label_col=-1):
    """Yield ``(line_number, features, label)`` for each data row."""
    width = None
    with open(path, newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise ParseError("need at least one feature and a label column",
                                     line, path)
                col = label_col % width
            elif len(row) != width:
                raise ParseError(f"row has {len(row)} cells, expected {width}", line, path)
            label = _parse_label(row[col], line, path)
            feats = [_parse_float(c, line, path) for i, c in enumerate(row) if i != col]
            yield line, feats, label
    if width is None:
        raise ParseError("empty file", None, path)


def _parse_sparse_line(text, line, path):
    parts = text.split()
    label = _parse_label(parts[0], line, path)
    idx, vals = [], []
    last = 0
    for tok in parts[1:]:
        if ":" not in tok:
            raise ParseError(f"expected idx:val, got {tok!r}", line, path)
        i_str, v_str = tok.split(":", 1)
        try:
            i = int(i_str)
        except ValueError:
            raise ParseError(f"bad feature index {i_str!r}", line, path) from None
        if i < 1:
            raise ParseError(f"feature indices are 1-based, got {i}", line, path)
        if i <= last:
            raise ParseError(f"feature index {i} is duplicate or not ascending",
                             line, path)
        last = i
        idx.append(i - 1)
        vals.append(_parse_float(v_str, line, path))
    return label, idx, vals


def iter_sparse_text(path):
    """Yield ``(line_number, label, zero_based_indices, values)``."""
    seen = False
    with open(path) as fh:
        for line, text in enumerate(fh, start=1):
            text = text.split("#", 1)[0].strip()
            if not text:
                continue
            seen = True
            yield (line, *_parse_sparse_line(text, line, path))
    if not seen:
        raise ParseError("empty file", None, path)


def remap_labels(raw, classes=None):
    """Map raw labels to ids 0..T-1 (sorted by raw value), or onto ``classes``."""
    raw = np.asarray(raw, dtype=np.int64)
    if classes is None:
        classes, ids = np.unique(raw, return_inverse=True)
        return ids.astype(np.int64), classes
    classes = np.asarray(classes, dtype=np.int64)
    pos = np.searchsorted(classes, raw)
    pos = np.minimum(pos, len(classes) - 1)
    unknown = classes[pos] != raw
    if np.any(unknown):
        raise LabelError(f"labels {sorted(set(raw[unknown].tolist()))} not among "
                         f"the training classes {classes.tolist()}")
    return pos.astype(np.int64), classes


def load_dense_csv(path, label_col=-1, classes=None):
    rows, labels = [], []
    for _, feats, label in iter_dense_csv(path, label_col):
        rows.append(feats)
        labels.append(label)
    y, classes = remap_labels(labels, classes)
    return Dataset(np.array(rows, dtype=np.float64), y, classes)


def load_sparse_text(path, n_features=None, classes=None):
    entries = list(iter_sparse_text(path))
    d = max((idx[-1] + 1 for _, _, idx, _ in entries if idx), default=0)
    if n_features is not None:
        if d > n_features:
            raise ParseError(f"feature index {d} exceeds n_features={n_features}",
                             None, path)
        d = n_features
    x = np.zeros((len(entries), d))
    for r, (_, _, idx, vals) in enumerate(entries):
        x[r, idx] = vals
    y, classes = remap_labels([e[1] for e in entries], classes)
    return Dataset(x, y, classes)


def load_dataset(path, fmt="csv", label_col=-1, n_features=None, classes=None):
    if fmt == "csv":
        return load_dense_csv(path, label_col, classes)
    if fmt == "sparse":
        return load_sparse_text(path, n_features, classes)
    raise FormatError(f"unknown dataset format {fmt!r}")


def _scan(path, fmt, label_col):
    """First pass: row count, feature count and raw label set."""
    rows, d, labels = 0, 0, set()
    if fmt == "csv":
        for _, feats, label in iter_dense_csv(path, label_col):
            rows += 1
            d = len(feats)
            labels.add(label)
    else:
        for _, label, idx, _ in iter_sparse_text(path):
            rows += 1
            if idx:
                d = max(d, idx[-1] + 1)
            labels.add(label)
    return rows, d, np.array(sorted(labels), dtype=np.int64)


def _rows(path, fmt, label_col, d):
    if fmt == "csv":
        for _, feats, label in iter_dense_csv(path, label_col):
            yield feats, label
    else:
        for _, label, idx, vals in iter_sparse_text(path):
            row = [0.0] * d
            for i, v in zip(idx, vals):
                row[i] = v
            yield row, label


def convert_to_bigarray(src, dst, chunk_rows=None, fmt="csv", label_col=-1,
                        n_features=None):
    """Stream a text dataset into a bigarray without loading it whole.

    Features go to ``dst``; label ids go to ``<dst>.labels.gba`` (one column)
    and the raw class values to ``<dst>.classes.json``.  At most one chunk of
    rows is buffered at a time.
    """
    if fmt not in ("csv", "sparse"):
        raise FormatError(f"unknown dataset format {fmt!r}")
    try:
        rows, d, classes = _scan(src, fmt, label_col)
    except ParseError as exc:
        if "empty file" in str(exc):
            raise FormatError(f"{src}: no rows to convert (bigarrays need rows >= 1)") from exc
        raise
    if n_features is not None:
        d = max(d, n_features)
    if d < 1:
        raise FormatError(f"{src}: no features to convert")
    dst = str(dst)
    xb = bigarray.ba_create(dst, rows, d, chunk_rows)
    yb = bigarray.ba_create(dst + ".labels.gba", rows, 1, xb.chunk_rows)
    lookup = {int(c): i for i, c in enumerate(classes)}
    buf_x, buf_y, chunk = [], [], 0
    for feats, label in _rows(src, fmt, label_col, d):
        buf_x.append(feats)
        buf_y.append(lookup[label])
        if len(buf_x) == xb.chunk_rows:
            bigarray.ba_write_chunk(xb, chunk, np.array(buf_x))
            bigarray.ba_write_chunk(yb, chunk, np.array(buf_y, dtype=float)[:, None])
            buf_x, buf_y, chunk = [], [], chunk + 1
    if buf_x:
        bigarray.ba_write_chunk(xb, chunk, np.array(buf_x))
        bigarray.ba_write_chunk(yb, chunk, np.array(buf_y, dtype=float)[:, None])
    Path(dst + ".classes.json").write_text(json.dumps({"classes": classes.tolist()}))
    return xb
