"""Labeled embedding matrices and their on-disk formats.

The canonical format is the little-endian binary "OLE-EMB v1" layout:

    magic   4 bytes  ASCII "OLEE"
    version u16      1
    flags   u16      bit 0 = rows are unit-normalized
    n       u32      row count
    d       u32      column count
    payload n*d      float32, row-major
    labels  u32      label count (0 or n), then per label u32 byte
                     length + UTF-8 bytes

CSV ("label,e0,...,e{d-1}" header, RFC-4180 quoting) is a convenience
interchange format; it does not carry the normalized flag.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    LabelCountError,
    NonFiniteValueError,
    TruncatedFileError,
    ValidationError,
    ZeroRowError,
)
from .validation import check_same_dim, check_unit_rows

MAGIC = b"OLEE"
VERSION = 1
FLAG_NORMALIZED = 0x1

FORMATS = ("binary", "csv")


@dataclass(frozen=True, eq=False)
class LabeledEmbeddings:
    """An n-by-d float matrix with optional per-row labels.

    Instances are immutable after construction (the matrix is marked
    read-only) and safe to share between threads.
    """

    matrix: np.ndarray
    labels: tuple[str, ...] = field(default=())
    normalized: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, order="C", copy=True)
        if m.ndim != 2:
            raise ValidationError(f"embedding matrix must be 2-D, got shape {m.shape}")
        if m.size and not np.all(np.isfinite(m)):
            row = int(np.flatnonzero(~np.isfinite(m).all(axis=1))[0])
            raise NonFiniteValueError("embedding matrix contains non-finite values", row=row)
        labels = tuple(self.labels)
        if labels and len(labels) != m.shape[0]:
            raise LabelCountError(
                f"got {len(labels)} labels for {m.shape[0]} rows (must be 0 or n)"
            )
        if self.normalized:
            check_unit_rows(m, "embedding matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledEmbeddings):
            return NotImplemented
        return (
            self.normalized == other.normalized
            and self.labels == other.labels
            and self.matrix.shape == other.matrix.shape
            and bool(np.array_equal(self.matrix, other.matrix))
        )


def normalize_rows(data: LabeledEmbeddings) -> LabeledEmbeddings:
    """Divide every row by its Euclidean norm. Zero rows are an error."""
    norms = np.linalg.norm(data.matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroRowError("cannot normalize a row of zeros", row=int(zero[0]))
    return LabeledEmbeddings(data.matrix / norms[:, None], data.labels, normalized=True)


def similarity_matrix(a: LabeledEmbeddings, b: LabeledEmbeddings) -> np.ndarray:
    """Inner products between all rows of ``a`` and ``b`` (cosine, since unit rows)."""
    check_same_dim(a.d, b.d, "similarity operands")
    if not (a.normalized and b.normalized):
        raise ValidationError("similarity_matrix requires unit-normalized inputs")
    return a.matrix @ b.matrix.T


# --------------------------------------------------------------------------
# binary format


def _save_binary(data: LabeledEmbeddings, path: Path) -> None:
    flags = FLAG_NORMALIZED if data.normalized else 0
    parts = [struct.pack("<4sHHII", MAGIC, VERSION, flags, data.n, data.d)]
    parts.append(data.matrix.astype("<f4").tobytes())
    parts.append(struct.pack("<I", len(data.labels)))
    for label in data.labels:
        raw = label.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    path.write_bytes(b"".join(parts))


def _load_binary(path: Path) -> LabeledEmbeddings:
    buf = path.read_bytes()

    def take(count: int, offset: int) -> bytes:
        if offset + count > len(buf):
            raise TruncatedFileError(
                f"file truncated: needed {count} bytes", offset=len(buf)
            )
        return buf[offset : offset + count]

    if take(4, 0) != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", offset=0)
    (version,) = struct.unpack("<H", take(2, 4))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    (flags,) = struct.unpack("<H", take(2, 6))
    n, d = struct.unpack("<II", take(8, 8))
    off = 16

    payload = take(4 * n * d, off)
    off += 4 * n * d
    matrix = np.frombuffer(payload, dtype="<f4").reshape(n, d).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(matrix).all(axis=1)) if matrix.size else []
    if len(bad):
        raise NonFiniteValueError("payload contains non-finite values", row=int(bad[0]))

    (label_count,) = struct.unpack("<I", take(4, off))
    if label_count not in (0, n):
        raise LabelCountError(
            f"label count {label_count} must be 0 or {n}", offset=off
        )
    off += 4
    labels = []
    for _ in range(label_count):
        (length,) = struct.unpack("<I", take(4, off))
        off += 4
        raw = take(length, off)
        try:
            labels.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"label is not valid UTF-8: {exc}", offset=off) from exc
        off += length
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after label block", offset=off)

    return LabeledEmbeddings(matrix, tuple(labels), normalized=bool(flags & FLAG_NORMALIZED))


# --------------------------------------------------------------------------
# csv format


def _save_csv(data: LabeledEmbeddings, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["label"] + [f"e{i}" for i in range(data.d)])
        labels = data.labels or [""] * data.n
        for label, row in zip(labels, data.matrix):
            writer.writerow([label] + [repr(float(v)) for v in row])


def _load_csv(path: Path) -> LabeledEmbeddings:
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("csv file is empty (missing header)", offset=0) from None
        if not header or header[0] != "label":
            raise FormatError(f"csv header must start with 'label', got {header[:1]!r}")
        d = len(header) - 1
        labels: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise FormatError(
                    f"csv line {lineno} has {len(row)} fields, expected {d + 1}"
                )
            labels.append(row[0])
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise FormatError(f"csv line {lineno} has a non-numeric field: {exc}") from exc
            if not all(np.isfinite(values)):
                raise NonFiniteValueError("csv contains non-finite values", row=lineno - 2)
            rows.append(values)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return LabeledEmbeddings(matrix, tuple(labels), normalized=False)


# --------------------------------------------------------------------------
# public entry points


def save_embeddings(data: LabeledEmbeddings, path, format: str = "binary") -> None:
    path = Path(path)
    if format == "binary":
        _save_binary(data, path)
    elif format == "csv":
        _save_csv(data, path)
    else:
        raise ValidationError(f"unknown format {format!r}, expected one of {FORMATS}")


def load_embeddings(path, format: str = "binary") -> LabeledEmbeddings:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"embedding file does not exist: {path}")
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise ValidationError(f"unknown format {format!r}, expected one of {FORMATS}")
