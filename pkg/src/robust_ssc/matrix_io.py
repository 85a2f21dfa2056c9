"""Matrix files: headerless CSV and the ``SSCM`` binary format.

CSV rows are ambient coordinates and columns are samples. The binary layout
is the 4-byte magic ``SSCM``, little-endian u32 row count n, u32 column
count N, then n*N little-endian float64 values in column-major order.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

MAGIC = b"SSCM"
_HEADER = struct.Struct("<4sII")


def save_matrix(path, M, fmt=None):
    """Write ``M`` as CSV (17 significant digits) or SSCM binary.

    The format follows ``fmt`` or, when omitted, the file suffix
    (``.csv`` for CSV, anything else binary).
    """
    path = Path(path)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            for row in M:
                fh.write(",".join(format(v, ".17g") for v in row))
                fh.write("\n")
    elif fmt == "bin":
        n, N = M.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, n, N))
            fh.write(np.asfortranarray(M).astype("<f8").tobytes(order="F"))
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, fmt=None) -> np.ndarray:
    path = Path(path)
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "bin" if fh.read(4) == MAGIC else "csv"
    if fmt == "bin":
        return _load_binary(path)
    if fmt == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def _load_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header")
    magic, n, N = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * n * N
    if len(raw) != expected:
        raise ParseError(f"{path}: expected {expected} bytes for {n}x{N}, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=n * N)
    M = data.reshape((n, N), order="F").astype(float)
    bad = np.argwhere(~np.isfinite(M))
    if bad.size:
        i, j = bad[0]
        raise ParseError(f"{path}: non-finite entry at row {i}, column {j}")
    return M


def _load_csv(path):
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} fields, found {len(rec)}",
                                 line=lineno)
            vals = []
            for col, field in enumerate(rec, start=1):
                try:
                    v = float(field)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}:{col}: not a number: {field!r}",
                                     line=lineno, column=col) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{lineno}:{col}: non-finite value {field!r}",
                                     line=lineno, column=col)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data")
    return np.array(rows, dtype=float)


def save_labels(path, labels):
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels))


def load_labels(path) -> np.ndarray:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: not an integer label: {line!r}",
                             line=lineno) from None
    return np.array(out, dtype=int)
