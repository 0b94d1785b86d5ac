"""Plain-text file formats.

Matrix CSV: comma-separated numbers, one matrix row per line, rows are
features and columns are samples (a d x n data matrix). Files that hold one
sample per line are read with ``transpose=True``. Blank lines and lines
starting with ``#`` are skipped.

Tensor text: the first line holds d, followed by d^3 whitespace-separated
numbers in (a, b, c) order with a varying slowest. Line breaks are free.

Numbers are written with ``%.17g`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
import errno
import math
import os
from typing import Iterator

import numpy as np

from .errors import FormatError
from .streaming import SampleStream

FLOAT_FMT = "%.17g"


def _open(path):
    if not os.path.exists(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), str(path))
    return open(path, newline="")


def _parse_row(row: list[str], path, lineno: int) -> list[float]:
    out = []
    for k, cell in enumerate(row):
        try:
            v = float(cell)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: field {k + 1} is not a number: {cell.strip()!r}") from None
        if not math.isfinite(v):
            raise FormatError(f"{path}:{lineno}: field {k + 1} is not finite: {cell.strip()!r}")
        out.append(v)
    return out


def iter_csv_rows(path) -> Iterator[tuple[int, list[float]]]:
    """Yield (line number, values) for each data line, checking that all
    lines have the same width."""
    width = None
    with _open(path) as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()) or row[0].lstrip().startswith("#"):
                continue
            vals = _parse_row(row, path, lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise FormatError(f"{path}:{lineno}: expected {width} fields, got {len(vals)}")
            yield lineno, vals


def read_matrix(path, transpose: bool = False) -> np.ndarray:
    rows = [vals for _, vals in iter_csv_rows(path)]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    M = np.array(rows, dtype=float)
    return M.T.copy() if transpose else M


def count_rows(path) -> int:
    return sum(1 for _ in iter_csv_rows(path))


def csv_sample_stream(path, transpose: bool = False) -> SampleStream:
    """Stream the samples of a matrix CSV.

    With ``transpose=True`` (one sample per line) the file is read lazily,
    one line per sample. Otherwise samples are columns, which forces the
    whole file into memory before the first sample can be produced.
    """
    if not transpose:
        A = read_matrix(path)
        return SampleStream((A[:, k] for k in range(A.shape[1])), A.shape[0])
    rows = iter_csv_rows(path)
    try:
        _, first = next(rows)
    except StopIteration:
        raise FormatError(f"{path}: no data rows") from None

    def gen():
        yield first
        for _, vals in rows:
            yield vals

    return SampleStream(gen(), len(first))


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_tensor(path) -> np.ndarray:
    values: list[float] = []
    d = None
    with _open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if d is None:
                if len(tokens) != 1:
                    raise FormatError(f"{path}:{lineno}: first line must hold only the dimension d")
                try:
                    d = int(tokens[0])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: dimension is not an integer: {tokens[0]!r}") from None
                if d < 1:
                    raise FormatError(f"{path}:{lineno}: dimension must be positive, got {d}")
                continue
            for tok in tokens:
                if len(values) == d ** 3:
                    raise FormatError(f"{path}:{lineno}: more than d^3 = {d ** 3} values")
                try:
                    v = float(tok)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: not a number: {tok!r}") from None
                if not math.isfinite(v):
                    raise FormatError(f"{path}:{lineno}: value is not finite: {tok!r}")
                values.append(v)
    if d is None:
        raise FormatError(f"{path}:1: empty tensor file")
    if len(values) != d ** 3:
        raise FormatError(f"{path}: expected d^3 = {d ** 3} values, found {len(values)}")
    return np.array(values, dtype=float).reshape(d, d, d)


def write_tensor(path, T) -> None:
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{d}\n")
        for a in range(d):
            for b in range(d):
                fh.write(" ".join(FLOAT_FMT % v for v in T[a, b]) + "\n")
