"""CSV input/output.

Symmetric matrices are stored as n rows of n comma-separated decimals
(row-major); spectra and vectors as one value per line.  Writes are
atomic (temp file in the target directory, then rename) and use
shortest round-trip float formatting, so identical arrays always produce
byte-identical files.
"""

import os
import tempfile

import numpy as np

from .errors import ValidationError

__all__ = [
    "read_matrix",
    "write_matrix",
    "read_vector",
    "write_vector",
    "write_series",
]


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return repr(float(x))


def _parse_float(token, path, line_no):
    try:
        return float(token)
    except ValueError:
        raise ValidationError(
            f"{path}:{line_no}: cannot parse {token.strip()!r} as a number"
        ) from None


def read_matrix(path) -> np.ndarray:
    """Read a symmetric matrix from CSV, validating shape, finiteness, and
    symmetry (first offending entry pair is named on failure)."""
    rows = []
    with open(path, "r") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            tokens = line.strip().split(",")
            rows.append([_parse_float(t, path, line_no) for t in tokens])
            if len(rows[-1]) != len(rows[0]):
                raise ValidationError(
                    f"{path}:{line_no}: row has {len(rows[-1])} columns, "
                    f"expected {len(rows[0])}"
                )
    if not rows:
        raise ValidationError(f"{path}: empty matrix file")
    m = np.array(rows, dtype=float)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(
            f"{path}: matrix is {m.shape[0]}x{m.shape[1]}, expected square"
        )
    if not np.all(np.isfinite(m)):
        i, j = np.argwhere(~np.isfinite(m))[0]
        raise ValidationError(f"{path}: non-finite entry at row {i+1}, column {j+1}")
    scale = max(1.0, float(np.max(np.abs(m))))
    dev = np.abs(m - m.T)
    if np.max(dev) > 1e-10 * scale:
        i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
        raise ValidationError(
            f"{path}: matrix not symmetric at entries "
            f"({i+1},{j+1}) = {m[i, j]!r} vs ({j+1},{i+1}) = {m[j, i]!r}"
        )
    return m


def write_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype=float)
    lines = [",".join(_fmt(x) for x in row) for row in m]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_vector(path) -> np.ndarray:
    """Read a spectrum or vector stored one value per line."""
    values = []
    with open(path, "r") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            values.append(_parse_float(line.strip(), path, line_no))
    if not values:
        raise ValidationError(f"{path}: empty vector file")
    return np.array(values, dtype=float)


def write_vector(path, values) -> None:
    vec = np.asarray(values, dtype=float).ravel()
    _atomic_write(path, "\n".join(_fmt(x) for x in vec) + "\n")


def write_series(path, columns) -> None:
    """Write named columns as CSV with a header row.

    ``columns`` is a mapping or sequence of (name, values); all columns
    must have equal length.  Non-numeric cells are written verbatim.
    """
    if hasattr(columns, "items"):
        items = list(columns.items())
    else:
        items = list(columns)
    if not items:
        raise ValidationError("no columns to write")
    names = [name for name, _ in items]
    cols = [list(vals) for _, vals in items]
    length = len(cols[0])
    if any(len(c) != length for c in cols):
        raise ValidationError("columns have unequal lengths")
    lines = [",".join(names)]
    for i in range(length):
        cells = []
        for col in cols:
            cell = col[i]
            cells.append(_fmt(cell) if isinstance(cell, (int, float, np.floating, np.integer)) else str(cell))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")
