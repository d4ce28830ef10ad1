"""File formats: sparse `label index:value` datasets, matrix containers, metrics tables."""

from __future__ import annotations

import dataclasses
import math
import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"OLRRMATX"
MATRIX_VERSION = 1
_MATRIX_HEADER = struct.Struct("<8sIQQ")
TEXT_HEADER = "# online_lrr matrix v1"

METRICS_COLUMNS = ("t", "ev", "g", "accuracy")
MISSING = "NA"


class FormatError(ValueError):
    """Malformed input file; the message carries the path and line number."""


def read_sparse_dataset(path, n_features: int | None = None):
    """Parse a `label index:value ...` file into a dense p x n matrix.

    Indices are 1-based and strictly increasing within a line.  Labels are
    remapped to 0..k-1 in order of first appearance.

    Returns
    -------
    Z : ndarray, shape (p, n)
    labels : ndarray of int, shape (n,)
    label_values : list
        Original label of each remapped class.
    """
    rows, labels, mapping = [], [], {}
    p = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric label {tokens[0]!r}") from None
            entries = []
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise FormatError(f"{path}:{lineno}: expected index:value, got {tok!r}")
                try:
                    j = int(idx)
                    x = float(val)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: non-numeric entry {tok!r}") from None
                if j <= last:
                    raise FormatError(f"{path}:{lineno}: index {j} is not strictly increasing / 1-based")
                if not math.isfinite(x):
                    raise FormatError(f"{path}:{lineno}: non-finite value {tok!r}")
                last = j
                entries.append((j - 1, x))
            p = max(p, last)
            labels.append(mapping.setdefault(label, len(mapping)))
            rows.append(entries)
    if not rows:
        raise FormatError(f"{path}: no samples")
    if n_features is not None:
        if n_features < p:
            raise FormatError(f"{path}: index {p} exceeds declared feature count {n_features}")
        p = n_features
    Z = np.zeros((p, len(rows)))
    for i, entries in enumerate(rows):
        for j, x in entries:
            Z[j, i] = x
    values = sorted(mapping, key=mapping.get)
    return Z, np.array(labels, dtype=np.int64), values


def write_matrix(path, M, binary: bool | None = None) -> None:
    """Write a 2-D float matrix.  Binary unless the path ends in .txt.

    Binary layout: header (8-byte magic, uint32 version, uint64 rows, uint64
    cols, little endian) followed by float64 values in column-major order.
    Text layout: a header line, a `rows cols` line, then one row per line
    with every value written by repr (exact round trip).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    path = Path(path)
    if binary is None:
        binary = path.suffix != ".txt"
    if binary:
        with open(path, "wb") as fh:
            fh.write(_MATRIX_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, *M.shape))
            fh.write(M.astype("<f8").tobytes(order="F"))
    else:
        with open(path, "w") as fh:
            fh.write(f"{TEXT_HEADER}\n{M.shape[0]} {M.shape[1]}\n")
            for row in M:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(MATRIX_MAGIC):
        if len(raw) < _MATRIX_HEADER.size:
            raise FormatError(f"{path}: truncated header")
        _, version, rows, cols = _MATRIX_HEADER.unpack_from(raw, 0)
        if version != MATRIX_VERSION:
            raise FormatError(f"{path}: unsupported matrix version {version}")
        expected = _MATRIX_HEADER.size + 8 * rows * cols
        if len(raw) != expected:
            raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
        flat = np.frombuffer(raw, dtype="<f8", offset=_MATRIX_HEADER.size)
        return np.array(flat.reshape((rows, cols), order="F"), dtype=float)
    lines = raw.decode().splitlines()
    if not lines or lines[0].strip() != TEXT_HEADER:
        raise FormatError(f"{path}: not a matrix file")
    try:
        rows, cols = (int(x) for x in lines[1].split())
        data = [[float(x) for x in line.split()] for line in lines[2:2 + rows]]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: bad text matrix ({exc})") from None
    if len(data) != rows or any(len(r) != cols for r in data):
        raise FormatError(f"{path}: declared {rows}x{cols} does not match contents")
    return np.array(data, dtype=float).reshape(rows, cols)


def write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(x)}\n" for x in labels))


def read_labels(path) -> np.ndarray:
    text = Path(path).read_text().split()
    try:
        return np.array([int(x) for x in text], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _cell(x) -> str:
    if x is None:
        return MISSING
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_metrics(path, rows) -> None:
    """Tab-separated table with columns t, ev, g, accuracy; unknown cells are NA."""
    with open(path, "w") as fh:
        fh.write("\t".join(METRICS_COLUMNS) + "\n")
        for row in rows:
            fh.write("\t".join(_cell(row.get(c)) for c in METRICS_COLUMNS) + "\n")


def read_metrics(path) -> list:
    lines = Path(path).read_text().splitlines()
    if not lines or tuple(lines[0].split("\t")) != METRICS_COLUMNS:
        raise FormatError(f"{path}: unexpected metrics header")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(METRICS_COLUMNS):
            raise FormatError(f"{path}:{lineno}: expected {len(METRICS_COLUMNS)} columns")
        row = {}
        for c, v in zip(METRICS_COLUMNS, cells):
            row[c] = None if v == MISSING else (int(v) if c == "t" else float(v))
        out.append(row)
    return out


def _coerce(value: str, target):
    if target is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if target is list:
        return [int(x) for x in value.replace(" ", "").split(",") if x]
    return target(value)


def read_config(path, cls):
    """Read `key = value` lines (``#`` comments) into dataclass ``cls``."""
    types = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or key not in types:
            raise FormatError(f"{path}:{lineno}: unknown or malformed setting {line!r}")
        kw[key] = _coerce_field(types[key], value, path, lineno)
    return cls(**kw)


def _coerce_field(f, value, path, lineno):
    hint = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    target = str
    for name, typ in (("bool", bool), ("int", int), ("float", float), ("list", list)):
        if hint.startswith(name):
            target = typ
            break
    if value.lower() in ("none", "") and "None" in hint:
        return None
    try:
        return _coerce(value, target)
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: {exc}") from None


def write_config(path, cfg) -> None:
    with open(path, "w") as fh:
        for f in dataclasses.fields(cfg):
            v = getattr(cfg, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            fh.write(f"{f.name} = {v}\n")
