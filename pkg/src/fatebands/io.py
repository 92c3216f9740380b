"""File formats: wide CSV datasets, TOML configs, checksums.

Dataset layout, one row per individual::

    id,z,<covariate columns...>,t=<time>,t=<time>,...

The intercept column is implied and not stored.  Floats are written with 17
significant digits so a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path

import numpy as np

from ._errors import DatasetError, FateBandsError
from .data import FunctionalSample, TimeGrid

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

T_PREFIX = "t="


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_sample_csv(sample: FunctionalSample, path, ids=None) -> None:
    names = sample.covariate_names or tuple(f"x{k}" for k in range(1, sample.K + 1))
    ids = range(1, sample.n + 1) if ids is None else ids
    header = ["id", "z", *names, *(T_PREFIX + fmt_float(t) for t in sample.grid.points)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row_id in enumerate(ids):
            w.writerow([
                row_id,
                int(sample.z[i]),
                *(fmt_float(v) for v in sample.X[i, 1:]),
                *(fmt_float(v) for v in sample.Y[i]),
            ])


def _parse_float(text, lineno, column):
    try:
        v = float(text)
    except ValueError:
        raise DatasetError(f"line {lineno}: column {column!r}: cannot parse {text!r}") from None
    if not math.isfinite(v):
        raise DatasetError(f"line {lineno}: column {column!r}: non-finite value {text!r}")
    return v


def read_sample_csv(path) -> tuple[FunctionalSample, list[str]]:
    """Parse a dataset file; returns the sample and the ``id`` column."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file; a header row is required")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0] != "id" or header[1] != "z":
        raise DatasetError("line 1: header must start with 'id,z'")
    t_cols = [j for j, h in enumerate(header) if h.startswith(T_PREFIX)]
    if not t_cols:
        raise DatasetError("line 1: no outcome columns named 't=<value>'")
    first_t = t_cols[0]
    if t_cols != list(range(first_t, len(header))):
        raise DatasetError("line 1: outcome columns must come after all covariates")
    cov_names = header[2:first_t]
    times = []
    for j in t_cols:
        times.append(_parse_float(header[j][len(T_PREFIX):], 1, header[j]))
    times = np.array(times)
    if np.any(np.diff(times) <= 0):
        raise DatasetError("line 1: outcome times must be strictly increasing")
    try:
        grid = TimeGrid(times)
    except FateBandsError as exc:
        raise DatasetError(f"line 1: {exc}") from None

    ids, zs, X, Y = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DatasetError(
                f"line {lineno}: expected {len(header)} fields, found {len(row)}"
            )
        ids.append(row[0].strip())
        z = row[1].strip()
        if z not in ("0", "1"):
            raise DatasetError(f"line {lineno}: treatment 'z' must be 0 or 1, got {z!r}")
        zs.append(int(z))
        X.append([1.0] + [_parse_float(row[j], lineno, header[j]) for j in range(2, first_t)])
        Y.append([_parse_float(row[j], lineno, header[j]) for j in t_cols])
    if not ids:
        raise DatasetError(f"{path}: no data rows")
    try:
        sample = FunctionalSample(grid=grid, Y=np.array(Y), z=np.array(zs),
                                  X=np.array(X), covariate_names=tuple(cov_names))
    except FateBandsError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    return sample, ids


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])
