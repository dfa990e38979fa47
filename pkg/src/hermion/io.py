"""On-disk formats: binary dumps, CSV tables and JSON-lines traces, all tagged HERMION1."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"HERMION1"
FORMAT_TAG = MAGIC.decode()

# payload kinds in the dump header
KIND_STFT, KIND_FIELD, KIND_GRID = 1, 2, 3


class FormatError(ValueError):
    """Malformed or foreign file."""


def write_dump(path, kind: int, meta, array: np.ndarray) -> None:
    """MAGIC, uint64 header length n, n float64 header words, complex128 payload (all little-endian).

    The header is [kind, ndim, shape..., meta...]; the payload is row-major.
    """
    a = np.ascontiguousarray(array, dtype="<c16")
    header = np.array([kind, a.ndim, *a.shape, *meta], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header.tobytes())
        fh.write(a.tobytes())


def read_dump(path) -> tuple[int, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_dump`; returns (kind, meta, array)."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: missing {FORMAT_TAG} header")
    try:
        (n,) = struct.unpack_from("<Q", data, 8)
        header = np.frombuffer(data, dtype="<f8", count=n, offset=16)
        kind, ndim = int(header[0]), int(header[1])
        shape = tuple(int(s) for s in header[2:2 + ndim])
        meta = header[2 + ndim:].copy()
        payload = np.frombuffer(data, dtype="<c16", offset=16 + 8 * n)
    except (struct.error, ValueError, IndexError) as exc:
        raise FormatError(f"{path}: truncated dump") from exc
    if payload.size != int(np.prod(shape)):
        raise FormatError(f"{path}: payload has {payload.size} values, header says {shape}")
    return kind, meta, payload.reshape(shape).copy()


def write_stft_dump(path, table) -> None:
    lat = table.lattice
    meta = [lat.dim, lat.x_step, lat.y_step, lat.x_extent, lat.y_extent, lat.window_width]
    write_dump(path, KIND_STFT, meta, table.values)


def read_stft_dump(path):
    from .tf_analysis import STFTTable, TFLattice
    kind, meta, arr = read_dump(path)
    if kind != KIND_STFT:
        raise FormatError(f"{path}: not an STFT table")
    lat = TFLattice(int(meta[0]), *map(float, meta[1:6]))
    return STFTTable(arr, lat)


def write_stft_csv(path, table) -> None:
    """Columns x1..xd, y1..yd, re, im; one row per lattice point in row-major order."""
    lat = table.lattice
    d = lat.dim
    axes = [lat.x_axis] * d + [lat.y_axis] * d
    grids = np.meshgrid(*axes, indexing="ij")
    cols = [g.ravel() for g in grids]
    vals = table.values.ravel()
    names = ([f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)]) if d > 1 else ["x", "y"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["re", "im"])
        for row in zip(*cols, vals.real, vals.imag):
            w.writerow([repr(float(v)) for v in row])


def write_field_dump(path, field) -> None:
    write_dump(path, KIND_FIELD, [field.dim], field.coeffs)


def read_field_dump(path):
    from .hermite_basis import HermiteField
    kind, _, arr = read_dump(path)
    if kind != KIND_FIELD:
        raise FormatError(f"{path}: not a Hermite field dump")
    return HermiteField(arr)


def read_grid_kernel(path, half_width: float | None = None):
    """GridKernel from a dump (kind 3, meta [half_width]) or a CSV with columns x, re[, im]."""
    from .nonlinearity import GridKernel
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        try:
            body = np.array([[float(v) for v in r] for r in rows[1:]])
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric kernel sample") from exc
        if body.ndim != 2 or body.shape[1] < 2:
            raise FormatError(f"{path}: expected columns x, re[, im]")
        x = body[:, 0]
        samples = body[:, 1] + (1j * body[:, 2] if body.shape[1] > 2 else 0)
        if len(x) < 2 or not np.allclose(np.diff(x), x[1] - x[0]):
            raise FormatError(f"{path}: kernel samples must be uniformly spaced")
        return GridKernel(samples, half_width if half_width is not None else -x[0])
    kind, meta, arr = read_dump(path)
    if kind != KIND_GRID:
        raise FormatError(f"{path}: not a grid kernel dump")
    return GridKernel(arr, float(meta[0]))


def write_grid_kernel(path, kernel) -> None:
    write_dump(path, KIND_GRID, [kernel.half_width], kernel.samples)


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def write_trace(path, trace, meta: dict) -> None:
    """Header line {format, kind: trace, ...meta}, then one record per snapshot."""
    with open(path, "w") as fh:
        fh.write(_json_line({"format": FORMAT_TAG, "kind": "trace", **meta}) + "\n")
        for rec in trace.records():
            fh.write(_json_line(rec) + "\n")


def read_trace(path) -> tuple[dict, list[dict]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty trace")
    try:
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:] if ln.strip()]
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON line") from exc
    if header.get("format") != FORMAT_TAG:
        raise FormatError(f"{path}: missing {FORMAT_TAG} header")
    return header, records


def write_plot_csv(path, records: list[dict]) -> None:
    """t followed by every numeric monitor, one row per snapshot."""
    if not records:
        raise ValueError("no records to write")
    keys = ["t"] + sorted(k for k in records[0] if k not in ("t", "flags"))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for rec in records:
            w.writerow([repr(float(rec[k])) for k in keys])
