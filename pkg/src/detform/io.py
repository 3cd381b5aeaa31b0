"""Snapshot files, key-value metadata and diagnostic CSVs."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .spectral import Grid, SpectralField, Trajectory

MAGIC = 0x53504543
_HEADER = struct.Struct("<3Q")


def write_snapshot(path, fields: Iterable[SpectralField] | Trajectory) -> None:
    """Header ``(magic, n_modes, frames)`` as LE uint64, then full ``n x n`` complex frames.

    Frames are row-major over ``k1`` then ``k2`` in FFT index order, as
    interleaved little-endian float64 (real, imag).
    """
    frames = fields.frames if isinstance(fields, Trajectory) else list(fields)
    if not frames:
        raise ValueError("nothing to write")
    n = frames[0].grid.n_modes
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, len(frames)))
        for f in frames:
            if f.grid.n_modes != n:
                raise ValueError("all frames must share a grid")
            fh.write(np.ascontiguousarray(f.full(), dtype="<c16").tobytes())


def read_snapshot(path, domain_length: float = 2 * np.pi) -> list[SpectralField]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, n, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic:#x}")
        payload = fh.read()
    if len(payload) != count * n * n * 16:
        raise ValueError(f"{path}: expected {count} frames of {n}x{n}, got {len(payload)} bytes")
    data = np.frombuffer(payload, dtype="<c16")
    grid = Grid(int(n), domain_length)
    return [SpectralField.from_full(grid, a) for a in data.reshape(count, n, n)]


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".meta")


def write_metadata(path, meta: Mapping) -> None:
    """One ``key = value`` line per entry; values are JSON encoded."""
    with open(path, "w") as fh:
        for k in sorted(meta):
            fh.write(f"{k} = {json.dumps(_plain(meta[k]))}\n")


def read_metadata(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = json.loads(v.strip())
    return out


def _plain(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    return x


def write_trajectory(path, traj: Trajectory, extra: Mapping | None = None) -> None:
    write_snapshot(path, traj)
    meta = dict(traj.metadata)
    meta.update(extra or {})
    meta.update(s_start=traj.s_start, stride=traj.stride, domain_length=traj.grid.domain_length,
                n_modes=traj.grid.n_modes, frames=len(traj))
    write_metadata(meta_path(path), meta)


def read_trajectory(path) -> Trajectory:
    meta = read_metadata(meta_path(path))
    frames = read_snapshot(path, meta.get("domain_length", 2 * np.pi))
    grid = frames[0].grid
    return Trajectory(grid, float(meta["s_start"]), float(meta["stride"]),
                      np.array([f.coeffs for f in frames]), meta)


def write_nudging_diagnostics(path, s, misfit, w_l2) -> None:
    """Columns ``s, misfit_h1, w_l2`` (``||v - J w||_{H^1}``, ``|w|_{L^2}``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "misfit_h1", "w_l2"])
        for a, b, c in zip(s, misfit, w_l2):
            w.writerow([f"{a:.17g}", f"{b:.17g}", f"{c:.17g}"])


def write_columns(path, header: list[str], *cols) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{x:.17g}" if isinstance(x, (float, np.floating)) else x for x in row])
