import struct

import numpy as np
import pytest

from detform.io import (MAGIC, meta_path, read_metadata, read_snapshot, read_trajectory,
                        write_metadata, write_nudging_diagnostics, write_snapshot, write_trajectory)
from detform.spectral import Grid, SpectralField, Trajectory, random_field


def test_snapshot_roundtrip(tmp_path):
    g = Grid(16)
    rng = np.random.default_rng(0)
    fields = [random_field(g, rng) for _ in range(3)]
    p = tmp_path / "a.snap"
    write_snapshot(p, fields)
    raw = p.read_bytes()
    assert struct.unpack("<3Q", raw[:24]) == (MAGIC, 16, 3)
    assert len(raw) == 24 + 3 * 16 * 16 * 16
    back = read_snapshot(p)
    for a, b in zip(fields, back):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_snapshot_layout_is_full_fft_order(tmp_path):
    g = Grid(8)
    f = SpectralField.from_modes(g, {(1, 2): 3 - 4j})
    p = tmp_path / "b.snap"
    write_snapshot(p, [f])
    data = np.frombuffer(p.read_bytes()[24:], dtype="<f8").reshape(8, 8, 2)
    assert tuple(data[1, 2]) == (3.0, -4.0)
    assert tuple(data[-1, -2]) == (3.0, 4.0)


def test_bad_magic(tmp_path):
    p = tmp_path / "c.snap"
    p.write_bytes(struct.pack("<3Q", 1, 8, 0))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(p)


def test_truncated(tmp_path):
    p = tmp_path / "d.snap"
    p.write_bytes(struct.pack("<3Q", MAGIC, 8, 2) + b"\0" * 100)
    with pytest.raises(ValueError, match="expected"):
        read_snapshot(p)


def test_trajectory_and_metadata(tmp_path):
    g = Grid(8)
    rng = np.random.default_rng(1)
    tr = Trajectory(g, 0.5, 0.01, np.array([random_field(g, rng).coeffs for _ in range(4)]),
                    {"cfl_max": np.float64(0.25), "recipe": "x"})
    p = tmp_path / "t.snap"
    write_trajectory(p, tr, {"wall_time": 1.5})
    assert meta_path(p).name == "t.snap.meta"
    back = read_trajectory(p)
    assert np.array_equal(back.coeffs, tr.coeffs)
    assert back.s_start == 0.5 and back.stride == 0.01
    meta = read_metadata(meta_path(p))
    assert meta["cfl_max"] == 0.25 and meta["recipe"] == "x" and meta["wall_time"] == 1.5


def test_metadata_roundtrip(tmp_path):
    write_metadata(tmp_path / "m", {"b": [1, 2], "a": None, "c": 0.1})
    assert (tmp_path / "m").read_text().splitlines()[0] == "a = null"
    assert read_metadata(tmp_path / "m") == {"a": None, "b": [1, 2], "c": 0.1}


def test_diagnostics_csv(tmp_path):
    write_nudging_diagnostics(tmp_path / "d.csv", [0.0, 0.1], [1.0, 1 / 3], [2.0, 3.0])
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "s,misfit_h1,w_l2"
    assert lines[2] == "0.10000000000000001,0.33333333333333331,3"
