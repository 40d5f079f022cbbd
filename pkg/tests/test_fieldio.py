"""Snapshot format and trajectory CSV round trips."""

import numpy as np
import pytest

from jumpns.fieldio import (
    FLAG_SOLENOIDAL,
    read_field,
    read_trajectory_csv,
    write_field,
    write_trajectory_csv,
)
from jumpns.fields import random_field


class TestSnapshotFormat:
    def test_file_round_trip_bit_exact(self, grid16, rng, tmp_path):
        field = random_field(grid16, rng)
        first = tmp_path / "a.jfld"
        second = tmp_path / "b.jfld"
        write_field(first, field)
        loaded, flags = read_field(first)
        write_field(second, loaded, solenoidal=bool(flags & FLAG_SOLENOIDAL))
        assert first.read_bytes() == second.read_bytes()

    def test_payload_is_single_precision(self, grid16, rng, tmp_path):
        field = random_field(grid16, rng)
        path = tmp_path / "f.jfld"
        write_field(path, field)
        loaded, flags = read_field(path)
        expected = field.coeffs.astype(np.complex64).astype(np.complex128)
        assert np.array_equal(loaded.coeffs, expected)
        assert flags & FLAG_SOLENOIDAL

    def test_flag_probe(self, grid16, rng, tmp_path):
        field = random_field(grid16, rng, solenoidal=False)
        path = tmp_path / "g.jfld"
        write_field(path, field)
        _, flags = read_field(path)
        assert not flags & FLAG_SOLENOIDAL

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.jfld"
        path.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(ValueError, match="magic"):
            read_field(path)

    def test_truncation_detected(self, grid16, rng, tmp_path):
        path = tmp_path / "t.jfld"
        write_field(path, random_field(grid16, rng))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_field(path)


class TestTrajectoryCsv:
    def test_round_trip(self, tmp_path):
        n = 5
        columns = {
            "t": np.linspace(0, 1, n),
            "u_l2": np.arange(n, dtype=float) * 0.1,
            "u_l4": np.arange(n, dtype=float) * 0.2,
            "grad_y_l2": np.arange(n, dtype=float) * 0.3,
            "y_l2": np.arange(n, dtype=float) * 0.4,
            "z_l4": np.arange(n, dtype=float) * 0.5,
            "residual": np.full(n, 1e-3),
            "segment": np.array([0, 0, 1, 1, 1]),
        }
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, columns)
        back = read_trajectory_csv(path)
        for name, values in columns.items():
            assert np.array_equal(back[name], values), name

    def test_missing_required_column(self, tmp_path):
        with pytest.raises(ValueError, match="missing required"):
            write_trajectory_csv(tmp_path / "x.csv", {"t": np.zeros(3)})

    def test_byte_determinism(self, tmp_path):
        columns = {
            name: np.array([0.1234567890123456789, 2.0 / 3.0])
            for name in ("t", "u_l2", "u_l4", "grad_y_l2", "y_l2", "z_l4", "residual")
        }
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trajectory_csv(a, columns)
        write_trajectory_csv(b, columns)
        assert a.read_bytes() == b.read_bytes()
        back = read_trajectory_csv(a)
        assert back["t"][1] == 2.0 / 3.0  # shortest-repr round trip is exact
