"""File formats: binary field snapshots and trajectory CSVs.

Snapshot format ("JFLD"): an 16-byte header -- magic ``b"JFLD"``, version,
grid size n and a flags word, each little-endian uint32 -- followed by the
coefficient array in row-major order as little-endian complex64 pairs, the
two velocity components interleaved per wavevector.  Files round-trip
bit-exactly; note the payload is single precision, so writing a float64
in-memory field is lossy (~1e-7 relative) by design of the format.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import Grid, SpectralField
from .spectral import divergence_linf

MAGIC = b"JFLD"
VERSION = 1
FLAG_SOLENOIDAL = 1

#: Trajectory CSV column contract.  The first seven columns are fixed;
#: consumers may ignore anything after them.
TRAJECTORY_COLUMNS = (
    "t",
    "u_l2",
    "u_l4",
    "grad_y_l2",
    "y_l2",
    "z_l4",
    "residual",
    # extras for offline re-auditing
    "y_l4",
    "zhat_l2",
    "zhat_l4",
    "segment",
)


def write_field(path, field: SpectralField, solenoidal: bool | None = None) -> None:
    """Write a snapshot; the solenoidal flag is probed when not supplied."""
    if solenoidal is None:
        scale = float(np.max(np.abs(field.coeffs)))
        solenoidal = scale == 0.0 or divergence_linf(field) <= 1e-10 * scale
    flags = FLAG_SOLENOIDAL if solenoidal else 0
    header = MAGIC + struct.pack("<III", VERSION, field.grid.n, flags)
    # (n, n, 2) complex64, row-major: components interleaved per wavevector.
    payload = np.ascontiguousarray(
        field.coeffs.transpose(1, 2, 0).astype("<c8")
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_field(path) -> tuple[SpectralField, int]:
    """Read a snapshot; returns the field (float64 in memory) and flags."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a field snapshot (bad magic)")
    version, n, flags = struct.unpack("<III", raw[4:16])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    expected = 16 + n * n * 2 * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated snapshot ({len(raw)} != {expected})")
    data = np.frombuffer(raw, dtype="<c8", offset=16).reshape(n, n, 2)
    coeffs = data.transpose(2, 0, 1).astype(np.complex128)
    return SpectralField(Grid(n), coeffs), int(flags)


def format_float(x: float) -> str:
    """Shortest round-trip decimal form; identical inputs give identical text."""
    return repr(float(x))


def write_trajectory_csv(path, columns: dict[str, np.ndarray]) -> None:
    """Write the per-node norm series in the fixed column order."""
    names = [c for c in TRAJECTORY_COLUMNS if c in columns]
    missing = [c for c in TRAJECTORY_COLUMNS[:7] if c not in columns]
    if missing:
        raise ValueError(f"trajectory is missing required columns {missing}")
    length = len(columns[names[0]])
    lines = [",".join(names)]
    for j in range(length):
        row = []
        for c in names:
            value = columns[c][j]
            row.append(str(int(value)) if c == "segment" else format_float(value))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    text = Path(path).read_text().strip().split("\n")
    names = text[0].split(",")
    rows = [line.split(",") for line in text[1:]]
    out = {}
    for i, name in enumerate(names):
        col = np.array([float(r[i]) for r in rows])
        out[name] = col.astype(int) if name == "segment" else col
    return out
