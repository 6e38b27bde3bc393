"""Snapshot sets and the ``ROMS`` v1 binary container.

Layout (all little-endian)::

    b"ROMS" | version u64 | N_h u64 | M u64 | dt f64 | t0 f64
    | nnz_mass u64 | nnz_stiff u64
    | mass triplets (row u64, col u64, val f64) x nnz_mass
    | stiffness triplets x nnz_stiff
    | Y column-major f64 x (N_h * M)
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    BadMagicError,
    SnapshotFormatError,
    SymmetryError,
    TruncatedPayloadError,
    VersionMismatchError,
)

MAGIC = b"ROMS"
VERSION = 1
_HEADER = struct.Struct("<4sQQQddQQ")
HEADER_SIZE = _HEADER.size
_TRIPLET = np.dtype([("row", "<u8"), ("col", "<u8"), ("val", "<f8")])

SYMMETRY_RTOL = 1e-12


def _symmetry_defect(mat: sp.spmatrix) -> float:
    scale = abs(mat).max() if mat.nnz else 0.0
    diff = abs(mat - mat.T).max() if mat.nnz else 0.0
    return diff / scale if scale > 0 else 0.0


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Snapshot matrix plus the FE inner-product matrices it lives in.

    ``Y`` is ``(N_h, M)``: one column of FE coefficients per time instant
    ``t0 + j * dt``.
    """

    Y: np.ndarray
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    dt: float
    t0: float = 0.0
    labels: Optional[Sequence[str]] = field(default=None)

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.ndim != 2:
            raise SnapshotFormatError("snapshot matrix must be 2-D")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "mass", sp.csr_matrix(self.mass, dtype=np.float64))
        object.__setattr__(
            self, "stiffness", sp.csr_matrix(self.stiffness, dtype=np.float64)
        )
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))
        self.validate()

    @property
    def n_dof(self) -> int:
        return self.Y.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.Y.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_snapshots)

    @property
    def t_span(self) -> float:
        return self.dt * self.n_snapshots

    def validate(self):
        n_h, m = self.Y.shape
        if m < 2:
            raise SnapshotFormatError(f"need at least 2 snapshots, got {m}")
        for name in ("mass", "stiffness"):
            mat = getattr(self, name)
            if mat.shape != (n_h, n_h):
                raise SnapshotFormatError(
                    f"{name} matrix has shape {mat.shape}, expected ({n_h}, {n_h})"
                )
            defect = _symmetry_defect(mat)
            if defect > SYMMETRY_RTOL:
                raise SymmetryError(
                    f"{name} matrix is not symmetric (relative defect {defect:.3e})"
                )
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise SnapshotFormatError(f"dt must be positive, got {self.dt}")
        if not np.isfinite(self.t0):
            raise SnapshotFormatError("t0 must be finite")
        if self.labels is not None and len(self.labels) != m:
            raise SnapshotFormatError("labels must have one entry per snapshot")

    def equals(self, other: "SnapshotSet") -> bool:
        """Bitwise equality of ``Y``, both matrices, ``dt`` and ``t0``."""
        return (
            self.Y.shape == other.Y.shape
            and np.array_equal(self.Y, other.Y)
            and self.dt == other.dt
            and self.t0 == other.t0
            and (self.mass != other.mass).nnz == 0
            and (self.stiffness != other.stiffness).nnz == 0
        )


def _triplets(mat: sp.spmatrix) -> np.ndarray:
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    out = np.empty(coo.nnz, dtype=_TRIPLET)
    out["row"] = coo.row[order]
    out["col"] = coo.col[order]
    out["val"] = coo.data[order]
    return out


def expected_file_size(n_dof: int, n_snapshots: int, nnz_mass: int, nnz_stiff: int) -> int:
    return (
        HEADER_SIZE
        + _TRIPLET.itemsize * (nnz_mass + nnz_stiff)
        + 8 * n_dof * n_snapshots
    )


def save_snapshots(snapshots: SnapshotSet, path) -> None:
    """Write ``snapshots`` to ``path`` in the ``ROMS`` v1 format.

    Per-column labels are not part of the format and are dropped.
    """
    snapshots.validate()
    mass = _triplets(snapshots.mass)
    stiff = _triplets(snapshots.stiffness)
    n_h, m = snapshots.Y.shape
    header = _HEADER.pack(
        MAGIC, VERSION, n_h, m, snapshots.dt, snapshots.t0, mass.size, stiff.size
    )
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(mass.tobytes())
        fh.write(stiff.tobytes())
        fh.write(np.asarray(snapshots.Y, dtype="<f8").tobytes(order="F"))
    os.replace(tmp, path)


def _read_matrix(buf, offset, nnz, n_h, name):
    nbytes = nnz * _TRIPLET.itemsize
    if offset + nbytes > len(buf):
        raise TruncatedPayloadError(f"{name} triplets truncated")
    trip = np.frombuffer(buf, dtype=_TRIPLET, count=nnz, offset=offset)
    if nnz and (trip["row"].max() >= n_h or trip["col"].max() >= n_h):
        raise SnapshotFormatError(f"{name} triplet index out of range")
    mat = sp.csr_matrix(
        (trip["val"].astype(np.float64), (trip["row"].astype(np.int64), trip["col"].astype(np.int64))),
        shape=(n_h, n_h),
    )
    return mat, offset + nbytes


def load_snapshots(path) -> SnapshotSet:
    """Read and validate a ``ROMS`` v1 file.

    Raises
    ------
    BadMagicError, VersionMismatchError, TruncatedPayloadError, SymmetryError
        One distinct class per failure mode, all subclasses of
        :class:`SnapshotFormatError`.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic in {os.fspath(path)!r}")
    if len(buf) < HEADER_SIZE:
        raise TruncatedPayloadError("header truncated")
    _, version, n_h, m, dt, t0, nnz_m, nnz_s = _HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}")

    mass, offset = _read_matrix(buf, HEADER_SIZE, nnz_m, n_h, "mass")
    stiff, offset = _read_matrix(buf, offset, nnz_s, n_h, "stiffness")
    n_values = n_h * m
    if len(buf) - offset < 8 * n_values:
        raise TruncatedPayloadError("snapshot payload truncated")
    if len(buf) - offset > 8 * n_values:
        raise SnapshotFormatError("trailing bytes after snapshot payload")
    Y = np.frombuffer(buf, dtype="<f8", count=n_values, offset=offset)
    Y = Y.reshape((n_h, m), order="F").astype(np.float64)
    return SnapshotSet(Y=Y, mass=mass, stiffness=stiff, dt=dt, t0=t0)
