"""Simulated fan-beam CT: phantom, ray-traced system matrix, projections and noise.

Geometry conventions
--------------------
The ``J x J`` grid is centred at the origin with physical side
``J * pixel_size``.  Column ``i`` covers ``x`` in
``[-h + (i-1) s, -h + i s]`` and row ``j`` covers ``y`` in
``[h - j s, h - (j-1) s]`` (``h`` half side, ``s`` pixel size), so row 0 of
the image array is the top (largest ``y``).

Rows of the system matrix are ordered view by view, and within a view by
detector (ray) index.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .image import ImageGrid

# Modified Shepp-Logan ellipses: intensity, semi-axes (a, b), centre (x0, y0), rotation in degrees.
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def shepp_logan(J: int) -> np.ndarray:
    """Modified Shepp-Logan phantom on a ``J x J`` grid, values in ``[0, 1]``.

    Sample points are spread evenly over ``[-1, 1]`` including both ends,
    the usual raster for this phantom; each pixel takes the summed intensity
    of the ellipses containing its sample point.
    """
    if J < 16:
        raise ValueError(f"phantom needs J >= 16, got {J}")
    axis = (np.arange(J) - (J - 1) / 2) / ((J - 1) / 2)
    X, Y = np.meshgrid(axis, axis[::-1])
    P = np.zeros((J, J))
    for intensity, a, b, x0, y0, angle in SHEPP_LOGAN_ELLIPSES:
        phi = math.radians(angle)
        c, s = math.cos(phi), math.sin(phi)
        xr = (X - x0) * c + (Y - y0) * s
        yr = -(X - x0) * s + (Y - y0) * c
        P[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += intensity
    # 1 - 0.8 - 0.2 leaves a -5e-17 rounding residue
    np.clip(P, 0.0, 1.0, out=P)
    return P.reshape(-1)


@dataclass(frozen=True)
class FanBeamGeometry:
    """Rotating point source with an equiangular fan of rays.

    ``source_radius`` is the distance from the grid centre to the source in
    units of the grid side.  ``fan_half_angle=None`` aims the two outermost
    rays at the grid corners nearest the source, i.e. a half angle of
    ``atan(1 / (2 * source_radius - 1))``.
    """

    source_radius: float = 2.0
    detector_count: int = 512
    view_angles: tuple = field(default_factory=lambda: tuple(np.deg2rad(np.arange(0, 360, 15)).tolist()))
    fan_half_angle: Optional[float] = None

    def __post_init__(self):
        if not self.source_radius > math.sqrt(2) / 2:
            raise ValueError("source must lie outside the grid's circumscribed circle "
                             f"(source_radius > {math.sqrt(2) / 2:.4f}), got {self.source_radius!r}")
        if int(self.detector_count) != self.detector_count or self.detector_count < 1:
            raise ValueError(f"detector_count must be a positive integer, got {self.detector_count!r}")
        if len(self.view_angles) < 1:
            raise ValueError("need at least one view angle")
        if self.fan_half_angle is not None and not 0 < self.fan_half_angle < math.pi / 2:
            raise ValueError(f"fan_half_angle must lie in (0, pi/2), got {self.fan_half_angle!r}")
        object.__setattr__(self, "view_angles", tuple(float(a) for a in self.view_angles))

    @classmethod
    def evenly_spaced(cls, J: int, views: int, **kwargs) -> "FanBeamGeometry":
        """``views`` source positions spread over a full turn, ``2 J`` rays each by default."""
        kwargs.setdefault("detector_count", 2 * J)
        angles = tuple((2 * math.pi * np.arange(views) / views).tolist())
        return cls(view_angles=angles, **kwargs)

    @property
    def M(self) -> int:
        return self.detector_count * len(self.view_angles)

    def half_angle(self) -> float:
        if self.fan_half_angle is not None:
            return self.fan_half_angle
        return math.atan(1.0 / (2.0 * self.source_radius - 1.0))

    def rays(self, grid: ImageGrid):
        """Yield ``(source, unit direction)`` for every measurement, in row order."""
        R = self.source_radius * grid.side
        if self.detector_count == 1:
            offsets = np.zeros(1)
        else:
            offsets = np.linspace(-self.half_angle(), self.half_angle(), self.detector_count)
        for beta in self.view_angles:
            src = np.array([R * math.cos(beta), R * math.sin(beta)])
            central = beta + math.pi
            for gamma in offsets:
                theta = central + gamma
                yield src, np.array([math.cos(theta), math.sin(theta)])


def _clip_to_box(src, direction, half):
    """Parameter interval of the line inside ``[-half, half]^2`` (slab test)."""
    t0, t1 = -math.inf, math.inf
    for p, v in zip(src, direction):
        if v == 0.0:
            if not -half <= p <= half:
                return None
            continue
        a = (-half - p) / v
        b = (half - p) / v
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
    if t1 <= t0:
        return None
    return t0, t1


SLIVER = 1e-10


def trace_ray(grid: ImageGrid, src, direction):
    """Exact intersection lengths of a line with the pixels of ``grid``.

    Walks the line's parameter through every crossing of a vertical or
    horizontal grid line inside the grid (Siddon's method).  Returns
    ``(indices, lengths)`` with flat pixel indices in traversal order; both
    are empty when the ray misses the grid.  Segments shorter than
    ``SLIVER`` pixels are dropped.
    """
    src = np.asarray(src, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if abs(math.hypot(*direction) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    s, J = grid.pixel_size, grid.J
    half = grid.side / 2
    empty = (np.zeros(0, dtype=np.int64), np.zeros(0))
    span = _clip_to_box(src, direction, half)
    if span is None:
        return empty
    t0, t1 = span
    planes = -half + s * np.arange(J + 1)
    crossings = [np.array([t0, t1])]
    for p, v in zip(src, direction):
        if v != 0.0:
            t = (planes - p) / v
            crossings.append(t[(t > t0) & (t < t1)])
    t = np.unique(np.concatenate(crossings))
    lengths = np.diff(t)
    # rounding residue of rays through grid corners; such slivers would turn into huge ART updates
    keep = lengths > SLIVER * s
    lengths = lengths[keep]
    mid = 0.5 * (t[:-1] + t[1:])[keep]
    x = src[0] + mid * direction[0]
    y = src[1] + mid * direction[1]
    col = np.clip(np.floor((x + half) / s).astype(np.int64), 0, J - 1)
    row = np.clip(np.floor((half - y) / s).astype(np.int64), 0, J - 1)
    if lengths.size == 0:
        return empty
    return row * J + col, lengths


@dataclass
class SystemMatrix:
    """Sparse ``M x L`` matrix of ray-pixel intersection lengths (CSR, ascending row order)."""

    csr: sp.csr_matrix
    row_norms: np.ndarray = None

    def __post_init__(self):
        self.csr = sp.csr_matrix(self.csr, dtype=np.float64)
        self.csr.sort_indices()
        if self.row_norms is None:
            self.row_norms = np.asarray(self.csr.multiply(self.csr).sum(axis=1), dtype=np.float64).ravel()

    @property
    def shape(self):
        return self.csr.shape

    @property
    def M(self) -> int:
        return self.csr.shape[0]

    @property
    def L(self) -> int:
        return self.csr.shape[1]

    def row(self, m: int):
        start, stop = self.csr.indptr[m], self.csr.indptr[m + 1]
        return self.csr.indices[start:stop], self.csr.data[start:stop]

    def __matmul__(self, u):
        return forward_project(self, u)


def build_system_matrix(geometry: FanBeamGeometry, grid: ImageGrid) -> SystemMatrix:
    """One row per (view, ray) pair, produced by :func:`trace_ray`."""
    indptr = [0]
    cols, vals = [], []
    for src, direction in geometry.rays(grid):
        idx, lengths = trace_ray(grid, src, direction)
        cols.append(idx)
        vals.append(lengths)
        indptr.append(indptr[-1] + idx.size)
    csr = sp.csr_matrix(
        (np.concatenate(vals), np.concatenate(cols), np.asarray(indptr, dtype=np.int64)),
        shape=(geometry.M, grid.L),
    )
    return SystemMatrix(csr)


def forward_project(A: SystemMatrix, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (A.L,):
        raise ValueError(f"image vector has shape {u.shape}, expected ({A.L},)")
    return A.csr @ u


@dataclass
class Sinogram:
    y: np.ndarray
    geometry: Optional[FanBeamGeometry] = None
    noise_level: float = 0.0
    seed: Optional[int] = None


def add_noise(y, level: float, seed: int) -> np.ndarray:
    """Add seeded Gaussian noise rescaled to norm exactly ``level * ||y||``."""
    if level < 0:
        raise ValueError(f"noise level must be nonnegative, got {level!r}")
    y = np.asarray(y, dtype=np.float64)
    if level == 0:
        return y.copy()
    e = np.random.default_rng(seed).standard_normal(y.shape)
    e *= level * np.linalg.norm(y) / np.linalg.norm(e)
    return y + e


# Binary cache container, all little-endian:
#   8-byte magic, then uint64 M, L, nnz, has_y,
#   int64 indptr[M+1], int64 indices[nnz], float64 data[nnz], float64 y[M] if has_y.
MAGIC = b"SUPCSR01"
_HEADER = struct.Struct("<8s4Q")


def save_system(path, A: SystemMatrix, y=None) -> None:
    csr = A.csr
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, A.M, A.L, csr.nnz, int(y is not None)))
        fh.write(np.asarray(csr.indptr, dtype="<i8").tobytes())
        fh.write(np.asarray(csr.indices, dtype="<i8").tobytes())
        fh.write(np.asarray(csr.data, dtype="<f8").tobytes())
        if y is not None:
            fh.write(np.asarray(y, dtype="<f8").tobytes())


def load_system(path):
    """Read a container written by :func:`save_system`; returns ``(A, y or None)``."""
    raw = Path(path).read_bytes()
    magic, M, L, nnz, has_y = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a system-matrix container")
    pos = _HEADER.size

    def take(dtype, count):
        nonlocal pos
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
        pos += arr.nbytes
        return arr.astype(dtype[1:])

    indptr = take("<i8", M + 1)
    indices = take("<i8", nnz)
    data = take("<f8", nnz)
    y = take("<f8", M) if has_y else None
    return SystemMatrix(sp.csr_matrix((data, indices, indptr), shape=(M, L))), y


def simulate(J: int, views: int, geometry: Optional[FanBeamGeometry] = None):
    """Phantom, system matrix and noise-free projections for a standard setup."""
    grid = ImageGrid(J)
    geometry = geometry or FanBeamGeometry.evenly_spaced(J, views)
    phantom = shepp_logan(J)
    A = build_system_matrix(geometry, grid)
    return phantom, A, forward_project(A, phantom)
