"""Pixel-basis images, forward differences and total variation.

An image vector ``u`` of a ``J x J`` grid is stored as a flat ``float64``
array of length ``L = J**2``.  Pixel ``(i, j)`` (1-based, ``i`` along the
horizontal x axis, ``j`` along the vertical y axis) lives at flat index
``(j - 1) * J + (i - 1)``, i.e. ``u.reshape(J, J)[j - 1, i - 1]``.  Row 0 of
the reshaped array is the top of the displayed image.  Every module in the
package uses this ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ImageGrid:
    """Square grid of ``J x J`` pixels with side length ``pixel_size``."""

    J: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size!r}")

    @property
    def L(self) -> int:
        return self.J * self.J

    @property
    def side(self) -> float:
        """Physical side length of the whole grid."""
        return self.J * self.pixel_size

    def flat_index(self, i: int, j: int) -> int:
        """Flat position of the 1-based pixel ``(i, j)``."""
        self._check(i, j)
        return (j - 1) * self.J + (i - 1)

    def pixel_of(self, index: int) -> tuple[int, int]:
        """Inverse of :meth:`flat_index`."""
        if not 0 <= index < self.L:
            raise IndexError(f"flat index {index} outside [0, {self.L})")
        j, i = divmod(index, self.J)
        return i + 1, j + 1

    def _check(self, i, j):
        if not (1 <= i <= self.J and 1 <= j <= self.J):
            raise IndexError(f"pixel ({i}, {j}) outside 1..{self.J}")


def side_length(u) -> int:
    """Infer ``J`` from an image vector of length ``J**2`` (or a ``J x J`` array)."""
    u = np.asarray(u)
    if u.ndim == 2 and u.shape[0] == u.shape[1]:
        return u.shape[0]
    J = math.isqrt(u.size)
    if u.ndim != 1 or J * J != u.size:
        raise ValueError(f"length {u.size} is not a perfect square")
    return J


def as_image(u) -> np.ndarray:
    """View an image vector as its ``J x J`` array (row index = j, column = i).

    2-D input is returned as a float array of the same shape, so rectangular
    test images work with every routine that only needs differences.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 2:
        return u
    J = side_length(u)
    return u.reshape(J, J)


def _check_pixel(U, i, j):
    rows, cols = U.shape
    if not (1 <= i <= cols and 1 <= j <= rows):
        raise IndexError(f"pixel ({i}, {j}) outside the {cols} x {rows} grid")


def dx(u, i: int, j: int) -> float:
    """Horizontal forward difference ``u[i+1, j] - u[i, j]`` (0 on the last column)."""
    U = as_image(u)
    _check_pixel(U, i, j)
    if i < U.shape[1]:
        return float(U[j - 1, i] - U[j - 1, i - 1])
    return 0.0


def dy(u, i: int, j: int) -> float:
    """Vertical forward difference ``u[i, j+1] - u[i, j]`` (0 on the last row)."""
    U = as_image(u)
    _check_pixel(U, i, j)
    if j < U.shape[0]:
        return float(U[j, i - 1] - U[j - 1, i - 1])
    return 0.0


def forward_differences(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of all horizontal and vertical differences of a ``J x J`` image."""
    Dx = np.zeros_like(U)
    Dy = np.zeros_like(U)
    np.subtract(U[:, 1:], U[:, :-1], out=Dx[:, :-1])
    np.subtract(U[1:, :], U[:-1, :], out=Dy[:-1, :])
    return Dx, Dy


def total_variation(u) -> float:
    """Discrete isotropic total variation of an image vector."""
    Dx, Dy = forward_differences(as_image(u))
    return float(np.sqrt(Dx * Dx + Dy * Dy).sum())


def window_to_display(u, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Map pixel values linearly onto 0..255, saturating outside ``[lo, hi]``.

    Returns a ``J x J`` ``uint8`` raster.
    """
    if not lo < hi:
        raise ValueError(f"display window needs lo < hi, got [{lo}, {hi}]")
    U = as_image(u)
    scaled = (np.clip(U, lo, hi) - lo) * (255.0 / (hi - lo))
    # round half up
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_pgm(path, raster: np.ndarray) -> None:
    """Write an 8-bit raster as a binary (P5) PGM file with maxval 255."""
    raster = np.asarray(raster)
    if raster.ndim != 2 or raster.dtype != np.uint8:
        raise ValueError("PGM export expects a 2-D uint8 raster")
    h, w = raster.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(raster).tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM written by :func:`write_pgm`."""
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    magic, w, h, maxval = fields
    if magic != b"P5" or int(maxval) != 255:
        raise ValueError("not an 8-bit P5 PGM file")
    w, h = int(w), int(h)
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos + 1)
    return pixels.reshape(h, w)


def export_image(path, u, lo: float = 0.0, hi: float = 1.0) -> None:
    write_pgm(path, window_to_display(u, lo, hi))
