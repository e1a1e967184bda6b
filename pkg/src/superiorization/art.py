"""Relaxed Kaczmarz row projections (ART) and the residual proximity function."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class ArtConfig:
    """Relaxation parameter of the sweep; rows are always visited in ascending order."""

    relaxation: float = 1.0

    def __post_init__(self):
        if not 0 < self.relaxation < 2:
            raise ValueError(f"relaxation must lie in (0, 2), got {self.relaxation!r}")


def project_row(u, indices, values, y_m: float, relaxation: float = 1.0) -> np.ndarray:
    """Relaxed projection of ``u`` onto ``{x : <a, x> = y_m}``.

    The row ``a`` is given sparsely by ``indices`` and ``values``; only those
    entries of the result differ from ``u``.
    """
    values = np.asarray(values, dtype=np.float64)
    norm2 = float(values @ values)
    if norm2 == 0.0:
        raise ValueError("cannot project onto a zero row")
    out = np.array(u, dtype=np.float64)
    residual = y_m - float(values @ out[indices])
    out[indices] += (relaxation * residual / norm2) * values
    return out


@numba.njit(cache=True)
def _sweep(indptr, indices, data, row_norms, y, relaxation, u):
    for m in range(indptr.shape[0] - 1):
        norm2 = row_norms[m]
        if norm2 == 0.0:
            continue
        start, stop = indptr[m], indptr[m + 1]
        dot = 0.0
        for p in range(start, stop):
            dot += data[p] * u[indices[p]]
        scale = relaxation * (y[m] - dot) / norm2
        for p in range(start, stop):
            u[indices[p]] += scale * data[p]


def _check_dims(A, y=None, u=None):
    M, L = A.shape
    if y is not None and np.shape(y) != (M,):
        raise ValueError(f"measurement vector has shape {np.shape(y)}, expected ({M},)")
    if u is not None and np.shape(u) != (L,):
        raise ValueError(f"image vector has shape {np.shape(u)}, expected ({L},)")


def art_sweep(A, y, cfg: ArtConfig, u) -> np.ndarray:
    """One full ART sweep ``T_M ... T_1 u`` over all rows of ``A``; zero rows are skipped.

    ``A`` is a :class:`~superiorization.tomography.SystemMatrix`.
    """
    _check_dims(A, y, u)
    out = np.array(u, dtype=np.float64)
    csr = A.csr
    _sweep(csr.indptr, csr.indices, csr.data, A.row_norms,
           np.asarray(y, dtype=np.float64), float(cfg.relaxation), out)
    return out


def proximity(A, y, u) -> float:
    """Euclidean residual ``||A u - y||``."""
    _check_dims(A, y, u)
    return float(np.linalg.norm(A.csr @ np.asarray(u, dtype=np.float64) - y))


class ArtOperator:
    """ART sweep bound to a fixed system; callable as the engine's feasibility operator."""

    def __init__(self, A, y, cfg: ArtConfig = ArtConfig()):
        _check_dims(A, y)
        self.A = A
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.cfg = cfg

    def __call__(self, u):
        return art_sweep(self.A, self.y, self.cfg, u)

    def proximity(self, u):
        return proximity(self.A, self.y, u)
