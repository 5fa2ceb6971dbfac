"""Masked 3D grids and the forward-difference operator behind Total Variation.

Voxels are linearised x-fastest: the flat index of ``(x, y, z)`` is
``x + nx * (y + ny * z)``. In-mask voxels are then numbered ``0..p-1`` in
that same order, and every vector of length ``p`` (a row of ``X``, a weight
map ``beta``) follows this numbering.

The operator ``A`` has shape ``(3p, p)``. Rows ``3i, 3i+1, 3i+2`` hold the
forward differences of voxel ``i`` along x, y and z. A row is zero when the
forward neighbour lies outside the grid or outside the mask.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

logger = logging.getLogger(__name__)

__all__ = [
    "MaskedVolume",
    "GradientOperator",
    "PowerIterationError",
    "build_operator",
    "power_iteration",
]


@dataclass(frozen=True)
class MaskedVolume:
    """A 3D grid with a boolean mask selecting the modelled voxels.

    Parameters
    ----------
    dims : tuple of int
        Grid size ``(nx, ny, nz)``.
    mask : ndarray of bool, shape (nx, ny, nz)
        True for in-mask voxels.
    """

    dims: tuple[int, int, int]
    mask: np.ndarray
    index_map: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != dims:
            if mask.size != int(np.prod(dims)):
                raise ValueError(f"mask of size {mask.size} does not fit dims {dims}")
            mask = mask.reshape(dims, order="F")
        if not mask.any():
            raise ValueError("empty mask")
        mask = mask.copy()
        mask.setflags(write=False)
        # grid flat index (x-fastest) -> voxel index, -1 outside the mask
        index_map = np.full(mask.size, -1, dtype=np.int64)
        flat = mask.ravel(order="F")
        index_map[flat] = np.arange(int(flat.sum()))
        index_map.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "index_map", index_map)

    @classmethod
    def full(cls, dims) -> "MaskedVolume":
        return cls(tuple(dims), np.ones(tuple(dims), dtype=bool))

    @property
    def p(self) -> int:
        return int(self.mask.sum())

    def flat_mask(self) -> np.ndarray:
        """Mask as a 1D array in x-fastest order."""
        return self.mask.ravel(order="F")

    def coords(self) -> np.ndarray:
        """Grid coordinates of the in-mask voxels, shape (p, 3), in index order."""
        flat = np.flatnonzero(self.flat_mask())
        return np.stack(np.unravel_index(flat, self.dims, order="F"), axis=1)

    def index_of(self, x: int, y: int, z: int) -> int:
        """Voxel index of grid position ``(x, y, z)``, or -1 if not in the mask."""
        nx, ny, nz = self.dims
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            return -1
        return int(self.index_map[x + nx * (y + ny * z)])

    def to_volume(self, beta: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Scatter a length-``p`` vector back onto the 3D grid."""
        beta = np.asarray(beta)
        if beta.shape != (self.p,):
            raise ValueError(f"expected a vector of length {self.p}, got {beta.shape}")
        out = np.full(self.mask.size, fill, dtype=np.result_type(beta, float))
        out[self.flat_mask()] = beta
        return out.reshape(self.dims, order="F")

    def from_volume(self, volume: np.ndarray) -> np.ndarray:
        """Gather the in-mask voxels of a 3D array (or a stack of them)."""
        volume = np.asarray(volume)
        if volume.shape[-3:] != self.dims:
            raise ValueError(f"volume shape {volume.shape} does not end with {self.dims}")
        lead = volume.shape[:-3]
        # reversing the grid axes turns x-fastest order into C order
        axes = tuple(range(len(lead))) + tuple(len(lead) + k for k in (2, 1, 0))
        flat = volume.transpose(axes).reshape(lead + (-1,))
        return flat[..., self.flat_mask()]


class PowerIterationError(RuntimeError):
    """Power iteration did not reach the requested tolerance.

    The last iterate and its Rayleigh-quotient estimate are kept on the
    exception as ``vector`` and ``estimate``.
    """

    def __init__(self, message, vector, estimate):
        super().__init__(message)
        self.vector = vector
        self.estimate = estimate


def power_iteration(M, tol=1e-6, max_iter=10000, seed=42):
    """Estimate the largest singular value of ``M`` by power iteration on ``M^T M``.

    ``M`` may be a dense array, a scipy sparse matrix or anything else
    supporting ``M @ v`` and ``M.T @ u``. Iteration stops once the eigen-residual
    ``||M^T M v - lam v||`` drops below ``tol * lam``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = M.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = M.T @ (M @ v)
        lam = float(v @ w)
        if lam <= 0.0 or not np.any(w):
            return 0.0
        resid = np.linalg.norm(w - lam * v)
        if resid <= tol * lam:
            logger.debug("power iteration converged after %d iterations", it)
            return float(np.sqrt(lam))
        v = w / np.linalg.norm(w)
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} iterations",
        vector=v,
        estimate=float(np.sqrt(max(lam, 0.0))),
    )


@dataclass(frozen=True)
class GradientOperator:
    """Stacked per-voxel forward-difference blocks ``A_i`` as one sparse matrix.

    Immutable after construction; ``apply`` and ``apply_transpose`` are pure.
    """

    matrix: sparse.csr_matrix
    spectral_norm: float
    volume: MaskedVolume | None = None
    _transpose: sparse.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_transpose", self.matrix.T.tocsr())

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_groups(self) -> int:
        return self.matrix.shape[0] // 3

    def apply(self, beta):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise ValueError(f"beta must have length {self.p}, got shape {beta.shape}")
        return self.matrix @ beta

    def apply_transpose(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (3 * self.n_groups,):
            raise ValueError(
                f"alpha must have length {3 * self.n_groups}, got shape {alpha.shape}"
            )
        return self._transpose @ alpha

    def block(self, i: int) -> sparse.csr_matrix:
        """The 3 x p block of voxel ``i``."""
        return self.matrix[3 * i:3 * i + 3]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _difference_matrix(vol: MaskedVolume) -> sparse.csr_matrix:
    p = vol.p
    coords = vol.coords()
    nx, ny, nz = vol.dims
    idx = np.arange(p)
    rows, cols, vals = [], [], []
    for axis in range(3):
        nb = coords.copy()
        nb[:, axis] += 1
        inside = nb[:, axis] < vol.dims[axis]
        j = np.full(p, -1, dtype=np.int64)
        flat = nb[inside, 0] + nx * (nb[inside, 1] + ny * nb[inside, 2])
        j[inside] = vol.index_map[flat]
        has = j >= 0
        r = 3 * idx[has] + axis
        rows += [r, r]
        cols += [j[has], idx[has]]
        vals += [np.ones(has.sum()), -np.ones(has.sum())]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(3 * p, p))
    A.sort_indices()
    return A


def build_operator(vol: MaskedVolume, tol=1e-6, max_iter=10000, seed=42) -> GradientOperator:
    """Build the TV difference operator for ``vol`` and estimate ``||A||_2``."""
    if vol.p < 1:
        raise ValueError("empty mask")
    A = _difference_matrix(vol)
    sigma = power_iteration(A, tol=tol, max_iter=max_iter, seed=seed)
    return GradientOperator(matrix=A, spectral_norm=sigma, volume=vol)


def estimate_spectral_norm(op: GradientOperator, tol=1e-6, max_iter=10000, seed=42) -> float:
    return power_iteration(op.matrix, tol=tol, max_iter=max_iter, seed=seed)
