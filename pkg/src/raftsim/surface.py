"""Spectral calculus on closed flat surfaces: the unit circle and flat tori.

Fields live on uniform nodes; the Laplace-Beltrami operator, its inverse on
mean-free fields, integrals and Sobolev norms are all evaluated through real
FFTs, so trigonometric eigenfunctions are reproduced to machine precision and
every surface operator is exact below the Nyquist limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

CIRCLE = "circle"
TORUS = "torus"


class MeanFreeError(ValueError):
    """Operation requires a mean-free field but received one with mass."""


class SurfaceGrid:
    """Uniform spectral grid on the unit circle or a flat periodic torus.

    Instances are immutable; all cached arrays are read-only.  Node layout:
    circle -> shape (n,) at angles 2*pi*j/n; torus -> shape (nx, ny) at
    (j*lx/nx, k*ly/ny).
    """

    def __init__(self, kind, shape, lengths):
        if kind not in (CIRCLE, TORUS):
            raise ValueError(f"unknown surface kind {kind!r}")
        for n in shape:
            if n < 8 or n % 2 != 0:
                raise ValueError(f"node counts must be even and >= 8, got {shape}")
        for L in lengths:
            if not L > 0.0:
                raise ValueError(f"side lengths must be positive, got {lengths}")
        self.kind = kind
        self.shape = tuple(shape)
        self.lengths = tuple(float(L) for L in lengths)
        self.node_count = int(np.prod(self.shape))
        self.total_measure = float(np.prod(self.lengths))
        self.node_weight = self.total_measure / self.node_count

        if kind == CIRCLE:
            n = self.shape[0]
            k = np.arange(n // 2 + 1, dtype=float)  # integer wavenumbers
            ksq = k**2
            dbl = np.ones(n // 2 + 1)
            dbl[1:] = 2.0
            if n % 2 == 0:
                dbl[-1] = 1.0
            self._axes = None
        else:
            nx, ny = self.shape
            lx, ly = self.lengths
            kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=lx / nx)
            ky = 2.0 * np.pi * np.fft.rfftfreq(ny, d=ly / ny)
            ksq = kx[:, None] ** 2 + ky[None, :] ** 2
            dbl = np.ones((nx, ny // 2 + 1))
            dbl[:, 1:] = 2.0
            if ny % 2 == 0:
                dbl[:, -1] = 1.0
            self._axes = (-2, -1)
        self._ksq = ksq
        # rfft halves the last axis; `dbl` restores the conjugate modes in
        # Parseval sums.
        self._parseval = dbl * (self.total_measure / self.node_count**2)
        inv = np.zeros_like(ksq)
        nonzero = ksq > 0
        inv[nonzero] = 1.0 / ksq[nonzero]
        self._inv_ksq = inv
        self._dealias = self._dealias_mask()
        for arr in (self._ksq, self._parseval, self._inv_ksq, self._dealias):
            arr.setflags(write=False)
        self._lap_matrix = None

    @classmethod
    def circle(cls, n: int) -> "SurfaceGrid":
        """Unit circle with n uniformly spaced nodes (measure 2*pi)."""
        return cls(CIRCLE, (n,), (2.0 * np.pi,))

    @classmethod
    def torus(cls, nx: int, ny: int, lx: float = 2.0 * np.pi,
              ly: float = 2.0 * np.pi) -> "SurfaceGrid":
        """Flat torus of side lengths (lx, ly) with nx*ny nodes."""
        return cls(TORUS, (nx, ny), (lx, ly))

    def _dealias_mask(self):
        if self.kind == CIRCLE:
            n = self.shape[0]
            k = np.arange(n // 2 + 1)
            return (k <= n // 3).astype(float)
        nx, ny = self.shape
        kx = np.abs(np.fft.fftfreq(nx, d=1.0 / nx))
        ky = np.abs(np.fft.rfftfreq(ny, d=1.0 / ny))
        return ((kx[:, None] <= nx // 3) & (ky[None, :] <= ny // 3)).astype(float)

    def nodes(self):
        """Node coordinates: angles for the circle, (x, y) meshes for the torus."""
        if self.kind == CIRCLE:
            n = self.shape[0]
            return 2.0 * np.pi * np.arange(n) / n
        nx, ny = self.shape
        x = self.lengths[0] * np.arange(nx) / nx
        y = self.lengths[1] * np.arange(ny) / ny
        return np.meshgrid(x, y, indexing="ij")

    # -- transforms --------------------------------------------------------

    def fft(self, values):
        if self.kind == CIRCLE:
            return _fft.rfft(values)
        return _fft.rfft2(values)

    def ifft(self, coeffs):
        if self.kind == CIRCLE:
            return _fft.irfft(coeffs, n=self.shape[0])
        return _fft.irfft2(coeffs, s=self.shape)

    @property
    def lap_symbol(self):
        """Multiplier of the Laplace-Beltrami operator in rfft layout (-|k|^2)."""
        return -self._ksq

    def laplacian_matrix(self):
        """Dense physical-space Laplacian (circle grids only, cached).

        Small 1-D problems solve implicit systems directly with it instead of
        iterating; the matrix is the exact spectral operator.
        """
        if self.kind != CIRCLE:
            raise ValueError("dense Laplacian is only built for circle grids")
        if self._lap_matrix is None:
            n = self.shape[0]
            mat = np.empty((n, n))
            basis = np.eye(n)
            for j in range(n):
                mat[:, j] = self.laplacian(basis[j])
            mat.setflags(write=False)
            self._lap_matrix = mat
        return self._lap_matrix

    @property
    def dealias(self):
        """2/3-rule mask in rfft layout."""
        return self._dealias

    # -- calculus on raw arrays ---------------------------------------------

    def laplacian(self, values):
        return self.ifft(-self._ksq * self.fft(values))

    def inverse_laplacian(self, values):
        """Mean-free g with laplacian(g) = values; rejects fields with mass."""
        norm = self.l2_norm(values)
        if abs(self.mean(values)) > 1e-10 * norm:
            raise MeanFreeError("inverse Laplacian needs a mean-free field")
        coeffs = self.fft(values)
        coeffs = coeffs * (-self._inv_ksq)
        if self.kind == CIRCLE:
            coeffs[0] = 0.0
        else:
            coeffs[0, 0] = 0.0
        return self.ifft(coeffs)

    def integral(self, values):
        return float(np.sum(values)) * self.node_weight

    def mean(self, values):
        return self.integral(values) / self.total_measure

    def l2_norm(self, values):
        return float(np.sqrt(np.sum(np.asarray(values) ** 2) * self.node_weight))

    def h1_seminorm_sq(self, values):
        coeffs = self.fft(values)
        return float(np.sum(self._parseval * self._ksq * np.abs(coeffs) ** 2))

    def hminus1_norm(self, values):
        """Dual-space norm ||grad^-1 f||_L2 of a mean-free field."""
        norm = self.l2_norm(values)
        if abs(self.mean(values)) > 1e-10 * norm:
            raise MeanFreeError("H^-1 norm needs a mean-free field")
        coeffs = self.fft(values)
        return float(
            np.sqrt(np.sum(self._parseval * self._inv_ksq * np.abs(coeffs) ** 2))
        )

    def spectral_l2_sq(self, values):
        """Parseval form of the squared L2 norm (equals quadrature exactly)."""
        coeffs = self.fft(values)
        return float(np.sum(self._parseval * np.abs(coeffs) ** 2))

    def __eq__(self, other):
        return (
            isinstance(other, SurfaceGrid)
            and self.kind == other.kind
            and self.shape == other.shape
            and self.lengths == other.lengths
        )

    def __hash__(self):
        return hash((self.kind, self.shape, self.lengths))

    def __repr__(self):
        if self.kind == CIRCLE:
            return f"SurfaceGrid.circle({self.shape[0]})"
        return (f"SurfaceGrid.torus({self.shape[0]}, {self.shape[1]}, "
                f"lx={self.lengths[0]:g}, ly={self.lengths[1]:g})")


@dataclass
class SurfaceField:
    """Nodal scalar field on a SurfaceGrid."""

    grid: SurfaceGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("surface field contains non-finite values")

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self):
        return SurfaceField(self.grid, self.values.copy())


# -- field-level operations (thin wrappers over grid methods) ---------------

def laplace_beltrami(f: SurfaceField) -> SurfaceField:
    return SurfaceField(f.grid, f.grid.laplacian(f.values))


def inv_laplace_beltrami(f: SurfaceField) -> SurfaceField:
    return SurfaceField(f.grid, f.grid.inverse_laplacian(f.values))


def surface_integral(f: SurfaceField) -> float:
    return f.grid.integral(f.values)


def mean(f: SurfaceField) -> float:
    return f.grid.mean(f.values)


def l2_norm(f: SurfaceField) -> float:
    return f.grid.l2_norm(f.values)


def h1_seminorm_sq(f: SurfaceField) -> float:
    return f.grid.h1_seminorm_sq(f.values)


def hminus1_norm(f: SurfaceField) -> float:
    return f.grid.hminus1_norm(f.values)
