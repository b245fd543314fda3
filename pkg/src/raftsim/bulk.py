"""Finite-volume/Fourier discretization of the unit disk.

The radial direction uses cell-centered finite volumes (no node at the
coordinate singularity r = 0), the angular direction is spectral and matches
a circle SurfaceGrid node-for-node on the boundary.  The implicit diffusion
step applies the prescribed boundary flux to the outermost cell balance, so
the discrete bulk mass changes by exactly -dt * (integral of the flux).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .surface import SurfaceField, SurfaceGrid


class DiskGrid:
    """Polar grid on the unit disk: nr radial cells x ntheta angular nodes.

    ``boundary`` is the circle grid the disk couples to; ntheta must equal
    its node count.
    """

    def __init__(self, nr: int, ntheta: int):
        if nr < 4:
            raise ValueError(f"need at least 4 radial cells, got {nr}")
        self.nr = int(nr)
        self.ntheta = int(ntheta)
        self.boundary = SurfaceGrid.circle(ntheta)
        self.dr = 1.0 / self.nr
        self.dtheta = 2.0 * np.pi / self.ntheta
        self.radii = (np.arange(self.nr) + 0.5) * self.dr
        self.faces = np.arange(self.nr + 1) * self.dr
        self.total_measure = np.pi
        # cell measure r_i * dr * dtheta; summing gives pi exactly
        self.cell_weight = self.radii * self.dr * self.dtheta
        self.modes = np.arange(self.ntheta // 2 + 1, dtype=float)
        for arr in (self.radii, self.faces, self.cell_weight, self.modes):
            arr.setflags(write=False)

    def __eq__(self, other):
        return (isinstance(other, DiskGrid) and self.nr == other.nr
                and self.ntheta == other.ntheta)

    def __hash__(self):
        return hash((self.nr, self.ntheta))

    def __repr__(self):
        return f"DiskGrid(nr={self.nr}, ntheta={self.ntheta})"


@dataclass
class BulkField:
    """Cell-centered scalar field on a DiskGrid, shape (nr, ntheta)."""

    grid: DiskGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nr, self.grid.ntheta):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.grid.nr}, {self.grid.ntheta})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("bulk field contains non-finite values")

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full((grid.nr, grid.ntheta), float(value)))

    def copy(self):
        return BulkField(self.grid, self.values.copy())


def bulk_integral(f: BulkField) -> float:
    return float(np.sum(f.values * f.grid.cell_weight[:, None]))


def bulk_mean(f: BulkField) -> float:
    return bulk_integral(f) / f.grid.total_measure


def trace_boundary(f: BulkField) -> SurfaceField:
    """Boundary values at r = 1 by linear extrapolation from the two
    outermost cell rings (second-order accurate)."""
    vals = 1.5 * f.values[-1, :] - 0.5 * f.values[-2, :]
    return SurfaceField(f.grid.boundary, vals)


def bulk_grad_norm_sq(f: BulkField) -> float:
    """Integral of |grad f|^2 over the disk.

    Radial derivative by centered differences (second-order one-sided at the
    innermost/outermost rings), angular derivative spectrally.
    """
    g = f.grid
    u = f.values
    du_dr = np.empty_like(u)
    du_dr[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2.0 * g.dr)
    du_dr[0, :] = (-1.5 * u[0, :] + 2.0 * u[1, :] - 0.5 * u[2, :]) / g.dr
    du_dr[-1, :] = (1.5 * u[-1, :] - 2.0 * u[-2, :] + 0.5 * u[-3, :]) / g.dr
    uh = _fft.rfft(u, axis=1)
    du_dt = _fft.irfft(1j * g.modes[None, :] * uh, n=g.ntheta, axis=1)
    integrand = du_dr**2 + (du_dt / g.radii[:, None]) ** 2
    return float(np.sum(integrand * g.cell_weight[:, None]))


def _thomas(lower, diag, upper, rhs):
    """Tridiagonal solve, vectorized over the leading (mode) axis.

    lower/diag/upper have shape (m, n) with lower[:, 0] and upper[:, -1]
    unused; rhs (m, n) may be complex.
    """
    m, n = rhs.shape
    cp = np.empty((m, n - 1), dtype=diag.dtype)
    dp = np.empty((m, n), dtype=rhs.dtype)
    beta = diag[:, 0].copy()
    dp[:, 0] = rhs[:, 0] / beta
    for i in range(1, n):
        cp[:, i - 1] = upper[:, i - 1] / beta
        beta = diag[:, i] - lower[:, i] * cp[:, i - 1]
        dp[:, i] = (rhs[:, i] - lower[:, i] * dp[:, i - 1]) / beta
    x = np.empty_like(dp)
    x[:, -1] = dp[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = dp[:, i] - cp[:, i] * x[:, i + 1]
    return x


def diffusion_step(u: BulkField, D: float, dt: float, q: SurfaceField,
                   source: BulkField | None = None) -> BulkField:
    """One backward-Euler step of du/dt = D*laplacian(u) + source with the
    prescribed outward flux q through the boundary (D*du/dn = -q).

    The flux enters the outermost cell balance directly, so
    bulk_integral(result) = bulk_integral(u) - dt*surface_integral(q)
    (+ dt*bulk_integral(source)) holds to roundoff.  q and source are frozen
    data for the step (explicit coupling).
    """
    if dt <= 0.0 or D <= 0.0:
        raise ValueError("diffusion_step needs dt > 0 and D > 0")
    g = u.grid
    if q.grid != g.boundary:
        raise ValueError("flux field must live on the disk's boundary circle")

    uh = _fft.rfft(u.values, axis=1)  # shape (nr, nk)
    qh = _fft.rfft(q.values)
    nk = qh.shape[0]

    # Cell balance for mode k:
    #   (u'_i - u_i) r_i dr = dt [ a_{i+1/2}(u'_{i+1}-u'_i)
    #                              - a_{i-1/2}(u'_i-u'_{i-1}) ]
    #                          - dt D k^2 (dr/r_i) u'_i  + boundary/source terms
    # with a_{i+1/2} = D r_{i+1/2}/dr; the inner face of cell 0 carries no
    # flux (r=0) and the outer face of the last cell carries the prescribed -q.
    r = u.grid.radii
    alpha = D * g.faces / g.dr          # (nr+1,), alpha[0] = 0
    cell = r * g.dr                     # (nr,)

    a_in = alpha[:-1].copy()            # inner-face coefficient per cell
    a_out = alpha[1:].copy()            # outer-face coefficient per cell
    a_out[-1] = 0.0                     # outer flux prescribed, not solved

    ksq = u.grid.modes**2
    diag = (cell[None, :]
            + dt * (a_in + a_out)[None, :]
            + dt * D * ksq[:, None] * (g.dr / r)[None, :])
    lower = np.broadcast_to(-dt * a_in[None, :], (nk, g.nr)).copy()
    upper = np.broadcast_to(-dt * a_out[None, :], (nk, g.nr)).copy()
    # unused but must be finite
    lower[:, 0] = 0.0
    upper[:, -1] = 0.0

    rhs = (uh * cell[:, None]).T.copy()         # (nk, nr)
    rhs[:, -1] += dt * (-qh)
    if source is not None:
        sh = _fft.rfft(source.values, axis=1)
        rhs += dt * (sh * cell[:, None]).T

    sol = _thomas(lower, diag, upper, rhs)      # (nk, nr)
    new_vals = _fft.irfft(sol.T, n=g.ntheta, axis=1)
    return BulkField(g, new_vals)
