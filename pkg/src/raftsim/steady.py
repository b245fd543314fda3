"""Stationary states of the surface phase-separation problem.

The limiting order parameter solves the nonlocal elliptic problem

    -lap(phi) + W'(phi) = <W'(phi)>,    <phi> = m,

and the remaining equilibrium constants (u, mu, eta and the total of v)
follow from linear relations: the conserved bulk+surface mass, the constancy
of the chemical potentials, and 2 v - phi being constant on a connected
closed surface.  When the exchange coefficient has a positive limit the
additional constraint u = eta pins the total of v uniquely; otherwise the
caller must supply it (e.g. from a dynamic run).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .potentials import DoubleWell, LOGARITHMIC
from .stepper import (
    NewtonDivergenceError,
    StepperConfig,
    _pin_zero_modes,
    _solve_surface,
)
from .surface import SurfaceField, SurfaceGrid

_MARGIN = 1e-13


class NonConvergenceError(RuntimeError):
    """Stationary solve missed the residual target; carries the best value."""

    def __init__(self, message, best_residual):
        super().__init__(message)
        self.best_residual = best_residual


def steady_residual(phi: SurfaceField, potential: DoubleWell) -> float:
    """L2 norm of -lap(phi) + W'(phi) - <W'(phi)>."""
    g = phi.grid
    wp = np.asarray(potential.deriv(phi.values))
    r = -g.laplacian(phi.values) + wp - g.mean(wp)
    return g.l2_norm(r)


def _newton_attempt(grid, potential, m, phi, tol, max_iters, gmres_tol=1e-12):
    """Damped Newton on the mean-m slice; returns (phi, residual, converged)."""
    fft, ifft = grid.fft, grid.ifft
    ksq = -grid.lap_symbol
    kmin_sq = float(np.min(ksq[ksq > 0]))
    singular = potential.kind == LOGARITHMIC
    n_flat = int(np.prod(ksq.shape))
    zero = (0,) * ksq.ndim

    def residual_field(p):
        wp = np.asarray(potential.deriv(p))
        return -grid.laplacian(p) + wp - grid.mean(wp)

    dense = grid.kind == "circle" and grid.node_count <= 512
    if dense:
        n = grid.node_count
        lap = grid.laplacian_matrix()
        eye = np.eye(n)
        avg = np.full((n, n), 1.0 / n)
        proj = eye - avg

    res_field = residual_field(phi)
    res = grid.l2_norm(res_field)
    for _ in range(max_iters):
        if res <= tol:
            return phi, res, True
        wpp = np.asarray(potential.second(phi))
        if dense:
            jac = -lap + eye * wpp[:, None]
            # restrict to the mean-free slice; the complement is padded to
            # keep the system nonsingular
            sys = proj @ jac @ proj + avg
            dphi = np.linalg.solve(sys, proj @ (-res_field))
        else:
            cmid = 0.5 * (float(wpp.min()) + float(wpp.max()))
            shift = max(cmid, -0.9 * kmin_sq)
            prec_sym = ksq + shift
            prec_sym[zero] = 1.0

            def matvec(x):
                xh = x.reshape(ksq.shape).copy()
                xh[zero] = 0.0
                out = ksq * xh + fft(wpp * ifft(xh))
                out[zero] = 0.0
                return out.ravel()

            op = LinearOperator((n_flat, n_flat), matvec=matvec, dtype=complex)
            prec = LinearOperator(
                (n_flat, n_flat),
                matvec=lambda x: (x.reshape(ksq.shape) / prec_sym).ravel(),
                dtype=complex)
            rhs = fft(-res_field)
            rhs[zero] = 0.0
            sol, info = gmres(op, rhs.ravel(), rtol=gmres_tol, atol=0.0,
                              restart=60, maxiter=300, M=prec)
            if info != 0:
                return phi, res, False
            dphi = ifft(sol.reshape(ksq.shape))
        dphi -= grid.mean(dphi)

        alpha = 1.0
        while True:
            cand = phi + alpha * dphi
            if singular and np.max(np.abs(cand)) > 1.0 - _MARGIN:
                alpha *= 0.5
            else:
                cand_res_field = residual_field(cand)
                cand_res = grid.l2_norm(cand_res_field)
                if cand_res <= (1.0 - 1e-4 * alpha) * res or alpha < 1e-6:
                    break
                alpha *= 0.5
            if alpha < 1e-8:
                return phi, res, False
        phi = cand - grid.mean(cand) + m
        res_field = cand_res_field
        res = cand_res
    return phi, res, res <= tol


def _flow_steps(grid, potential, phi, n_steps, dt):
    """Mass-conserving gradient-flow steps of the uncoupled dynamics.

    Reuses the implicit surface solver with the affinity coupling switched
    off (delta -> infinity) and no exchange, i.e. plain conservative descent
    of the well energy.  Returns (phi, dt) with dt adapted on failures.
    """
    huge_delta = 1e30
    v = np.zeros(grid.shape)
    q = np.zeros(grid.shape)
    done = 0
    while done < n_steps:
        cfg = StepperConfig(dt=dt, newton_tol=1e-11)
        try:
            new_phi, _, _ = _solve_surface(grid, potential, huge_delta, dt,
                                           phi, v, q, cfg)
        except NewtonDivergenceError:
            dt *= 0.5
            if dt < 1e-10:
                raise
            continue
        _pin_zero_modes(grid, new_phi, v, phi, v, q, dt)
        phi = new_phi
        done += 1
        dt = min(dt * 1.3, 50.0)
    return phi, dt


def _unstable_constant(grid, potential, phi, init_vals):
    """True when Newton collapsed a genuinely varying guess onto a constant
    state that is linearly unstable (smallest nonzero mode k has
    k^2 + W''(m) < 0), i.e. onto a saddle the conservative flow would leave."""
    if np.ptp(phi) > 1e-8 or np.ptp(init_vals) < 1e-6:
        return False
    ksq = -grid.lap_symbol
    kmin_sq = float(np.min(ksq[ksq > 0]))
    return kmin_sq + float(potential.second(grid.mean(phi))) < 0.0


def solve_stationary_phi(grid: SurfaceGrid, potential: DoubleWell, m: float,
                         init: SurfaceField, tol: float = 1e-10,
                         max_newton: int = 60,
                         max_flow_rounds: int = 400) -> SurfaceField:
    """Solve the constrained stationary problem with mean value m.

    Damped Newton first; if it stalls, or collapses a varying guess onto a
    linearly unstable constant state, conservative gradient-flow rounds steer
    the iterate into the Newton basin of a flow-consistent solution.  Raises
    NonConvergenceError with the best residual if the target is never met.
    """
    if not -1.0 < m < 1.0:
        raise ValueError(f"mean value must lie in (-1, 1), got {m}")
    if init.grid != grid:
        raise ValueError("initial guess lives on a different grid")
    phi = init.values - grid.mean(init.values) + m
    if potential.kind == LOGARITHMIC and np.max(np.abs(phi)) >= 1.0:
        raise ValueError("initial guess must satisfy max|phi| < 1")

    init_vals = phi.copy()
    phi, res, ok = _newton_attempt(grid, potential, m, phi, tol, max_newton)
    best = res
    if ok and not _unstable_constant(grid, potential, phi, init_vals):
        return SurfaceField(grid, phi)
    if ok:
        # restart the flow from the original guess, away from the saddle
        phi = init_vals

    dt = 0.05
    for _ in range(max_flow_rounds):
        try:
            phi, dt = _flow_steps(grid, potential, phi, n_steps=25, dt=dt)
        except NewtonDivergenceError as exc:
            raise NonConvergenceError(
                f"fallback flow broke down at residual {best:.3e}: {exc}", best
            ) from exc
        phi = phi - grid.mean(phi) + m
        phi, res, ok = _newton_attempt(grid, potential, m, phi, tol, max_newton)
        best = min(best, res)
        if ok:
            return SurfaceField(grid, phi)
    raise NonConvergenceError(
        f"stationary solve stalled at residual {best:.3e} (target {tol:g})", best)


@dataclass
class EquilibriumSolution:
    """Stationary state with its post-processed constants.

    v_total is the surface integral of v_inf; u_inf, mu_inf, eta_inf are the
    constant limits of the bulk value and the chemical potentials.
    """

    phi_inf: SurfaceField
    v_inf: SurfaceField
    u_inf: float
    mu_inf: float
    eta_inf: float
    v_total: float
    residual: float
    total_mass: float
    phi0_mass: float
    delta: float
    omega_measure: float

    def validate(self, potential: DoubleWell):
        g = self.phi_inf.grid
        gamma = g.total_measure
        if abs(g.mean(self.phi_inf.values) - self.phi0_mass / gamma) > 1e-12:
            raise ValueError("equilibrium violates the phi mass constraint")
        comb = 2.0 * self.v_inf.values - self.phi_inf.values
        if np.max(np.abs(comb - g.mean(comb))) > 1e-10:
            raise ValueError("2 v - phi is not spatially constant")
        scale = max(1.0, abs(self.total_mass))
        mass = self.omega_measure * self.u_inf + g.integral(self.v_inf.values)
        if abs(mass - self.total_mass) > 1e-10 * scale:
            raise ValueError("equilibrium violates the combined mass relation")
        wp_mean = g.mean(np.asarray(potential.deriv(self.phi_inf.values)))
        if abs(0.5 * self.eta_inf + self.mu_inf - wp_mean) > 1e-10 * max(1.0, abs(wp_mean)):
            raise ValueError("chemical potential relation violated")
        eta_rhs = (4.0 * self.v_total
                   - 2.0 * (gamma + self.phi0_mass)) / (self.delta * gamma)
        if abs(self.eta_inf - eta_rhs) > 1e-10 * max(1.0, abs(eta_rhs)):
            raise ValueError("eta consistency relation violated")


def postprocess_constants(phi_inf: SurfaceField, total_mass: float,
                          phi0_mass: float, delta: float,
                          omega_measure: float, potential: DoubleWell,
                          a_inf_positive: bool = True,
                          v_total: float | None = None) -> EquilibriumSolution:
    """Determine (v_inf, u_inf, mu_inf, eta_inf) from a stationary phi.

    With a_inf_positive the limit satisfies u = eta, which pins the total
    amount of v by a linear relation with strictly positive coefficients.
    Otherwise the limit theory leaves that total free and it must be given.
    """
    g = phi_inf.grid
    gamma = g.total_measure
    if a_inf_positive:
        # u = eta combined with the mass and eta relations:
        #   (M - V)/|Omega| = 4 V/(delta |Gamma|) - 2/delta - 2 m/(delta |Gamma|)
        num = total_mass / omega_measure + 2.0 / delta \
            + 2.0 * phi0_mass / (delta * gamma)
        den = 1.0 / omega_measure + 4.0 / (delta * gamma)
        v_total = num / den
    elif v_total is None:
        raise ValueError(
            "with a vanishing exchange coefficient the total of v is not "
            "determined by the limit equations; pass v_total explicitly")

    u_inf = (total_mass - v_total) / omega_measure
    eta_inf = (4.0 * v_total - 2.0 * (gamma + phi0_mass)) / (delta * gamma)
    # 2 v - phi is constant; fix the constant from the prescribed total of v.
    const = (2.0 * v_total - phi0_mass) / gamma
    v_inf = SurfaceField(g, 0.5 * (phi_inf.values + const))
    wp_mean = g.mean(np.asarray(potential.deriv(phi_inf.values)))
    mu_inf = wp_mean - 0.5 * eta_inf

    sol = EquilibriumSolution(
        phi_inf=phi_inf, v_inf=v_inf, u_inf=u_inf, mu_inf=mu_inf,
        eta_inf=eta_inf, v_total=v_total,
        residual=steady_residual(phi_inf, potential),
        total_mass=total_mass, phi0_mass=phi0_mass, delta=delta,
        omega_measure=omega_measure)
    sol.validate(potential)
    return sol
