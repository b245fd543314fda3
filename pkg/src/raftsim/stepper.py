"""Time integration of the coupled and reduced systems.

One step of the splitting scheme:

1. freeze the exchange rate q at the current time (using the bulk trace for
   the coupled system, the scalar bulk value for the reduced one),
2. advance the bulk by one conservative backward-Euler diffusion step with
   boundary flux -q,
3. solve the implicit surface system by Newton iteration in Fourier space,
   with the convex part of the well implicit and the concave quadratic
   explicit; damping keeps every iterate strictly inside (-1, 1).

Because the same frozen q feeds the bulk flux and the surface source, the
combined mass is conserved step by step; the zero modes of the surface solve
are pinned explicitly so the same holds for the surface masses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .bulk import bulk_grad_norm_sq, bulk_mean, diffusion_step, trace_boundary
from .diagnostics import DiagnosticsRecord
from .model import (
    FullState,
    Params,
    ReducedState,
    chem_eta,
    chem_mu,
    exchange_q,
    lyapunov_functional,
    masses,
    reduced_u_from_mass,
    separation_margin,
    surface_energy,
    total_energy,
)
from .potentials import LOGARITHMIC
from .surface import SurfaceField, surface_integral

SEPARATION_MARGIN = 1e-13  # Newton iterates keep max|phi| <= 1 - this


class NewtonDivergenceError(RuntimeError):
    """Implicit surface solve failed to converge within the iteration cap."""


class DtUnderflowError(RuntimeError):
    """Step failed even at dt_min with the regularized fallback."""

    def __init__(self, message, t, state, step_index=None):
        super().__init__(message)
        self.t = t
        self.state = state
        self.step_index = step_index


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    dt_min: float | None = None          # defaults to dt / 1024
    damping: float = 0.5
    dealias: bool = False
    gmres_tol: float = 1e-12
    kappa_fallback: float = 1e-5

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.newton_tol <= 0.0 or self.gmres_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping factor must lie in (0, 1)")
        if self.dt_min is not None and self.dt_min > self.dt:
            raise ValueError("dt_min cannot exceed dt")

    @property
    def dt_floor(self) -> float:
        return self.dt / 1024.0 if self.dt_min is None else self.dt_min


@dataclass(frozen=True)
class Schedule:
    t_final: float
    sample_stride: int = 1
    checkpoint_stride: int = 0
    keep_fields: bool = False

    def __post_init__(self):
        if self.t_final < 0.0:
            raise ValueError("t_final must be >= 0")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.checkpoint_stride < 0:
            raise ValueError("checkpoint_stride must be >= 0")


@dataclass
class Trajectory:
    records: list
    final_state: object
    dt: float
    sampled_states: list | None = None


# -- implicit surface solve ---------------------------------------------------

def _solve_surface(grid, potential, delta, dt, phi_n, v_n, q_vals, cfg):
    """Solve the implicit surface update; returns (phi', v', newton_iters).

    Unknowns are advanced from (phi_n, v_n) with the frozen source q_vals.
    Newton directions come from a GMRES solve of the Schur complement in phi
    preconditioned by the constant-coefficient symbol, except on small 1-D
    grids where a direct dense solve is cheaper.
    """
    fft, ifft = grid.fft, grid.ifft
    ksq = -grid.lap_symbol
    theta0 = potential.split_coefficient
    singular = potential.kind == LOGARITHMIC
    mask = grid.dealias if cfg.dealias else None

    phin_h = fft(phi_n)
    vn_h = fft(v_n)
    q_h = fft(q_vals)
    if mask is not None:
        q_h = mask * q_h
    one_h = fft(np.ones(grid.shape))

    two_d = 2.0 / delta
    c1 = 1.0 + dt * ksq**2 + (dt / delta) * ksq
    b_sym = -(2.0 * dt / delta) * ksq
    c_sym = 1.0 + (4.0 * dt / delta) * ksq
    schur_sym = c1 - b_sym**2 / c_sym

    phi = phi_n.copy()
    v = v_n.copy()

    def residual(phi, v):
        phi_h = fft(phi)
        v_h = fft(v)
        fp_h = fft(np.asarray(potential.convex_deriv(phi)))
        if mask is not None:
            fp_h = mask * fp_h
        eta_h = two_d * (2.0 * v_h - one_h - phi_h)
        mu_h = ksq * phi_h + fp_h - theta0 * phin_h - 0.5 * eta_h
        r1_h = phi_h - phin_h + dt * ksq * mu_h
        r2_h = v_h - vn_h + dt * ksq * eta_h - dt * q_h
        return r1_h, r2_h, ifft(r1_h), ifft(r2_h)

    n_flat = int(np.prod(c1.shape))
    # small 1-D problems: direct dense Newton solve beats Krylov overheads
    dense = grid.kind == "circle" and grid.node_count <= 512 and mask is None
    if dense:
        n = grid.node_count
        lap = grid.laplacian_matrix()
        eye = np.eye(n)
        j11_const = eye + dt * (lap @ lap) - (dt / delta) * lap
        j12 = (2.0 * dt / delta) * lap
        j22 = eye - (4.0 * dt / delta) * lap

    for iteration in range(cfg.newton_max_iters + 1):
        r1_h, r2_h, r1, r2 = residual(phi, v)
        res = max(np.max(np.abs(r1)), np.max(np.abs(r2)))
        if res <= cfg.newton_tol:
            return phi, v, iteration
        if iteration == cfg.newton_max_iters:
            raise NewtonDivergenceError(
                f"surface Newton stalled at residual {res:.3e} "
                f"after {iteration} iterations (dt={dt:g})"
            )

        fpp = np.asarray(potential.convex_second(phi))
        if dense:
            jac = np.empty((2 * n, 2 * n))
            jac[:n, :n] = j11_const - dt * (lap * fpp[None, :])
            jac[:n, n:] = j12
            jac[n:, :n] = j12
            jac[n:, n:] = j22
            sol = np.linalg.solve(jac, np.concatenate([-r1, -r2]))
            dphi = sol[:n]
            dv = sol[n:]
        else:
            cmid = 0.5 * (float(fpp.min()) + float(fpp.max()))
            precond_sym = schur_sym + dt * ksq * cmid

            def matvec(x):
                xh = x.reshape(c1.shape)
                prod_h = fft(fpp * ifft(xh))
                if mask is not None:
                    prod_h = mask * prod_h
                return (schur_sym * xh + dt * ksq * prod_h).ravel()

            def apply_prec(x):
                return (x.reshape(c1.shape) / precond_sym).ravel()

            op = LinearOperator((n_flat, n_flat), matvec=matvec, dtype=complex)
            prec = LinearOperator((n_flat, n_flat), matvec=apply_prec,
                                  dtype=complex)
            rhs = (-r1_h + (b_sym / c_sym) * r2_h).ravel()
            sol, info = gmres(op, rhs, rtol=cfg.gmres_tol, atol=0.0,
                              restart=60, maxiter=300, M=prec)
            if info != 0:
                raise NewtonDivergenceError(
                    f"GMRES failed to reach tolerance (info={info}, dt={dt:g})"
                )
            dphi_h = sol.reshape(c1.shape)
            dv_h = (-r2_h - b_sym * dphi_h) / c_sym
            dphi = ifft(dphi_h)
            dv = ifft(dv_h)

        alpha = 1.0
        if singular:
            # never tighter than the incoming iterate's own margin (which the
            # zero-mode pinning may have nudged by one ulp)
            limit = max(1.0 - SEPARATION_MARGIN, float(np.max(np.abs(phi))))
            while np.max(np.abs(phi + alpha * dphi)) > limit:
                alpha *= cfg.damping
                if alpha < 1e-12:
                    raise NewtonDivergenceError(
                        f"Newton damping underflow at dt={dt:g} "
                        f"(iterate pressed against the pure states)"
                    )
        phi = phi + alpha * dphi
        v = v + alpha * dv


def _pin_zero_modes(grid, phi, v, phi_n, v_n, q_vals, dt):
    """Make the surface masses exact: mean(phi') = mean(phi_n) and
    mean(v') = mean(v_n) + dt*mean(q)."""
    phi += grid.mean(phi_n) - grid.mean(phi)
    v += grid.mean(v_n) + dt * grid.mean(q_vals) - grid.mean(v)


# -- single steps --------------------------------------------------------------

def step_full(state: FullState, params: Params, cfg: StepperConfig,
              dt: float | None = None, counters: dict | None = None) -> FullState:
    """One splitting step of the bulk-surface coupled system."""
    dt = cfg.dt if dt is None else dt
    grid = state.phi.grid
    eta = chem_eta(state.phi, state.v, params.delta)
    u_gamma = trace_boundary(state.u)
    q0 = exchange_q(params.exchange, u_gamma, eta, state.phi, state.v, state.t)

    u_new = diffusion_step(state.u, params.D, dt, q0)
    phi, v, iters = _solve_surface(grid, params.potential, params.delta, dt,
                                   state.phi.values, state.v.values,
                                   q0.values, cfg)
    if counters is not None:
        counters["newton_iters"] += iters
    _pin_zero_modes(grid, phi, v, state.phi.values, state.v.values,
                    q0.values, dt)
    return FullState(state.t + dt, u_new,
                     SurfaceField(grid, phi), SurfaceField(grid, v))


def step_reduced(state: ReducedState, params: Params, cfg: StepperConfig,
                 dt: float | None = None,
                 counters: dict | None = None) -> ReducedState:
    """One step of the reduced nonlocal surface system.

    The scalar bulk value is reconstructed from the conserved total mass
    after the surface update, so the mass relation is exact by construction.
    """
    dt = cfg.dt if dt is None else dt
    grid = state.phi.grid
    eta = chem_eta(state.phi, state.v, params.delta)
    q0 = exchange_q(params.exchange, state.u, eta, state.phi, state.v, state.t)

    phi, v, iters = _solve_surface(grid, params.potential, params.delta, dt,
                                   state.phi.values, state.v.values,
                                   q0.values, cfg)
    if counters is not None:
        counters["newton_iters"] += iters
    _pin_zero_modes(grid, phi, v, state.phi.values, state.v.values,
                    q0.values, dt)
    v_field = SurfaceField(grid, v)
    u_new = reduced_u_from_mass(state.total_mass, v_field, state.omega_measure)
    return ReducedState(state.t + dt, u_new, SurfaceField(grid, phi), v_field,
                        state.total_mass, state.omega_measure)


def _step(state, params, cfg, dt, counters=None):
    if isinstance(state, FullState):
        return step_full(state, params, cfg, dt, counters)
    return step_reduced(state, params, cfg, dt, counters)


def _advance(state, params, cfg, dt, counters):
    """Advance by dt, halving on Newton failure down to dt_floor, then once
    more with the regularized well before giving up."""
    try:
        new_state = _step(state, params, cfg, dt, counters)
        counters["substeps"] += 1
        return new_state
    except NewtonDivergenceError as exc:
        half = 0.5 * dt
        if half >= cfg.dt_floor * (1.0 - 1e-12):
            mid = _advance(state, params, cfg, half, counters)
            return _advance(mid, params, cfg, half, counters)
        if params.potential.kind == LOGARITHMIC:
            warnings.warn(
                f"falling back to the kappa-regularized well at t={state.t:g} "
                f"(dt={dt:g})", RuntimeWarning, stacklevel=2)
            soft = replace(params,
                           potential=params.potential.regularized(cfg.kappa_fallback))
            try:
                new_state = _step(state, soft, cfg, dt, counters)
            except NewtonDivergenceError as exc2:
                raise DtUnderflowError(
                    f"step failed at dt_min={cfg.dt_floor:g} even with the "
                    f"regularized well: {exc2}", state.t, state) from exc2
            counters["substeps"] += 1
            counters["fallback_steps"] += 1
            return new_state
        raise DtUnderflowError(
            f"step failed at dt_min={cfg.dt_floor:g}: {exc}", state.t, state
        ) from exc


# -- diagnostics ---------------------------------------------------------------

def diagnose(state, params: Params, newton_iters=0, substeps=0,
             fallback_steps=0) -> DiagnosticsRecord:
    """Evaluate the full diagnostics column set at one state."""
    grid = state.phi.grid
    eta = chem_eta(state.phi, state.v, params.delta)
    mu = chem_mu(state.phi, eta, params.potential)
    if isinstance(state, FullState):
        u_on_gamma = trace_boundary(state.u)
        u_for_rate = u_on_gamma.values
        bulk_diss = params.D * bulk_grad_norm_sq(state.u)
        u_scalar = bulk_mean(state.u)
    else:
        u_on_gamma = state.u
        u_for_rate = state.u
        bulk_diss = 0.0
        u_scalar = state.u
    q = exchange_q(params.exchange, u_on_gamma, eta, state.phi, state.v, state.t)
    combined, phi_mass = masses(state)
    return DiagnosticsRecord(
        t=state.t,
        total_energy=total_energy(state, params),
        surface_energy=surface_energy(state.phi, state.v, params),
        lyapunov=lyapunov_functional(state.phi, state.v, params),
        combined_mass=combined,
        phi_mass=phi_mass,
        separation_margin=separation_margin(state.phi),
        bulk_dissipation=bulk_diss,
        mu_grad_sq=grid.h1_seminorm_sq(mu.values),
        eta_grad_sq=grid.h1_seminorm_sq(eta.values),
        exchange_integral=surface_integral(q),
        exchange_energy_rate=grid.integral(q.values * (eta.values - u_for_rate)),
        phi_h1_sq=grid.l2_norm(state.phi.values) ** 2
        + grid.h1_seminorm_sq(state.phi.values),
        v_l2_sq=grid.l2_norm(state.v.values) ** 2,
        u_scalar=u_scalar,
        newton_iters=newton_iters,
        substeps=substeps,
        fallback_steps=fallback_steps,
    )


# -- trajectory driver ----------------------------------------------------------

def run(initial, params: Params, cfg: StepperConfig, schedule: Schedule,
        on_checkpoint=None) -> Trajectory:
    """Advance `initial` to t_final, sampling diagnostics every
    sample_stride steps (plus the initial and final states).

    on_checkpoint(state, step_index) is invoked every checkpoint_stride
    steps.  Runs are deterministic: identical inputs give bit-identical
    trajectories, and a resumed run continues exactly where it left off.
    """
    dt = cfg.dt
    n_steps = int(round(schedule.t_final / dt)) if schedule.t_final > 0 else 0
    if abs(n_steps * dt - schedule.t_final) > 1e-9 * max(1.0, abs(schedule.t_final)):
        raise ValueError(
            f"t_final={schedule.t_final!r} is not an integer multiple of dt={dt!r}"
        )

    records = [diagnose(initial, params)]
    sampled = [initial.copy()] if schedule.keep_fields else None
    state = initial
    for i in range(1, n_steps + 1):
        counters = {"substeps": 0, "fallback_steps": 0, "newton_iters": 0}
        try:
            state = _advance(state, params, cfg, dt, counters)
        except DtUnderflowError as exc:
            exc.step_index = i
            raise
        if i % schedule.sample_stride == 0 or i == n_steps:
            records.append(diagnose(state, params,
                                    newton_iters=counters["newton_iters"],
                                    substeps=counters["substeps"],
                                    fallback_steps=counters["fallback_steps"]))
            if sampled is not None:
                sampled.append(state.copy())
        if (schedule.checkpoint_stride and on_checkpoint is not None
                and i % schedule.checkpoint_stride == 0):
            on_checkpoint(state, i)
    return Trajectory(records=records, final_state=state, dt=dt,
                      sampled_states=sampled)
