"""Scripted experiments: large-diffusion sweeps, regularization refinement,
convergence to equilibrium, and absorbing-set sweeps.

Every experiment is a pure function of its RunConfig (plus explicit sweep
lists), returns a JSON-ready report embedding the resolved config, and runs
its sweep elements as independent jobs.  RAFTSIM_THREADS caps the worker
count (default: the number of logical processors)."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ..model import (
    CutoffReactionExchange,
    EquilibriumExchange,
    ReactionExchange,
    ReducedState,
    chem_eta,
    chem_mu,
)
from ..bulk import BulkField, bulk_integral, bulk_mean
from ..potentials import LOGARITHMIC
from ..steady import postprocess_constants, steady_residual
from ..stepper import run
from .config import RunConfig, serialize_config


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("RAFTSIM_THREADS", "").strip()
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _run_jobs(jobs):
    """Execute (key, thunk) jobs, optionally in parallel; results keyed."""
    workers = _worker_count(len(jobs))
    if workers == 1:
        return {key: thunk() for key, thunk in jobs}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {key: pool.submit(thunk) for key, thunk in jobs}
        return {key: fut.result() for key, fut in futures.items()}


def _left_endpoint_integral(records, column_getter):
    total = 0.0
    for rec, nxt in zip(records[:-1], records[1:]):
        total += (nxt.t - rec.t) * column_getter(rec)
    return total


# -- large cytosolic diffusion -------------------------------------------------

def experiment_large_d(cfg: RunConfig, d_list) -> dict:
    """Compare full runs over a ladder of diffusivities with the reduced run.

    Requires the full system on the disk with the cutoff reaction law whose
    cutoff threshold equals twice the mean bulk capacity (2M/|Omega|), and
    constant bulk initial data so both systems start from the same state.
    Reports e(D) = sup over samples |<u_D> - u_reduced| and the accumulated
    bulk heterogeneity integral of ||grad u_D||^2.
    """
    d_list = sorted(float(d) for d in d_list)
    if not d_list:
        raise ValueError("d_list must not be empty")
    if cfg.system != "full" or cfg.geometry.kind != "disk":
        raise ValueError("the large-D experiment needs the full system on the disk")
    law = cfg.exchange
    if not isinstance(law, CutoffReactionExchange):
        raise ValueError("the large-D experiment needs the cutoff reaction law")

    state0 = cfg.build_initial_state()
    grid = state0.phi.grid
    omega = math.pi
    total_mass = omega * cfg.initial.u0 + grid.integral(state0.v.values)
    h0_expected = 2.0 * total_mass / omega
    if abs(law.h0 - h0_expected) > 1e-12 * max(1.0, h0_expected):
        raise ValueError(
            f"cutoff threshold h0={law.h0!r} must equal 2M/|Omega|="
            f"{h0_expected!r} for this experiment")

    schedule = cfg.schedule
    base_params = cfg.build_params()

    def full_job(d):
        def thunk():
            params = replace(base_params, D=d)
            return run(state0.copy(), params, cfg.stepper, schedule)
        return thunk

    def reduced_job():
        red0 = ReducedState(0.0, cfg.initial.u0, state0.phi.copy(),
                            state0.v.copy(), total_mass, omega)
        params = replace(base_params, omega_measure=omega)
        return run(red0, params, cfg.stepper, schedule)

    jobs = [(d, full_job(d)) for d in d_list] + [("reduced", reduced_job)]
    results = _run_jobs(jobs)
    reduced_traj = results["reduced"]
    red_u = np.array([r.u_scalar for r in reduced_traj.records])

    rows = []
    for d in d_list:
        traj = results[d]
        full_u = np.array([r.u_scalar for r in traj.records])
        err = float(np.max(np.abs(full_u - red_u)))
        hetero = _left_endpoint_integral(traj.records,
                                         lambda r: r.bulk_dissipation / d)
        rows.append({"d": d, "mean_error": err, "heterogeneity": hetero})
    return {
        "experiment": "large_d",
        "rows": rows,
        "reduced_u_final": float(red_u[-1]),
        "config": serialize_config(cfg),
    }


# -- regularization refinement ---------------------------------------------------

def experiment_kappa_refinement(cfg: RunConfig, kappa_list) -> dict:
    """Rerun one scenario with regularized wells and compare against the
    singular run: reports L2 differences of phi at the final time."""
    kappa_list = [float(k) for k in kappa_list]
    if not kappa_list:
        raise ValueError("kappa_list must not be empty")
    if cfg.potential.kind != LOGARITHMIC:
        raise ValueError("the refinement experiment starts from the "
                         "logarithmic (singular) potential")

    state0 = cfg.build_initial_state()
    schedule = cfg.schedule
    base_params = cfg.build_params()

    def job(pot):
        def thunk():
            return run(state0.copy(), replace(base_params, potential=pot),
                       cfg.stepper, schedule)
        return thunk

    jobs = [("singular", job(cfg.potential))]
    jobs += [(k, job(cfg.potential.regularized(k))) for k in kappa_list]
    results = _run_jobs(jobs)

    grid = state0.phi.grid
    phi_sing = results["singular"].final_state.phi.values
    rows = []
    prev = None
    for k in sorted(kappa_list, reverse=True):  # large kappa first
        phi_k = results[k].final_state.phi.values
        row = {"kappa": k,
               "l2_diff_singular": grid.l2_norm(phi_k - phi_sing)}
        if prev is not None:
            row["l2_diff_previous"] = grid.l2_norm(phi_k - prev)
        rows.append(row)
        prev = phi_k
    return {
        "experiment": "kappa_refinement",
        "rows": rows,
        "max_abs_phi_singular": float(np.max(np.abs(phi_sing))),
        "config": serialize_config(cfg),
    }


# -- convergence to equilibrium ----------------------------------------------------

def experiment_equilibrium_convergence(cfg: RunConfig) -> dict:
    """Long equilibrium-case run: stationarity of the final state,
    post-processed constants vs. the dynamic limits, and the decay-rate fit
    of ||phi(t) - phi(T)|| in the dual norm against (1 + t)."""
    law = cfg.exchange
    if not isinstance(law, EquilibriumExchange) or law.alpha <= 1.0:
        raise ValueError("the convergence experiment needs the equilibrium "
                         "law with decay exponent alpha > 1")

    state0 = cfg.build_initial_state()
    params = cfg.build_params()
    schedule = replace(cfg.schedule, keep_fields=True)
    traj = run(state0, params, cfg.stepper, schedule)

    final = traj.final_state
    grid = final.phi.grid
    pot = params.potential
    gamma = grid.total_measure
    m_mass = grid.integral(state0.phi.values)
    if hasattr(final, "total_mass"):
        total_mass = final.total_mass
        omega = final.omega_measure
        u_dyn = final.u
        u_dev = 0.0
    else:
        omega = math.pi
        total_mass = bulk_integral(final.u) + grid.integral(final.v.values)
        u_dyn = bulk_mean(final.u)
        u_dev = float(np.sqrt(bulk_integral(
            BulkField(final.u.grid, (final.u.values - u_dyn) ** 2)) / omega))

    v_total_dyn = grid.integral(final.v.values)
    dyn_branch = postprocess_constants(
        final.phi, total_mass, m_mass, params.delta, omega, pot,
        a_inf_positive=False, v_total=v_total_dyn)
    remark_branch = postprocess_constants(
        final.phi, total_mass, m_mass, params.delta, omega, pot,
        a_inf_positive=True)

    eta_T = chem_eta(final.phi, final.v, params.delta)
    mu_T = chem_mu(final.phi, eta_T, pot)
    measure = math.sqrt(gamma)

    # decay-rate fit: dual-norm distance of phi(t) to the final state
    ts, dists = [], []
    for state in traj.sampled_states[:-1]:
        diff = state.phi.values - final.phi.values
        diff = diff - grid.mean(diff)
        dist = grid.hminus1_norm(diff)
        if dist > 1e-9:
            ts.append(state.t)
            dists.append(dist)
    if len(ts) >= 3:
        slope, intercept = np.polyfit(np.log1p(ts), np.log(dists), 1)
        rate = {"lambda_fit": float(-slope), "points": len(ts)}
    else:
        rate = {"lambda_fit": None, "points": len(ts)}

    return {
        "experiment": "equilibrium_convergence",
        "steady_residual": steady_residual(final.phi, pot),
        "dynamic": {
            "u": float(u_dyn),
            "u_l2_deviation": float(u_dev),
            "v_total": float(v_total_dyn),
            "eta_mean": grid.mean(eta_T.values),
            "mu_mean": grid.mean(mu_T.values),
        },
        "constants_from_dynamic_v": {
            "u_inf": dyn_branch.u_inf, "eta_inf": dyn_branch.eta_inf,
            "mu_inf": dyn_branch.mu_inf, "v_total": dyn_branch.v_total,
        },
        "constants_remark_branch": {
            "u_inf": remark_branch.u_inf, "eta_inf": remark_branch.eta_inf,
            "mu_inf": remark_branch.mu_inf, "v_total": remark_branch.v_total,
        },
        "match": {
            "u_vs_constant": abs(float(u_dyn) - dyn_branch.u_inf),
            "eta_l2_vs_constant": grid.l2_norm(
                eta_T.values - dyn_branch.eta_inf) / measure,
            "mu_l2_vs_constant": grid.l2_norm(
                mu_T.values - dyn_branch.mu_inf) / measure,
            "v_l2_vs_constant": grid.l2_norm(
                final.v.values - dyn_branch.v_inf.values) / measure,
        },
        "rate": rate,
        "config": serialize_config(cfg),
    }


# -- absorbing set -------------------------------------------------------------------

def experiment_absorbing(cfg: RunConfig, scales, t_star: float) -> dict:
    """Sweep initial-data magnitudes for the reduced reaction system and
    report sup over t >= t_star of (||phi||_H1^2 + ||v||_L2^2) per scale,
    exhibiting entry into one common bounded set."""
    scales = [float(s) for s in scales]
    if not scales:
        raise ValueError("scales must not be empty")
    if cfg.system != "reduced" or not isinstance(cfg.exchange, ReactionExchange):
        raise ValueError("the absorbing-set sweep targets the reduced "
                         "reaction system")

    params = cfg.build_params()

    def job(scale):
        def thunk():
            init = replace(cfg.initial,
                           amplitude=cfg.initial.amplitude * scale,
                           v_amplitude=cfg.initial.v_amplitude * scale)
            state0 = replace(cfg, initial=init).build_initial_state()
            return run(state0, params, cfg.stepper, cfg.schedule)
        return thunk

    results = _run_jobs([(s, job(s)) for s in scales])
    rows = []
    for s in scales:
        traj = results[s]
        tail = [r for r in traj.records if r.t >= t_star]
        sup_norm = max(r.phi_h1_sq + r.v_l2_sq for r in tail)
        initial_norm = traj.records[0].phi_h1_sq + traj.records[0].v_l2_sq
        rows.append({"scale": s, "initial_norm_sq": initial_norm,
                     "sup_tail_norm_sq": sup_norm})
    return {
        "experiment": "absorbing",
        "t_star": t_star,
        "rows": rows,
        "config": serialize_config(cfg),
    }
