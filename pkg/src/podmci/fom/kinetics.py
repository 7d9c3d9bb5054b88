"""TBDF-2 time integration with eliminated precursors and adiabatic heat-up."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import PreconditionError, SolverError
from ..numerics import solve_sparse
from .record import SimulationRecord

__all__ = [
    "KineticsState",
    "TransientConfig",
    "precursor_update",
    "temperature_update",
    "tbdf2_step",
    "run_transient",
]

log = logging.getLogger(__name__)


@dataclass
class KineticsState:
    """Flux ``(N, G)``, precursors ``(N, J)`` and temperature ``(N,)``.

    Supports the linear combinations the TBDF-2 stages need.
    """

    phi: np.ndarray
    C: np.ndarray
    T: np.ndarray

    def __add__(self, other):
        return KineticsState(self.phi + other.phi, self.C + other.C, self.T + other.T)

    def __sub__(self, other):
        return KineticsState(self.phi - other.phi, self.C - other.C, self.T - other.T)

    def __mul__(self, a):
        return KineticsState(a * self.phi, a * self.C, a * self.T)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return KineticsState(self.phi / a, self.C / a, self.T / a)


@dataclass
class TransientConfig:
    """Settings of one transient.

    ``initial_condition`` is ``"parabolic_sphere"`` or
    ``"k_eigenvalue_normalized"``; ``source`` is an optional callable
    ``source(t) -> (N, G)`` volumetric source density.
    """

    t_end: float
    dt: float
    feedback: bool = False
    alpha: float = 0.0
    T0: float = 300.0
    energy_per_fission: float = 1.0
    initial_condition: str = "parabolic_sphere"
    target_power: float = 1.0
    source: object = None
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0.0:
            raise PreconditionError(f"time step must be positive, got {self.dt}")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise PreconditionError(f"t_end / dt = {n} is not a positive integer")
        if self.alpha < 0.0:
            raise PreconditionError("alpha must be non-negative")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


def precursor_update(C_prev, fission_production, decay, yields, dt_star):
    """Implicit precursor stage update.

    ``C* = (C_prev + yields * dt* * P) / (1 + decay * dt*)`` where ``P`` is
    the delayed production density ``sum_g nu_d sigma_f phi*`` per cell.

    Parameters
    ----------
    C_prev : ndarray, shape (N, J)
    fission_production : ndarray, shape (N,)
    decay, yields : ndarray, shape (N, J) or (J,)
    dt_star : float
    """
    if not dt_star > 0.0:
        raise PreconditionError(f"dt_star must be positive, got {dt_star}")
    return (C_prev + yields * dt_star * np.asarray(fission_production)[:, None]) / (1.0 + decay * dt_star)


def temperature_update(T_prev, fission_rate, dt_star, alpha, fuel_mask=None):
    """Adiabatic heat-up ``T* = T_prev + dt* alpha sum_g sigma_f phi``.

    Cells outside ``fuel_mask`` keep their temperature.
    """
    if alpha < 0.0:
        raise PreconditionError("alpha must be non-negative")
    T_new = T_prev + dt_star * alpha * np.asarray(fission_rate)
    if fuel_mask is not None:
        T_new = np.where(fuel_mask, T_new, T_prev)
    return T_new


def tbdf2_step(state, t, dt, stage_solve):
    """One TBDF-2 step.

    ``stage_solve(history, lagged, t_star, dt_star)`` must return the
    solution ``y*`` of the implicit Euler-like stage ``y* - dt* f(y*, t*)
    = history``; ``lagged`` is the most recent completed state, used for
    lagged nonlinearities. The first stage is a backward-Euler quarter step
    extrapolated to the half step (Crank-Nicolson), the second a BDF2 half
    step with effective step ``dt / 3``.
    """
    quarter = stage_solve(state, state, t + 0.25 * dt, 0.25 * dt)
    half = 2.0 * quarter - state
    history = (4.0 * half - state) / 3.0
    return stage_solve(history, half, t + dt, dt / 3.0)


def _stage_solver(system, config):
    V = system.volumes
    mass = (system.inv_velocity * V[:, None]).ravel()
    static = (system.transfer_operator() - system.production_operator(steady_delayed=False)).tocsr()
    delayed_ops = {}
    nu_d_sigma_f = system.nu_d * system.sigma_f
    has_modifiers = bool(system.modifiers)
    base_removal = system.removal(0.0, None)

    def solve(history, lagged, t_star, dt_star):
        T_lag = lagged.T if config.feedback else None
        removal = system.removal(t_star, T_lag) if has_modifiers else base_removal
        key = round(dt_star / config.dt, 12)
        if key not in delayed_ops:
            delayed_ops[key] = system.delayed_operator(dt_star)
        A = static + sp.diags((removal * V[:, None]).ravel() + mass / dt_star) - delayed_ops[key]
        rhs = mass / dt_star * history.phi.ravel() + system.delayed_history_source(history.C, dt_star).ravel()
        if config.source is not None:
            rhs = rhs + (np.asarray(config.source(t_star)) * V[:, None]).ravel()
        try:
            phi = solve_sparse(A.tocsr(), rhs, rel_tol=config.rel_tol).reshape(system.n_cells, system.G)
        except SolverError as exc:
            raise SolverError(f"stage solve at t*={t_star:.6g} (dt*={dt_star:.3g}) failed: {exc}",
                              residual=exc.residual) from exc
        C = precursor_update(history.C, np.einsum("ng,ng->n", nu_d_sigma_f, phi),
                             system.decay, system.yields, dt_star) if system.J else history.C
        if config.feedback:
            T = temperature_update(history.T, system.fission_rate_density(phi), dt_star,
                                   config.alpha, system.fuel)
        else:
            T = history.T
        return KineticsState(phi, C, T)

    return solve


def _powers(system, phi, energy_per_fission):
    density = energy_per_fission * system.fission_rate_density(phi)
    total = float(density @ system.volumes)
    core = system.fuel
    vcore = system.volumes[core].sum()
    avg = float(density[core] @ system.volumes[core] / vcore) if vcore > 0 else 0.0
    return density, total, avg


def run_transient(system, config, initial_state, params=None):
    """Integrate from ``initial_state`` to ``config.t_end``.

    Returns
    -------
    SimulationRecord
        With ``n_steps + 1`` snapshots. Power density is
        ``energy_per_fission * sum_g sigma_f phi``.
    """
    n = config.n_steps
    N, G, J = system.n_cells, system.G, system.J
    times = np.arange(n + 1) * config.dt
    flux = np.empty((n + 1, N, G))
    prec = np.empty((n + 1, N, J))
    temp = np.empty((n + 1, N))
    pd = np.empty((n + 1, N))
    tot = np.empty(n + 1)
    avg = np.empty(n + 1)

    state = initial_state
    solve = _stage_solver(system, config)
    min_ratio = 0.0
    for step in range(n + 1):
        if step > 0:
            try:
                state = tbdf2_step(state, times[step - 1], config.dt, solve)
            except SolverError as exc:
                raise SolverError(f"transient failed in step ending at t={times[step]:.6g}: {exc}",
                                  residual=exc.residual) from exc
        flux[step], prec[step], temp[step] = state.phi, state.C, state.T
        pd[step], tot[step], avg[step] = _powers(system, state.phi, config.energy_per_fission)
        peak = np.max(np.abs(state.phi))
        if peak > 0:
            min_ratio = min(min_ratio, float(state.phi.min() / peak))

    diagnostics = {"min_flux_ratio": min_ratio, "negative_flux": bool(min_ratio < -1e-10)}
    if diagnostics["negative_flux"]:
        log.warning("flux went negative (min/max = %.3e)", min_ratio)
    return SimulationRecord(
        times=times, flux=flux, precursors=prec, temperature=temp, power_density=pd,
        total_power=tot, average_power=avg, volumes=system.volumes.copy(),
        core_mask=system.fuel.astype(float),
        params=np.asarray(params if params is not None else [], dtype=float),
        diagnostics=diagnostics,
    )
