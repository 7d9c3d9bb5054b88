"""Steady-state k-eigenvalue solve and power normalization."""

import numpy as np

from ..errors import PreconditionError, SolverError
from ..numerics import SparseLU

__all__ = ["solve_k_eigenvalue", "normalize_to_average_power", "average_power_density"]


def solve_k_eigenvalue(system, k_tol=1e-10, phi_tol=1e-8, max_iterations=20000, rel_tol=1e-12):
    """Fundamental mode by power iteration.

    The loss operator is factorized once; each iteration solves
    ``L phi_new = F phi / k`` and updates ``k`` by the ratio of the new to
    the old total fission production.

    Returns
    -------
    k : float
    phi : ndarray, shape (N, G)
        Normalized to unit total production.
    """
    if not np.any(system.fuel):
        raise PreconditionError("k-eigenvalue problem needs at least one fissile region")
    loss = SparseLU(system.loss_operator(0.0, None), rel_tol=rel_tol)
    F = system.production_operator(steady_delayed=True)

    phi = np.ones(system.n_unknowns)
    src = F @ phi
    phi /= src.sum()
    src = F @ phi
    k = 1.0
    history = []
    for it in range(max_iterations):
        phi_new = loss.solve(src / k)
        src_new = F @ phi_new
        k_new = k * src_new.sum() / src.sum()
        phi_new /= src_new.sum()
        src_new = F @ phi_new
        dk = abs(k_new - k) / k_new
        dphi = np.max(np.abs(phi_new - phi)) / np.max(np.abs(phi_new))
        history.append(dk)
        phi, src, k = phi_new, src_new, k_new
        if dk <= k_tol and dphi <= phi_tol:
            return k, phi.reshape(system.n_cells, system.G)
    raise SolverError(f"power iteration did not converge in {max_iterations} iterations "
                      f"(last dk={history[-1]:.2e})", residual=history[-1], history=history)


def average_power_density(system, phi, energy_per_fission):
    core = system.fuel
    vcore = system.volumes[core].sum()
    if not vcore > 0.0:
        raise PreconditionError("fissile core volume is zero")
    rate = system.fission_rate_density(phi)
    return energy_per_fission * float(rate[core] @ system.volumes[core]) / vcore


def normalize_to_average_power(system, phi, target, energy_per_fission):
    """Scale ``phi`` so the core-averaged power density equals ``target``.

    The system's own (possibly k-normalized) fission cross sections are
    used, so callers wanting the steady-state start should pass
    ``system.with_k_norm(k)``.
    """
    current = average_power_density(system, phi, energy_per_fission)
    if current == 0.0:
        raise PreconditionError("zero fission rate; cannot normalize flux")
    return phi * (target / current)
