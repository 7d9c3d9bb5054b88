"""Discrete multigroup diffusion operator on a finite-volume mesh.

Unknowns are ordered cell-major, group-minor: ``phi[g, i]`` lives at index
``i * G + g``. All operator rows are volume integrated.
"""

import numpy as np
import scipy.sparse as sp

from ..errors import AssemblyError
from ..physics import ramped_absorption

__all__ = ["DiscreteSystem", "assemble_operator", "face_diffusion_coefficient"]


def face_diffusion_coefficient(D_i, D_n, w):
    """Weighted harmonic mean ``(w / D_i + (1 - w) / D_n)^-1``."""
    return 1.0 / (w / D_i + (1.0 - w) / D_n)


class DiscreteSystem:
    """Cell-wise material data plus the static parts of the operator.

    Parameters
    ----------
    mesh : FVMesh
    materials : dict
        Region id -> :class:`MultiGroupMaterial`.
    modifiers : sequence of XsModifier
        Absorption ramps and temperature feedback rules.
    k_norm : float
        All fission cross sections are divided by this value.
    """

    def __init__(self, mesh, materials, modifiers=(), k_norm=1.0):
        self.mesh = mesh
        self.materials = dict(materials)
        self.modifiers = tuple(modifiers)
        self.k_norm = float(k_norm)
        if not self.k_norm > 0.0:
            raise AssemblyError(f"k_norm must be positive, got {k_norm}")

        cell_mats = []
        for c, reg in enumerate(mesh.region_ids):
            mat = self.materials.get(int(reg))
            if mat is None:
                raise AssemblyError(f"no material for region {reg} (cell {c} at {tuple(mesh.centroids[c])})")
            cell_mats.append(mat)
        G = {m.n_groups for m in cell_mats}
        J = {m.n_precursors for m in cell_mats}
        if len(G) != 1 or len(J) != 1:
            raise AssemblyError("all materials must share group and precursor counts")
        self.G, self.J = G.pop(), J.pop()
        self.cell_materials = cell_mats

        def stack(attr):
            return np.array([getattr(m, attr) for m in cell_mats], dtype=float)

        self.D = stack("D")
        if np.any(self.D <= 0.0):
            bad = int(np.argmax(np.any(self.D <= 0.0, axis=1)))
            raise AssemblyError(f"non-positive diffusion coefficient in cell {bad}")
        self.sigma_t = stack("sigma_t")
        self.sigma_s = stack("sigma_s")                   # (N, G, G) [dest, source]
        self.sigma_f = stack("sigma_f") / self.k_norm
        self.nu_p = stack("nu_p")
        self.nu_d = stack("nu_d")
        self.chi_p = stack("chi_p")
        self.chi_d = stack("chi_d").reshape(mesh.n_cells, self.G, self.J)
        self.decay = stack("decay_constants").reshape(mesh.n_cells, self.J)
        self.yields = stack("precursor_yields").reshape(mesh.n_cells, self.J)
        self.buckling = np.array([m.buckling for m in cell_mats], dtype=float)
        self.inv_velocity = 1.0 / stack("velocity")
        self.sigma_a = np.array([
            m.sigma_a if m.sigma_a is not None else m.sigma_t - m.sigma_s.sum(axis=0)
            for m in cell_mats
        ])
        self.volumes = np.asarray(mesh.volumes, dtype=float)
        self.fuel = np.any(self.sigma_f > 0.0, axis=1)

        self._modifier_masks = [mesh.cells_in_regions(m.regions) for m in self.modifiers]
        self._static = self._assemble_static()

    # ------------------------------------------------------------------
    @property
    def n_cells(self):
        return self.mesh.n_cells

    @property
    def n_unknowns(self):
        return self.n_cells * self.G

    @property
    def core_volume(self):
        return float(self.volumes[self.fuel].sum())

    def with_k_norm(self, k):
        """Same system with fission divided by ``k`` (on top of the current
        normalization)."""
        return DiscreteSystem(self.mesh, self.materials, self.modifiers, k_norm=self.k_norm * k)

    def with_modifiers(self, modifiers):
        return DiscreteSystem(self.mesh, self.materials, modifiers, k_norm=self.k_norm)

    def index(self, cell, group):
        return cell * self.G + group

    # ------------------------------------------------------------------
    def _assemble_static(self):
        """Streaming and scattering transfer (no removal, no fission)."""
        mesh, G, N = self.mesh, self.G, self.n_cells
        rows, cols, vals = [], [], []

        inner = mesh.interior
        o = mesh.face_owner[inner]
        n = mesh.face_neighbor[inner]
        A = mesh.face_area[inner]
        d_in = mesh.face_d_in[inner]
        w = mesh.face_d_if[inner] / d_in
        for g in range(G):
            Df = face_diffusion_coefficient(self.D[o, g], self.D[n, g], w)
            c = A * Df / d_in
            io, inb = o * G + g, n * G + g
            rows += [io, inb, io, inb]
            cols += [io, inb, inb, io]
            vals += [c, c, -c, -c]

        zf = mesh.face_tag == "zero_flux"
        ob = mesh.face_owner[zf]
        for g in range(G):
            c = mesh.face_area[zf] * self.D[ob, g] / mesh.face_d_if[zf]
            rows.append(ob * G + g)
            cols.append(ob * G + g)
            vals.append(c)

        V = self.volumes
        cells = np.arange(N)
        for g in range(G):
            for gp in range(G):
                # within-group scattering is folded into the removal diagonal
                if g == gp:
                    continue
                coupling = -self.sigma_s[:, g, gp] * V
                keep = coupling != 0.0
                rows.append(cells[keep] * G + g)
                cols.append(cells[keep] * G + gp)
                vals.append(coupling[keep])

        rows = np.concatenate([np.atleast_1d(r) for r in rows]) if rows else np.zeros(0, int)
        cols = np.concatenate([np.atleast_1d(c) for c in cols]) if cols else np.zeros(0, int)
        vals = np.concatenate([np.atleast_1d(v) for v in vals]) if vals else np.zeros(0)
        Nu = self.n_unknowns
        return sp.csr_matrix((vals, (rows, cols)), shape=(Nu, Nu))

    def transfer_operator(self):
        """Streaming plus inter-group scattering coupling."""
        return self._static

    def absorption(self, t=0.0, T=None):
        """Cell-wise absorption with modifiers applied, shape (N, G)."""
        sig_a = self.sigma_a.copy()
        for mod, mask in zip(self.modifiers, self._modifier_masks):
            g = mod.group
            if mod.kind == "absorption_ramp":
                factor = ramped_absorption(1.0, t, mod.delta, mod.t_ramp)
                sig_a[mask, g] += self.sigma_a[mask, g] * (factor - 1.0)
            elif mod.kind == "sqrt_temperature_feedback":
                if T is None:
                    continue
                m = mask & self.fuel
                sig_a[m, g] += self.sigma_a[m, g] * mod.gamma * (np.sqrt(T[m]) - np.sqrt(mod.T0))
        return sig_a

    def removal(self, t=0.0, T=None):
        """Diagonal removal density ``sigma_t - sigma_s,gg + D B^2``, (N, G)."""
        sig_t = self.sigma_t + (self.absorption(t, T) - self.sigma_a)
        self_scatter = np.einsum("ngg->ng", self.sigma_s)
        return sig_t - self_scatter + self.D * self.buckling[:, None]

    def production_operator(self, steady_delayed=True):
        """Volume-integrated fission source operator.

        With ``steady_delayed`` the delayed emission is included at its
        equilibrium value (yields times delayed production), as needed for
        the eigenvalue problem.
        """
        N = self.n_cells
        chi = self.chi_p[:, :, None] * self.nu_p[:, None, :]
        if steady_delayed and self.J:
            chi = chi + np.einsum("ngj,nj->ng", self.chi_d, self.yields)[:, :, None] * self.nu_d[:, None, :]
        blocks = chi * self.sigma_f[:, None, :] * self.volumes[:, None, None]
        return sp.block_diag(list(blocks), format="csr") if N else sp.csr_matrix((0, 0))

    def loss_operator(self, t=0.0, T=None):
        """Streaming + removal - scattering, without any fission."""
        return (self._static + sp.diags((self.removal(t, T) * self.volumes[:, None]).ravel())).tocsr()

    def delayed_operator(self, dt_star):
        """Implicit part of the delayed source after precursor elimination.

        Returned with a positive sign; it is subtracted from the loss side.
        """
        if self.J == 0:
            return sp.csr_matrix((self.n_unknowns, self.n_unknowns))
        lam = self.decay
        weight = lam * self.yields * dt_star / (1.0 + lam * dt_star)      # (N, J)
        emit = np.einsum("ngj,nj->ng", self.chi_d, weight)                # (N, G)
        blocks = emit[:, :, None] * (self.nu_d * self.sigma_f)[:, None, :] * self.volumes[:, None, None]
        return sp.block_diag(list(blocks), format="csr")

    def delayed_history_source(self, C_hist, dt_star):
        """Explicit delayed emission from precursor history, shape (N, G)."""
        if self.J == 0:
            return np.zeros((self.n_cells, self.G))
        lam = self.decay
        decayed = lam * C_hist / (1.0 + lam * dt_star)
        return np.einsum("ngj,nj->ng", self.chi_d, decayed) * self.volumes[:, None]

    def fission_rate_density(self, phi):
        """``sum_g sigma_f,g phi_g`` per cell; ``phi`` has shape (N, G)."""
        return np.einsum("ng,ng->n", self.sigma_f, phi)


def assemble_operator(system, t=0.0, T=None, k_norm=None):
    """Full steady operator: loss minus prompt fission.

    ``k_norm`` divides the prompt fission term in addition to the system's
    own normalization.
    """
    if k_norm is not None and not k_norm > 0.0:
        raise AssemblyError(f"k_norm must be positive, got {k_norm}")
    scale = 1.0 if k_norm is None else 1.0 / k_norm
    loss = system.loss_operator(t, T)
    prompt = system.production_operator(steady_delayed=False)
    return (loss - scale * prompt).tocsr()
