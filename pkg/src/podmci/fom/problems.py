"""The two study problems: the three-group pulsed sphere and the LRA BWR.

Each problem maps a parameter point (a dict of named values) to a
configured :class:`DiscreteSystem`, a :class:`TransientConfig` and an
initial state, and runs the transient.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from ..mesh import build_lra_mesh, build_spherical_mesh
from ..physics import LRA_FUEL_REGIONS, XsModifier, load_library, lra_materials, sphere_material
from .eigen import normalize_to_average_power, solve_k_eigenvalue
from .kinetics import KineticsState, TransientConfig, run_transient
from .system import DiscreteSystem

__all__ = [
    "initial_condition_parabolic",
    "SphereProblem",
    "LraProblem",
    "PROBLEMS",
    "get_problem",
]

SPHERE_CRITICAL_RADIUS = 6.1612


def initial_condition_parabolic(mesh, C=1.0, n_groups=3, r_b=None):
    """``C (1 - r^2 / r_b^2)`` in groups 0 and 1 at cell centers, zero in
    the remaining groups. Returns shape ``(N, n_groups)``."""
    if mesh.dimension != 1:
        raise PreconditionError("parabolic initial condition needs a spherical mesh")
    r = mesh.centroids[:, 0]
    if r_b is None:
        r_b = (3.0 * mesh.domain_measure / (4.0 * np.pi)) ** (1.0 / 3.0)
    phi = np.zeros((mesh.n_cells, n_groups))
    profile = C * (1.0 - r**2 / r_b**2)
    phi[:, 0] = profile
    if n_groups > 1:
        phi[:, 1] = profile
    return phi


@dataclass
class SphereProblem:
    """Pulsed subcritical sphere, delayed neutrons omitted.

    Parameter names: ``radius`` (cm), ``density`` (atoms/(b cm)),
    ``sigma_s_01`` (fast to epithermal microscopic transfer, b).
    """

    n_cells: int = 100
    t_end: float = 100e-9
    dt: float = 2e-9

    name = "sphere"
    parameter_names = ("radius", "density", "sigma_s_01")
    defaults = {"radius": 6.0, "density": 0.05, "sigma_s_01": 1.46}

    def system(self, **params):
        p = {**self.defaults, **params}
        unknown = set(params) - set(self.parameter_names)
        if unknown:
            raise PreconditionError(f"unknown sphere parameters {sorted(unknown)}")
        mesh = build_spherical_mesh(p["radius"], self.n_cells)
        mat = sphere_material(density=p["density"], sigma_s_01=p["sigma_s_01"])
        return DiscreteSystem(mesh, {0: mat})

    def config(self):
        return TransientConfig(t_end=self.t_end, dt=self.dt, initial_condition="parabolic_sphere")

    def initial_state(self, system):
        phi = initial_condition_parabolic(system.mesh, 1.0, system.G)
        power = system.fission_rate_density(phi) @ system.volumes
        phi = phi / power
        return KineticsState(phi, np.zeros((system.n_cells, 0)), np.zeros(system.n_cells))

    def simulate(self, **params):
        system = self.system(**params)
        vals = [params.get(k, self.defaults[k]) for k in self.parameter_names]
        return run_transient(system, self.config(), self.initial_state(system), params=vals)


@dataclass
class LraProblem:
    """LRA BWR rod-withdrawal transient with adiabatic feedback.

    Parameter names: ``ramp_delta`` (fractional change of thermal
    absorption in region R), ``ramp_time`` (s), ``feedback_gamma``
    (K^-1/2).
    """

    cells_per_assembly: int = 2
    t_end: float = 3.0
    dt: float = 0.01
    use_printed_scattering: bool = False
    use_printed_absorption: bool = False
    feedback: bool = True
    ramp: bool = True

    name = "lra"
    parameter_names = ("ramp_delta", "ramp_time", "feedback_gamma")

    def __post_init__(self):
        lib = load_library()
        self._tr = lib["lra"]["transient"]
        self.defaults = {
            "ramp_delta": self._tr["ramp_delta"],
            "ramp_time": self._tr["ramp_time"],
            "feedback_gamma": self._tr["feedback_gamma"],
        }
        self._mesh = build_lra_mesh(self.cells_per_assembly)
        self._materials = lra_materials(self.use_printed_scattering, self.use_printed_absorption, library=lib)
        self._steady = None

    def modifiers(self, ramp_delta, ramp_time, feedback_gamma):
        mods = []
        if self.ramp:
            mods.append(XsModifier("absorption_ramp", group=1, regions=(self._tr["ramp_region"],),
                                   delta=ramp_delta, t_ramp=ramp_time))
        if self.feedback:
            mods.append(XsModifier("sqrt_temperature_feedback", group=0, regions=LRA_FUEL_REGIONS,
                                   gamma=feedback_gamma, T0=self._tr["initial_temperature"]))
        return mods

    def base_system(self):
        return DiscreteSystem(self._mesh, self._materials)

    def steady_state(self):
        """``(k, phi)`` of the unperturbed core; cached, as no parameter
        changes the initial state."""
        if self._steady is None:
            self._steady = solve_k_eigenvalue(self.base_system())
        return self._steady

    def system(self, **params):
        p = {**self.defaults, **params}
        unknown = set(params) - set(self.parameter_names)
        if unknown:
            raise PreconditionError(f"unknown LRA parameters {sorted(unknown)}")
        k, _ = self.steady_state()
        return DiscreteSystem(self._mesh, self._materials, self.modifiers(**p), k_norm=k)

    def config(self):
        tr = self._tr
        return TransientConfig(
            t_end=self.t_end, dt=self.dt, feedback=self.feedback, alpha=tr["alpha"],
            T0=tr["initial_temperature"], energy_per_fission=tr["energy_per_fission"],
            initial_condition="k_eigenvalue_normalized", target_power=tr["average_power"],
        )

    def initial_state(self, system):
        cfg = self.config()
        _, phi = self.steady_state()
        phi = normalize_to_average_power(system, phi, cfg.target_power, cfg.energy_per_fission)
        production = np.einsum("ng,ng->n", system.nu_d * system.sigma_f, phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            C = np.where(system.decay > 0, system.yields * production[:, None] / system.decay, 0.0)
        T = np.full(system.n_cells, cfg.T0)
        return KineticsState(phi, C, T)

    def simulate(self, **params):
        system = self.system(**params)
        vals = [params.get(k, self.defaults[k]) for k in self.parameter_names]
        return run_transient(system, self.config(), self.initial_state(system), params=vals)


PROBLEMS = {"sphere": SphereProblem, "lra": LraProblem}


def get_problem(name, **settings):
    try:
        return PROBLEMS[name](**settings)
    except KeyError:
        raise PreconditionError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
