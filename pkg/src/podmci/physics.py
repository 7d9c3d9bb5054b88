"""Multigroup material data and the time/temperature cross-section modifiers."""

from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from .errors import PreconditionError

__all__ = [
    "MultiGroupMaterial",
    "XsModifier",
    "from_microscopic",
    "ramped_absorption",
    "feedback_absorption",
    "load_library",
    "sphere_material",
    "lra_materials",
    "LRA_FUEL_REGIONS",
]

LRA_FUEL_REGIONS = (1, 2, 3, 4, 6)


def _vec(x, n):
    a = np.asarray(x, dtype=float)
    return np.full(n, float(a)) if a.ndim == 0 else a.copy()


@dataclass(frozen=True, eq=False)
class MultiGroupMaterial:
    """Macroscopic group constants for one region.

    Scattering is stored as ``sigma_s[g, gp]``, the transfer from group
    ``gp`` into group ``g`` (rows are destination groups). ``chi_d`` has
    shape ``(G, J)``. ``sigma_f`` is the fission cross section proper;
    neutron production uses ``nu_p * sigma_f`` and ``nu_d * sigma_f``.
    """

    sigma_t: np.ndarray
    sigma_s: np.ndarray
    sigma_f: np.ndarray
    nu_p: np.ndarray
    nu_d: np.ndarray
    chi_p: np.ndarray
    D: np.ndarray
    velocity: np.ndarray
    chi_d: np.ndarray = None
    decay_constants: np.ndarray = field(default_factory=lambda: np.zeros(0))
    precursor_yields: np.ndarray = field(default_factory=lambda: np.zeros(0))
    buckling: float = 0.0
    sigma_a: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        G = len(self.sigma_t)
        J = len(self.decay_constants)
        conv = {
            "sigma_t": _vec(self.sigma_t, G),
            "sigma_s": np.asarray(self.sigma_s, dtype=float).reshape(G, G),
            "sigma_f": _vec(self.sigma_f, G),
            "nu_p": _vec(self.nu_p, G),
            "nu_d": _vec(self.nu_d, G),
            "chi_p": _vec(self.chi_p, G),
            "D": _vec(self.D, G),
            "velocity": _vec(self.velocity, G),
            "decay_constants": np.asarray(self.decay_constants, dtype=float).reshape(J),
            "precursor_yields": np.asarray(self.precursor_yields, dtype=float).reshape(J),
        }
        chi_d = np.zeros((G, J)) if self.chi_d is None else np.asarray(self.chi_d, dtype=float).reshape(G, J)
        conv["chi_d"] = chi_d
        if self.sigma_a is not None:
            conv["sigma_a"] = _vec(self.sigma_a, G)
        for k, v in conv.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)
        self._validate()

    def _validate(self):
        for name in ("sigma_t", "sigma_s", "sigma_f", "nu_p", "nu_d", "velocity"):
            if np.any(getattr(self, name) < 0.0):
                raise PreconditionError(f"material {self.name!r}: negative {name}")
        if np.any(self.D <= 0.0):
            raise PreconditionError(f"material {self.name!r}: diffusion coefficient must be positive")
        if self.is_fissile:
            if not np.isclose(self.chi_p.sum(), 1.0, atol=1e-12):
                raise PreconditionError(f"material {self.name!r}: prompt spectrum sums to {self.chi_p.sum()}")
            if self.n_precursors and not np.allclose(self.chi_d.sum(axis=0), 1.0, atol=1e-12):
                raise PreconditionError(f"material {self.name!r}: delayed spectra do not sum to 1")

    @property
    def n_groups(self):
        return len(self.sigma_t)

    @property
    def n_precursors(self):
        return len(self.decay_constants)

    @property
    def is_fissile(self):
        return bool(np.any(self.sigma_f > 0.0))

    @property
    def nu(self):
        return self.nu_p + self.nu_d

    @property
    def nu_sigma_f(self):
        return self.nu * self.sigma_f

    def with_scaled_fission(self, factor):
        """Copy with ``sigma_f`` multiplied by ``factor``."""
        return replace(self, sigma_f=self.sigma_f * factor)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class XsModifier:
    """A rule that perturbs absorption in a group over a set of regions.

    ``kind`` is ``"absorption_ramp"`` (parameters ``delta``, ``t_ramp``) or
    ``"sqrt_temperature_feedback"`` (parameters ``gamma``, ``T0``).
    """

    kind: str
    group: int
    regions: tuple
    delta: float = 0.0
    t_ramp: float = 1.0
    gamma: float = 0.0
    T0: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.kind == "absorption_ramp":
            if not self.t_ramp > 0.0:
                raise PreconditionError(f"ramp duration must be positive, got {self.t_ramp}")
        elif self.kind == "sqrt_temperature_feedback":
            if not self.T0 > 0.0:
                raise PreconditionError(f"reference temperature must be positive, got {self.T0}")
        else:
            raise PreconditionError(f"unknown modifier kind {self.kind!r}")


def from_microscopic(micro, density, name=""):
    """Build a macroscopic material from microscopic data in barns.

    Parameters
    ----------
    micro : dict
        ``sigma_t``, ``nu_sigma_f``, ``chi`` (length G), ``scattering``
        (G x G, destination rows) in barns and ``velocity`` in cm/s.
        Optional ``nu`` (default 1, so fission rates are reported as
        production rates).
    density : float
        Atom density in atoms/(b cm).

    Returns
    -------
    MultiGroupMaterial
        With every cross section equal to ``density * sigma`` and
        ``D = 1 / (3 * density * sigma_t)``.
    """
    if not density > 0.0:
        raise PreconditionError(f"atom density must be positive, got {density}")
    sigma_t = np.asarray(micro["sigma_t"], dtype=float)
    nu_sigma_f = np.asarray(micro["nu_sigma_f"], dtype=float)
    scattering = np.asarray(micro["scattering"], dtype=float)
    for key, arr in (("sigma_t", sigma_t), ("nu_sigma_f", nu_sigma_f), ("scattering", scattering)):
        if np.any(arr < 0.0):
            raise PreconditionError(f"negative microscopic {key}")
    nu = float(micro.get("nu", 1.0))
    Sigma_t = density * sigma_t
    return MultiGroupMaterial(
        sigma_t=Sigma_t,
        sigma_s=density * scattering,
        sigma_f=density * nu_sigma_f / nu,
        nu_p=nu,
        nu_d=0.0,
        chi_p=micro["chi"],
        D=1.0 / (3.0 * Sigma_t),
        velocity=micro["velocity"],
        name=name,
    )


def ramped_absorption(base_sigma_a, t, delta, t_ramp):
    """Linearly ramped absorption, constant after ``t_ramp``."""
    if t < 0.0:
        raise PreconditionError(f"ramp time must be non-negative, got {t}")
    if t < t_ramp:
        return base_sigma_a * (1.0 + t / t_ramp * delta)
    return base_sigma_a * (1.0 + delta)


def feedback_absorption(sigma_ref, T, T0, gamma):
    """Square-root temperature (Doppler-like) feedback on absorption."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0.0) or T0 <= 0.0:
        raise PreconditionError("temperatures must be positive")
    out = sigma_ref * (1.0 + gamma * (np.sqrt(T) - np.sqrt(T0)))
    return out if out.ndim else float(out)


def load_library(path=None):
    """Read the material library (bundled copy unless ``path`` is given)."""
    if path is None:
        text = resources.files("podmci.data").joinpath("materials.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return yaml.safe_load(text)


def sphere_material(density=None, sigma_s_01=None, library=None):
    """Three-group sphere material.

    ``sigma_s_01`` overrides the fast to epithermal microscopic transfer
    (barns); the total cross sections are left untouched.
    """
    lib = (library or load_library())["sphere"]
    rho = lib["density"] if density is None else density
    groups = lib["groups"]
    scattering = np.array(lib["scattering"], dtype=float)
    if sigma_s_01 is not None:
        scattering[1, 0] = sigma_s_01
    micro = {
        "sigma_t": [g["sigma_t"] for g in groups],
        "nu_sigma_f": [g["nu_sigma_f"] for g in groups],
        "chi": [g["chi"] for g in groups],
        "velocity": [g["velocity_cm_per_us"] * 1.0e6 for g in groups],
        "scattering": scattering,
    }
    return from_microscopic(micro, rho, name="sphere")


def lra_materials(use_printed_scattering=False, use_printed_absorption=False, library=None):
    """LRA region materials keyed by region id (1-6).

    The two ``use_printed_*`` switches select the transfer cross section
    of regions 3/4 and the reflector fast absorption exactly as printed in
    the source table instead of the standard benchmark values.

    Removal is carried through ``sigma_t = sigma_a + sigma_s_12`` for the
    fast group; axial leakage is kept separately as ``buckling`` and folded
    in as ``D * B^2`` by the operator. Precursor yields are normalized to
    sum to one; the delayed production magnitude comes from ``nu_d``.
    Region 6 (the rod-withdrawal region) carries region 3 data.
    """
    lib = (library or load_library())["lra"]
    common = lib["common"]
    prec = lib["precursors"]
    lam = np.array([p["lambda"] for p in prec], dtype=float)
    yields = np.array([p["yield"] for p in prec], dtype=float)
    gamma = yields / yields.sum()
    J = len(lam)
    chi_d = np.outer(common["chi_d"], np.ones(J))
    nu = common["nu"]
    typo = lib.get("scattering_typo", {})
    refl_typo = lib.get("reflector_absorption_typo", {})

    mats = {}
    for rid, data in lib["regions"].items():
        rid = int(rid)
        s12 = data["sigma_s_12"]
        if use_printed_scattering and rid in typo.get("regions", []):
            s12 = typo["sigma_s_12"]
        sigma_a = np.array(data["sigma_a"], dtype=float)
        if use_printed_absorption and rid == refl_typo.get("region"):
            sigma_a[0] = refl_typo["sigma_a_fast"]
        nsf = np.array(data.get("nu_sigma_f", [0.0, 0.0]), dtype=float)
        sigma_s = np.array([[0.0, 0.0], [s12, 0.0]])
        mats[rid] = MultiGroupMaterial(
            sigma_t=sigma_a + np.array([s12, 0.0]),
            sigma_s=sigma_s,
            sigma_f=nsf / nu,
            nu_p=common["nu_p"],
            nu_d=common["nu_d"],
            chi_p=common["chi_p"],
            chi_d=chi_d,
            D=data["D"],
            velocity=common["velocity"],
            decay_constants=lam,
            precursor_yields=gamma,
            buckling=common["buckling"],
            sigma_a=sigma_a,
            name=f"lra-{rid}",
        )
    ramp = lib["transient"]
    mats[int(ramp["ramp_region"])] = mats[int(ramp["ramp_base_region"])].with_(name="lra-R")
    return mats
