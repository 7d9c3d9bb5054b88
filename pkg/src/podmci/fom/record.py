"""Time history container for one full-order run."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SimulationRecord"]


@dataclass
class SimulationRecord:
    """Fields of one transient at every time step, ``t = 0`` included.

    Array layouts (``Nt1 = N_t + 1`` snapshots, ``N`` cells):

    ========================  ==================
    ``times``                 (Nt1,)
    ``flux``                  (Nt1, N, G)
    ``precursors``            (Nt1, N, J)
    ``temperature``           (Nt1, N)
    ``power_density``         (Nt1, N)
    ``total_power``           (Nt1,)
    ``average_power``         (Nt1,)
    ``volumes``               (N,)
    ``core_mask``             (N,) of 0/1
    ========================  ==================
    """

    times: np.ndarray
    flux: np.ndarray
    precursors: np.ndarray
    temperature: np.ndarray
    power_density: np.ndarray
    total_power: np.ndarray
    average_power: np.ndarray
    volumes: np.ndarray
    core_mask: np.ndarray
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    diagnostics: dict = field(default_factory=dict)

    ARRAY_FIELDS = ("times", "flux", "precursors", "temperature", "power_density",
                    "total_power", "average_power", "volumes", "core_mask")

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def n_cells(self):
        return self.flux.shape[1]

    @property
    def n_groups(self):
        return self.flux.shape[2]

    def arrays(self):
        return {name: np.asarray(getattr(self, name)) for name in self.ARRAY_FIELDS}

    def peak_index(self):
        """Time step of the maximum average power."""
        return int(np.argmax(self.average_power))
