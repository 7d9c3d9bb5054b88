"""POD mode-coefficient interpolation.

Snapshots are flattened into the columns of ``Y``. A truncated SVD gives
the modes ``Phi`` and training coordinates ``a = Sigma_r V_r^T``; each row
of ``a`` is interpolated over parameter space with a thin-plate spline
plus a linear tail, and predictions are ``Phi @ a(mu)``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import PreconditionError, SolverError
from .numerics import svd

__all__ = [
    "QoiTensor",
    "SnapshotSet",
    "stack_snapshots",
    "unflatten",
    "TruncationRule",
    "select_rank",
    "PodBasis",
    "fit_pod",
    "tps_kernel",
    "ParameterScaling",
    "TpsInterpolant",
    "Prediction",
    "RomModel",
    "train",
    "predict",
    "compression_fraction",
    "ReconstructionReport",
    "reconstruction_error",
]

log = logging.getLogger(__name__)


@dataclass
class QoiTensor:
    """A quantity of interest for one parameter point.

    ``values`` has any shape; by convention the leading axis is time, then
    spatial node, then component, so row-major flattening gives the
    time-major stacking used for snapshots.
    """

    values: np.ndarray
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @property
    def shape(self):
        return self.values.shape

    def flatten(self):
        return self.values.reshape(-1)


@dataclass
class SnapshotSet:
    """Snapshot matrix ``Y`` (dim x M) with its parameter points (M x d)."""

    Y: np.ndarray
    params: np.ndarray
    shape: tuple
    units: str = ""
    parameter_names: tuple = ()

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        self.params = np.asarray(self.params, dtype=float)
        if self.params.ndim == 1:
            self.params = self.params[:, None]
        self.shape = tuple(int(s) for s in self.shape)
        if self.params.shape[0] != self.Y.shape[1]:
            raise PreconditionError(
                f"{self.Y.shape[1]} snapshots but {self.params.shape[0]} parameter points")
        if int(np.prod(self.shape)) != self.Y.shape[0]:
            raise PreconditionError(f"shape {self.shape} does not match {self.Y.shape[0]} rows")
        if not np.all(np.isfinite(self.Y)):
            raise PreconditionError("snapshot matrix contains non-finite entries")
        dup = _duplicate_points(self.params)
        if dup:
            raise PreconditionError(f"duplicated parameter points at columns {dup}")

    @property
    def n_snapshots(self):
        return self.Y.shape[1]

    @property
    def dim(self):
        return self.Y.shape[0]

    @property
    def n_params(self):
        return self.params.shape[1]

    def subset(self, columns):
        columns = np.asarray(columns, dtype=int)
        return SnapshotSet(self.Y[:, columns], self.params[columns], self.shape, self.units,
                           self.parameter_names)

    def snapshot(self, k):
        return unflatten(self.Y[:, k], self.shape)


def _duplicate_points(params):
    seen = {}
    dups = []
    for k, p in enumerate(params):
        key = tuple(p)
        if key in seen:
            dups.append((seen[key], k))
        else:
            seen[key] = k
    return dups


def stack_snapshots(records, params, parameter_names=()):
    """Place each flattened QoI as one column of the snapshot matrix.

    Parameters
    ----------
    records : sequence of QoiTensor or array_like
        All with the same shape.
    params : array_like, shape (M, d) or (M,)

    Returns
    -------
    SnapshotSet
    """
    tensors = [r if isinstance(r, QoiTensor) else QoiTensor(r) for r in records]
    if len(tensors) < 2:
        raise PreconditionError(f"need at least 2 snapshots, got {len(tensors)}")
    shape = tensors[0].shape
    for k, t in enumerate(tensors):
        if t.shape != shape:
            raise PreconditionError(f"snapshot {k} has shape {t.shape}, expected {shape}")
    params = np.asarray(params, dtype=float)
    if params.ndim == 1:
        params = params[:, None]
    Y = np.column_stack([t.flatten() for t in tensors])
    return SnapshotSet(Y, params, shape, tensors[0].units, tuple(parameter_names))


def unflatten(column, shape):
    """Inverse of the column flattening."""
    return np.asarray(column).reshape(shape)


@dataclass(frozen=True)
class TruncationRule:
    """``kind`` is ``"fixed_rank"``, ``"sv_cutoff"`` or ``"energy"``."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind == "fixed_rank":
            if int(self.value) != self.value or self.value < 1:
                raise PreconditionError(f"fixed rank must be a positive integer, got {self.value}")
        elif self.kind in ("sv_cutoff", "energy"):
            if not 0.0 < self.value < 1.0:
                raise PreconditionError(f"{self.kind} threshold must lie in (0, 1), got {self.value}")
        else:
            raise PreconditionError(f"unknown truncation rule {self.kind!r}")

    @classmethod
    def fixed(cls, r):
        return cls("fixed_rank", int(r))

    @classmethod
    def cutoff(cls, tau):
        return cls("sv_cutoff", float(tau))

    @classmethod
    def energy_fraction(cls, tau):
        return cls("energy", float(tau))


def select_rank(singular_values, rule):
    """Number of modes kept under ``rule``.

    ``sv_cutoff`` keeps the modes with ``sigma_i / sigma_1 >= tau``, all of
    them if none fall below. ``energy`` keeps the fewest modes whose squared
    singular values hold at least ``1 - tau`` of the total; the test is done
    on the discarded tail so round-off near 1 cannot inflate the rank.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise PreconditionError("singular values must be a non-empty vector")
    if np.any(s < 0.0) or np.any(np.diff(s) > 1e-12 * max(s[0], 1.0)):
        raise PreconditionError("singular values must be non-negative and descending")
    if s[0] == 0.0:
        raise PreconditionError("all singular values are zero")
    M = s.size
    if rule.kind == "fixed_rank":
        r = int(rule.value)
        if r > M:
            raise PreconditionError(f"fixed rank {r} exceeds the {M} available modes")
        return r
    if rule.kind == "sv_cutoff":
        below = np.nonzero(s / s[0] < rule.value)[0]
        return int(below[0]) if below.size else M
    e = s**2
    tail = np.cumsum(e[::-1])[::-1] / e.sum()
    # tail[r] = energy discarded when keeping r modes
    ok = np.nonzero(np.append(tail[1:], 0.0) <= rule.value)[0]
    return int(ok[0]) + 1


@dataclass
class PodBasis:
    """Truncated POD of a snapshot set."""

    modes: np.ndarray
    singular_values: np.ndarray
    rank: int
    coordinates: np.ndarray

    def project(self, Y):
        return self.modes.T @ Y

    def reconstruct(self, coordinates=None):
        a = self.coordinates if coordinates is None else coordinates
        return self.modes @ a


def fit_pod(snapshots, rule):
    """Thin SVD of the snapshot matrix truncated by ``rule``.

    No mean is subtracted. The full singular spectrum is kept for
    diagnostics.
    """
    res = svd(snapshots.Y)
    r = select_rank(res.singular_values, rule)
    modes = np.ascontiguousarray(res.U[:, :r])
    coords = res.singular_values[:r, None] * res.V[:, :r].T
    return PodBasis(modes, res.singular_values.copy(), r, coords)


def tps_kernel(r):
    """Thin-plate spline ``r^2 log r`` with value 0 at ``r = 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise PreconditionError("distances must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r > 0.0, r * r * np.log(np.where(r > 0.0, r, 1.0)), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ParameterScaling:
    """Per-dimension affine map of the training box onto ``[0, 1]``.

    A dimension with zero width is mapped to 0.
    """

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def from_points(cls, points):
        points = np.atleast_2d(points)
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def width(self):
        w = self.hi - self.lo
        return np.where(w > 0.0, w, 1.0)

    def __call__(self, points):
        return (np.atleast_2d(points) - self.lo) / self.width

    def contains(self, points, rtol=1e-12):
        p = np.atleast_2d(points)
        slack = rtol * self.width
        return np.all((p >= self.lo - slack) & (p <= self.hi + slack), axis=1)


def _pairwise_distances(X, Y):
    d2 = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.sqrt(np.maximum(d2, 0.0))


class TpsInterpolant:
    """Thin-plate spline interpolant with a degree-1 polynomial tail.

    Fits several right-hand sides at once: ``values`` has shape (M, q), one
    column per interpolated quantity. Centers are already scaled.

    The linear system is
    ``[[K, P], [P^T, 0]] [w; c] = [f; 0]`` with ``K_ij = phi(|x_i - x_j|)``
    and ``P = [1, x]``.
    """

    def __init__(self, centers, values, weights=None, poly=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        M, d = self.centers.shape
        if weights is not None:
            self.weights = np.asarray(weights, dtype=float).reshape(M, -1)
            self.poly = np.asarray(poly, dtype=float).reshape(d + 1, -1)
            return
        values = np.asarray(values, dtype=float)
        values = values.reshape(M, -1)
        if M < d + 2:
            raise PreconditionError(f"thin-plate fit in {d} dimensions needs at least {d + 2} points, got {M}")
        dups = _duplicate_points(self.centers)
        if dups:
            raise SolverError(f"interpolation system is singular: duplicate training points {dups}")
        K = tps_kernel(_pairwise_distances(self.centers, self.centers))
        P = np.hstack([np.ones((M, 1)), self.centers])
        A = np.block([[K, P], [P.T, np.zeros((d + 1, d + 1))]])
        rhs = np.vstack([values, np.zeros((d + 1, values.shape[1]))])
        try:
            sol = scipy.linalg.solve(A, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SolverError(f"interpolation system is singular ({exc}); "
                              "training points may be collinear or affinely dependent") from exc
        if not np.all(np.isfinite(sol)):
            raise SolverError("interpolation solve produced non-finite weights")
        self.weights = sol[:M]
        self.poly = sol[M:]

    @property
    def n_outputs(self):
        return self.weights.shape[1]

    def __call__(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        K = tps_kernel(_pairwise_distances(x, self.centers))
        return K @ self.weights + self.poly[0] + x @ self.poly[1:]


@dataclass
class Prediction:
    """QoI prediction with the extrapolation flag(s)."""

    values: np.ndarray
    extrapolated: np.ndarray
    coordinates: np.ndarray = field(repr=False, default=None)


class RomModel:
    """Trained POD-MCI model.

    The ``r`` interpolants of the mode coordinates share their centers, so
    they are held in a single :class:`TpsInterpolant` with ``r`` outputs;
    each column is fitted independently of the others.
    """

    def __init__(self, basis, scaling, params, interpolant, shape, units="", parameter_names=()):
        self.basis = basis
        self.scaling = scaling
        self.params = np.atleast_2d(params)
        self.interpolant = interpolant
        self.shape = tuple(shape)
        self.units = units
        self.parameter_names = tuple(parameter_names)

    @property
    def rank(self):
        return self.basis.rank

    @property
    def n_params(self):
        return self.params.shape[1]

    @property
    def n_training(self):
        return self.params.shape[0]

    @property
    def dim(self):
        return self.basis.modes.shape[0]

    @classmethod
    def train(cls, snapshots, rule):
        M, d = snapshots.params.shape
        if M < d + 2:
            raise PreconditionError(f"{M} snapshots cannot support a thin-plate fit in {d} dimensions")
        basis = fit_pod(snapshots, rule)
        scaling = ParameterScaling.from_points(snapshots.params)
        interp = TpsInterpolant(scaling(snapshots.params), basis.coordinates.T)
        return cls(basis, scaling, snapshots.params.copy(), interp, snapshots.shape,
                   snapshots.units, snapshots.parameter_names)

    def coordinates(self, mu):
        """Interpolated mode coordinates, shape (r, n_points)."""
        mu = self._check(mu)
        return self.interpolant(self.scaling(mu)).T

    def _check(self, mu):
        mu = np.asarray(mu, dtype=float)
        if mu.ndim <= 1:
            mu = mu.reshape(1, -1)
        if mu.shape[1] != self.n_params:
            raise PreconditionError(f"parameter point has dimension {mu.shape[1]}, model expects {self.n_params}")
        return mu

    def predict(self, mu):
        """Prediction at one point, unflattened to the training shape."""
        mu = self._check(mu)
        if mu.shape[0] != 1:
            raise PreconditionError("predict takes one point; use predict_batch")
        a = self.coordinates(mu)
        inside = bool(self.scaling.contains(mu)[0])
        if not inside:
            log.warning("parameter point %s lies outside the training box", mu[0])
        return Prediction(unflatten(self.basis.modes @ a[:, 0], self.shape), np.array(not inside), a[:, 0])

    def predict_batch(self, mu, chunk=65536):
        """Predictions at many points, shape (n, dim) flattened."""
        mu = self._check(mu)
        out = np.empty((mu.shape[0], self.dim))
        for s in range(0, mu.shape[0], chunk):
            a = self.coordinates(mu[s:s + chunk])
            out[s:s + chunk] = (self.basis.modes @ a).T
        flags = ~self.scaling.contains(mu)
        if np.any(flags):
            log.debug("%d of %d points lie outside the training box", int(flags.sum()), len(flags))
        return Prediction(out, flags)


def train(snapshots, rule):
    """Fit a :class:`RomModel`."""
    return RomModel.train(snapshots, rule)


def predict(model, mu):
    return model.predict(mu)


def compression_fraction(model, snapshots=None):
    """``[r (dim + M) + d M] / (M dim)``: stored numbers over raw data."""
    dim = model.dim if snapshots is None else snapshots.dim
    M = model.n_training if snapshots is None else snapshots.n_snapshots
    d = model.n_params
    r = model.rank
    return (r * (dim + M) + d * M) / (M * dim)


@dataclass
class ReconstructionReport:
    per_snapshot: np.ndarray
    aggregate: float

    @property
    def mean(self):
        return float(self.per_snapshot.mean())

    @property
    def max(self):
        return float(self.per_snapshot.max())


def reconstruction_error(snapshots, basis):
    """Relative l2 projection errors ``|x - Phi Phi^T x| / |x|``.

    ``aggregate`` is the Frobenius-norm ratio over the whole set.
    """
    Y = snapshots.Y
    norms = np.linalg.norm(Y, axis=0)
    if np.any(norms == 0.0):
        raise PreconditionError(f"zero-norm snapshots at columns {np.nonzero(norms == 0.0)[0].tolist()}")
    R = Y - basis.modes @ (basis.modes.T @ Y)
    per = np.linalg.norm(R, axis=0) / norms
    agg = float(np.linalg.norm(R) / np.linalg.norm(Y))
    return ReconstructionReport(per, agg)
