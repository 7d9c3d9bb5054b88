"""Parameter sampling, error metrics and cross-validation of ROMs."""

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import PodMciError, PreconditionError
from .rom import RomModel

__all__ = [
    "ParameterSpace",
    "relative_l2",
    "tensor_product_sample",
    "random_sample",
    "kfold_splits",
    "FoldResult",
    "CrossValidationReport",
    "cross_validate",
    "loocv",
]


@dataclass(frozen=True)
class ParameterSpace:
    """Box ``[lo, hi]`` per named dimension.

    Degenerate dimensions (``lo == hi``) are allowed for sampling, so a
    parameter can be pinned; everywhere else ``lo < hi`` is expected.
    """

    names: tuple
    lo: tuple
    hi: tuple
    units: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if not (len(self.names) == len(self.lo) == len(self.hi)) or not self.names:
            raise PreconditionError("names, lo and hi must have the same non-zero length")
        if len(set(self.names)) != len(self.names):
            raise PreconditionError(f"duplicate parameter names {self.names}")
        for n, a, b in zip(self.names, self.lo, self.hi):
            if not a <= b:
                raise PreconditionError(f"parameter {n!r}: lower bound {a} exceeds upper bound {b}")

    @classmethod
    def around(cls, names, center, rel_halfwidth, units=()):
        """Box ``center * (1 -/+ rel_halfwidth)`` per dimension."""
        c = np.asarray(center, dtype=float)
        h = np.abs(c) * np.broadcast_to(np.asarray(rel_halfwidth, dtype=float), c.shape)
        return cls(tuple(names), tuple(c - h), tuple(c + h), tuple(units))

    @property
    def dim(self):
        return len(self.names)

    @property
    def bounds(self):
        return np.array([self.lo, self.hi]).T


def relative_l2(pred, truth):
    """``|pred - truth|_2 / |truth|_2`` over flattened arrays."""
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise PreconditionError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    nt = np.linalg.norm(truth)
    if nt == 0.0:
        raise PreconditionError("reference has zero norm")
    return float(np.linalg.norm(pred - truth) / nt)


def tensor_product_sample(space, points_per_dim):
    """Equidistant endpoint-inclusive grid; last dimension varies fastest.

    Returns an array of shape ``(prod(points_per_dim), d)``.
    """
    n = np.broadcast_to(np.asarray(points_per_dim, dtype=int), (space.dim,))
    if np.any(n < 2):
        raise PreconditionError(f"need at least 2 points per dimension, got {n.tolist()}")
    axes = [np.linspace(a, b, k) for a, b, k in zip(space.lo, space.hi, n)]
    return np.array(list(itertools.product(*axes)), dtype=float)


def random_sample(space, n, seed):
    """``n`` uniform i.i.d. points in the box from a PCG64 stream."""
    if n < 1:
        raise PreconditionError(f"sample count must be positive, got {n}")
    rng = np.random.default_rng(seed)
    lo = np.asarray(space.lo)
    return lo + rng.random((n, space.dim)) * (np.asarray(space.hi) - lo)


def kfold_splits(n, k, repeats=1, seed=0, shuffle=True):
    """Shuffled k-fold partitions.

    Returns a list of ``(repeat, fold, train, test)``. Within a repeat the
    first ``n % k`` folds hold one extra index. With ``shuffle=False`` the
    folds are contiguous blocks of ``range(n)``.
    """
    if not 2 <= k <= n:
        raise PreconditionError(f"need 2 <= k <= n, got k={k}, n={n}")
    if repeats < 1:
        raise PreconditionError("repeats must be positive")
    rng = np.random.default_rng(seed)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    out = []
    for rep in range(repeats):
        perm = rng.permutation(n) if shuffle else np.arange(n)
        for f in range(k):
            test = np.sort(perm[bounds[f]:bounds[f + 1]])
            train = np.sort(np.concatenate([perm[: bounds[f]], perm[bounds[f + 1]:]]))
            out.append((rep, f, train, test))
    return out


@dataclass
class FoldResult:
    repeat: int
    fold: int
    train: np.ndarray
    test: np.ndarray
    errors: np.ndarray
    rank: int = 0


@dataclass
class CrossValidationReport:
    """Per-fold held-out errors for one cross-validation study."""

    folds: list
    k: int
    repeats: int
    seed: object = None
    notes: dict = field(default_factory=dict)

    @property
    def errors(self):
        return np.concatenate([f.errors for f in self.folds]) if self.folds else np.zeros(0)

    @property
    def mean(self):
        return float(self.errors.mean())

    @property
    def max(self):
        return float(self.errors.max())

    @property
    def min(self):
        return float(self.errors.min())

    def per_repeat(self):
        """Mean and max error of each repeat (one cross-validation set).

        Returns arrays ``(means, maxes)`` of length ``repeats``.
        """
        means = np.empty(self.repeats)
        maxes = np.empty(self.repeats)
        for r in range(self.repeats):
            e = np.concatenate([f.errors for f in self.folds if f.repeat == r])
            means[r], maxes[r] = e.mean(), e.max()
        return means, maxes

    def to_csv(self, path):
        """One row per held-out snapshot, then a summary block."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "repeat", "fold", "snapshot", "error"])
            for f in self.folds:
                for idx, e in zip(f.test, f.errors):
                    w.writerow([self.seed, f.repeat, f.fold, int(idx), repr(float(e))])
            w.writerow([])
            w.writerow(["statistic", "value"])
            w.writerow(["k", self.k])
            w.writerow(["repeats", self.repeats])
            w.writerow(["mean", repr(self.mean)])
            w.writerow(["max", repr(self.max)])
            w.writerow(["min", repr(self.min)])


def cross_validate(snapshots, rule, k, repeats=1, seed=0, metric=relative_l2):
    """Repeated k-fold cross-validation of the POD-MCI model.

    Each fold trains on the complement of its test set and records the
    held-out error of every test snapshot.
    """
    M, d = snapshots.params.shape
    splits = kfold_splits(M, k, repeats, seed, shuffle=k < M)
    folds = []
    for rep, f, tr, te in splits:
        try:
            model = RomModel.train(snapshots.subset(tr), rule)
        except PodMciError as exc:
            raise type(exc)(f"fold {f} of repeat {rep} failed: {exc}") from exc
        pred = model.predict_batch(snapshots.params[te]).values
        errs = np.array([metric(pred[i], snapshots.Y[:, j]) for i, j in enumerate(te)])
        folds.append(FoldResult(rep, f, tr, te, errs, model.rank))
    return CrossValidationReport(folds, k, repeats, seed)


def loocv(snapshots, rule, metric=relative_l2):
    """Leave-one-out: k-fold with ``k = M`` and no shuffling."""
    M, d = snapshots.params.shape
    if M < d + 3:
        raise PreconditionError(f"leave-one-out with {M} snapshots in {d} dimensions leaves folds untrainable")
    return cross_validate(snapshots, rule, M, 1, None, metric)
