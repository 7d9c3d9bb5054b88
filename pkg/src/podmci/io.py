"""Persistence: simulation records, snapshot stores, ROM files, configs, CSV.

Binary layouts
--------------
All integers are unsigned little-endian, all floats IEEE-754 binary64
little-endian, arrays row-major.

Record file (``.rec``)::

    8s   magic  b"PMCIREC\\0"
    u32  version (1)
    u32  d, then d x f64 parameter point
    u32  number of arrays n
    n x { u16 name length, name (utf-8), u8 ndim, ndim x u64 dims, f64 data }
    u32  length, then utf-8 JSON of the diagnostics dict

ROM file (``.rom``)::

    8s   magic  b"PMCIROM\\0"
    u32  version (1)
    u32  d, r, u64 dim, u32 M, u32 number of singular values S
    u32  ndim, ndim x u64 QoI shape
    f64  modes (dim x r), singular values (S), coordinates (r x M),
         training params (M x d), scaling lo (d), scaling hi (d),
         kernel weights (M x r), polynomial coefficients ((d+1) x r)
    u32  length, then utf-8 JSON metadata (units, parameter names)
"""

import csv
import hashlib
import json
import logging
import os
import struct
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError, FormatError, PreconditionError
from .fom.record import SimulationRecord
from .rom import ParameterScaling, PodBasis, QoiTensor, RomModel, TpsInterpolant

__all__ = [
    "RECORD_MAGIC",
    "ROM_MAGIC",
    "write_record",
    "read_record",
    "SnapshotStore",
    "save_rom",
    "load_rom",
    "QOI_SELECTORS",
    "extract_qoi",
    "load_config",
    "validate_config",
    "CONFIG_SCHEMA",
    "write_csv",
    "write_scree_csv",
    "histogram_csv",
]

log = logging.getLogger(__name__)

RECORD_MAGIC = b"PMCIREC\0"
ROM_MAGIC = b"PMCIROM\0"
VERSION = 1
_F8 = np.dtype("<f8")


# ---------------------------------------------------------------- records

def _pack_array(name, arr):
    arr = np.ascontiguousarray(arr, dtype=_F8)
    nb = name.encode()
    head = struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


class _Reader:
    def __init__(self, data, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def floats(self, shape):
        n = int(np.prod(shape, dtype=np.int64))
        end = self.pos + 8 * n
        if end > len(self.data):
            raise FormatError(f"{self.path}: truncated array payload")
        arr = np.frombuffer(self.data, dtype=_F8, count=n, offset=self.pos).reshape(shape)
        self.pos = end
        return arr.astype(float)

    def text(self):
        (n,) = self.take("<I")
        raw = self.data[self.pos:self.pos + n]
        if len(raw) != n:
            raise FormatError(f"{self.path}: truncated metadata")
        self.pos += n
        return raw.decode()


def _check_magic(reader, magic):
    (m,) = reader.take("8s")
    if m != magic:
        raise FormatError(f"{reader.path}: bad magic {m!r}, expected {magic!r}")
    (v,) = reader.take("<I")
    if v != VERSION:
        raise FormatError(f"{reader.path}: unsupported version {v}")


def write_record(path, record, params=None):
    """Write a :class:`SimulationRecord` in the record layout above."""
    p = np.asarray(record.params if params is None else params, dtype=_F8).ravel()
    arrays = record.arrays()
    buf = [RECORD_MAGIC, struct.pack("<II", VERSION, p.size), p.tobytes(),
           struct.pack("<I", len(arrays))]
    buf += [_pack_array(k, v) for k, v in arrays.items()]
    diag = json.dumps(record.diagnostics, default=float).encode()
    buf += [struct.pack("<I", len(diag)), diag]
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(buf))
    os.replace(tmp, path)


def read_record(path):
    """Inverse of :func:`write_record`."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_magic(r, RECORD_MAGIC)
    (d,) = r.take("<I")
    params = r.floats((d,))
    (n,) = r.take("<I")
    arrays = {}
    for _ in range(n):
        (ln,) = r.take("<H")
        name = r.data[r.pos:r.pos + ln].decode()
        r.pos += ln
        (ndim,) = r.take("<B")
        shape = r.take(f"<{ndim}Q")
        arrays[name] = r.floats(shape)
    missing = set(SimulationRecord.ARRAY_FIELDS) - set(arrays)
    if missing:
        raise FormatError(f"{path}: missing arrays {sorted(missing)}")
    diagnostics = json.loads(r.text())
    return SimulationRecord(**arrays, params=params, diagnostics=diagnostics)


# ---------------------------------------------------------------- store

class SnapshotStore:
    """Directory of record files plus ``manifest.json``.

    The manifest holds the study name, parameter names and bounds, the
    record shape, the time step, a hash of the solver settings and one
    entry per completed run. A sweep that is interrupted can be resumed:
    :meth:`missing` lists the points not yet stored.
    """

    MANIFEST = "manifest.json"

    def __init__(self, root, manifest):
        self.root = Path(root)
        self.manifest = manifest

    @classmethod
    def create(cls, root, study, parameter_names, bounds=None, settings=None, dt=None):
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        names = list(parameter_names)
        if len(set(names)) != len(names):
            raise PreconditionError(f"duplicate parameter names {names}")
        settings = settings or {}
        manifest = {
            "study": study,
            "parameter_names": names,
            "bounds": None if bounds is None else np.asarray(bounds, dtype=float).tolist(),
            "dt": dt,
            "settings": settings,
            "settings_hash": settings_hash(settings),
            "shape": None,
            "records": [],
        }
        path = root / cls.MANIFEST
        if path.exists():
            store = cls.open(root)
            if store.manifest["settings_hash"] != manifest["settings_hash"] or \
                    store.manifest["parameter_names"] != names:
                raise FormatError(f"{root}: existing store was made with different settings")
            return store
        store = cls(root, manifest)
        store._save()
        return store

    @classmethod
    def open(cls, root):
        path = Path(root) / cls.MANIFEST
        try:
            with open(path) as fh:
                manifest = json.load(fh)
        except FileNotFoundError:
            raise FormatError(f"{root}: no manifest found") from None
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: corrupt manifest ({exc})") from exc
        for key in ("study", "parameter_names", "records"):
            if key not in manifest:
                raise FormatError(f"{path}: manifest lacks {key!r}")
        return cls(root, manifest)

    def _save(self):
        path = self.root / self.MANIFEST
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        with open(tmp, "w") as fh:
            json.dump(self.manifest, fh, indent=1)
        os.replace(tmp, path)

    @property
    def n_params(self):
        return len(self.manifest["parameter_names"])

    def __len__(self):
        return len(self.manifest["records"])

    @property
    def params(self):
        return np.array([e["params"] for e in self.manifest["records"]], dtype=float).reshape(-1, self.n_params)

    def _check_point(self, params):
        p = np.asarray(params, dtype=float).ravel()
        if p.size != self.n_params:
            raise PreconditionError(f"store has {self.n_params} parameters, got a {p.size}-dimensional point")
        return p

    def find(self, params):
        p = self._check_point(params)
        for i, e in enumerate(self.manifest["records"]):
            if np.array_equal(np.asarray(e["params"]), p):
                return i
        return None

    def add(self, params, record, wall_time=None):
        """Write ``record`` for ``params`` and register it in the manifest."""
        p = self._check_point(params)
        if self.find(p) is not None:
            raise PreconditionError(f"parameter point {p.tolist()} is already stored")
        shape = {"n_times": int(record.flux.shape[0]), "n_cells": int(record.flux.shape[1]),
                 "n_groups": int(record.flux.shape[2]), "n_precursors": int(record.precursors.shape[2])}
        if self.manifest["shape"] is None:
            self.manifest["shape"] = shape
        elif self.manifest["shape"] != shape:
            raise FormatError(f"record shape {shape} differs from store shape {self.manifest['shape']}")
        name = f"run_{len(self.manifest['records']):05d}.rec"
        write_record(self.root / name, record, p)
        self.manifest["records"].append({"params": p.tolist(), "file": name, "wall_time": wall_time})
        self._save()
        return len(self.manifest["records"]) - 1

    def read(self, index):
        entry = self.manifest["records"][index]
        rec = read_record(self.root / entry["file"])
        shape = self.manifest["shape"]
        if shape and rec.flux.shape[:3] != (shape["n_times"], shape["n_cells"], shape["n_groups"]):
            raise FormatError(f"{entry['file']}: shape {rec.flux.shape} disagrees with the manifest")
        return rec

    def records(self):
        for i in range(len(self)):
            yield self.read(i)

    def missing(self, points):
        """Rows of ``points`` with no stored record."""
        points = np.atleast_2d(points)
        return np.array([p for p in points if self.find(p) is None]).reshape(-1, points.shape[1])

    def snapshot_set(self, selector):
        """Stack one QoI of every stored record into a ``SnapshotSet``."""
        from .rom import stack_snapshots

        tensors = [extract_qoi(rec, selector) for rec in self.records()]
        return stack_snapshots(tensors, self.params, self.manifest["parameter_names"])


def settings_hash(settings):
    blob = json.dumps(settings, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------- ROM files

def save_rom(path, model):
    b = model.basis
    d, r, dim, M = model.n_params, b.rank, model.dim, model.n_training
    s = b.singular_values
    shape = model.shape
    meta = json.dumps({"units": model.units, "parameter_names": list(model.parameter_names)}).encode()
    parts = [
        ROM_MAGIC,
        struct.pack("<IIIQII", VERSION, d, r, dim, M, s.size),
        struct.pack("<I", len(shape)), struct.pack(f"<{len(shape)}Q", *shape),
    ]
    for arr in (b.modes, s, b.coordinates, model.params, model.scaling.lo, model.scaling.hi,
                model.interpolant.weights, model.interpolant.poly):
        parts.append(np.ascontiguousarray(arr, dtype=_F8).tobytes())
    parts += [struct.pack("<I", len(meta)), meta]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_rom(path):
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), path)
    _check_magic(rd, ROM_MAGIC)
    d, r, dim, M, S = rd.take("<IIQII")
    (ndim,) = rd.take("<I")
    shape = rd.take(f"<{ndim}Q")
    if int(np.prod(shape, dtype=np.int64)) != dim:
        raise FormatError(f"{path}: shape {shape} inconsistent with dimension {dim}")
    modes = rd.floats((dim, r))
    s = rd.floats((S,))
    coords = rd.floats((r, M))
    params = rd.floats((M, d))
    lo, hi = rd.floats((d,)), rd.floats((d,))
    weights = rd.floats((M, r))
    poly = rd.floats((d + 1, r))
    meta = json.loads(rd.text())
    scaling = ParameterScaling(lo, hi)
    interp = TpsInterpolant(scaling(params), None, weights=weights, poly=poly)
    basis = PodBasis(modes, s, r, coords)
    return RomModel(basis, scaling, params, interp, shape, meta.get("units", ""),
                    meta.get("parameter_names", ()))


# ---------------------------------------------------------------- QoIs

QOI_SELECTORS = ("full_field", "final_power_profile", "total_power_series", "power_density_series",
                 "peak_power_profile", "scalar_peak_power")


def extract_qoi(record, selector):
    """Quantity of interest from one record.

    ``full_field``            flux, (times, cells, groups)
    ``final_power_profile``   power density at the last step, (cells,)
    ``total_power_series``    space-integrated power per step, (times,)
    ``power_density_series``  power density, (times, cells)
    ``peak_power_profile``    power density at the step of maximum average power
    ``scalar_peak_power``     space-integrated power at that step, (1,)
    """
    if record.flux.size == 0 or len(record.times) == 0:
        raise PreconditionError("record is empty")
    if selector == "full_field":
        return QoiTensor(record.flux, "1/cm2/s")
    if selector == "final_power_profile":
        return QoiTensor(record.power_density[-1], "W/cm3")
    if selector == "total_power_series":
        return QoiTensor(record.total_power, "W")
    if selector == "power_density_series":
        return QoiTensor(record.power_density, "W/cm3")
    k = record.peak_index()
    if selector == "peak_power_profile":
        return QoiTensor(record.power_density[k], "W/cm3")
    if selector == "scalar_peak_power":
        return QoiTensor(np.array([record.total_power[k]]), "W")
    raise PreconditionError(f"unknown QoI selector {selector!r}; choose from {QOI_SELECTORS}")


# ---------------------------------------------------------------- config

def _load_schema():
    return json.loads(resources.files("podmci.data").joinpath("config_schema.json").read_text())


CONFIG_SCHEMA = _load_schema()


def validate_config(cfg):
    """Raise :class:`ConfigError` listing every schema violation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    problems = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(e.path)):
        loc = "/".join(str(p) for p in err.path) or "<root>"
        problems.append(f"{loc}: {err.message}")
    if not problems:
        for i, p in enumerate(cfg["parameters"]):
            if not p["lo"] <= p["hi"]:
                problems.append(f"parameters/{i}: lo {p['lo']} exceeds hi {p['hi']}")
        names = [p["name"] for p in cfg["parameters"]]
        if len(set(names)) != len(names):
            problems.append(f"parameters: duplicate names {names}")
        if cfg["problem"]["name"] == "external" and "data" not in cfg["problem"]:
            problems.append("problem: external data needs a 'data' path")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(source):
    """Parse a YAML config (path or mapping) and validate it.

    Relative paths inside the file are resolved against its directory.
    """
    if isinstance(source, dict):
        cfg, base = source, Path.cwd()
    else:
        try:
            with open(source) as fh:
                cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError([f"{source}: not valid YAML ({exc})"]) from exc
        base = Path(source).resolve().parent
    if not isinstance(cfg, dict):
        raise ConfigError(["<root>: configuration must be a mapping"])
    validate_config(cfg)
    cfg = dict(cfg)
    out = dict(cfg.get("output", {}))
    out.setdefault("dir", "out")
    if not Path(out["dir"]).is_absolute():
        out["dir"] = str(base / out["dir"])
    cfg["output"] = out
    if cfg["problem"].get("data") and not Path(cfg["problem"]["data"]).is_absolute():
        cfg["problem"] = {**cfg["problem"], "data": str(base / cfg["problem"]["data"])}
    return cfg


# ---------------------------------------------------------------- CSV

def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_scree_csv(path, singular_values, rank=None):
    s = np.asarray(singular_values, dtype=float)
    rows = [(i + 1, s[i], s[i] / s[0], int(rank is not None and i < rank)) for i in range(s.size)]
    write_csv(path, ["mode", "sigma", "sigma_over_sigma1", "kept"], rows)


def histogram_csv(path, values, bins=50):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    write_csv(path, ["bin_lo", "bin_hi", "count"], zip(edges[:-1], edges[1:], counts))
