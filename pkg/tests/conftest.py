"""Shared fixtures: sphere snapshot sets and a cached LRA store."""

import os

import numpy as np
import pytest

from podmci.cli import load_preset, run_sweep
from podmci.fom import SphereProblem
from podmci.io import SnapshotStore
from podmci.rom import stack_snapshots
from podmci.validation import ParameterSpace, tensor_product_sample

R_CRIT = 6.1612


@pytest.fixture(scope="session")
def sphere1d_records():
    problem = SphereProblem()
    radii = np.linspace(R_CRIT * 0.975, R_CRIT * 1.025, 21)
    return radii, [problem.simulate(radius=r) for r in radii]


@pytest.fixture(scope="session")
def sphere1d_set(sphere1d_records):
    radii, recs = sphere1d_records
    return stack_snapshots([r.flux for r in recs], radii, ("radius",))


@pytest.fixture(scope="session")
def sphere3d_records():
    problem = SphereProblem()
    space = ParameterSpace(("radius", "density", "sigma_s_01"), (5.94, 0.0495, 1.387), (6.0, 0.05, 1.46))
    pts = tensor_product_sample(space, 4)
    return pts, [problem.simulate(radius=p[0], density=p[1], sigma_s_01=p[2]) for p in pts]


@pytest.fixture(scope="session")
def sphere3d_set(sphere3d_records):
    pts, recs = sphere3d_records
    return stack_snapshots([r.flux for r in recs], pts, ("radius", "density", "sigma_s_01"))


@pytest.fixture(scope="session")
def lra_store(request):
    """The 64-run LRA sweep, kept in the pytest cache and resumed if partial."""
    root = request.config.cache.mkdir("podmci-lra")
    cfg = load_preset("lra", root)
    workers = int(os.environ.get("PODMCI_WORKERS", min(4, os.cpu_count() or 1)))
    run_sweep(cfg, workers=workers, out=lambda msg: None)
    return cfg, SnapshotStore.open(root / "lra" / "store")


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and assert one acceptance line: ``verdict(label, ok, detail)``."""
    def _verdict(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
