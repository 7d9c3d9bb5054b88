"""Acceptance criteria 1-9, one PASS/FAIL line each (see the terminal summary)."""

import time

import numpy as np
import pytest

from podmci.fom import DiscreteSystem, LraProblem, SphereProblem, solve_k_eigenvalue
from podmci.mesh import build_spherical_mesh
from podmci.physics import sphere_material
from podmci.rom import (SnapshotSet, TruncationRule, compression_fraction, fit_pod, reconstruction_error,
                        train)
from podmci.validation import ParameterSpace, cross_validate, loocv, random_sample, relative_l2

from test_fom import fv_manufactured_errors, tbdf2_global_errors

TAU = TruncationRule.energy_fraction(1e-8)


@pytest.fixture(scope="module")
def lra_sets(lra_store):
    _, store = lra_store
    return {q: store.snapshot_set(q) for q in ("power_density_series", "peak_power_profile", "scalar_peak_power")}


@pytest.fixture(scope="module")
def lra_fom_seconds(lra_store):
    _, store = lra_store
    return float(np.mean([e["wall_time"] for e in store.manifest["records"]]))


def test_1_fom_verification(verdict):
    t0 = time.perf_counter()
    e_t = tbdf2_global_errors()
    e_x = fv_manufactured_errors()
    rt = np.array(e_t[:-1]) / np.array(e_t[1:])
    rx = np.array(e_x[:-1]) / np.array(e_x[1:])
    wall = time.perf_counter() - t0
    ok = np.all(np.abs(rt - 4) <= 0.5) and np.all(np.abs(rx - 4) <= 0.8) and wall < 60
    verdict("1 TBDF-2 / FV order", ok, f"time ratios {np.round(rt, 3).tolist()}, "
            f"space ratios {np.round(rx, 3).tolist()}, {wall:.2f} s")


def test_2_sphere_criticality(verdict):
    mesh = build_spherical_mesh(6.1612, 100)
    k, _ = solve_k_eigenvalue(DiscreteSystem(mesh, {0: sphere_material(density=0.05)}))
    verdict("2 sphere k at r=6.1612", abs(k - 1.0) <= 0.002, f"k = {k:.6f}")


def test_3_lra_initialization(verdict, lra_store):
    _, store = lra_store
    problem = LraProblem()
    k, _ = problem.steady_state()
    rec = problem.simulate()
    t_peak = rec.times[rec.peak_index()]
    ok = abs(k - 0.9975) <= 0.0015 and abs(t_peak - 1.44) <= 0.03
    verdict("3 LRA k and peak time", ok, f"k = {k:.6f}, peak at t = {t_peak:.2f} s "
            f"({rec.average_power.max():.1f} W/cm3)")


def test_4_pod_structure(verdict, sphere1d_set, sphere3d_set, lra_sets):
    b1 = fit_pod(sphere1d_set, TAU)
    e1 = reconstruction_error(sphere1d_set, b1).aggregate
    b3 = fit_pod(sphere3d_set, TAU)
    bl = fit_pod(lra_sets["power_density_series"], TAU)
    # error-vs-rank curve against the first discarded singular value ratio
    s = b1.singular_values
    worst = 0.0
    for r in range(1, min(len(s), 12)):
        e = reconstruction_error(sphere1d_set, fit_pod(sphere1d_set, TruncationRule.fixed(r))).aggregate
        ratio = s[r] / s[0]
        worst = max(worst, abs(np.log10(e / ratio)))
    ok = (abs(b1.rank - 4) <= 1 and 3e-6 <= e1 <= 6e-5 and abs(b3.rank - 5) <= 1
          and abs(bl.rank - 20) <= 4 and worst <= 1.0)
    verdict("4 POD structure", ok, f"sphere-1d r={b1.rank} err={e1:.3e}, sphere-3d r={b3.rank}, "
            f"LRA r={bl.rank}, max |log10(err / sigma ratio)| = {worst:.2f}")


def _loo_line(name, rep, mean_tol, max_tol):
    ok = rep.mean <= mean_tol and rep.max <= max_tol
    return ok, f"{name} mean {100 * rep.mean:.3f}% (<= {100 * mean_tol:g}%), max {100 * rep.max:.3f}% (<= {100 * max_tol:g}%)"


def test_5a_loocv_sphere1d(verdict, sphere1d_set):
    verdict("5a LOOCV sphere-1d", *_loo_line("sphere-1d", loocv(sphere1d_set, TAU), 0.005, 0.03))


def test_5b_loocv_sphere3d(verdict, sphere3d_set):
    verdict("5b LOOCV sphere-3d", *_loo_line("sphere-3d", loocv(sphere3d_set, TAU), 0.008, 0.02))


@pytest.mark.slow
def test_5c_loocv_lra_series(verdict, lra_sets):
    rep = loocv(lra_sets["power_density_series"], TAU)
    verdict("5c LOOCV LRA power series", *_loo_line("LRA series", rep, 0.02, 0.05))


def test_5d_loocv_lra_peak_profile(verdict, lra_sets):
    rep = loocv(lra_sets["peak_power_profile"], TAU)
    verdict("5d LOOCV LRA peak profile", *_loo_line("LRA peak profile", rep, np.inf, 0.015))


def test_6_distributional_robustness(verdict, sphere1d_set):
    rep = cross_validate(sphere1d_set, TAU, 3, repeats=250, seed=0)
    means, maxes = rep.per_repeat()
    frac = float(np.mean(means < 0.01))
    verdict("6 repeated 3-fold sets with mean < 1%", frac >= 0.95,
            f"{frac:.3f} of {len(means)} sets; max-error exceedances (>2.5%) {np.mean(maxes > 0.025):.3f}")


def _invariants(model, snaps):
    Phi = model.basis.modes
    a = model.basis.coordinates
    orth = np.max(np.abs(Phi.T @ Phi - np.eye(model.rank)))
    G = a @ a.T
    decor = np.max(np.abs(G - np.diag(model.basis.singular_values[: model.rank] ** 2))) / G[0, 0]
    pred = model.predict_batch(snaps.params).values
    rec = reconstruction_error(snaps, model.basis).per_snapshot
    exact = max(abs(relative_l2(pred[j], snaps.Y[:, j]) - rec[j]) for j in range(snaps.n_snapshots))
    return orth, decor, exact


def test_7_exact_interpolation_suite(verdict, sphere1d_set, sphere3d_set, lra_sets):
    worst = np.zeros(3)
    for snaps in (sphere1d_set, sphere3d_set, lra_sets["peak_power_profile"]):
        worst = np.maximum(worst, _invariants(train(snaps, TAU), snaps))
    rng = np.random.default_rng(7)
    mu = rng.random((12, 3))
    B = rng.normal(size=(3, 3))
    Phi, _ = np.linalg.qr(rng.normal(size=(40, 3)))
    aff = SnapshotSet(Phi @ (B @ mu.T + 5.0), mu, (40,))
    model = train(aff, TruncationRule.fixed(3))
    q = rng.random((50, 3))
    affine = np.max(np.abs(model.predict_batch(q).values - (Phi @ (B @ q.T + 5.0)).T))
    ok = worst[0] <= 1e-10 and worst[1] <= 1e-10 and worst[2] <= 1e-8 and affine <= 1e-10
    verdict("7 exact-interpolation suite", ok, f"orthonormality {worst[0]:.1e}, decorrelation {worst[1]:.1e}, "
            f"train-point vs reconstruction {worst[2]:.1e}, affine {affine:.1e}")


def _query_seconds(model, repeats=200):
    mu = model.params[0] * (1 + 1e-3)
    model.predict(mu)
    t0 = time.perf_counter()
    for _ in range(repeats):
        model.predict(mu)
    return (time.perf_counter() - t0) / repeats


def test_8_performance_ratio(verdict, sphere1d_records, sphere1d_set, lra_sets, lra_fom_seconds):
    radii, _ = sphere1d_records
    t0 = time.perf_counter()
    SphereProblem().simulate(radius=radii[10])
    fom_sphere = time.perf_counter() - t0
    q_sphere = _query_seconds(train(sphere1d_set, TAU))
    q_lra = _query_seconds(train(lra_sets["power_density_series"], TAU), 20)
    scalar = train(lra_sets["scalar_peak_power"], TAU)
    space = ParameterSpace(("ramp_delta", "ramp_time", "feedback_gamma"), tuple(scalar.scaling.lo), tuple(scalar.scaling.hi))
    pts = random_sample(space, 10**6, 0)
    t0 = time.perf_counter()
    scalar.predict_batch(pts)
    qpm = 60 * 10**6 / (time.perf_counter() - t0)
    ok = q_sphere <= 0.01 * fom_sphere and q_lra <= 0.01 * lra_fom_seconds and qpm >= 1e5
    verdict("8 performance ratio", ok, f"sphere 1/{fom_sphere / q_sphere:.0f}, LRA 1/{lra_fom_seconds / q_lra:.0f}, "
            f"scalar ROM {qpm:.3g} queries/min")


def test_9_compression(verdict, sphere1d_set):
    model = train(sphere1d_set, TAU)
    r, d, M = model.rank, sphere1d_set.dim, sphere1d_set.n_snapshots
    expected = (r * (d + M) + 1 * M) / (M * d)
    got = compression_fraction(model)
    verdict("9 compression fraction", got == expected and abs(got - 0.1908) < 5e-5, f"{got:.6f} (r={r})")
