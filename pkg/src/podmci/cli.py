"""Command-line driver: ``podmci {sweep,train,predict,cv,dist,preset}``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 solver
failure, 4 file or format error.
"""

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, FormatError, PreconditionError, SolverError
from .fom.problems import get_problem
from .io import (
    SnapshotStore,
    histogram_csv,
    load_config,
    load_rom,
    save_rom,
    write_csv,
    write_scree_csv,
)
from .rom import RomModel, TruncationRule, reconstruction_error, stack_snapshots
from .validation import ParameterSpace, cross_validate, loocv, random_sample, tensor_product_sample

log = logging.getLogger("podmci")

EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 2, 3, 4
PRESETS = ("sphere-1d", "sphere-3d", "lra")


# ---------------------------------------------------------------- helpers

def parameter_space(cfg):
    ps = cfg["parameters"]
    return ParameterSpace(tuple(p["name"] for p in ps), tuple(p["lo"] for p in ps),
                          tuple(p["hi"] for p in ps), tuple(p.get("units", "") for p in ps))


def sample_points(cfg):
    space = parameter_space(cfg)
    s = cfg["sampling"]
    if s["kind"] == "tensor":
        return tensor_product_sample(space, s.get("points_per_dim", 2))
    n = s.get("n", 0)
    if n == 0:
        return np.zeros((0, space.dim))
    return random_sample(space, n, s.get("seed", 0))


def truncation_rule(cfg_or_text):
    if isinstance(cfg_or_text, str):
        kind, _, value = cfg_or_text.partition(":")
        try:
            return TruncationRule(kind, float(value))
        except ValueError:
            raise ConfigError([f"rule {cfg_or_text!r}: expected kind:value"]) from None
    return TruncationRule(cfg_or_text["kind"], cfg_or_text["value"])


def store_dir(cfg):
    return Path(cfg["output"]["dir"]) / "store"


def _solver_settings(cfg):
    return {"problem": cfg["problem"]["name"], **cfg["problem"].get("settings", {})}


def _run_point(args):
    name, settings, names, point = args
    problem = get_problem(name, **settings)
    t0 = time.perf_counter()
    rec = problem.simulate(**dict(zip(names, point)))
    return point, rec, time.perf_counter() - t0


def run_sweep(cfg, workers=1, out=print):
    """Run the FOM at every sampled point not already in the store."""
    if cfg["problem"]["name"] == "external":
        raise ConfigError(["problem: external data cannot be swept"])
    points = sample_points(cfg)
    space = parameter_space(cfg)
    store = SnapshotStore.create(store_dir(cfg), cfg["study"], space.names, space.bounds,
                                 _solver_settings(cfg), cfg["problem"].get("settings", {}).get("dt"))
    if len(points) == 0:
        log.warning("sampling plan is empty; nothing to run")
        return store
    todo = store.missing(points)
    out(f"{len(points)} points, {len(points) - len(todo)} already stored, {len(todo)} to run")
    jobs = [(cfg["problem"]["name"], cfg["problem"].get("settings", {}), space.names, p) for p in todo]
    failures = []

    def record(result):
        point, rec, wall = result
        store.add(point, rec, wall)
        out(f"run {len(store):4d}  params={np.array2string(point, precision=6)}  {wall:.3f} s")

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(job[3], pool.submit(_run_point, job)) for job in jobs]
            for point, fut in futures:
                try:
                    record(fut.result())
                except SolverError as exc:
                    failures.append((point, exc))
    else:
        for job in jobs:
            try:
                record(_run_point(job))
            except SolverError as exc:
                failures.append((job[3], exc))
    for point, exc in failures:
        log.error("run at %s failed: %s", point.tolist(), exc)
    if failures:
        raise SolverError(f"{len(failures)} of {len(jobs)} runs failed; rerun to resume")
    return store


def snapshot_set(cfg, qoi=None):
    qoi = qoi or cfg["qoi"]
    if cfg["problem"]["name"] == "external":
        try:
            data = np.load(cfg["problem"]["data"])
            snaps, params = data["snapshots"], data["params"]
        except (OSError, KeyError) as exc:
            raise FormatError(f"{cfg['problem']['data']}: {exc}") from exc
        return stack_snapshots(list(snaps), params, [p["name"] for p in cfg["parameters"]])
    store = SnapshotStore.open(store_dir(cfg))
    expected = sample_points(cfg)
    if len(store.missing(expected)):
        raise PreconditionError(f"store {store.root} is incomplete; run the sweep first")
    return store.snapshot_set(qoi)


def train_model(snaps, rule, outdir, tag, out=print):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    model = RomModel.train(snaps, rule)
    build = time.perf_counter() - t0
    rep = reconstruction_error(snaps, model.basis)
    save_rom(outdir / f"{tag}.rom", model)
    write_scree_csv(outdir / f"{tag}_scree.csv", model.basis.singular_values, model.rank)
    write_csv(outdir / f"{tag}_reconstruction.csv", ["snapshot", "error"],
              [(i, e) for i, e in enumerate(rep.per_snapshot)])
    out(f"[{tag}] modes={model.rank}  recon aggregate={rep.aggregate:.3e} mean={rep.mean:.3e} "
        f"max={rep.max:.3e}  build={build * 1e3:.2f} ms")
    return model


def run_cv(snaps, rule, cv, outdir, tag, out=print):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    k = cv.get("k", "loo")
    if k == "loo" or k == snaps.n_snapshots:
        report = loocv(snaps, rule)
    else:
        report = cross_validate(snaps, rule, int(k), cv.get("repeats", 1), cv.get("seed", 0))
    report.to_csv(outdir / f"{tag}_cv.csv")
    means, maxes = report.per_repeat()
    if report.repeats > 1:
        histogram_csv(outdir / f"{tag}_cv_mean_hist.csv", means)
        histogram_csv(outdir / f"{tag}_cv_max_hist.csv", maxes)
    out(f"[{tag}] cv k={report.k} repeats={report.repeats}: mean={report.mean:.4%} "
        f"max={report.max:.4%} min={report.min:.4%}")
    return report


def run_distribution(model, space, n, seed, bins, outdir, tag, out=print):
    pts = random_sample(space, n, seed)
    t0 = time.perf_counter()
    pred = model.predict_batch(pts)
    wall = time.perf_counter() - t0
    vals = pred.values.sum(axis=1)
    train_vals = model.basis.reconstruct().sum(axis=0)
    lo, hi = train_vals.min(), train_vals.max()
    span = hi - lo
    inside = float(np.mean((vals >= lo - 0.1 * span) & (vals <= hi + 0.1 * span)))
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    histogram_csv(outdir / f"{tag}_hist.csv", vals, bins)
    summary = {"n": int(n), "seed": seed, "min": float(vals.min()), "max": float(vals.max()),
               "mean": float(vals.mean()), "std": float(vals.std()),
               "training_min": float(lo), "training_max": float(hi),
               "training_mean": float(train_vals.mean()), "fraction_in_envelope": inside,
               "seconds_per_query": wall / n, "queries_per_minute": 60.0 * n / wall}
    write_csv(outdir / f"{tag}_summary.csv", ["statistic", "value"], summary.items())
    out(f"[{tag}] n={n} mean={summary['mean']:.6g} min={summary['min']:.6g} max={summary['max']:.6g} "
        f"in envelope={inside:.4f}  {summary['seconds_per_query'] * 1e6:.3f} us/query")
    if inside < 1.0:
        log.warning("%.2f%% of samples fall outside the training envelope +-10%%", 100 * (1 - inside))
    return summary


def load_preset(name, outroot=None):
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"])
    cfg = yaml.safe_load(resources.files("podmci.data").joinpath(f"preset-{name}.yaml").read_text())
    cfg["output"] = {"dir": str(Path(outroot or ".").resolve() / cfg["output"]["dir"])}
    return load_config(cfg)


def run_preset(cfg, workers=1, out=print):
    outdir = Path(cfg["output"]["dir"])
    t0 = time.perf_counter()
    store = run_sweep(cfg, workers, out)
    walls = [e["wall_time"] for e in store.manifest["records"] if e.get("wall_time")]
    fom_time = float(np.mean(walls)) if walls else float("nan")
    rule = truncation_rule(cfg["truncation"])
    results = {"fom_seconds": fom_time}
    for qoi in [cfg["qoi"], *cfg.get("extra_qoi", [])]:
        snaps = snapshot_set(cfg, qoi)
        model = train_model(snaps, rule, outdir, qoi, out)
        loo = run_cv(snaps, rule, {"k": "loo"}, outdir, f"{qoi}_loo", out)
        results[qoi] = {"rank": model.rank, "loo_mean": loo.mean, "loo_max": loo.max}
        if qoi == cfg["qoi"] and "cv" in cfg:
            rep = run_cv(snaps, rule, cfg["cv"], outdir, f"{qoi}_kfold", out)
            means, maxes = rep.per_repeat()
            results[qoi]["kfold_mean_below_1pct"] = float(np.mean(means < 0.01))
        if qoi == "scalar_peak_power" and "distribution" in cfg:
            d = cfg["distribution"]
            results["distribution"] = run_distribution(model, parameter_space(cfg), d.get("n", 1000),
                                                       d.get("seed", 0), d.get("bins", 50), outdir,
                                                       "distribution", out)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(results, fh, indent=1, default=float)
    out(f"preset {cfg['study']} finished in {time.perf_counter() - t0:.1f} s; mean FOM run {fom_time:.3f} s")
    return results


# ---------------------------------------------------------------- commands

def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "out", None):
        cfg["output"]["dir"] = str(Path(args.out).resolve())
    return cfg


def cmd_sweep(args):
    cfg = _config(args)
    run_sweep(cfg, args.workers or cfg.get("workers", 1))


def cmd_train(args):
    cfg = _config(args)
    qoi = args.qoi or cfg["qoi"]
    rule = truncation_rule(args.rule) if args.rule else truncation_rule(cfg["truncation"])
    train_model(snapshot_set(cfg, qoi), rule, cfg["output"]["dir"], qoi)


def _read_points(args, d):
    if args.mu is not None:
        pts = np.array([[float(v) for v in args.mu.split(",")]])
    else:
        try:
            pts = np.loadtxt(args.mu_file, delimiter=",", ndmin=2)
        except OSError as exc:
            raise FormatError(str(exc)) from exc
    if pts.shape[1] != d:
        raise PreconditionError(f"model has {d} parameters, points have {pts.shape[1]}")
    return pts


def cmd_predict(args):
    model = load_rom(args.model)
    pts = _read_points(args, model.n_params)
    t0 = time.perf_counter()
    pred = model.predict_batch(pts)
    wall = time.perf_counter() - t0
    for i in np.nonzero(pred.extrapolated)[0]:
        print(f"warning: point {i} {pts[i].tolist()} is outside the training box (extrapolation)",
              file=sys.stderr)
    if args.output:
        header = [f"mu{j}" for j in range(pts.shape[1])] + ["extrapolated"] + \
                 [f"q{j}" for j in range(model.dim)]
        rows = (list(p) + [int(f)] + list(v) for p, f, v in zip(pts, pred.extrapolated, pred.values))
        write_csv(args.output, header, rows)
    else:
        for v in pred.values[:10]:
            print(" ".join(f"{x:.8e}" for x in v[:8]) + (" ..." if model.dim > 8 else ""))
    print(f"{len(pts)} queries in {wall:.4f} s ({wall / len(pts) * 1e6:.3f} us/query)")


def cmd_cv(args):
    cfg = _config(args)
    qoi = args.qoi or cfg["qoi"]
    rule = truncation_rule(args.rule) if args.rule else truncation_rule(cfg["truncation"])
    plan = dict(cfg.get("cv", {"k": "loo"}))
    if args.k:
        plan["k"] = args.k if args.k == "loo" else int(args.k)
    if args.repeats:
        plan["repeats"] = args.repeats
    if args.seed is not None:
        plan["seed"] = args.seed
    run_cv(snapshot_set(cfg, qoi), rule, plan, cfg["output"]["dir"], qoi)


def cmd_dist(args):
    cfg = _config(args)
    model = load_rom(args.model)
    d = cfg.get("distribution", {})
    run_distribution(model, parameter_space(cfg), args.n or d.get("n", 1000),
                     args.seed if args.seed is not None else d.get("seed", 0),
                     args.bins or d.get("bins", 50), cfg["output"]["dir"], "distribution")


def cmd_preset(args):
    if args.action == "list":
        for name in PRESETS:
            cfg = load_preset(name)
            print(f"{name:10s} {cfg.get('description', '')}")
        return
    if not args.name:
        raise ConfigError(["preset run needs a preset name"])
    run_preset(load_preset(args.name, args.out), args.workers or 1)


def build_parser():
    p = argparse.ArgumentParser(prog="podmci", description="POD mode-coefficient interpolation ROM studies")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", "-c", required=True, help="experiment YAML")
        sp.add_argument("--out", "-o", help="output directory (overrides the config)")

    s = sub.add_parser("sweep", help="run the full-order model over the sampling plan")
    common(s)
    s.add_argument("--workers", "-j", type=int)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("train", help="train a ROM from a completed store")
    common(s)
    s.add_argument("--qoi")
    s.add_argument("--rule", help="kind:value, e.g. energy:1e-8")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="query a trained ROM")
    s.add_argument("--model", "-m", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--mu", help="comma-separated parameter point")
    g.add_argument("--mu-file", help="CSV file, one point per row")
    s.add_argument("--output", help="CSV output path")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("cv", help="cross-validate the ROM")
    common(s)
    s.add_argument("--qoi")
    s.add_argument("--rule")
    s.add_argument("--k", help="fold count or 'loo'")
    s.add_argument("--repeats", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_cv)

    s = sub.add_parser("dist", help="sample a ROM over the parameter box")
    common(s)
    s.add_argument("--model", "-m", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--bins", type=int)
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("preset", help="list or run the bundled studies")
    s.add_argument("action", choices=["list", "run"])
    s.add_argument("name", nargs="?")
    s.add_argument("--out", "-o", default=".")
    s.add_argument("--workers", "-j", type=int)
    s.set_defaults(func=cmd_preset)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
