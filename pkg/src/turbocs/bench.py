# Monte-Carlo SER harness and command-line front end.
#
# Trials are paired: the instance for (grid point, trial index) is derived
# from (master_seed, point, trial) only, so every algorithm sees the identical
# (A, x_true, noise) realization and aggregates are independent of the worker
# count and of which algorithms were requested.

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import (MONTE_CARLO, QUADRATURE, verify_extrinsic_unbias,
                          verify_stein_identity, verify_variance_tracking)
from .matrices import gen_gaussian_normalized, gen_partial_orthogonal
from .model import ConfigError, Prior, ProblemInstance, sample_signal, transmit
from .recover import ALGORITHMS, RecoveryConfig, recover

MATRIX_KINDS = ("ortho", "gauss")

CSV_HEADER = ["algorithm", "snr_db", "trials", "symbol_errors", "ser",
              "ci_lo", "ci_hi", "mean_iters", "clamp_rate", "wall_time_s"]

# sub-stream tags: (master_seed, 0, point, trial) for instances,
# (master_seed, 1) for a sweep-fixed matrix
_INSTANCE_TAG = 0
_MATRIX_TAG = 1


@dataclass
class SweepConfig:
    L: int = 258
    K: int = 129
    s: int = 20
    alphabet: tuple = (-1.0, 1.0)
    matrix_kind: str = "ortho"
    redraw_matrix_per_trial: bool = True
    snr_db_grid: tuple = ()
    trials_per_point: int = 100
    algorithms: tuple = ALGORITHMS
    max_iters: int = 50
    master_seed: int = 0
    workers: int = 1

    def validate(self):
        if not (0 <= self.s <= self.K <= self.L):
            raise ConfigError(f"need s <= K <= L, got s={self.s}, K={self.K}, L={self.L}")
        if len(self.snr_db_grid) == 0:
            raise ConfigError("SNR grid must not be empty")
        if not all(np.isfinite(v) for v in self.snr_db_grid):
            raise ConfigError("SNR grid must be finite")
        if self.trials_per_point < 1:
            raise ConfigError("trials_per_point must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.matrix_kind not in MATRIX_KINDS:
            raise ConfigError(f"unknown matrix kind {self.matrix_kind!r}")
        if len(self.algorithms) == 0:
            raise ConfigError("need at least one algorithm")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.prior()  # alphabet/L/s validation

    def prior(self):
        return Prior(alphabet=self.alphabet, L=self.L, s=self.s)


@dataclass
class CellResult:
    algorithm: str
    snr_db: float
    trials: int
    symbol_errors: int
    ser: float
    ci_lo: float
    ci_hi: float
    mean_iters: float
    clamp_rate: float
    wall_time_s: float
    failures: int = 0


@dataclass
class SweepResult:
    config: dict
    version: str
    cells: list

    def cell(self, algorithm, snr_db):
        for c in self.cells:
            if c.algorithm == algorithm and c.snr_db == snr_db:
                return c
        raise KeyError((algorithm, snr_db))

    def to_json_dict(self):
        return {"config": self.config, "version": self.version,
                "cells": [asdict(c) for c in self.cells]}


def wilson_interval(errors, n, z=1.96):
    """Wilson 95% score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * float(np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _gen_matrix(cfg, rng):
    if cfg.matrix_kind == "ortho":
        return gen_partial_orthogonal(rng, cfg.K, cfg.L)
    return gen_gaussian_normalized(rng, cfg.K, cfg.L)


def make_trial_instance(cfg, point_idx, trial_idx, fixed_matrix=None):
    """The (A, x_true, y) realization shared by all algorithms for one trial.

    Draw order within the per-trial stream: matrix (if redrawn), signal
    support and values, then noise.
    """
    rng = np.random.default_rng((cfg.master_seed, _INSTANCE_TAG, point_idx, trial_idx))
    sm = _gen_matrix(cfg, rng) if fixed_matrix is None else fixed_matrix
    prior = cfg.prior()
    x = sample_signal(rng, prior)
    sigma_n_sq = 10.0 ** (-cfg.snr_db_grid[point_idx] / 10.0)
    y = transmit(sm, x, sigma_n_sq, rng)
    return ProblemInstance(A=sm, x_true=x, y=y, sigma_n_sq=sigma_n_sq)


# ---- worker machinery -------------------------------------------------------

_W_CFG = None
_W_FIXED = None


def _init_worker(cfg, fixed_matrix):
    global _W_CFG, _W_FIXED
    _W_CFG = cfg
    _W_FIXED = fixed_matrix
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(1)
    except ImportError:
        pass


def _run_chunk(args):
    """Run all requested algorithms on trials [lo, hi) of one grid point.

    Returns integer aggregates per algorithm: (symbol errors, iterations,
    clamp events, failures, trials done) plus summed wall time.
    """
    point_idx, lo, hi = args
    cfg = _W_CFG
    prior = cfg.prior()
    totals = {a: [0, 0, 0, 0, 0, 0.0] for a in cfg.algorithms}
    for trial in range(lo, hi):
        inst = make_trial_instance(cfg, point_idx, trial, _W_FIXED)
        for algo in cfg.algorithms:
            rcfg = RecoveryConfig(algorithm=algo, max_iters=cfg.max_iters)
            t0 = time.perf_counter()
            try:
                res = recover(inst.y, inst.A, inst.sigma_n_sq, prior, rcfg)
            except Exception:
                totals[algo][3] += 1
                continue
            dt = time.perf_counter() - t0
            errors = int(np.count_nonzero(res.x_hat != inst.x_true))
            t = totals[algo]
            t[0] += errors
            t[1] += res.iters_run
            t[2] += res.clamp_events
            t[4] += 1
            t[5] += dt
    return point_idx, totals


def run_sweep(cfg):
    """Paired Monte-Carlo SER sweep over the configured SNR grid."""
    cfg.validate()
    fixed = None
    if not cfg.redraw_matrix_per_trial:
        fixed = _gen_matrix(cfg, np.random.default_rng((cfg.master_seed, _MATRIX_TAG)))

    n_points = len(cfg.snr_db_grid)
    chunk = max(1, cfg.trials_per_point // max(1, cfg.workers * 8))
    tasks = []
    for p in range(n_points):
        lo = 0
        while lo < cfg.trials_per_point:
            hi = min(lo + chunk, cfg.trials_per_point)
            tasks.append((p, lo, hi))
            lo = hi

    acc = {(a, p): [0, 0, 0, 0, 0, 0.0]
           for a in cfg.algorithms for p in range(n_points)}

    def fold(point_idx, totals):
        for algo, t in totals.items():
            dst = acc[(algo, point_idx)]
            for i in range(6):
                dst[i] += t[i]

    if cfg.workers == 1:
        _init_worker(cfg, fixed)
        for task in tasks:
            fold(*_run_chunk(task))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers,
                                 initializer=_init_worker,
                                 initargs=(cfg, fixed)) as pool:
            for point_idx, totals in pool.map(_run_chunk, tasks):
                fold(point_idx, totals)

    cells = []
    for algo in cfg.algorithms:
        for p, snr in enumerate(cfg.snr_db_grid):
            errs, iters, clamps, failures, done, wall = acc[(algo, p)]
            n_sym = done * cfg.L
            lo_ci, hi_ci = wilson_interval(errs, n_sym)
            cells.append(CellResult(
                algorithm=algo, snr_db=float(snr), trials=done,
                symbol_errors=errs,
                ser=errs / n_sym if n_sym else 0.0,
                ci_lo=lo_ci, ci_hi=hi_ci,
                mean_iters=iters / done if done else 0.0,
                clamp_rate=clamps / iters if iters else 0.0,
                wall_time_s=wall, failures=failures))

    from . import __version__
    cfg_echo = asdict(cfg)
    cfg_echo["alphabet"] = list(cfg.alphabet)
    cfg_echo["snr_db_grid"] = [float(v) for v in cfg.snr_db_grid]
    cfg_echo["algorithms"] = list(cfg.algorithms)
    return SweepResult(config=cfg_echo, version=__version__, cells=cells)


# ---- output ------------------------------------------------------------------


def emit(result, format="both", path="sweep"):
    """Write CSV and/or JSON plus a plot-data file next to them.

    CSV columns follow CSV_HEADER; floats are written with repr so parsing
    the file back reproduces the in-memory values exactly.  The plot file has
    one SER column per algorithm over the SNR grid.
    """
    if format not in ("csv", "json", "both"):
        raise ConfigError(f"unknown output format {format!r}")
    paths = {}
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if format in ("csv", "both"):
        paths["csv"] = path + ".csv"
        with open(paths["csv"], "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_HEADER)
            for c in result.cells:
                d = asdict(c)
                w.writerow([d["algorithm"]] + [repr(d[k]) if isinstance(d[k], float)
                                               else d[k] for k in CSV_HEADER[1:]])
    if format in ("json", "both"):
        paths["json"] = path + ".json"
        with open(paths["json"], "w") as f:
            json.dump(result.to_json_dict(), f, indent=2)
            f.write("\n")
    paths["plot"] = path + "_plot.csv"
    algos = list(dict.fromkeys(c.algorithm for c in result.cells))
    grid = sorted({c.snr_db for c in result.cells})
    with open(paths["plot"], "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["snr_db"] + algos)
        for snr in grid:
            w.writerow([repr(snr)] + [repr(result.cell(a, snr).ser) for a in algos])
    return paths


def read_sweep_csv(path):
    """Parse an emitted CSV back into one dict per row (floats/ints restored)."""
    rows = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            row = {"algorithm": rec["algorithm"]}
            for k in ("trials", "symbol_errors"):
                row[k] = int(rec[k])
            for k in ("snr_db", "ser", "ci_lo", "ci_hi", "mean_iters",
                      "clamp_rate", "wall_time_s"):
                row[k] = float(rec[k])
            rows.append(row)
    return rows


# ---- CLI ----------------------------------------------------------------------

_DEFAULTS = dict(L=258, K=129, s=20, alphabet="-1,1", matrix="ortho",
                 algo=",".join(ALGORITHMS), snr_start=9.0, snr_stop=15.0,
                 snr_step=0.5, trials=100, iters=50, seed=0, workers=1,
                 out="sweep", format="both", fixed_matrix=False)

_CONVERTERS = dict(L=int, K=int, s=int, snr_start=float, snr_stop=float,
                   snr_step=float, trials=int, iters=int, seed=int,
                   workers=int, alphabet=str, matrix=str, algo=str, out=str,
                   format=str,
                   fixed_matrix=lambda v: str(v).lower() in ("1", "true", "yes"))


def parse_config_file(path):
    """Read `key = value` lines; `#` starts a comment."""
    out = {}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in _DEFAULTS:
                raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
            out[key] = _CONVERTERS[key](val)
    return out


def _parse_alphabet(text):
    try:
        symbols = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"bad alphabet {text!r}")
    if not symbols:
        raise ConfigError(f"bad alphabet {text!r}")
    return symbols


def _snr_grid(start, stop, step):
    if step <= 0:
        raise ConfigError("snr-step must be > 0")
    if stop < start:
        raise ConfigError("snr-stop must be >= snr-start")
    n = int(round((stop - start) / step)) + 1
    return tuple(start + i * step for i in range(n))


def _sweep_config(opts):
    algorithms = tuple(a.strip() for a in opts["algo"].split(",") if a.strip())
    return SweepConfig(
        L=opts["L"], K=opts["K"], s=opts["s"],
        alphabet=_parse_alphabet(opts["alphabet"]),
        matrix_kind=opts["matrix"],
        redraw_matrix_per_trial=not opts["fixed_matrix"],
        snr_db_grid=_snr_grid(opts["snr_start"], opts["snr_stop"], opts["snr_step"]),
        trials_per_point=opts["trials"],
        algorithms=algorithms,
        max_iters=opts["iters"],
        master_seed=opts["seed"],
        workers=opts["workers"])


def build_parser():
    p = argparse.ArgumentParser(
        prog="turbocs",
        description="Discrete sparse recovery benchmark: SER sweeps, "
                    "diagnostics, and the two-panel benchmark preset.")
    sub = p.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a Monte-Carlo SER sweep")
    sw.add_argument("--config", help="key = value config file; flags override it")
    sw.add_argument("--algo", help=f"comma list from {','.join(ALGORITHMS)}")
    sw.add_argument("--matrix", choices=MATRIX_KINDS)
    sw.add_argument("--L", type=int)
    sw.add_argument("--K", type=int)
    sw.add_argument("--s", type=int)
    sw.add_argument("--alphabet", help='nonzero symbols, e.g. "-1,1"')
    sw.add_argument("--snr-start", type=float, dest="snr_start")
    sw.add_argument("--snr-stop", type=float, dest="snr_stop")
    sw.add_argument("--snr-step", type=float, dest="snr_step")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--iters", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--out")
    sw.add_argument("--format", choices=("csv", "json", "both"))
    sw.add_argument("--fixed-matrix", action="store_const", const=True,
                    dest="fixed_matrix", default=None,
                    help="draw one matrix per sweep instead of per trial")

    ve = sub.add_parser("verify", help="run the diagnostics suite")
    ve.add_argument("--seed", type=int, default=0)
    ve.add_argument("--nodes", type=int, default=200, help="quadrature nodes")
    ve.add_argument("--mc-samples", type=int, default=10 ** 6)
    ve.add_argument("--tracking-trials", type=int, default=100)
    ve.add_argument("--out", help="write the JSON report here")

    fg = sub.add_parser("paper-fig2", help="two-panel benchmark preset "
                        "(partial-orthogonal and Gaussian ensembles)")
    fg.add_argument("--trials", type=int, default=2000)
    fg.add_argument("--seed", type=int, default=1)
    fg.add_argument("--iters", type=int, default=50)
    fg.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
    fg.add_argument("--out-dir", default="fig2_out")
    fg.add_argument("--format", choices=("csv", "json", "both"), default="both")
    return p


def _cmd_sweep(args):
    opts = dict(_DEFAULTS)
    if args.config:
        opts.update(parse_config_file(args.config))
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    cfg = _sweep_config(opts)
    result = run_sweep(cfg)
    paths = emit(result, format=opts["format"], path=opts["out"])
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    return 0


def _cmd_verify(args):
    prior = Prior(alphabet=(-1.0, 1.0), L=258, s=20)
    report = {"gates": [], "pass": True}

    def gate(name, ok, detail):
        report["gates"].append({"name": name, "pass": bool(ok), "detail": detail})
        report["pass"] = report["pass"] and bool(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")

    quad = []
    for s2 in (0.01, 0.1, 1.0):
        rep = verify_stein_identity(prior, s2, method=QUADRATURE, budget=args.nodes)
        quad.append(rep.to_dict())
        gate(f"stein-quadrature sigma_e^2={s2}", rep.rel_err < 1e-8,
             f"rel_err={rep.rel_err:.3e}")
    report["stein_quadrature"] = quad

    rng = np.random.default_rng(args.seed)
    rep = verify_stein_identity(prior, 0.1, method=MONTE_CARLO,
                                budget=args.mc_samples, rng=rng)
    report["stein_monte_carlo"] = rep.to_dict()
    gate("stein-monte-carlo", rep.abs_err < 3 * rep.std_err,
         f"|lhs-rhs|={rep.abs_err:.3e} 3*std_err={3 * rep.std_err:.3e}")

    small = Prior(alphabet=(-1.0, 1.0), L=32, s=2)
    worst = 0.0
    checks = 0
    for i in range(100):
        rng_i = np.random.default_rng((args.seed, 2, i))
        gen = gen_partial_orthogonal if i % 2 == 0 else gen_gaussian_normalized
        sm = gen(rng_i, 16, 32)
        x = sample_signal(rng_i, small)
        sigma_n_sq = 10.0 ** (-15.0 / 10.0)
        y = transmit(sm, x, sigma_n_sq, rng_i)
        inst = ProblemInstance(A=sm, x_true=x, y=y, sigma_n_sq=sigma_n_sq)
        for v_pri in (0.01, small.activity, 1.0):
            worst = max(worst, verify_extrinsic_unbias(inst, small, v_pri))
            checks += 1
    report["extrinsic_unbias"] = {"max_discrepancy": worst, "checks": checks}
    gate("extrinsic-equals-unbias", worst < 1e-10, f"max discrepancy={worst:.3e}")

    tracking = verify_variance_tracking(
        prior, lambda rng: gen_partial_orthogonal(rng, 129, 258),
        snr_db=12.0, trials=args.tracking_trials, max_iters=5,
        seed=args.seed)
    report["variance_tracking"] = tracking
    ratios = ", ".join(f"{r:.3f}" for r in tracking["ratio"])
    print(f"INFO  variance-tracking ratios (soft diagnostic): {ratios}")

    if args.out:
        directory = os.path.dirname(args.out)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(args.out, "w") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
        print(f"wrote report: {args.out}")
    return 0 if report["pass"] else 1


def _cmd_fig2(args):
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for kind in MATRIX_KINDS:
        cfg = SweepConfig(
            L=258, K=129, s=20, alphabet=(-1.0, 1.0), matrix_kind=kind,
            snr_db_grid=_snr_grid(9.0, 15.0, 0.5),
            trials_per_point=args.trials, algorithms=ALGORITHMS,
            max_iters=args.iters, master_seed=args.seed, workers=args.workers)
        result = run_sweep(cfg)
        paths = emit(result, format=args.format,
                     path=os.path.join(args.out_dir, f"fig2_{kind}"))
        written.extend(paths.values())
        for cell in result.cells:
            print(f"{kind} {cell.algorithm} {cell.snr_db:.1f} dB: "
                  f"SER={cell.ser:.3e} ({cell.trials} trials)")
    for path in written:
        print(f"wrote {path}")
    return 0


def cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "paper-fig2":
            return _cmd_fig2(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


def main():
    sys.exit(cli(sys.argv[1:]))
