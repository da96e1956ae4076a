"""Command-line experiment runner.

Every subcommand writes a CSV file: ``#``-prefixed metadata lines (tool versions,
seed, the configuration echoed as ``# config: key = value``), a header row, then one
row per grid point.  Grid point ``i`` draws from ``numpy.random.default_rng([seed, i])``
so results do not depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .entropy import EstimatorError
from .geometry import NormSpec
from .infodim import (clipped_floor_entropy, converse_inequality_check, info_dimension,
                      lemma1_convergence)
from .quantizer import analytic_rd, attach_gaps, uniform_quantizer_report
from .rd_solver import (blahut_arimoto_point, discretize, rate_at_distortion,
                        zero_rate_distortion)
from .shannon_bound import (DistortionSpec, GapSettings, NoiseChannel, gap_upper_bound,
                            is_vacuous, noise_entropy, slb)
from .sources import PathologicalSpec, make_gaussian, make_pathological, make_source


def stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.17g" % value
    return "" if value is None else str(value)


class Result:
    def __init__(self, columns, rows=None, notes=None):
        self.columns = list(columns)
        self.rows = rows or []
        self.notes = notes or []

    @property
    def failed(self) -> bool:
        if "error" not in self.columns:
            return False
        k = self.columns.index("error")
        return any(row[k] for row in self.rows)


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def _source(cfg):
    return make_source(cfg.source_name, **cfg.source_params)


def _norm(cfg, d):
    return NormSpec(d, cfg.p)


def _default_box(source):
    if source.support is not None:
        return source.support
    lo = -1.0
    while source.cdf(lo) > 1e-9:
        lo *= 1.25
    return lo, -lo


def _box(cfg, source):
    if "ba.box" in cfg.settings:
        return tuple(cfg.get_list("ba.box"))
    return _default_box(source)


def run_slb(cfg, threads):
    src = _source(cfg)
    rows = []
    for D in cfg.D_grid:
        spec = DistortionSpec(_norm(cfg, src.d), cfg.r, D)
        value = slb(src.h, src.d, spec)
        rows.append([D, value, is_vacuous(value), noise_entropy(NoiseChannel(spec)), src.h])
    return Result(["D", "slb", "vacuous", "noise_entropy", "h_x"], rows)


def run_gap_sweep(cfg, threads):
    src = _source(cfg)
    D_grid = sorted(cfg.D_grid, reverse=True)
    settings = GapSettings(knn_samples=cfg.get("estimator.knn_samples", int),
                           knn_k=cfg.get("estimator.k", int))

    def point(i, D):
        spec = DistortionSpec(_norm(cfg, src.d), cfg.r, D)
        bound = math.nan
        try:
            if src.h is None:
                raise ValueError(f"{src.name}: no differential entropy available")
            bound = slb(src.h, src.d, spec)
            est = gap_upper_bound(src, spec, settings, stream(cfg.seed, i))
        except (EstimatorError, ValueError) as exc:
            return [D, bound, math.nan, math.nan, "", str(exc)]
        return [D, bound, est.value, est.standard_error, est.method, ""]

    rows = _map(point, list(enumerate(D_grid)), threads)
    return Result(["D", "slb", "gap_bound", "se", "method", "error"], rows)


def _problem(cfg, src):
    return discretize(src, _box(cfg, src), cfg.get("ba.n", int),
                      int(cfg.settings.get("ba.m", cfg.get("ba.n"))), cfg.r)


def run_ba_curve(cfg, threads):
    src = _source(cfg)
    problem = _problem(cfg, src)
    tol, max_iter = cfg.get("ba.tol", float), cfg.get("ba.max_iter", int)
    norm = NormSpec(1, cfg.p)

    def point(i, target):
        kind, value = target
        try:
            if kind == "s":
                res = blahut_arimoto_point(problem, value, max_iter, tol)
            else:
                res = rate_at_distortion(problem, value, tol=tol, max_iter=max_iter)
        except (RuntimeError, ValueError) as exc:
            return [value if kind == "s" else math.nan, value if kind == "D" else math.nan,
                    math.nan, math.nan, 0, False, str(exc)]
        bound = slb(src.h, 1, DistortionSpec(norm, cfg.r, res.D)) if src.h is not None else math.nan
        return [res.s, res.D, res.R, bound, res.iterations, res.converged, ""]

    if "ba.s" in cfg.settings:
        targets = [("s", s) for s in sorted(cfg.get_list("ba.s"))]
    else:
        targets = [("D", D) for D in sorted(cfg.D_grid)]
    rows = _map(point, list(enumerate(targets)), threads)
    rows.sort(key=lambda row: row[1])
    notes = [f"zero_rate_distortion={fmt(zero_rate_distortion(problem))}"]
    return Result(["s", "D", "R", "slb", "iterations", "converged", "error"], rows, notes)


def run_quantize(cfg, threads):
    src = _source(cfg)
    oracle = analytic_rd(src, cfg.r)
    oracle_name = "analytic"
    if oracle is None:
        problem = _problem(cfg, src)
        tol, max_iter = cfg.get("ba.tol", float), cfg.get("ba.max_iter", int)
        oracle = lambda D: rate_at_distortion(problem, D, tol=tol, max_iter=max_iter).R
        oracle_name = "blahut-arimoto"

    def point(i, step):
        try:
            rep = uniform_quantizer_report(src, step, cfg.r)
            attach_gaps(rep, src.h, oracle)
        except (RuntimeError, ValueError) as exc:
            return [step, math.nan, math.nan, math.nan, math.nan, str(exc)]
        return [step, rep.entropy, rep.distortion, rep.gap_to_rd, rep.gap_to_slb, ""]

    steps = sorted(cfg.get_list("quantize.delta"), reverse=True)
    rows = _map(point, list(enumerate(steps)), threads)
    return Result(["delta", "H", "D", "gap_to_rd", "gap_to_slb", "error"], rows,
                  [f"rd_oracle={oracle_name}"])


def run_infodim(cfg, threads):
    src = _source(cfg)
    m_grid = [int(m) for m in cfg.get_list("estimator.m_grid")]
    n = cfg.get("estimator.n", int)
    rows = []
    est = info_dimension(src, m_grid, n, stream(cfg.seed, 0))
    fit = set(int(m) for m in est.fit_m)
    for m, H, se, under in zip(est.m, est.H, est.se, est.undersampled):
        rows.append([int(m), H, se, bool(under), int(m) in fit])
    return Result(["m", "H", "se", "undersampled", "in_fit"], rows,
                  [f"slope={fmt(est.slope)}", f"fit_residual={fmt(est.residual)}"])


def run_lemma1(cfg, threads):
    src = _source(cfg)
    channel = NoiseChannel(DistortionSpec(NormSpec(src.d, cfg.p), cfg.r, 1.0))
    oracle = None
    if src.name == "gaussian" and src.d == 1 and cfg.r == 2.0:
        var = src.params["variance"]
        oracle = lambda eps: make_gaussian(1, var + eps * eps).floor_entropy
    eps_grid = sorted(cfg.get_list("estimator.eps"), reverse=True)
    rows = []
    for eps, est, exact in lemma1_convergence(src, channel, eps_grid, cfg.get("estimator.n", int),
                                              stream(cfg.seed, 0), oracle):
        rows.append([eps, est.value, est.standard_error,
                     math.nan if exact is None else exact])
    notes = [f"unperturbed_floor_entropy={fmt(src.floor_entropy)}"] if src.floor_entropy else []
    return Result(["eps", "H", "se", "oracle"], rows, notes)


def run_pathological(cfg, threads):
    M_grid = [int(M) for M in cfg.get_list("estimator.M")]
    eps = float(cfg.settings.get("estimator.eps", "0"))
    n = int(cfg.settings.get("estimator.n", "100000"))
    channel = NoiseChannel(DistortionSpec(NormSpec(1, cfg.p), cfg.r, 1.0))
    from .shannon_bound import sample_noise
    from .entropy import floor_entropy_samples

    def point(i, M):
        spec = PathologicalSpec(M)
        H, h = spec.floor_entropy(), spec.differential_entropy()
        pert = se = math.nan
        if eps > 0:
            rng = stream(cfg.seed, i)
            src = make_pathological(M)
            est = floor_entropy_samples(src.sample(rng, n) + eps * sample_noise(channel, rng, n))
            pert, se = est.value, est.standard_error
        return [M, spec.K_M, H, h, h <= H, pert, se]

    rows = _map(point, list(enumerate(M_grid)), threads)
    return Result(["M", "K_M", "H_floor", "h", "h_le_H", "H_perturbed", "se"], rows)


def run_converse(cfg, threads):
    trials = cfg.get("estimator.trials", int)
    k = cfg.get("estimator.points", int)

    def point(i, _):
        rng = stream(cfg.seed, i)
        x = rng.uniform(-5, 5, size=k)
        xhat = x + rng.normal(0, rng.uniform(0.1, 3), size=k)
        w = rng.dirichlet(np.ones(k))
        rep = converse_inequality_check(x, xhat, w)
        return [i, rep.cond_entropy, rep.diff_entropy, rep.residual_entropy,
                rep.d * math.log(2), rep.holds]

    rows = _map(point, [(i, None) for i in range(trials)], threads)
    return Result(["trial", "H_A_given_B", "H_C", "H_A_given_BC", "d_log2", "holds"], rows)


def validation_checks(seed: int = 0):
    """Internal identity and normalization checks as ``(name, passed, value, tol)``."""
    from scipy import integrate
    from .entropy import diff_entropy_grid, discrete_entropy
    from .geometry import unit_ball_volume

    rng = stream(seed, 0)
    checks = []

    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 5))
        r = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
        p = float(rng.choice([1.0, 2.0, math.inf]))
        D = float(10 ** rng.uniform(-6, 1))
        h = float(rng.uniform(-5, 5))
        spec = DistortionSpec(NormSpec(d, p), r, D)
        worst = max(worst, abs(slb(h, d, spec) - (h - noise_entropy(NoiseChannel(spec)))))
    checks.append(("slb_noise_identity", worst < 1e-12, worst, 1e-12))

    worst = 0.0
    for r, p in [(0.5, 2.0), (1.0, 1.0), (2.0, 2.0), (3.0, math.inf)]:
        ch = NoiseChannel(DistortionSpec(NormSpec(1, p), r, 0.7))
        mass = 2 * integrate.quad(lambda z: float(np.exp(
            ch.log_normalizer() - (ch.ratio / 0.7) * abs(z) ** r)), 0, np.inf, limit=200)[0]
        worst = max(worst, abs(mass - 1))
    checks.append(("noise_pdf_unit_mass", worst < 1e-6, worst, 1e-6))

    g = make_gaussian()
    worst = max(abs(slb(g.h, 1, DistortionSpec(NormSpec(1), 2.0, D)) - 0.5 * math.log(1 / D))
                for D in (1.0, 0.25, 1e-2, 1e-4))
    checks.append(("gaussian_slb_exact", worst < 1e-12, worst, 1e-12))

    err = abs(unit_ball_volume(NormSpec(2, 2.0)) - math.pi)
    checks.append(("disc_area", err < 1e-12, err, 1e-12))

    spec = PathologicalSpec(10**4)
    err = abs(math.fsum(spec.masses) - 1)
    checks.append(("pathological_unit_mass", err < 1e-12, err, 1e-12))

    err = abs(discrete_entropy([0.25] * 4).value - math.log(4))
    checks.append(("uniform_pmf_entropy", err < 1e-12, err, 1e-12))

    est = diff_entropy_grid(g.pdf, (-8, 8), 2**16)
    err = abs(est.value - g.h)
    checks.append(("gaussian_grid_entropy", err < 1e-4, err, 1e-4))

    bad = 0
    for _ in range(100):
        x = rng.uniform(-5, 5, size=20)
        xhat = x + rng.normal(0, 1, size=20)
        if not converse_inequality_check(x, xhat, rng.dirichlet(np.ones(20))).holds:
            bad += 1
    checks.append(("converse_inequalities", bad == 0, float(bad), 0.0))

    ups = clipped_floor_entropy(g, [8.0])[0][1]
    err = abs(ups - g.floor_entropy)
    checks.append(("clipped_entropy_limit", err < 1e-3, err, 1e-3))
    return checks


def run_validate(cfg, threads):
    rows = [[name, ok, value, tol] for name, ok, value, tol in validation_checks(cfg.seed)]
    for name, ok, value, tol in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name} value={fmt(value)} tol={fmt(tol)}",
              file=sys.stderr)
    res = Result(["check", "passed", "value", "tolerance", "error"],
                 [row + ["" if row[1] else "check failed"] for row in rows])
    return res


RUNNERS = {
    "slb": run_slb,
    "gap-sweep": run_gap_sweep,
    "ba-curve": run_ba_curve,
    "quantize": run_quantize,
    "infodim": run_infodim,
    "lemma1": run_lemma1,
    "pathological": run_pathological,
    "converse-check": run_converse,
    "validate": run_validate,
}


def render(cfg: ExperimentConfig, result: Result) -> str:
    buf = io.StringIO()
    buf.write(f"# rdlab {__version__}\n")
    buf.write(f"# python={platform.python_version()} numpy={np.__version__} "
              f"scipy={scipy.__version__}\n")
    buf.write(f"# seed={cfg.seed}\n")
    for line in cfg.to_lines():
        buf.write(f"# config: {line}\n")
    for note in result.notes:
        buf.write(f"# result: {note}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def run(cfg: ExperimentConfig, out=None, threads: int = 1) -> int:
    """Run one experiment and write its CSV to ``out`` (a path, or stdout if None)."""
    result = RUNNERS[cfg.experiment](cfg, max(1, threads))
    text = render(cfg, result)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return 1 if result.failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    try:
        cfg = load_config(args.config, args.experiment, overrides)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: config: {problem}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    try:
        status = run(cfg, args.out, args.threads)
    except (ValueError, RuntimeError, EstimatorError) as exc:
        print(f"error: run: {exc}", file=sys.stderr)
        return 1
    if status:
        print("error: run: one or more grid points failed (see the error column)",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
