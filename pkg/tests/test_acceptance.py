"""Acceptance suite: twelve end-to-end checks, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they are
produced; they are also repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from rdlab.cli import main
from rdlab.entropy import diff_entropy_knn, discrete_entropy, dither_identity_check
from rdlab.geometry import NormSpec, norm_eval
from rdlab.infodim import converse_inequality_check, info_dimension, lemma1_convergence
from rdlab.quantizer import analytic_rd, gish_pierce_gap
from rdlab.rd_solver import EXPERIMENT_TOL, discretize, rate_at_distortion
from rdlab.shannon_bound import (DistortionSpec, NoiseChannel, gap_upper_bound, noise_entropy,
                                 sample_noise, slb)
from rdlab.sources import (PathologicalSpec, make_atom, make_gaussian, make_laplacian,
                           make_source, make_uniform)

RESULTS = {}
H_GAUSS = 0.5 * math.log(2 * math.pi * math.e)
H_LAPLACE = math.log(2 * math.e)


def record(number, title, checks, started, budget):
    """``checks`` is a list of (description, passed)."""
    elapsed = time.perf_counter() - started
    checks = list(checks) + [(f"runtime {elapsed:.1f}s < {budget}s", elapsed < budget)]
    failed = [text for text, ok in checks if not ok]
    status = "FAIL" if failed else "PASS"
    detail = "; ".join(text for text, _ in checks)
    if failed:
        detail = f"{'; '.join(failed)} ({len(checks) - len(failed)}/{len(checks)} checks passed: {detail})"
    line = f"ACCEPTANCE {number:2d} {status} {title}: {detail}"
    RESULTS[number] = line
    print(line)
    assert not failed, line


def spec(D, r=2.0, p=2.0, d=1):
    return DistortionSpec(NormSpec(d, p), r, D)


def test_01_slb_noise_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng([1, 1])
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 5))
        s = spec(float(10 ** rng.uniform(-6, 1)), r=float(rng.choice([0.5, 1.0, 2.0, 3.0])),
                 p=float(rng.choice([1.0, 2.0, math.inf])), d=d)
        h = float(rng.uniform(-10, 10))
        worst = max(worst, abs(slb(h, d, s) - (h - noise_entropy(NoiseChannel(s)))))
    record(1, "SLB/noise identity", [(f"max error {worst:.2e} < 1e-12", worst < 1e-12)], t0, 1)


def test_02_gaussian_exactness():
    t0 = time.perf_counter()
    worst = max(abs(slb(H_GAUSS, 1, spec(D)) - 0.5 * math.log(1 / D))
                for D in (1.0, 0.25, 1e-2, 1e-4))
    problem = discretize(make_gaussian(), (-8, 8), 2**10, 2**10, 2.0)
    R = rate_at_distortion(problem, 0.25, tol=EXPERIMENT_TOL, max_iter=2000).R
    record(2, "Gaussian exactness", [
        (f"SLB max error {worst:.2e} < 1e-12", worst < 1e-12),
        (f"BA R(0.25) - log 2 = {R - math.log(2):+.2e}", abs(R - math.log(2)) < 1e-2),
    ], t0, 30)


def test_03_laplacian_exactness():
    t0 = time.perf_counter()
    worst = max(abs(slb(H_LAPLACE, 1, spec(D, r=1.0, p=1.0)) + math.log(D))
                for D in (1.0, 0.5, 0.25, 1e-2, 1e-4))
    problem = discretize(make_laplacian(1.0), (-20, 20), 2**10, 2**10, 1.0)
    R = rate_at_distortion(problem, 0.5, tol=EXPERIMENT_TOL, max_iter=2000).R
    record(3, "Laplacian exactness", [
        (f"SLB max error {worst:.2e} < 1e-12", worst < 1e-12),
        (f"BA R(0.5) - log 2 = {R - math.log(2):+.2e}", abs(R - math.log(2)) < 1e-2),
    ], t0, 30)


def test_04_sandwich():
    t0 = time.perf_counter()
    cases = [("gaussian", make_gaussian(), (-8, 8), 2**10),
             ("laplacian", make_laplacian(1.0), (-14, 14), 2**11),
             ("uniform", make_uniform(0, 1), (0, 1), 2**10)]
    Ds = (1e-1, 1e-2, 1e-3)
    checks = []
    for name, src, box, n in cases:
        problem = discretize(src, box, n, n, 2.0)
        gaps = []
        for D in Ds:
            bound = slb(src.h, 1, spec(D))
            gap = gap_upper_bound(src, spec(D))
            R = rate_at_distortion(problem, D, tol=EXPERIMENT_TOL, max_iter=2000).R
            excess = R - bound
            upper = gap.value + 3 * gap.standard_error
            checks.append((f"{name} D={D:g}: R_BA-SLB={excess:+.3e} in [-1e-2, {upper:.3e}]",
                           -1e-2 <= excess <= upper))
            gaps.append(gap)
            if name == "gaussian":
                err = abs(gap.value - 0.5 * math.log1p(D))
                checks.append((f"gaussian D={D:g}: |gap-log(1+D)/2|={err:.1e} <= 2SE={2 * gap.standard_error:.1e}",
                               err <= 2 * gap.standard_error))
        values = [g.value for g in gaps]
        checks.append((f"{name} gaps {', '.join(f'{v:.4g}' for v in values)} strictly decreasing",
                       all(b < a for a, b in zip(values, values[1:]))))
        if name == "uniform":
            checks.append((f"uniform final gap {values[-1]:.4f} < 0.05", values[-1] < 0.05))
    record(4, "Sandwich", checks, t0, 300)


def test_05_test_channel_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng([5, 0])
    checks = []
    for i in range(10):
        d = int(rng.integers(1, 5))
        r = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
        p = float(rng.choice([1.0, 2.0, math.inf]))
        D = float(10 ** rng.uniform(-3, 1))
        ch = NoiseChannel(spec(D, r=r, p=p, d=d))
        z = sample_noise(ch, rng, 10**6)
        t = norm_eval(z, ch.spec.norm) ** r
        score = (t.mean() - D) / (t.std(ddof=1) / math.sqrt(len(t)))
        knn = diff_entropy_knn(z, k=3, rng=rng, resamples=0).value
        err = knn - noise_entropy(ch)
        label = f"d={d} r={r:g} p={p:g} D={D:.3g}"
        checks.append((f"{label}: moment z={score:+.2f}", abs(score) < 3))
        checks.append((f"{label}: knn-h={err:+.4f}", abs(err) < 0.02))
    record(5, "Test channel law", checks, t0, 120)


def test_06_gish_pierce():
    t0 = time.perf_counter()
    g = make_gaussian()
    (_, excess, _), = gish_pierce_gap(g, [1e-3], analytic_rd(g, 2.0))
    nats = 0.5 * math.log(math.pi * math.e / 6)
    bits = excess / math.log(2)
    record(6, "Gish-Pierce", [
        (f"excess {excess:.5f} nats vs 0.5 log(pi e/6) = {nats:.5f} (+-0.01)",
         abs(excess - nats) < 1e-2),
        (f"excess {bits:.4f} bits vs stated 0.2546 (+-0.01)", abs(bits - 0.2546) < 1e-2),
    ], t0, 60)


def test_07_perturbation_continuity():
    t0 = time.perf_counter()
    g = make_gaussian()
    ch = NoiseChannel(spec(1.0))
    oracle = lambda eps: make_gaussian(1, 1 + eps**2).floor_entropy
    rows = lemma1_convergence(g, ch, [1.0, 0.1, 0.01], 10**6, np.random.default_rng([7, 0]), oracle)
    diffs = [abs(est.value - 1.459) for _, est, _ in rows]
    checks = [(f"|H-1.459| = {', '.join(f'{x:.4f}' for x in diffs)} decreasing",
               all(b < a for a, b in zip(diffs, diffs[1:]))),
              (f"{diffs[-1]:.4f} < 0.02 at eps=0.01", diffs[-1] < 0.02)]
    for eps, est, exact in rows:
        checks.append((f"eps={eps:g}: |est-oracle|={abs(est.value - exact):.4f} <= 4SE",
                       abs(est.value - exact) <= 4 * est.standard_error))
    record(7, "Perturbation continuity", checks, t0, 120)


def test_08_pathological_dichotomy():
    t0 = time.perf_counter()
    Ms = [10**2, 10**3, 10**4, 10**5, 10**6]
    specs = [PathologicalSpec(M) for M in Ms]
    H = [s.floor_entropy() for s in specs]
    h = [s.differential_entropy() for s in specs]
    step = abs(h[-1] - h[-2])
    record(8, "Pathological dichotomy", [
        (f"H = {', '.join(f'{x:.4f}' for x in H)} strictly increasing",
         all(b > a for a, b in zip(H, H[1:]))),
        (f"|h(1e6)-h(1e5)| = {step:.4f} < 1e-3", step < 1e-3),
        ("h <= H at every M", all(a <= b for a, b in zip(h, H))),
    ], t0, 60)


def test_09_information_dimension():
    t0 = time.perf_counter()
    grid = [2**k for k in range(17)]
    n = 10**6
    rng = np.random.default_rng([9, 0])
    gauss = info_dimension(make_gaussian(), grid, n, rng).slope
    atom = info_dimension(make_atom(), grid, n, rng).slope
    mix = info_dimension(make_source("mixture", weight=0.5), grid, n, rng).slope
    record(9, "Information dimension", [
        (f"gaussian {gauss:.4f} = 1.00+-0.01", abs(gauss - 1) <= 0.01),
        (f"atom {atom:g} = 0", atom == 0.0),
        (f"mixture {mix:.4f} = 0.50+-0.03", abs(mix - 0.5) <= 0.03),
    ], t0, 180)


def test_10_converse_inequalities():
    t0 = time.perf_counter()
    rng = np.random.default_rng([10, 0])
    bad = 0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        k = int(rng.integers(2, 40))
        x = rng.uniform(-5, 5, (k, d))
        xhat = x + rng.normal(0, rng.uniform(0.05, 3), (k, d))
        if not converse_inequality_check(x, xhat, rng.dirichlet(np.ones(k))).holds:
            bad += 1
    record(10, "Converse inequalities", [(f"{100 - bad}/100 laws satisfy both", bad == 0)], t0, 10)


def test_11_dither_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng([11, 0])
    worst = 0.0
    for _ in range(20):
        size = int(rng.integers(1, 30))
        support = np.sort(rng.choice(np.arange(-50, 50), size=size, replace=False))
        pmf = rng.dirichlet(np.full(size, rng.uniform(0.2, 3)))
        exact, knn = dither_identity_check(support, pmf, n=10**5, rng=rng)
        worst = max(worst, abs(exact.value - knn.value))
    record(11, "Dither identity", [(f"max |H-h| = {worst:.4f} < 0.02", worst < 0.02)], t0, 120)


def test_12_determinism(tmp_path):
    t0 = time.perf_counter()
    checks = []
    for command in (["validate"], ["gap-sweep"]):
        outputs = []
        for i, threads in enumerate(("1", "1", "3")):
            out = tmp_path / f"{command[0]}-{i}.csv"
            main([*command, "--seed", "12345", "--threads", threads, "--out", str(out)])
            outputs.append(out.read_bytes())
        checks.append((f"{command[0]} byte-identical over 3 runs",
                       outputs[0] == outputs[1] == outputs[2]))
    record(12, "Determinism", checks, t0, 600)
