import math

import numpy as np
import pytest
from scipy import stats

from rdlab.entropy import diff_entropy_grid
from rdlab.sources import (PathologicalSpec, make_atom, make_gaussian,
                           make_generalized_gaussian, make_laplacian, make_mixture,
                           make_pathological, make_source, make_uniform)

# direct summation of -p log p over Phi(i+1) - Phi(i), tails below 1e-16
_i = np.arange(-40, 40)
_p = np.diff(stats.norm.cdf(np.append(_i, 40)))
_p = _p[_p > 0]
GAUSS_FLOOR = float(-(_p * np.log(_p)).sum())


def test_gaussian_entropies():
    g = make_gaussian()
    assert g.h == pytest.approx(1.418939, abs=1e-6)
    assert g.floor_entropy == pytest.approx(GAUSS_FLOOR, abs=1e-10)
    assert g.floor_entropy == pytest.approx(1.459, abs=5e-4)
    assert make_gaussian(2).h == pytest.approx(2.837877, abs=1e-6)


def test_closed_form_examples():
    assert make_laplacian(1.0).h == pytest.approx(1 + math.log(2), abs=1e-12)
    u = make_uniform(0, 1)
    assert u.h == 0.0
    assert u.floor_entropy == 0.0


@pytest.mark.parametrize("model,box", [
    (make_gaussian(), (-8, 8)),
    (make_laplacian(1.0), (-40, 40)),
    (make_uniform(0, 1), (0, 1)),
    (make_uniform(-2, 3), (-2, 3)),
    (make_generalized_gaussian(1.5, 2.0), (-40, 40)),
])
def test_grid_entropy_matches_closed_form(model, box):
    est = diff_entropy_grid(model.pdf, box, 2**16)
    assert abs(est.value - model.h) < 1e-4


def test_gaussian_sampler_moments(rng):
    n = 10**6
    x = make_gaussian(1, 2.5).sample(rng, n)[:, 0]
    assert abs(x.mean()) < 4 * math.sqrt(2.5 / n)
    # Var of the sample variance for a Gaussian is 2 sigma^4 / (n - 1)
    assert abs(x.var(ddof=1) - 2.5) < 4 * math.sqrt(2 * 2.5**2 / (n - 1))


def test_sample_shapes(rng):
    assert make_gaussian(3).sample(rng, 10).shape == (10, 3)
    assert make_pathological(100).sample(rng, 10).shape == (10, 1)


def test_pathological_single_cell():
    spec = PathologicalSpec(2)
    assert spec.floor_entropy() == 0.0
    assert spec.differential_entropy() == pytest.approx(-math.log(2), abs=1e-12)


def _direct_pathological(M):
    # independent summation: cells [m, m + 1/m), mass proportional to 1/(m log^2 m)
    m = np.arange(2, M + 1, dtype=float)
    w = 1.0 / (m * np.log(m) ** 2)
    q = w / math.fsum(w)
    H = -math.fsum(q * np.log(q))
    # the density on cell m is q_m * m, so h = -sum q log(q m)
    h = -math.fsum(q * np.log(q * m))
    return H, h


def test_pathological_matches_direct_summation():
    for M in (10, 100, 10**4):
        H, h = _direct_pathological(M)
        spec = PathologicalSpec(M)
        assert spec.floor_entropy() == pytest.approx(H, abs=1e-12)
        assert spec.differential_entropy() == pytest.approx(h, abs=1e-12)


def test_pathological_masses_and_trends():
    Ms = [10**2, 10**3, 10**4, 10**5, 10**6]
    specs = [PathologicalSpec(M) for M in Ms]
    for s in specs:
        assert abs(math.fsum(s.masses) - 1) < 1e-12
    H = [s.floor_entropy() for s in specs]
    h = [s.differential_entropy() for s in specs]
    assert all(b > a for a, b in zip(H, H[1:]))
    steps = np.diff(h)
    assert np.all(np.abs(steps[1:]) < np.abs(steps[:-1]))
    assert all(a <= b for a, b in zip(h, H))
    assert make_pathological(10**4).floor_entropy > make_pathological(10**2).floor_entropy


def test_pathological_h_increment_below_1e3():
    # Stated target; the partial sums move by about 0.04 between these truncations.
    diff = abs(PathologicalSpec(10**6).differential_entropy()
               - PathologicalSpec(10**5).differential_entropy())
    assert diff < 1e-3


def test_pathological_cdf_and_sampler(rng):
    src = make_pathological(50)
    x = src.sample(rng, 200_000)[:, 0]
    m = np.floor(x).astype(int)
    assert np.all(x < m + 1.0 / m)
    counts = np.bincount(m, minlength=51)[2:]
    expected = PathologicalSpec(50).masses * len(x)
    assert stats.chisquare(counts, expected).pvalue > 1e-4
    assert src.cdf(2.0) == 0.0 and src.cdf(51.0) == pytest.approx(1.0)


def test_mixture_degenerate_cases(rng):
    g = make_gaussian()
    w0 = make_mixture(0.0, [0.0], [1.0], g)
    assert w0.absolutely_continuous and w0.h == g.h
    x = w0.sample(np.random.default_rng(1), 1000)
    assert len(np.unique(x)) == 1000
    assert np.all(make_mixture(1.0, [0.0], [1.0], g).sample(rng, 1000) == 0.0)
    half = make_mixture(0.5, [0.0], [1.0], g)
    assert half.pdf is None and not half.absolutely_continuous
    atom = make_atom()
    assert atom.name == "atom" and np.all(atom.sample(rng, 10) == 0.0)


def test_mixture_validation():
    with pytest.raises(ValueError):
        make_mixture(1.5, [0.0], [1.0], make_gaussian())
    with pytest.raises(ValueError):
        make_mixture(0.5, [0.0, 1.0], [0.3, 0.3], make_gaussian())


def test_make_source_catalog():
    assert make_source("laplacian", rate=2.0).h == pytest.approx(math.log(2 * math.e / 2))
    assert make_source("mixture", weight=0.25).params["weight"] == 0.25
    with pytest.raises(ValueError):
        make_source("cauchy")


@pytest.mark.parametrize("model", [make_gaussian(), make_laplacian(1.0), make_uniform(0, 1),
                                   make_uniform(0.5, 1.5), make_pathological(1000)])
def test_h_below_floor_entropy(model):
    assert model.h <= model.floor_entropy + 1e-12


def test_floor_pmf_sums_to_one():
    for model in (make_gaussian(), make_laplacian(0.5), make_uniform(-3.5, 2.2)):
        _, masses = model.floor_pmf()
        assert math.fsum(masses) == pytest.approx(1.0, abs=1e-10)
