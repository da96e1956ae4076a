"""Catalog of source models.

One-dimensional models evaluate ``pdf``/``cdf`` on arrays of scalars; models with
``d > 1`` take arrays whose last axis has length ``d``.  Samplers always return an
``(n, d)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

# Cell masses are accumulated until the neglected tail is below this.
TAIL_MASS = 1e-12


@dataclass(frozen=True)
class SourceModel:
    name: str
    d: int
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    pdf: Optional[Callable] = None
    cdf: Optional[Callable] = None
    sf: Optional[Callable] = None
    h: Optional[float] = None
    floor_entropy: Optional[float] = None
    support: Optional[tuple] = None  # (lo, hi) for d=1; None when unbounded
    params: dict = field(default_factory=dict)
    absolutely_continuous: bool = True
    # exact pmf of the integer part, (integers, masses), when it is cheap to produce
    integer_pmf: Optional[Callable[[], tuple]] = None
    # points in [lo, hi] where the pdf jumps or kinks, for piecewise quadrature
    breakpoints: Optional[Callable[[float, float], np.ndarray]] = None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sampler(rng, int(n))

    def survival(self, x):
        if self.sf is not None:
            return self.sf(x)
        return 1.0 - self.cdf(x)

    def floor_pmf(self):
        """Exact pmf of the integer part for one-dimensional models."""
        if self.integer_pmf is not None:
            return self.integer_pmf()
        if self.d != 1 or self.cdf is None:
            raise ValueError(f"{self.name}: no exact integer-part pmf available")
        return cdf_cell_masses(self, 1.0)


def _lattice_range(model: SourceModel, step: float, offset: float = 0.0,
                   budget: int = 10**7):
    """Index range ``[i0, i1)`` of cells ``[offset+i*step, offset+(i+1)*step)`` that
    leaves less than ``TAIL_MASS`` of probability outside."""
    if model.support is not None:
        lo, hi = model.support
        i0 = math.floor((lo - offset) / step)
        i1 = math.ceil((hi - offset) / step)
    else:
        half = TAIL_MASS / 2
        lo = -1.0
        while model.cdf(lo) > half:
            lo *= 2
        hi = 1.0
        while model.survival(hi) > half:
            hi *= 2
        i0 = math.floor((lo - offset) / step)
        i1 = math.ceil((hi - offset) / step)
    if i1 - i0 > budget:
        raise ValueError(f"{model.name}: {i1 - i0} cells needed, budget is {budget}")
    return i0, i1


def cdf_cell_masses(model: SourceModel, step: float, offset: float = 0.0,
                    budget: int = 10**7):
    """Masses of the cells ``[offset+i*step, offset+(i+1)*step)`` from CDF differences.

    Returns ``(indices, masses)`` restricted to cells of positive mass.  Upper-tail
    cells use survival differences to keep relative accuracy.
    """
    i0, i1 = _lattice_range(model, step, offset, budget)
    idx = np.arange(i0, i1 + 1)
    edges = offset + idx * step
    lower = np.diff(model.cdf(edges))
    upper = -np.diff(model.survival(edges))
    mid = offset + (idx[:-1] + 0.5) * step
    masses = np.where(mid > _median(model), upper, lower)
    masses = np.clip(masses, 0.0, None)
    keep = masses > 0
    return idx[:-1][keep], masses[keep]


def _points_within(points, lo, hi):
    pts = np.asarray(points, dtype=float)
    return pts[(pts >= lo) & (pts <= hi)]


def _median(model):
    return model.params.get("median", 0.0)


def _entropy_of(masses):
    masses = masses[masses > 0]
    return float(-(masses * np.log(masses)).sum())


def _check_positive(name, value):
    if not (value > 0) or not math.isfinite(value):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def make_gaussian(d: int = 1, variance: float = 1.0) -> SourceModel:
    _check_positive("variance", variance)
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    sigma = math.sqrt(variance)
    h = 0.5 * d * math.log(2 * math.pi * math.e * variance)

    def sampler(rng, n):
        return rng.normal(0.0, sigma, size=(n, d))

    if d == 1:
        pdf = lambda x: stats.norm.pdf(x, scale=sigma)
        cdf = lambda x: stats.norm.cdf(x, scale=sigma)
        sf = lambda x: stats.norm.sf(x, scale=sigma)
    else:
        def pdf(x):
            x = np.asarray(x, dtype=float)
            return np.prod(stats.norm.pdf(x, scale=sigma), axis=-1)
        cdf = sf = None
    model = SourceModel("gaussian", d, sampler, pdf=pdf, cdf=cdf, sf=sf, h=h,
                        params={"variance": variance, "d": d})
    scalar = model if d == 1 else make_gaussian(1, variance)
    fe = _entropy_of(cdf_cell_masses(scalar, 1.0)[1]) * d
    return _replace(model, floor_entropy=fe)


def make_laplacian(rate: float = 1.0) -> SourceModel:
    _check_positive("rate", rate)
    scale = 1.0 / rate
    model = SourceModel(
        "laplacian", 1,
        lambda rng, n: rng.laplace(0.0, scale, size=(n, 1)),
        pdf=lambda x: stats.laplace.pdf(x, scale=scale),
        cdf=lambda x: stats.laplace.cdf(x, scale=scale),
        sf=lambda x: stats.laplace.sf(x, scale=scale),
        h=math.log(2 * math.e / rate),
        params={"rate": rate},
        breakpoints=lambda lo, hi: _points_within([0.0], lo, hi),
    )
    return _replace(model, floor_entropy=_entropy_of(cdf_cell_masses(model, 1.0)[1]))


def make_uniform(a: float = 0.0, b: float = 1.0) -> SourceModel:
    if not a < b:
        raise ValueError(f"uniform source needs a < b, got ({a}, {b})")
    width = b - a

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x < b), 1.0 / width, 0.0)

    model = SourceModel(
        "uniform", 1,
        lambda rng, n: rng.uniform(a, b, size=(n, 1)),
        pdf=pdf,
        cdf=lambda x: np.clip((np.asarray(x, dtype=float) - a) / width, 0.0, 1.0),
        h=math.log(width),
        support=(a, b),
        params={"a": a, "b": b, "median": 0.5 * (a + b)},
        breakpoints=lambda lo, hi: _points_within([a, b], lo, hi),
    )
    return _replace(model, floor_entropy=_entropy_of(cdf_cell_masses(model, 1.0)[1]))


def make_generalized_gaussian(exponent: float = 2.0, scale: float = 1.0) -> SourceModel:
    """Density proportional to exp(-(|x|/scale)^exponent)."""
    _check_positive("exponent", exponent)
    _check_positive("scale", scale)
    law = stats.gennorm(exponent, scale=scale)
    h = 1.0 / exponent + math.log(2 * scale) + float(gammaln(1.0 / exponent)) - math.log(exponent)

    def sampler(rng, n):
        t = rng.gamma(1.0 / exponent, 1.0, size=(n, 1)) ** (1.0 / exponent)
        return scale * t * rng.choice([-1.0, 1.0], size=(n, 1))

    model = SourceModel("generalized-gaussian", 1, sampler, pdf=law.pdf, cdf=law.cdf,
                        sf=law.sf, h=h, params={"exponent": exponent, "scale": scale},
                        breakpoints=lambda lo, hi: _points_within([0.0], lo, hi))
    return _replace(model, floor_entropy=_entropy_of(cdf_cell_masses(model, 1.0)[1]))


@dataclass(frozen=True)
class PathologicalSpec:
    """Truncation of the source with cells ``[m, m + 1/m)`` of mass proportional to
    ``1/(m log^2 m)``, ``m = 2..M``."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"truncation level must be an integer >= 2, got {self.M!r}")

    @property
    def m(self) -> np.ndarray:
        return np.arange(2, self.M + 1, dtype=float)

    @property
    def weights(self) -> np.ndarray:
        m = self.m
        return 1.0 / (m * np.log(m) ** 2)

    @property
    def K_M(self) -> float:
        return float(math.fsum(self.weights))

    @property
    def masses(self) -> np.ndarray:
        return self.weights / self.K_M

    def floor_entropy(self) -> float:
        q = self.masses
        return float(math.fsum(q * np.log(1.0 / q)))

    def differential_entropy(self) -> float:
        # cell m has width 1/m and density m*q_m
        q = self.masses
        return float(math.fsum(q * (np.log(1.0 / q) - np.log(self.m))))


def make_pathological(M: int) -> SourceModel:
    spec = PathologicalSpec(M)
    m = spec.m
    q = spec.masses
    cum = np.concatenate([[0.0], np.cumsum(q)])
    cum /= cum[-1]
    left = m
    width = 1.0 / m

    def locate(x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.floor(x).astype(np.int64) - 2, 0, len(m) - 1)
        return x, k

    def pdf(x):
        x, k = locate(x)
        inside = (x >= left[k]) & (x < left[k] + width[k])
        return np.where(inside, q[k] * m[k], 0.0)

    def cdf(x):
        x, k = locate(x)
        frac = np.clip((x - left[k]) * m[k], 0.0, 1.0)
        val = cum[k] + q[k] * frac
        return np.where(x < 2.0, 0.0, np.where(x >= M + 1, 1.0, val))

    def sampler(rng, n):
        k = np.searchsorted(cum, rng.random(n), side="right") - 1
        k = np.clip(k, 0, len(m) - 1)
        return (m[k] + rng.random(n) / m[k])[:, None]

    return SourceModel(
        "pathological", 1, sampler, pdf=pdf, cdf=cdf,
        h=spec.differential_entropy(), floor_entropy=spec.floor_entropy(),
        support=(2.0, M + 1.0), params={"M": int(M), "K_M": spec.K_M, "median": 2.0},
        integer_pmf=lambda: (np.arange(2, M + 1), q.copy()),
        breakpoints=lambda lo, hi: _points_within(
            np.sort(np.concatenate([m, m + width])), lo, hi),
    )


def make_mixture(weight: float, atoms, atom_probs, continuous: SourceModel,
                 name: str | None = None) -> SourceModel:
    """With probability ``weight`` draw from the discrete atoms, else from ``continuous``.

    The mixture has no density for ``weight > 0``; ``pdf`` is left unset and the model
    is flagged as not absolutely continuous.
    """
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"mixture weight must lie in [0, 1], got {weight!r}")
    d = continuous.d
    atoms = np.asarray(atoms, dtype=float).reshape(-1, d)
    probs = np.asarray(atom_probs, dtype=float)
    if len(probs) != len(atoms) or (probs < 0).any() or abs(probs.sum() - 1) > 1e-9:
        raise ValueError("atom probabilities must be nonnegative, sum to 1, and match atoms")

    def sampler(rng, n):
        out = continuous.sample(rng, n)
        pick = rng.random(n) < weight
        k = int(pick.sum())
        if k:
            out[pick] = atoms[rng.choice(len(atoms), size=k, p=probs)]
        return out

    name = name or f"mixture({continuous.name})"
    if weight == 0.0:
        return _replace(continuous, sampler=sampler, name=name)
    return SourceModel(
        name, d, sampler,
        params={"weight": weight, "atoms": atoms.tolist(), "atom_probs": probs.tolist()},
        absolutely_continuous=False,
    )


def make_atom(value: float = 0.0) -> SourceModel:
    return make_mixture(1.0, [value], [1.0], make_uniform(0.0, 1.0), name="atom")


def _replace(model, **changes):
    from dataclasses import replace
    return replace(model, **changes)


CATALOG = {
    "gaussian": make_gaussian,
    "laplacian": make_laplacian,
    "uniform": make_uniform,
    "generalized-gaussian": make_generalized_gaussian,
    "pathological": make_pathological,
    "atom": make_atom,
}


def make_source(name: str, **params) -> SourceModel:
    """Build a catalog source by name.  ``mixture`` takes ``weight`` plus an atom at 0
    and a standard Gaussian continuous part unless ``atom`` is given."""
    if name == "mixture":
        w = float(params.get("weight", 0.5))
        atom = float(params.get("atom", 0.0))
        var = float(params.get("variance", 1.0))
        return make_mixture(w, [atom], [1.0], make_gaussian(1, var))
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown source {name!r}; choose from {sorted(CATALOG) + ['mixture']}")
    return factory(**params)
