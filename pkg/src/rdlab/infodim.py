"""Information-dimension estimates and the integer-part entropy experiments behind
the dichotomy: perturbation continuity, divergence on truncations of the
heavy-tailed cell source, clipping, and the floor-difference inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import EntropyEstimate, _entropy, floor_entropy_samples
from .shannon_bound import NoiseChannel, sample_noise
from .sources import make_pathological

UNDERSAMPLED_RATIO = 0.1


@dataclass
class DimensionEstimate:
    m: np.ndarray
    H: np.ndarray
    se: np.ndarray
    slope: float
    residual: float
    undersampled: np.ndarray
    fit_m: np.ndarray = field(default_factory=lambda: np.array([]))


def _fit_slope(m, H):
    x = np.log(m)
    if len(x) == 1 or np.ptp(x) == 0:
        return 0.0, 0.0
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, H, rcond=None)
    resid = H - A @ coef
    return float(coef[0]), float(math.sqrt(np.mean(resid**2)))


def info_dimension(source, m_grid, n: int, rng: np.random.Generator,
                   samples=None) -> DimensionEstimate:
    """Slope of H(floor(mX)) against log m.

    ``m_grid`` must consist of powers of two.  Each grid point uses its own ``n``
    samples (or the supplied ``samples`` for every point).  Points whose occupied
    cell count exceeds ``n/10`` are flagged as undersampled and left out of the fit;
    the slope is fitted over the upper half of the remaining grid.
    """
    m_grid = np.asarray(sorted(m_grid), dtype=np.int64)
    if any(int(m) & (int(m) - 1) for m in m_grid) or (m_grid < 1).any():
        raise ValueError("m grid must consist of powers of two")
    H, se, under = [], [], []
    for m in m_grid:
        x = samples if samples is not None else source.sample(rng, n)
        est = floor_entropy_samples(np.asarray(x) * m)
        H.append(est.value)
        se.append(est.standard_error)
        under.append(est.extra["occupied"] > UNDERSAMPLED_RATIO * len(x))
    H, se, under = np.array(H), np.array(se), np.array(under)
    ok = np.flatnonzero(~under)
    if len(ok) == 0:
        raise ValueError("every grid point is undersampled; increase n or lower m")
    top = ok[len(ok) // 2:]
    slope, resid = _fit_slope(m_grid[top], H[top])
    return DimensionEstimate(m_grid, H, se, slope, resid, under, m_grid[top])


def floor_entropy_from_masses(masses) -> float:
    masses = np.asarray(masses, dtype=float)
    return _entropy(masses / masses.sum())


def lemma1_convergence(source, channel: NoiseChannel, eps_grid, n: int,
                       rng: np.random.Generator, oracle=None):
    """Monte Carlo H(floor(X + eps Z)) along a decreasing ``eps`` grid.

    The same draws of X and Z are reused for every ``eps`` so that differences along
    the grid are not swamped by independent sampling noise.  ``oracle(eps)``, when
    given, supplies the exact value for each row.
    """
    eps_grid = [float(e) for e in eps_grid]
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be strictly decreasing")
    x = source.sample(rng, n)
    z = sample_noise(channel, rng, n)
    rows = []
    for eps in eps_grid:
        est = floor_entropy_samples(x + eps * z if eps > 0 else x)
        rows.append((eps, est, None if oracle is None else oracle(eps)))
    return rows


def lemma1_divergence(M_grid, eps: float, channel: NoiseChannel, n: int,
                      rng: np.random.Generator):
    """Integer-part entropies of truncated heavy-tailed sources, with and without
    the perturbation ``eps * Z``.

    Returns rows ``(M, perturbed estimate, exact unperturbed H, unperturbed
    estimate)``.
    """
    M_grid = [int(M) for M in M_grid]
    if any(b <= a for a, b in zip(M_grid, M_grid[1:])):
        raise ValueError("M grid must be increasing")
    rows = []
    for M in M_grid:
        src = make_pathological(M)
        x = src.sample(rng, n)
        z = sample_noise(channel, rng, n)
        perturbed = floor_entropy_samples(x + eps * z)
        plain = floor_entropy_samples(x)
        rows.append((M, perturbed, src.floor_entropy, plain))
    return rows


def clip(x, upsilon: float):
    """Component-wise clipping to the cube [-upsilon, upsilon]^d."""
    return np.maximum(np.minimum(x, upsilon), -upsilon)


def clipped_entropy_exact(integers, masses, upsilon: float) -> float:
    """Entropy of the clipped integer part, given the exact pmf of the integer part."""
    vals = clip(np.asarray(integers, dtype=float), upsilon)
    _, inv = np.unique(vals, return_inverse=True)
    merged = np.bincount(inv.ravel(), weights=np.asarray(masses, dtype=float))
    return _entropy(merged / merged.sum())


def clipped_floor_entropy(source, upsilon_grid, method: str = "exact", n: int = 10**6,
                          rng=None):
    """H(clip(floor(X))) along an increasing grid of clipping levels."""
    ups = [float(u) for u in upsilon_grid]
    if any(u <= 0 for u in ups) or any(b <= a for a, b in zip(ups, ups[1:])):
        raise ValueError("clipping levels must be positive and increasing")
    if method == "exact":
        ints, masses = source.floor_pmf()
        return [(u, clipped_entropy_exact(ints, masses, u)) for u in ups]
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    cells = np.floor(source.sample(rng, n))
    out = []
    for u in ups:
        # the clipped values are still a lattice shift apart, so flooring keeps them distinct
        vals = clip(cells, u)
        _, inv = np.unique(vals, axis=0, return_inverse=True)
        counts = np.bincount(inv.ravel())
        out.append((u, _entropy(counts / n)))
    return out


def _joint_entropy(columns, w):
    keys = np.concatenate(columns, axis=1)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    return _entropy(np.bincount(inv.ravel(), weights=w))


@dataclass
class ConverseReport:
    """Both sides of the two inequalities bounding H(floor X | floor Xhat)."""

    cond_entropy: float        # H(A | B)
    diff_entropy: float        # H(C)
    residual_entropy: float    # H(A | B, C)
    d: int

    @property
    def first_holds(self) -> bool:
        return self.cond_entropy <= self.diff_entropy + self.residual_entropy + 1e-12

    @property
    def second_holds(self) -> bool:
        return self.residual_entropy <= self.d * math.log(2) + 1e-12

    @property
    def holds(self) -> bool:
        return self.first_holds and self.second_holds


def converse_inequality_check(x, xhat, weights) -> ConverseReport:
    """Check the floor-difference inequalities on a finite joint law of (X, Xhat).

    With A = floor(X), B = floor(Xhat) and C = floor(X - Xhat):
    H(A|B) <= H(C) + H(A|B,C) and H(A|B,C) <= d log 2.
    """
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.ndim == 1:
        x, xhat = x[:, None], xhat[:, None]
    w = np.asarray(weights, dtype=float)
    if x.shape != xhat.shape or len(w) != len(x):
        raise ValueError("x, xhat and weights must describe the same point pairs")
    if (w < 0).any() or abs(math.fsum(w) - 1) > 1e-9:
        raise ValueError("weights must be a pmf")
    a, b, c = np.floor(x), np.floor(xhat), np.floor(x - xhat)
    h_ab = _joint_entropy([a, b], w)
    h_b = _joint_entropy([b], w)
    h_abc = _joint_entropy([a, b, c], w)
    h_bc = _joint_entropy([b, c], w)
    h_c = _joint_entropy([c], w)
    return ConverseReport(h_ab - h_b, h_c, h_abc - h_bc, x.shape[1])


def exact_floor_entropy_of(cdf_source) -> float:
    """H(floor(X)) from the exact integer-part pmf of a source."""
    return floor_entropy_from_masses(cdf_source.floor_pmf()[1])


def as_estimate(value: float) -> EntropyEstimate:
    return EntropyEstimate(value, 0.0, "exact")
