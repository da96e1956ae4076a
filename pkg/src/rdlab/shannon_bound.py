"""Shannon lower bound, the additive test channel and the gap it leaves.

The channel adds noise with density proportional to ``exp(-(d/(rD)) ||z||^r)``.
Its radial part ``T = ||Z||^r`` is Gamma distributed with shape ``d/r`` and scale
``rD/d``: substituting ``t = rho^r`` in ``rho^(d-1) exp(-(d/(rD)) rho^r) d rho``
leaves ``t^(d/r - 1) exp(-(d/(rD)) t) dt`` up to a constant.  Sampling ``T`` and an
independent cone-measure direction therefore reproduces the density, and
``E ||Z||^r = E T = D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.signal import fftconvolve
from scipy.special import gammaln

from .entropy import (EntropyEstimate, EstimatorError, diff_entropy_grid, diff_entropy_knn,
                      grid_error_floor)
from .geometry import NormSpec, log_unit_ball_volume, norm_eval, sample_cone_direction


@dataclass(frozen=True)
class DistortionSpec:
    norm: NormSpec
    r: float
    D: float

    def __post_init__(self):
        if not (self.r > 0) or not math.isfinite(self.r):
            raise ValueError(f"distortion exponent must be positive, got {self.r!r}")
        if not (self.D > 0) or not math.isfinite(self.D):
            raise ValueError(f"distortion target must be positive, got {self.D!r}")

    @property
    def d(self) -> int:
        return self.norm.d

    def with_D(self, D: float) -> "DistortionSpec":
        return DistortionSpec(self.norm, self.r, D)


@dataclass(frozen=True)
class NoiseChannel:
    spec: DistortionSpec

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def ratio(self) -> float:
        return self.spec.d / self.spec.r

    def log_normalizer(self) -> float:
        s = self.spec
        a = self.ratio
        return ((a - 1.0) * math.log(a) - log_unit_ball_volume(s.norm)
                - float(gammaln(a)) - a * math.log(s.D))


def slb(h_x: float, d: int, spec: DistortionSpec) -> float:
    """Shannon lower bound on R(D) in nats.  Negative values are returned unchanged;
    such a bound is vacuous."""
    if not math.isfinite(h_x):
        raise ValueError("differential entropy must be finite")
    if d != spec.d:
        raise ValueError(f"source dimension {d} does not match norm dimension {spec.d}")
    a = d / spec.r
    log_inner = (math.log(spec.r / d)
                 + (spec.r / d) * (log_unit_ball_volume(spec.norm) + float(gammaln(1.0 + a)))
                 + 1.0)
    return h_x + a * math.log(1.0 / spec.D) - a * log_inner


def is_vacuous(value: float) -> bool:
    return value < 0


def noise_pdf(channel: NoiseChannel, z):
    s = channel.spec
    rho = norm_eval(z, s.norm)
    return np.exp(channel.log_normalizer() - (channel.ratio / s.D) * rho**s.r)


def noise_entropy(channel: NoiseChannel) -> float:
    s = channel.spec
    a = channel.ratio
    return (log_unit_ball_volume(s.norm) + float(gammaln(a)) + (a - 1.0) * math.log(s.r / s.d)
            + a * math.log(s.D) + a)


def noise_radius(channel: NoiseChannel, tail: float = 1e-14) -> float:
    """Radius outside of which the noise has probability below ``tail``."""
    s = channel.spec
    t = stats.gamma.isf(tail, channel.ratio, scale=s.r * s.D / s.d)
    return float(t) ** (1.0 / s.r)


def sample_noise(channel: NoiseChannel, rng: np.random.Generator, size=None):
    n = 1 if size is None else int(size)
    s = channel.spec
    t = rng.gamma(channel.ratio, s.r * s.D / s.d, size=n)
    theta = sample_cone_direction(s.norm, rng, size=n)
    z = t[:, None] ** (1.0 / s.r) * theta
    return z[0] if size is None else z


@dataclass
class GapSettings:
    """Estimator settings for the gap bound.

    ``cells_per_scale`` sets the d=1 grid spacing relative to the noise scale
    ``D^(1/r)``; ``min_cells`` bounds it from the other side.
    """

    cells_per_scale: int = 64
    min_cells: int = 2**14
    max_cells: int = 2**22
    box: tuple | None = None
    knn_samples: int = 10**5
    knn_k: int = 3


def _source_entropy(source, settings):
    if source.h is not None:
        return source.h, 0.0
    if source.d == 1 and source.pdf is not None:
        box = settings.box or source.support
        if box is None:
            raise ValueError(f"{source.name}: need a box to grid-estimate h(X)")
        est = diff_entropy_grid(source.pdf, box, 2**16)
        return est.value, est.standard_error
    raise ValueError(f"{source.name}: no differential entropy available")


def _source_box(source, settings):
    if settings.box is not None:
        return settings.box
    if source.support is not None:
        return source.support
    lo = -1.0
    while source.cdf(lo) > 1e-13:
        lo *= 2
    hi = 1.0
    while source.survival(hi) > 1e-13:
        hi *= 2
    return lo, hi


def _output_entropy_1d(source, channel, lo, hi, step):
    """Plug-in entropy of X + Z on a lattice of spacing ``step``.

    X is replaced by its cell masses (CDF differences when available) and the density
    of X + Z is the mass-weighted sum of shifted noise densities.
    """
    i0 = math.floor(lo / step)
    i1 = math.ceil(hi / step)
    edges = np.arange(i0, i1 + 1) * step
    if source.cdf is not None:
        masses = np.clip(np.diff(source.cdf(edges)), 0.0, None)
    else:
        masses = source.pdf(0.5 * (edges[:-1] + edges[1:])) * step
    half = math.ceil(noise_radius(channel) / step)
    zgrid = np.arange(-half, half + 1) * step
    fz = noise_pdf(channel, zgrid)
    fy = fftconvolve(masses, fz)
    fy = np.clip(fy, 0.0, None)
    pos = fy[fy > 0]
    value = float(-np.sum(pos * np.log(pos)) * step)
    return value, float(fy.sum() * step), len(fy)


def gap_upper_bound(source, spec: DistortionSpec, settings: GapSettings | None = None,
                    rng: np.random.Generator | None = None) -> EntropyEstimate:
    """Estimate of h(X + Z_D) - h(X), an upper bound on R(D) - R_SLB(D).

    One-dimensional sources use a convolution grid; higher dimensions use k-NN on
    sampled sums.  The raw value is not clamped.
    """
    settings = settings or GapSettings()
    if source.d != spec.d:
        raise ValueError(f"source dimension {source.d} does not match norm dimension {spec.d}")
    channel = NoiseChannel(spec)
    h_x, se_x = _source_entropy(source, settings)
    if source.d == 1 and (source.cdf is not None or source.pdf is not None):
        lo, hi = _source_box(source, settings)
        scale = spec.D ** (1.0 / spec.r)
        step = min(scale / settings.cells_per_scale, (hi - lo) / settings.min_cells)
        while (hi - lo + 2 * noise_radius(channel)) / step > settings.max_cells:
            step *= 2
        fine, mass, size = _output_entropy_1d(source, channel, lo, hi, step)
        coarse, _, _ = _output_entropy_1d(source, channel, lo, hi, 2 * step)
        se = abs(fine - coarse) + grid_error_floor(size, fine) + se_x
        warnings = () if mass > 1 - 1e-6 else (f"grid captured mass {mass:.8g}",)
        return EntropyEstimate(fine - h_x, se, "grid-plugin", size=size, warnings=warnings,
                               extra={"h_out": fine, "h_x": h_x, "step": step})
    if rng is None:
        rng = np.random.default_rng(0)
    n = settings.knn_samples
    y = source.sample(rng, n) + sample_noise(channel, rng, n)
    est = diff_entropy_knn(y, k=settings.knn_k, rng=rng)
    return EntropyEstimate(est.value - h_x, est.standard_error + se_x, "knn", size=n,
                           extra={"h_out": est.value, "h_x": h_x})


@dataclass
class GapPoint:
    D: float
    slb: float
    gap: float = math.nan
    se: float = math.nan
    method: str = ""
    error: str = ""

    @property
    def reported_gap(self) -> float:
        return max(self.gap, 0.0)


@dataclass
class GapSweep:
    source: str
    norm: NormSpec
    r: float
    points: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(p.error for p in self.points)


def gap_sweep(source, norm: NormSpec, r: float, D_grid, settings: GapSettings | None = None,
              rngs=None) -> GapSweep:
    """Gap bounds along a strictly decreasing D grid.

    Per-point estimator failures are recorded on the point and the sweep continues.
    ``rngs`` supplies one generator per grid point (only used for d > 1).
    """
    D_grid = [float(D) for D in D_grid]
    if any(D <= 0 for D in D_grid) or any(b >= a for a, b in zip(D_grid, D_grid[1:])):
        raise ValueError("D grid must be strictly decreasing and positive")
    if rngs is None:
        rngs = [np.random.default_rng([0, i]) for i in range(len(D_grid))]
    try:
        h_x, h_error = _source_entropy(source, settings or GapSettings())[0], ""
    except ValueError as exc:
        h_x, h_error = None, str(exc)
    out = GapSweep(source.name, norm, r)
    for D, rng in zip(D_grid, rngs):
        spec = DistortionSpec(norm, r, D)
        point = GapPoint(D, math.nan if h_x is None else slb(h_x, source.d, spec))
        if h_error:
            point.error = h_error
            out.points.append(point)
            continue
        try:
            est = gap_upper_bound(source, spec, settings, rng)
        except (EstimatorError, ValueError) as exc:
            point.error = str(exc)
        else:
            point.gap, point.se, point.method = est.value, est.standard_error, est.method
        out.points.append(point)
    return out
