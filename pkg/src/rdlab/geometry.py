"""Norms, unit-ball volumes and sampling of cone-measure directions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

DEFAULT_REJECTION_CAP = 10**6
# Above this dimension the bounding-cube acceptance rate of p-balls collapses.
REJECTION_MAX_DIM = 8


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class NormSpec:
    """A p-norm on R^d. ``p=math.inf`` selects the max-norm."""

    d: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        if not (self.p >= 1):
            raise ValueError(f"norm exponent must satisfy p >= 1, got {self.p!r}")

    @property
    def is_max(self) -> bool:
        return math.isinf(self.p)

    @classmethod
    def max_norm(cls, d: int) -> "NormSpec":
        return cls(d, math.inf)

    def label(self) -> str:
        return "inf" if self.is_max else f"{self.p:g}"


def norm_eval(x, norm: NormSpec):
    """Evaluate the norm along the last axis of ``x``.

    Scalars and 1-D inputs are accepted for ``d == 1``.
    """
    x = np.asarray(x, dtype=float)
    if norm.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return np.abs(x)
    if x.ndim == 0 or x.shape[-1] != norm.d:
        raise ValueError(f"expected vectors of length {norm.d}, got shape {x.shape}")
    a = np.abs(x)
    if norm.is_max:
        return a.max(axis=-1)
    if norm.p == 1:
        return a.sum(axis=-1)
    # scale by the max entry so large or tiny vectors do not over/underflow
    scale = a.max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    out = (((a / safe) ** norm.p).sum(axis=-1)) ** (1.0 / norm.p)
    return out * np.squeeze(safe, axis=-1)


def log_unit_ball_volume(norm: NormSpec) -> float:
    d = norm.d
    if norm.is_max:
        return d * math.log(2.0)
    p = norm.p
    return d * (math.log(2.0) + float(gammaln(1.0 + 1.0 / p))) - float(gammaln(1.0 + d / p))


def unit_ball_volume(norm: NormSpec) -> float:
    return math.exp(log_unit_ball_volume(norm))


def _directions_by_rejection(norm, rng, n, cap):
    d = norm.d
    out = np.empty((n, d))
    filled = 0
    drawn = 0
    budget = cap * n
    # acceptance rate is V_d / 2^d; oversample accordingly
    rate = unit_ball_volume(norm) / 2.0**d
    while filled < n:
        if drawn >= budget:
            raise SamplingError(
                f"rejection sampler exceeded {cap} draws per sample "
                f"(d={d}, p={norm.label()}, acceptance rate {rate:.3g})"
            )
        batch = int(min(budget - drawn, max(64, 1.2 * (n - filled) / rate)))
        v = rng.uniform(-1.0, 1.0, size=(batch, d))
        drawn += batch
        r = norm_eval(v, norm)
        ok = (r <= 1.0) & (r > 0.0)
        v = v[ok] / r[ok, None]
        take = min(len(v), n - filled)
        out[filled:filled + take] = v[:take]
        filled += take
    return out


def _directions_by_gen_gaussian(norm, rng, n):
    p = norm.p
    t = rng.gamma(1.0 / p, 1.0, size=(n, norm.d)) ** (1.0 / p)
    t *= rng.choice([-1.0, 1.0], size=t.shape)
    return t / norm_eval(t, norm)[:, None]


def sample_cone_direction(norm: NormSpec, rng: np.random.Generator, size=None,
                          method: str = "auto", cap: int = DEFAULT_REJECTION_CAP):
    """Draw unit vectors distributed according to the cone measure of the norm ball.

    ``method`` is ``"rejection"``, ``"gen-gaussian"`` or ``"auto"``; ``"auto"`` uses
    rejection from the cube for d <= 8 and the generalized-Gaussian construction
    for p-norms in higher dimension.  Returns shape ``(d,)`` when ``size`` is None,
    else ``(size, d)``.
    """
    n = 1 if size is None else int(size)
    if method == "auto":
        if norm.is_max or norm.d <= REJECTION_MAX_DIM:
            method = "rejection"
        else:
            method = "gen-gaussian"
    if method == "rejection":
        if norm.d > REJECTION_MAX_DIM and not norm.is_max:
            raise ValueError("rejection sampling is disabled for p-norms with d > 8")
        out = _directions_by_rejection(norm, rng, n, cap)
    elif method == "gen-gaussian":
        if norm.is_max:
            raise ValueError("generalized-Gaussian directions need a finite p")
        out = _directions_by_gen_gaussian(norm, rng, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[0] if size is None else out


def mc_ball_volume(norm: NormSpec, n: int, rng: np.random.Generator):
    """Monte Carlo volume of the unit ball by rejection from [-1, 1]^d.

    Returns ``(estimate, standard_error)``.
    """
    v = rng.uniform(-1.0, 1.0, size=(n, norm.d))
    hit = norm_eval(v, norm) <= 1.0
    frac = hit.mean()
    cube = 2.0**norm.d
    return cube * frac, cube * math.sqrt(frac * (1 - frac) / n)
