"""Entropy computation and estimation, all in nats."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .geometry import NormSpec, log_unit_ball_volume

METHODS = ("exact", "grid-plugin", "knn", "mc-counts")
JACKKNIFE_BLOCKS = 10
KNN_RESAMPLES = 10
MAX_TIE_FRACTION = 0.01


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    standard_error: float
    method: str
    size: int = 0  # sample count or grid size
    warnings: tuple = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.value):
            raise EstimatorError(f"non-finite entropy value {self.value!r}")
        if self.method == "exact" and self.standard_error != 0:
            raise ValueError("exact values carry no standard error")

    def __float__(self):
        return float(self.value)


def _validate_pmf(pmf, tol=1e-9):
    p = np.asarray(pmf, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("empty pmf")
    if (p < 0).any() or not np.isfinite(p).all():
        raise ValueError("pmf entries must be finite and nonnegative")
    total = math.fsum(p)
    if abs(total - 1.0) > tol:
        raise ValueError(f"pmf sums to {total!r}, not 1")
    return p


def _entropy(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def discrete_entropy(pmf) -> EntropyEstimate:
    p = _validate_pmf(pmf)
    return EntropyEstimate(_entropy(p), 0.0, "exact", size=p.size)


def conditional_entropy(joint) -> float:
    """H(row | column) for a joint pmf given as a 2-D array."""
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2:
        raise ValueError("joint pmf must be a 2-D array")
    _validate_pmf(j)
    return _entropy(j.ravel()) - _entropy(j.sum(axis=0))


def miller_madow(counts) -> float:
    counts = np.asarray(counts)
    counts = counts[counts > 0]
    n = counts.sum()
    p = counts / n
    return _entropy(p) + (len(counts) - 1) / (2.0 * n)


def _cell_labels(cells):
    if cells.ndim == 1 or cells.shape[1] == 1:
        _, labels = np.unique(cells.ravel(), return_inverse=True)
    else:
        _, labels = np.unique(cells, axis=0, return_inverse=True)
    return labels.ravel()


def floor_entropy_samples(samples, blocks: int = JACKKNIFE_BLOCKS) -> EntropyEstimate:
    """Miller-Madow entropy of the integer parts of ``samples``.

    Standard error by a delete-one-block jackknife.  Counts are aggregated per block
    in index order so the result does not depend on how samples were produced.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    cells = np.floor(x).astype(np.int64)
    labels = _cell_labels(cells)
    k = labels.max() + 1
    total = np.bincount(labels, minlength=k)
    value = miller_madow(total)
    bounds = np.linspace(0, n, blocks + 1).astype(int)
    leave_out = np.empty(blocks)
    for b in range(blocks):
        part = np.bincount(labels[bounds[b]:bounds[b + 1]], minlength=k)
        leave_out[b] = miller_madow(total - part)
    se = math.sqrt((blocks - 1) / blocks * np.sum((leave_out - leave_out.mean()) ** 2))
    return EntropyEstimate(value, se, "mc-counts", size=n,
                           extra={"occupied": int(k)})


def floor_entropy_mc(source, n: int, rng: np.random.Generator) -> EntropyEstimate:
    if n < 1000:
        raise ValueError("floor-entropy Monte Carlo needs n >= 1000")
    return floor_entropy_samples(source.sample(rng, n))


def _grid_plugin(pdf, lo, hi, cells):
    d = len(lo)
    axes = [lo[i] + (np.arange(cells) + 0.5) * (hi[i] - lo[i]) / cells for i in range(d)]
    vol = float(np.prod([(hi[i] - lo[i]) / cells for i in range(d)]))
    if d == 1:
        f = np.asarray(pdf(axes[0]), dtype=float)
    else:
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        f = np.asarray(pdf(mesh), dtype=float)
    if not np.isfinite(f).all() or (f < 0).any():
        raise EstimatorError("pdf returned negative or non-finite values on the grid")
    pos = f[f > 0]
    return float(-np.sum(pos * np.log(pos)) * vol), float(f.sum() * vol)


def grid_error_floor(cells_total: int, value: float) -> float:
    """Accumulated rounding of a plug-in sum over ``cells_total`` terms."""
    return cells_total * np.finfo(float).eps * (1.0 + abs(value))


def diff_entropy_grid(pdf, box, cells: int = 2**16) -> EntropyEstimate:
    """Midpoint-rule plug-in estimate of -int f log f over a box.

    ``box`` is ``(lo, hi)`` for d=1 or a sequence of per-axis ``(lo, hi)`` pairs for
    d=2.  The standard error is the change against a grid with half the cells per axis
    plus a rounding floor.
    """
    if np.ndim(box[0]) == 0:
        lo, hi = [float(box[0])], [float(box[1])]
    else:
        lo = [float(b[0]) for b in box]
        hi = [float(b[1]) for b in box]
    d = len(lo)
    if d > 2:
        raise ValueError("grid estimation is limited to d <= 2")
    if cells < 2**8:
        raise ValueError("need at least 2^8 cells per axis")
    value, mass = _grid_plugin(pdf, lo, hi, cells)
    coarse, _ = _grid_plugin(pdf, lo, hi, cells // 2)
    se = abs(value - coarse) + grid_error_floor(cells**d, value)
    warnings = ()
    if mass < 1 - 1e-4:
        warnings = (f"box captures mass {mass:.6g}",)
    return EntropyEstimate(value, se, "grid-plugin", size=cells**d, warnings=warnings,
                           extra={"mass": mass})


def _jitter_ties(x, rng):
    """Break exact duplicates with 1e-12-relative jitter; reject atom-heavy inputs."""
    _, inverse, counts = np.unique(x, axis=0, return_inverse=True, return_counts=True)
    dup = counts[inverse.ravel()] > 1
    frac = dup.mean()
    if frac > MAX_TIE_FRACTION:
        raise EstimatorError(
            f"{frac:.1%} of samples are exact duplicates; input does not look "
            "absolutely continuous"
        )
    if dup.any():
        x = x.copy()
        scale = 1e-12 * (1.0 + np.abs(x[dup]))
        x[dup] += scale * rng.standard_normal(x[dup].shape)
    return x


def _kl_value(x, k):
    n, d = x.shape
    tree = cKDTree(x)
    dist, _ = tree.query(x, k=k + 1)
    eps = dist[:, -1]
    log_vd = log_unit_ball_volume(NormSpec(d, 2.0))
    return float(digamma(n) - digamma(k) + log_vd + d * np.mean(np.log(eps)))


def diff_entropy_knn(samples, k: int = 3, rng: Optional[np.random.Generator] = None,
                     resamples: int = KNN_RESAMPLES) -> EntropyEstimate:
    """Kozachenko-Leonenko estimate with Euclidean k-th neighbor distances.

    The standard error is the spread over ``resamples`` half-size subsamples;
    ``resamples=0`` skips it and reports ``nan``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    if n < 1000:
        raise ValueError("k-NN entropy needs at least 1000 samples")
    if k < 1:
        raise ValueError("neighbor order must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    x = _jitter_ties(x, rng)
    value = _kl_value(x, k)
    if resamples == 0:
        return EntropyEstimate(value, math.nan, "knn", size=n, extra={"k": k})
    if resamples < 2:
        raise ValueError("need 0 or at least 2 resamples")
    half = n // 2
    subs = [_kl_value(x[rng.choice(n, half, replace=False)], k) for _ in range(resamples)]
    # half-size subsamples vary about twice as much as the full estimate, so this is conservative
    se = float(np.std(subs, ddof=1))
    return EntropyEstimate(value, se, "knn", size=n, extra={"k": k})


def dither_identity_check(support, pmf, n: int = 10**5, rng=None, k: int = 3):
    """Exact H(Y) for an integer-valued Y, and a k-NN estimate of h(Y + U) with U
    uniform on the unit cube."""
    if rng is None:
        rng = np.random.default_rng(0)
    pts = np.asarray(support)
    if pts.ndim == 1:
        pts = pts[:, None]
    if not np.all(pts == np.round(pts)):
        raise ValueError("support must consist of integer points")
    exact = discrete_entropy(pmf)
    p = np.asarray(pmf, dtype=float)
    idx = rng.choice(len(pts), size=n, p=p / p.sum())
    y = pts[idx] + rng.random((n, pts.shape[1]))
    return exact, diff_entropy_knn(y, k=k, rng=rng)
