"""Blahut-Arimoto computation of the rate-distortion function of a discretized
scalar source."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, sparse

from .entropy import _entropy

# Kernel entries below this (relative to the row maximum 1) are dropped, which
# changes c_i by less than m * 1e-200.
KERNEL_FLOOR = 1e-200
SPARSE_MIN_SIZE = 2**20
SPARSE_MAX_DENSITY = 0.3
# Lagrangian-gap tolerance used by the experiments; see blahut_arimoto_point.
EXPERIMENT_TOL = 1e-4

# Documented allowance for the bias of solving the discretized problem.
DISCRETIZATION_ALLOWANCE = 1e-2


@dataclass(frozen=True)
class DiscretizedProblem:
    x: np.ndarray       # source cell midpoints
    p: np.ndarray       # source cell masses
    xhat: np.ndarray    # reconstruction points
    r: float
    source: str = ""
    warnings: tuple = ()

    def __post_init__(self):
        for name in ("x", "xhat"):
            g = getattr(self, name)
            if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} must be a strictly increasing grid")
        if len(self.p) != len(self.x) or (self.p < 0).any():
            raise ValueError("source pmf must be nonnegative and match the grid")
        if abs(math.fsum(self.p) - 1) > 1e-9:
            raise ValueError("source pmf must sum to 1")

    @property
    def distortion(self) -> np.ndarray:
        return np.abs(self.x[:, None] - self.xhat[None, :]) ** self.r


def _cell_masses(source, edges):
    if source.cdf is not None:
        mid = 0.5 * (edges[:-1] + edges[1:])
        lower = np.diff(source.cdf(edges))
        upper = -np.diff(source.survival(edges))
        med = source.params.get("median", 0.0)
        return np.clip(np.where(mid > med, upper, lower), 0.0, None)
    return np.array([integrate.quad(source.pdf, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])


def discretize(source, box, n: int, m: int | None = None, r: float = 2.0) -> DiscretizedProblem:
    """Equal-width cells over ``box`` with masses from the source law; the
    reconstruction grid spans the same box (midpoints of ``m`` equal cells)."""
    if source.d != 1:
        raise ValueError("discretization is implemented for scalar sources only")
    m = n if m is None else m
    if n < 2 or m < 2:
        raise ValueError("need at least two source cells and two reconstruction points")
    lo, hi = map(float, box)
    edges = np.linspace(lo, hi, n + 1)
    masses = _cell_masses(source, edges)
    captured = math.fsum(masses)
    if captured < 0.99:
        raise ValueError(f"box {box} captures only {captured:.4g} of the source mass")
    notes = ()
    if captured < 1 - 1e-6:
        notes = (f"box captures mass {captured:.8g}",)
        warnings.warn(notes[0])
    x = 0.5 * (edges[:-1] + edges[1:])
    xh_edges = np.linspace(lo, hi, m + 1)
    xhat = 0.5 * (xh_edges[:-1] + xh_edges[1:])
    return DiscretizedProblem(x, masses / masses.sum(), xhat, r, source.name, notes)


@dataclass
class BAResult:
    s: float
    D: float
    R: float
    iterations: int
    converged: bool
    gap: float
    q: np.ndarray = field(repr=False, default=None)


def blahut_arimoto_point(problem: DiscretizedProblem, s: float, max_iter: int = 10**5,
                         tol: float = 1e-9, q0=None) -> BAResult:
    """Alternating minimization of I(X; Xhat) - s E[d] at slope ``s < 0``.

    Stops when the gap between the upper and lower bounds on the Lagrangian falls
    below ``tol``; that gap also bounds the error of the returned Lagrangian value.
    Rows of the kernel are rescaled by their largest entry, which cancels in every
    update and keeps large ``|s|`` from underflowing.

    On fine grids the gap closes sublinearly (reconstruction points near the box
    edges carry weights around e^-30 that adjust slowly), so the 1e-9 default can
    need far more than ``max_iter`` iterations even though D and R settle early;
    such points come back with ``converged=False``.
    """
    if not s < 0:
        raise ValueError("slope parameter must be negative")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    p = problem.p
    keep = p > 0
    p = p[keep]
    dist = problem.distortion[keep]
    dmin = dist.min(axis=1)
    A = np.exp(s * (dist - dmin[:, None]))
    if A.size > SPARSE_MIN_SIZE:
        A[A < KERNEL_FLOOR] = 0.0
        if np.count_nonzero(A) < SPARSE_MAX_DENSITY * A.size:
            A = sparse.csr_matrix(A)
    # log-domain output law: entries that underflow in q keep evolving in log q
    m = dist.shape[1]
    logq = np.full(m, -math.log(m)) if q0 is None else np.log(np.clip(q0, 1e-300, None))
    it = 0
    converged = False
    gap = math.inf
    while it < max_iter:
        it += 1
        q = np.exp(logq - logq.max())
        q /= q.sum()
        c = A @ q
        cprime = A.T @ (p / c)
        logc = np.log(np.maximum(cprime, 1e-300))
        # Blahut's bounds on the Lagrangian: max_j log c'_j and sum_j q_j c'_j log c'_j
        gap = float(logc.max() - np.dot(q * cprime, logc))
        logq = logq + logc
        if gap < tol:
            converged = True
            break
    q = np.exp(logq - logq.max())
    q /= q.sum()
    c = A @ q
    if sparse.issparse(A):
        W = A.multiply(q[None, :]).multiply(1.0 / c[:, None]).tocsr()
        D = float(W.multiply(dist).multiply(p[:, None]).sum())
        qout = W.T @ p
    else:
        W = A * q[None, :] / c[:, None]
        D = float(np.sum(p[:, None] * W * dist))
        qout = p @ W
    logc_true = np.log(c) + s * dmin
    cprime = A.T @ (p / c)
    mask = qout > 0
    R = float(s * D - np.dot(p, logc_true)
              - np.dot(qout[mask], np.log(np.maximum(cprime[mask], 1e-300))))
    return BAResult(s, D, max(R, 0.0), it, converged, gap, q)


@dataclass
class RDCurve:
    points: list  # BAResult, sorted by increasing D
    metadata: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def D(self):
        return np.array([pt.D for pt in self.points])

    @property
    def R(self):
        return np.array([pt.R for pt in self.points])

    def rate_at(self, D: float) -> float:
        """Rate at ``D`` by linear interpolation between curve points (an upper bound
        on the convex curve between them)."""
        Ds, Rs = self.D, self.R
        if not Ds[0] <= D <= Ds[-1]:
            raise ValueError(f"D={D} outside curve range [{Ds[0]}, {Ds[-1]}]")
        return float(np.interp(D, Ds, Rs))


def check_convexity(points, tol=1e-9):
    """Indices where the sorted curve is increasing or non-convex."""
    bad = []
    D = np.array([pt.D for pt in points])
    R = np.array([pt.R for pt in points])
    for i in range(1, len(points)):
        if R[i] > R[i - 1] + tol:
            bad.append((i, "increasing"))
    for i in range(1, len(points) - 1):
        t = (D[i] - D[i - 1]) / (D[i + 1] - D[i - 1])
        if R[i] > (1 - t) * R[i - 1] + t * R[i + 1] + tol:
            bad.append((i, "non-convex"))
    return bad


def rd_curve(problem: DiscretizedProblem, s_grid, max_iter: int = 10**5,
             tol: float = 1e-9) -> RDCurve:
    s_grid = sorted(float(s) for s in s_grid)
    if any(s >= 0 for s in s_grid):
        raise ValueError("slope grid must be strictly negative")
    results = []
    failures = []
    q = None
    # warm start from the steep end, where the output law is close to the source law
    for s in s_grid:
        try:
            res = blahut_arimoto_point(problem, s, max_iter, tol, q0=q)
        except (FloatingPointError, ValueError) as exc:
            failures.append((s, str(exc)))
            continue
        results.append(res)
        q = res.q
    results.sort(key=lambda pt: pt.D)
    dedup = []
    for pt in results:
        if dedup and abs(pt.D - dedup[-1].D) <= 1e-15 * max(1.0, pt.D):
            continue
        dedup.append(pt)
    meta = {"source": problem.source, "n": len(problem.x), "m": len(problem.xhat),
            "r": problem.r, "failures": failures}
    return RDCurve(dedup, meta, check_convexity(dedup))


def zero_rate_distortion(problem: DiscretizedProblem) -> float:
    """Smallest distortion reachable with a single reconstruction point."""
    return float((problem.p @ problem.distortion).min())


def rate_at_distortion(problem: DiscretizedProblem, D: float, s_guess: float | None = None,
                       tol: float = 1e-9, max_iter: int = 10**5, rel_tol: float = 1e-3,
                       max_solves: int = 30) -> BAResult:
    """Blahut-Arimoto point at distortion ``D``.

    The slope is found by a secant iteration on ``log D`` against ``log |s|`` (D(s) is
    monotone), warm-starting each solve from the previous output law.  The rate is
    then moved to ``D`` along the supporting line of slope ``s``, which leaves an
    error of second order in the relative distortion mismatch ``rel_tol``.
    """
    if D >= zero_rate_distortion(problem):
        return BAResult(0.0, D, 0.0, 0, True, 0.0, None)
    if s_guess is None:
        s_guess = -1.0 / (problem.r * D)
    u = math.log(-s_guess)
    res = blahut_arimoto_point(problem, -math.exp(u), max_iter, tol)
    f = math.log(res.D / D)
    prev = None
    for _ in range(max_solves):
        if abs(f) < rel_tol:
            break
        # log D falls roughly one-for-one with log|s| near the high-resolution limit
        slope = -1.0 if prev is None or prev[1] == f else (f - prev[1]) / (u - prev[0])
        if not slope < 0:
            slope = -1.0
        step = max(min(-f / slope, 2.0), -2.0)
        prev = (u, f)
        u += step
        res = blahut_arimoto_point(problem, -math.exp(u), max_iter, tol, q0=res.q)
        f = math.log(res.D / D)
    else:
        raise RuntimeError(f"slope search for D={D} did not settle (last D={res.D})")
    R = max(res.R + res.s * (D - res.D), 0.0)
    return BAResult(res.s, D, R, res.iterations, res.converged, res.gap, res.q)


def lossless_rate(problem: DiscretizedProblem) -> float:
    return _entropy(problem.p)
