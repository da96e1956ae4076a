"""Entropy-coded uniform scalar quantization at high resolution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .entropy import discrete_entropy
from .geometry import NormSpec
from .shannon_bound import DistortionSpec, slb
from .sources import _lattice_range

CELL_BUDGET = 10**7
GAUSS_NODES = 16
GISH_PIERCE = 0.5 * math.log(math.pi * math.e / 6)  # nats


@dataclass
class QuantizerReport:
    step: float
    entropy: float
    distortion: float
    r: float
    gap_to_rd: float = math.nan
    gap_to_slb: float = math.nan
    cells: int = 0


def _cells(source, step, offset, budget):
    i0, i1 = _lattice_range(source, step, offset, budget)
    edges = offset + np.arange(i0, i1 + 1) * step
    mid = 0.5 * (edges[:-1] + edges[1:])
    lower = np.diff(source.cdf(edges))
    upper = -np.diff(source.survival(edges))
    masses = np.where(mid > source.params.get("median", 0.0), upper, lower)
    masses = np.clip(masses, 0.0, None)
    return edges, masses


def _pieces(source, edges):
    """Split the cells at the pdf's breakpoints.  Returns piece bounds and the index
    of the cell each piece belongs to."""
    bps = np.array([]) if source.breakpoints is None else source.breakpoints(edges[0], edges[-1])
    bounds = np.union1d(edges, bps)
    a, b = bounds[:-1], bounds[1:]
    cell = np.searchsorted(edges, 0.5 * (a + b), side="right") - 1
    return a, b, cell


def _integrate(source, a, b, cell, ncells, g, nodes, weights):
    """Per-cell Gauss-Legendre integrals of ``g(x, cell) * pdf(x)`` over the pieces."""
    half = 0.5 * (b - a)
    x = 0.5 * (a + b)[:, None] + half[:, None] * nodes[None, :]
    vals = (g(x, cell) * source.pdf(x) * weights[None, :]).sum(axis=1) * half
    return np.bincount(cell, weights=vals, minlength=ncells)


def _cell_medians(source, lo, hi, mass):
    """Per-cell medians by vectorised bisection on CDF differences."""
    c_lo = source.cdf(lo)
    s_lo = source.survival(lo)
    upper = 0.5 * (lo + hi) > source.params.get("median", 0.0)
    a, b = lo.copy(), hi.copy()
    for _ in range(60):
        c = 0.5 * (a + b)
        partial = np.where(upper, s_lo - source.survival(c), source.cdf(c) - c_lo)
        below = partial < 0.5 * mass
        a = np.where(below, c, a)
        b = np.where(below, b, c)
    return 0.5 * (a + b)


def uniform_quantizer_report(source, step: float, r: float = 2.0, mode: str = "optimal",
                             offset: float = 0.0, budget: int = CELL_BUDGET) -> QuantizerReport:
    """Output entropy and r-th power distortion of the quantizer with cells
    ``[offset + i*step, offset + (i+1)*step)``.

    ``mode="optimal"`` reconstructs at the cell centroid (r=2) or median (r=1);
    ``mode="midpoint"`` uses cell midpoints.  Cells are split at the source's pdf
    breakpoints before quadrature.
    """
    if source.d != 1:
        raise ValueError("uniform scalar quantization needs a scalar source")
    if not step > 0:
        raise ValueError("step must be positive")
    if source.cdf is None or source.pdf is None:
        raise ValueError(f"{source.name}: quantizer report needs pdf and cdf")
    if mode not in ("optimal", "midpoint"):
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    edges, masses = _cells(source, step, offset, budget)
    lo, hi = edges[:-1], edges[1:]
    H = discrete_entropy(masses / masses.sum()).value
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    a, b, cell = _pieces(source, edges)
    n = len(masses)
    c = 0.5 * (lo + hi)
    if mode == "optimal" and r == 2.0:
        first = _integrate(source, a, b, cell, n, lambda x, k: x, nodes, weights)
        quad_mass = _integrate(source, a, b, cell, n, lambda x, k: np.ones_like(x), nodes, weights)
        ok = quad_mass > 0
        c[ok] = first[ok] / quad_mass[ok]
    elif mode == "optimal" and r == 1.0:
        ok = masses > 0
        c[ok] = _cell_medians(source, lo[ok], hi[ok], masses[ok])
    dist = _integrate(source, a, b, cell, n, lambda x, k: np.abs(x - c[k][:, None]) ** r,
                      nodes, weights)
    return QuantizerReport(step, H, float(dist.sum()), r, cells=int((masses > 0).sum()))


def attach_gaps(report: QuantizerReport, h_x: float, rd_oracle=None) -> QuantizerReport:
    spec = DistortionSpec(NormSpec(1, 2.0), report.r, report.distortion)
    report.gap_to_slb = report.entropy - slb(h_x, 1, spec)
    if rd_oracle is not None:
        report.gap_to_rd = report.entropy - rd_oracle(report.distortion)
    return report


def analytic_rd(source, r: float):
    """Closed-form R(D) where one is known: Gaussian under squared error and
    Laplacian under absolute error."""
    if source.name == "gaussian" and r == 2.0 and source.d == 1:
        var = source.params["variance"]
        return lambda D: max(0.5 * math.log(var / D), 0.0)
    if source.name == "laplacian" and r == 1.0:
        lam = source.params["rate"]
        return lambda D: max(-math.log(lam * D), 0.0)
    return None


def gish_pierce_gap(source, steps, rd_oracle, r: float = 2.0, mode: str = "optimal"):
    """Excess rate H(q(X)) - R(D) of the uniform quantizer at each step size.

    Returns ``(step, excess, report)`` tuples; a step whose distortion the oracle
    cannot evaluate is returned with ``nan`` excess.
    """
    out = []
    for step in steps:
        rep = uniform_quantizer_report(source, step, r, mode)
        try:
            attach_gaps(rep, source.h, rd_oracle)
        except ValueError:
            rep.gap_to_slb = rep.entropy - slb(source.h, 1,
                                               DistortionSpec(NormSpec(1), r, rep.distortion))
        out.append((step, rep.gap_to_rd, rep))
    return out
