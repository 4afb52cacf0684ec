"""Seeded Monte Carlo engine for volumes of semialgebraic regions and
surface integrals over algebraic hypersurfaces.

Determinism contract: all draws come from counter-indexed blocks of a
Philox stream keyed by the budget seed, and block results merge in index
order.  Estimates are therefore bit-identical across runs and independent
of how blocks would be scheduled over workers.

Two surface-integral schemes are built in and must agree on smoke tests:

* ``coarea``: sample the thin slab |P| < delta and weight by
  |grad P| / (2 delta).  The two-sided slab makes the bias O(delta^2) at
  regular points.
* ``lines``: intersect random lines with the surface (companion-matrix
  roots of the restriction) and weight each hit by 1 / |u . N|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import polycore
from .geom import Cube, unit_ball_volume
from .polycore import MultiPoly
from .streams import block_sizes, sphere_points, stream

# Slab half-width for the coarea scheme, relative to the region diameter.
SLAB_DELTA_REL = 1e-3
# Gradient magnitude below which a sampled surface point is singular.
SINGULAR_GRAD_TOL = 1e-10

DEFAULT_VOLUME_SAMPLES = 2 ** 18
DEFAULT_LINE_SAMPLES = 2 ** 16


class SingularSurface(Exception):
    """A sampled surface point had |grad P| below the singular tolerance."""


@dataclass(frozen=True)
class SampleBudget:
    """Seeded sampling effort.  ``stratified`` jitters a regular grid
    instead of sampling independently (volume estimation only)."""

    seed: int
    count: int = DEFAULT_VOLUME_SAMPLES
    stratified: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("budget count must be >= 1")

    def with_count(self, count: int) -> "SampleBudget":
        return SampleBudget(self.seed, count, self.stratified)


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float
    count: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")


def _as_predicate(region):
    if callable(region):
        return region
    return region.contains


def _cube_samples(box: Cube, m: int, rng: np.random.Generator, stratified: bool) -> np.ndarray:
    n = box.n
    if not stratified:
        u = rng.random((m, n))
    else:
        # jittered grid: k^n strata plus an unstratified remainder
        k = max(1, int(math.floor(m ** (1.0 / n))))
        grid = np.stack(
            np.meshgrid(*[np.arange(k)] * n, indexing="ij"), axis=-1
        ).reshape(-1, n)
        full = grid.shape[0]
        u = np.empty((m, n))
        u[:full] = (grid + rng.random((full, n))) / k
        if m > full:
            u[full:] = rng.random((m - full, n))
    return box.min_corner[None, :] + box.side * u


def estimate_volume(region, box: Cube, budget: SampleBudget) -> VolumeEstimate:
    """Unbiased Monte Carlo estimate of vol(region intersect box)."""
    pred = _as_predicate(region)
    box_vol = box.volume()
    hits = 0
    total = 0
    for bi, m in enumerate(block_sizes(budget.count)):
        rng = stream(budget.seed, "volume", bi)
        pts = _cube_samples(box, m, rng, budget.stratified)
        hits += int(np.count_nonzero(pred(pts)))
        total += m
    p = hits / total
    se = box_vol * math.sqrt(max(p * (1.0 - p), 0.0) / total)
    return VolumeEstimate(box_vol * p, se, total)


def signed_measure_split(P: MultiPoly, U, budget: SampleBudget) -> float:
    """vol{x in U : P(x) > 0} - vol{x in U : P(x) < 0}, estimated on a
    common sample stream so that the antipodal identity F(-P) = -F(P)
    holds exactly."""
    box = U.bounding_cube()
    box_vol = box.volume()
    acc = 0.0
    total = 0
    for bi, m in enumerate(block_sizes(budget.count)):
        rng = stream(budget.seed, "signed-split", bi)
        pts = _cube_samples(box, m, rng, budget.stratified)
        inside = U.contains(pts)
        vals = P.evaluate(pts)
        acc += float(np.sum(np.sign(vals) * inside))
        total += m
    return box_vol * acc / total


def region_volume(U, budget: SampleBudget) -> VolumeEstimate:
    """Convenience: vol(U) through its own bounding cube."""
    return estimate_volume(U, U.bounding_cube(), budget)


def _surface_integral_coarea(P: MultiPoly, U, f, budget: SampleBudget) -> VolumeEstimate:
    # The region is inflated by delta so a surface piece lying exactly on
    # the boundary face of U still sees the full two-sided slab.
    delta = SLAB_DELTA_REL * U.diameter()
    region = U.inflated(delta)
    box = region.bounding_cube()
    box_vol = box.volume()
    total = 0
    vals_sum = 0.0
    vals_sq = 0.0
    for bi, m in enumerate(block_sizes(budget.count)):
        rng = stream(budget.seed, "coarea", bi)
        pts = _cube_samples(box, m, rng, budget.stratified)
        pv = P.evaluate(pts)
        mask = (np.abs(pv) < delta) & region.contains(pts)
        w = np.zeros(m)
        if mask.any():
            sel = pts[mask]
            g = P.gradient(sel)
            gn = np.linalg.norm(g, axis=1)
            if np.any(gn < SINGULAR_GRAD_TOL):
                raise SingularSurface("slab sample with vanishing gradient")
            w[mask] = f(sel) * gn / (2.0 * delta)
        vals_sum += float(np.sum(w))
        vals_sq += float(np.sum(w * w))
        total += m
    mean = vals_sum / total
    var = max(vals_sq / total - mean * mean, 0.0)
    return VolumeEstimate(box_vol * mean, box_vol * math.sqrt(var / total), total)


def _surface_integral_lines(P: MultiPoly, U, f, budget: SampleBudget) -> VolumeEstimate:
    """Random-line scheme: for a uniform direction u and a uniform line over
    a disk in u-perp covering U, each surface hit x contributes
    f(x) / |u . N(x)|; averaging over lines integrates f over Z.

    Membership of hits is tested against a hair-inflated region so pieces
    of Z lying exactly on a face of U are not lost to rounding.
    """
    box = U.bounding_cube()
    n = P.n
    U = U.inflated(1e-9 * max(U.diameter(), 1.0))
    center = box.center
    R = box.diameter() / 2.0
    disk_vol = unit_ball_volume(n - 1) * R ** (n - 1)
    total = 0
    vals_sum = 0.0
    vals_sq = 0.0
    for bi, m in enumerate(block_sizes(budget.count, 4096)):
        rng = stream(budget.seed, "lines", bi)
        dirs = sphere_points(rng, m, n)
        # uniform offsets on the (n-1)-disk of radius R in u-perp
        y = sphere_points(rng, m, n - 1) if n > 1 else np.zeros((m, 1))
        radii = R * rng.random(m) ** (1.0 / (n - 1)) if n > 1 else np.zeros(m)
        for i in range(m):
            u = dirs[i]
            W = _complement_basis(u)
            base = center + W @ (radii[i] * y[i, : n - 1])
            q = polycore.restrict_to_line(P, base, u)
            contrib = 0.0
            roots = np.roots(q.coeffs[::-1]) if q.degree >= 1 else np.array([])
            for r in roots:
                if abs(r.imag) > 1e-9 * (1.0 + abs(r.real)):
                    continue
                x = base + r.real * u
                if not U.contains(x[None, :])[0]:
                    continue
                g = P.gradient(x[None, :])[0]
                gn = float(np.linalg.norm(g))
                if gn < SINGULAR_GRAD_TOL:
                    raise SingularSurface("line hit with vanishing gradient")
                cosang = abs(float(u @ g)) / gn
                if cosang < 1e-12:
                    continue  # grazing hit: zero-measure, unbounded weight
                contrib += float(f(x[None, :])[0]) / cosang
            vals_sum += contrib
            vals_sq += contrib * contrib
        total += m
    mean = vals_sum / total
    var = max(vals_sq / total - mean * mean, 0.0)
    return VolumeEstimate(disk_vol * mean, disk_vol * math.sqrt(var / total), total)


def surface_integral(
    P: MultiPoly, U, f, budget: SampleBudget, scheme: str = "coarea"
) -> VolumeEstimate:
    """Estimate of the integral of f over Z(P) intersect U.

    ``f`` maps an (m, n) point array to (m,) values.  Schemes: "coarea"
    (slab sampling, default) or "lines" (random-line hits).
    """
    if scheme == "coarea":
        return _surface_integral_coarea(P, U, f, budget)
    if scheme == "lines":
        return _surface_integral_lines(P, U, f, budget)
    raise ValueError(f"unknown scheme {scheme!r}")


def _complement_basis(u: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of u-perp, as (n, n-1) columns."""
    n = u.shape[0]
    # Gram-Schmidt against the most stable coordinate seeds
    cols = []
    order = np.argsort(np.abs(u))  # least-aligned axes first
    for j in order:
        e = np.zeros(n)
        e[j] = 1.0
        w = e - (e @ u) * u
        for c in cols:
            w = w - (w @ c) * c
        norm = np.linalg.norm(w)
        if norm > 1e-9:
            cols.append(w / norm)
        if len(cols) == n - 1:
            break
    return np.stack(cols, axis=1)
