"""Directed volumes of algebraic hypersurfaces.

Two estimators are provided for the directed volume of Z intersect a
region along a vector v:

* ``directed_volume_surface`` integrates |v . N| over the surface via the
  coarea slab (cross-validation only).
* ``directed_volume_fiber`` is the estimator of record: it samples lines
  parallel to v over the projection of the region onto v-perp and counts
  distinct surface hits per fiber.  Counts per fiber never exceed the
  degree, so the cylinder estimate holds structurally.

Fiber intervals are padded by a relative epsilon at both ends so surface
pieces lying exactly on a region face are counted; roots exactly on the
shared face of two adjacent regions may then count in both, a measure-zero
event for the random fibers used here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import polycore
from .geom import Cube, unit_ball_volume
from .measure import (
    SampleBudget,
    SingularSurface,
    VolumeEstimate,
    _complement_basis,
    surface_integral,
)
from .polycore import LINE_CONTAINED_SENTINEL, MultiPoly
from .streams import block_sizes, stream

logger = logging.getLogger(__name__)

FIBER_PAD_REL = 1e-6
# Fraction of LineContained fibers above which they stop being dropped and
# instead contribute the full degree bound.
LINE_CONTAINED_FRACTION = 1e-3


class HypothesisViolated(Exception):
    """An axis-proximity hypothesis failed (direction too far from its axis)."""


@dataclass(frozen=True)
class DirectedVolumeQuery:
    P: MultiPoly
    region: object  # Cube, Ball, or Tube
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=np.float64)))


def cylinder_bound(n: int, r: float, d: int) -> float:
    """omega_{n-1} r^{n-1} d: the degree bound on the directed volume of a
    degree-d hypersurface inside a radius-r cylinder along its core."""
    return unit_ball_volume(n - 1) * r ** (n - 1) * float(d)


def _projection_rectangle(region, u: np.ndarray, W: np.ndarray):
    """Bounds of the region's shadow on u-perp, in the columns of W."""
    if hasattr(region, "core_point"):  # Tube
        if region.length is None:
            raise ValueError("clip tubes before fiber integration")
        ends = np.stack(
            [region.core_point, region.core_point + region.length * region.direction]
        )
        lo = (ends @ W).min(axis=0) - region.radius
        hi = (ends @ W).max(axis=0) + region.radius
        return lo, hi
    if hasattr(region, "center") and hasattr(region, "radius"):  # Ball
        c = region.center @ W
        return c - region.radius, c + region.radius
    pts = region.bounding_cube().corners()
    proj = pts @ W
    return proj.min(axis=0), proj.max(axis=0)


def directed_volume_fiber(q: DirectedVolumeQuery, budget: SampleBudget) -> VolumeEstimate:
    """Shadow-counting estimate: sample y in the projection of the region
    onto v-perp, count distinct roots of the restriction on the region's
    fiber interval, and average times the projected area.  General v scales
    the unit-vector value by |v| (directed volume is 1-homogeneous)."""
    nv = float(np.linalg.norm(q.v))
    if nv <= 0:
        raise ValueError("direction must be nonzero")
    u = q.v / nv
    n = q.P.n
    W = _complement_basis(u)
    lo, hi = _projection_rectangle(q.region, u, W)
    widths = np.maximum(hi - lo, 0.0)
    rect_area = float(np.prod(widths))
    if rect_area == 0.0:
        return VolumeEstimate(0.0, 0.0, 0)

    d = q.P.d
    box = q.region.bounding_cube()
    frame = np.concatenate([W, u[:, None]], axis=1)
    scale = max(box.diameter() / 2.0, 1.0)
    evaluator = polycore.RotatedFiberEvaluator(q.P, box.center, frame, np.full(n, scale))
    total = 0
    acc = 0.0
    acc_sq = 0.0
    contained = 0
    for bi, m in enumerate(block_sizes(budget.count, 8192)):
        rng = stream(budget.seed, "fiber", bi)
        y = lo[None, :] + rng.random((m, n - 1)) * widths[None, :]
        bases = y @ W.T
        t0, t1, valid = q.region.line_intervals(bases, u)
        counts = np.zeros(m)
        if valid.any():
            vb = bases[valid]
            vt0, vt1 = t0[valid], t1[valid]
            pad = FIBER_PAD_REL * (vt1 - vt0)
            raw = evaluator.count(vb, vt0 - pad, vt1 + pad)
            cmask = raw == LINE_CONTAINED_SENTINEL
            contained += int(cmask.sum())
            c = raw.astype(np.float64)
            c[cmask] = 0.0
            counts[valid] = c
        acc += float(counts.sum())
        acc_sq += float((counts * counts).sum())
        total += m
    if contained:
        logger.debug("%d of %d fibers lay inside the zero set", contained, total)
    if contained > LINE_CONTAINED_FRACTION * total:
        # conservative: fully-contained fibers carry the degree bound
        acc += contained * d
        acc_sq += contained * d * d
    mean = acc / total
    var = max(acc_sq / total - mean * mean, 0.0)
    scale = nv * rect_area
    return VolumeEstimate(scale * mean, scale * math.sqrt(var / total), total)


def directed_volume_surface(
    q: DirectedVolumeQuery, budget: SampleBudget, scheme: str = "lines"
) -> VolumeEstimate:
    """Surface-integral estimate of the directed volume over Z intersect the
    region, with N the unit normal of Z.

    The random-line scheme is the default: the coarea slab overestimates
    when P has a critical value within the slab width of zero (the slab
    fattens around the critical point).
    """
    v = q.v

    def f(pts: np.ndarray) -> np.ndarray:
        g = q.P.gradient(pts)
        gn = np.linalg.norm(g, axis=1)
        if np.any(gn < 1e-10):
            raise SingularSurface("surface sample with vanishing gradient")
        return np.abs(g @ v) / gn

    return surface_integral(q.P, q.region, f, budget, scheme=scheme)


@dataclass(frozen=True)
class AxisSumReport:
    surface_volume: VolumeEstimate
    directed: tuple[VolumeEstimate, ...]
    directed_sum: float
    combined_std_error: float
    holds: bool


def axis_sum_lower_bound_check(
    P: MultiPoly, region, directions, budget: SampleBudget
) -> AxisSumReport:
    """Check Vol(Z in region) <= 2 * sum_j V(v_j) for near-axis directions.

    Requires |e_j - v_j| < (100 n)^{-1} for every j.
    """
    n = P.n
    dirs = [np.asarray(v, dtype=np.float64) for v in directions]
    if len(dirs) != n:
        raise ValueError("need one direction per axis")
    for j, v in enumerate(dirs):
        e = np.zeros(n)
        e[j] = 1.0
        if np.linalg.norm(e - v) >= 1.0 / (100 * n):
            raise HypothesisViolated(f"direction {j} further than 1/(100n) from its axis")
    vol = surface_integral(P, region, lambda x: np.ones(len(x)), budget)
    parts = tuple(
        directed_volume_fiber(
            DirectedVolumeQuery(P, region, v), SampleBudget(budget.seed + j + 1, budget.count)
        )
        for j, v in enumerate(dirs)
    )
    s = sum(p.value for p in parts)
    comb = math.sqrt(vol.std_error ** 2 + sum(p.std_error ** 2 for p in parts))
    return AxisSumReport(vol, parts, s, comb, vol.value <= 2.0 * s + 3.0 * comb)
