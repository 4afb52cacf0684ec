"""Visibility of algebraic surface pieces and the high-visibility search.

The visibility of Z inside a region U is the inverse volume of the convex
body K = {v : |v| <= 1, V(v) <= 1}, where V is the directed volume of
Z through U.  By 1-homogeneity of V the body is a star body with radial
function min(1, 1/V(u)) on unit directions, and its volume follows by
polar integration over a seeded direction sample.

Mollified quantities average over a small seeded ensemble of coefficient
perturbations on the unit sphere; the sign identification of antipodal
polynomials is automatic because directed volumes depend only on the zero
set.

``find_high_visibility_surface`` realizes the guaranteed existence of a
bounded-degree surface with prescribed per-region visibilities by direct
stochastic search: randomized hyperplane-product seeds followed by
hill-climbing on the coefficient sphere.  Achieved visibilities are
compared to targets on the scale normalized by the empty-set visibility
(vis * omega_n >= M), which is the scale on which a single bisecting
hyperplane realizes a target of 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import polycore
from .dirvol import FIBER_PAD_REL, LINE_CONTAINED_FRACTION, _projection_rectangle
from .geom import (
    ConvexBodySample,
    DegenerateBody,
    Ellipsoid,
    body_direction_set,
    john_inner_ellipsoid,
    unit_ball_volume,
)
from .measure import SampleBudget, _complement_basis
from .polycore import LINE_CONTAINED_SENTINEL, MultiPoly, basis_size
from .streams import stream


@dataclass(frozen=True)
class MollifiedQuery:
    """Perturbation radius on the coefficient sphere and ensemble size."""

    epsilon: float = 1e-3
    k: int = 16

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.k < 8:
            raise ValueError("mollification needs at least 8 perturbations")


@dataclass(frozen=True)
class VisibilityReport:
    body: ConvexBodySample
    vis: float
    john: Ellipsoid | None


def value_scaled_mollification(
    P: MultiPoly, region, seed: int, base: MollifiedQuery | None = None
) -> MollifiedQuery:
    """Shrink the perturbation radius to the polynomial's value scale.

    A unit-norm coefficient vector can take exponentially small values on a
    given region (products of many hyperplane factors do), in which case a
    fixed coefficient-sphere radius swamps the zero set there.  This picks
    eps so a typical perturbation moves values by about 5% of the
    polynomial's own median magnitude on the region, never exceeding the
    base radius.
    """
    base = base or MollifiedQuery()
    box = region.bounding_cube()
    rng = stream(seed, "mollify-scale")
    pts = box.min_corner[None, :] + box.side * rng.random((256, box.n))
    p_med = float(np.median(np.abs(P.evaluate(pts))))
    E = polycore.exponent_matrix(P.n, P.d)
    pows = np.abs(pts)[:, None, :] ** E[None, :, :]
    mono_sq = np.sum(np.prod(pows, axis=2) ** 2, axis=1) / E.shape[0]
    xi_scale = float(np.median(np.sqrt(mono_sq)))
    if xi_scale <= 0 or p_med <= 0:
        return base
    eps = min(base.epsilon, max(0.05 * p_med / xi_scale, 1e-12))
    return MollifiedQuery(epsilon=eps, k=base.k)


def _perturbed_polys(P: MultiPoly, m: MollifiedQuery, seed: int) -> list[MultiPoly]:
    """Seeded ensemble normalize(P + eps * xi) with xi on the tangent sphere."""
    c = P.coeffs / np.linalg.norm(P.coeffs)
    out = []
    for j in range(m.k):
        rng = stream(seed, "mollify", j)
        xi = rng.standard_normal(c.shape[0])
        xi -= (xi @ c) * c
        xi /= np.linalg.norm(xi)
        pc = c + m.epsilon * xi
        out.append(MultiPoly(P.n, P.d, pc / np.linalg.norm(pc)))
    return out


class DirectionalProber:
    """Directed volumes of one or more polynomials over shared fibers.

    One rotated-frame evaluator is built per (polynomial, direction) pair
    against a common scene box, so repeated queries over many small regions
    stay cheap.  Fiber offsets are drawn per (direction, region) from the
    given seed; polynomials of an ensemble share them (common random
    numbers).
    """

    def __init__(self, polys, directions: np.ndarray, center, scale: float, seed: int):
        self.polys = list(polys)
        self.dirs = np.atleast_2d(directions)
        self.center = np.asarray(center, dtype=np.float64)
        self.scale = float(scale)
        self.seed = seed
        self._frames = [_complement_basis(u) for u in self.dirs]
        self._evals: dict[tuple[int, int], polycore.RotatedFiberEvaluator] = {}

    def _evaluator(self, pi: int, di: int) -> polycore.RotatedFiberEvaluator:
        key = (pi, di)
        ev = self._evals.get(key)
        if ev is None:
            u = self.dirs[di]
            frame = np.concatenate([self._frames[di], u[:, None]], axis=1)
            n = self.polys[pi].n
            ev = polycore.RotatedFiberEvaluator(
                self.polys[pi], self.center, frame, np.full(n, self.scale)
            )
            self._evals[key] = ev
        return ev

    def directed_volumes(self, region, fibers: int, region_tag) -> np.ndarray:
        """Mean directed volume over the ensemble, per direction."""
        n = self.dirs.shape[1]
        out = np.empty(self.dirs.shape[0])
        for di, u in enumerate(self.dirs):
            W = self._frames[di]
            lo, hi = _projection_rectangle(region, u, W)
            widths = np.maximum(hi - lo, 0.0)
            area = float(np.prod(widths))
            if area == 0.0:
                out[di] = 0.0
                continue
            rng = stream(self.seed, "probe-fibers", region_tag, di)
            y = lo[None, :] + rng.random((fibers, n - 1)) * widths[None, :]
            bases = y @ W.T
            t0, t1, valid = region.line_intervals(bases, u)
            if not valid.any():
                out[di] = 0.0
                continue
            vb = bases[valid]
            vt0, vt1 = t0[valid], t1[valid]
            pad = FIBER_PAD_REL * (vt1 - vt0)
            acc = 0.0
            for pi, P in enumerate(self.polys):
                raw = self._evaluator(pi, di).count(vb, vt0 - pad, vt1 + pad)
                cmask = raw == LINE_CONTAINED_SENTINEL
                nc = int(cmask.sum())
                counts = raw.astype(np.float64)
                counts[cmask] = P.d if nc > LINE_CONTAINED_FRACTION * fibers else 0.0
                acc += counts.sum()
            out[di] = area * acc / (len(self.polys) * fibers)
        return out


def _body_from_volumes(dirs: np.ndarray, volumes: np.ndarray) -> ConvexBodySample:
    rho = np.where(volumes <= 1.0, 1.0, 1.0 / np.maximum(volumes, 1e-300))
    return ConvexBodySample(dirs, rho)


def visibility(
    P: MultiPoly,
    U,
    budget: SampleBudget,
    *,
    k_directions: int | None = None,
    fibers_per_direction: int | None = None,
    with_john: bool = True,
    mollify: MollifiedQuery | None = None,
) -> VisibilityReport:
    """Visibility report for Z(P) inside the region U.

    Directions are a seeded uniform sphere sample; each direction gets a
    fiber-counting directed-volume estimate (mollified over a perturbation
    ensemble when requested).  vis >= 1/omega_n always, with equality for
    an empty surface.
    """
    n = P.n
    k = k_directions or len(body_direction_set(n, budget.seed))
    dirs = body_direction_set(n, budget.seed, k)
    fibers = fibers_per_direction or max(16, budget.count // k)
    polys = [P] if mollify is None else _perturbed_polys(P, mollify, budget.seed)
    box = U.bounding_cube()
    prober = DirectionalProber(polys, dirs, box.center, max(box.diameter() / 2, 1.0), budget.seed)
    volumes = prober.directed_volumes(U, fibers, region_tag=0)
    body = _body_from_volumes(dirs, volumes)
    vis = 1.0 / body.volume()
    john = None
    if with_john:
        try:
            john = john_inner_ellipsoid(body)
        except DegenerateBody:
            john = None
    return VisibilityReport(body, vis, john)


def mollified_directed_volume(
    P: MultiPoly, U, v, m: MollifiedQuery, budget: SampleBudget
):
    """Average directed volume over the perturbation ensemble, with the
    same fiber stream for every ensemble member."""
    from .dirvol import DirectedVolumeQuery, directed_volume_fiber
    from .measure import VolumeEstimate

    polys = _perturbed_polys(P, m, budget.seed)
    ests = [directed_volume_fiber(DirectedVolumeQuery(Q, U, v), budget) for Q in polys]
    value = float(np.mean([e.value for e in ests]))
    # common random numbers leave the ensemble members correlated, so the
    # pooled error is reported without a 1/sqrt(k) reduction
    se = float(np.sqrt(np.mean([e.std_error ** 2 for e in ests])))
    return VolumeEstimate(value, se, sum(e.count for e in ests))


# -- high-visibility search -------------------------------------------------------


@dataclass(frozen=True)
class VisibilitySearchResult:
    poly: MultiPoly
    targets: np.ndarray
    achieved: np.ndarray  # vis per region
    ratios: np.ndarray  # omega_n * vis / M
    success: bool
    evaluations: int
    degree: int
    worst_region_mollified_ratio: float | None = None


def _region_interior_point(region, rng: np.random.Generator) -> np.ndarray:
    box = region.bounding_cube()
    for _ in range(64):
        p = box.min_corner + box.side * rng.random(box.n)
        if region.contains(p[None, :])[0]:
            return p
    return box.center


def _plane_product(regions, weights, degree, n, d_cap, rng, threading=0.5) -> MultiPoly:
    """Product of random hyperplanes through weighted random regions.

    With probability ``threading`` a plane threads a pair of regions
    (normal orthogonal to the connecting segment), which serves many
    collinear targets with one factor; otherwise it takes a uniform normal
    through a single region.  The pair is picked distance-biased so long
    chains of targets get long planes.
    """
    probs = np.asarray(weights, dtype=np.float64)
    probs = probs / probs.sum()
    poly = None
    for _ in range(degree):
        ridx = int(rng.choice(len(regions), p=probs))
        p = _region_interior_point(regions[ridx], rng)
        w = None
        if len(regions) > 1 and rng.random() < threading:
            cands = rng.choice(len(regions), size=min(4, len(regions)), p=probs)
            p2 = None
            best = -1.0
            for r2 in cands:
                q = _region_interior_point(regions[int(r2)], rng)
                dist = float(np.linalg.norm(q - p))
                if dist > best:
                    best, p2 = dist, q
            axis = p2 - p
            na = np.linalg.norm(axis)
            if na > 1e-9:
                axis /= na
                w = rng.standard_normal(n)
                w -= (w @ axis) * axis
                nw = np.linalg.norm(w)
                w = w / nw if nw > 1e-9 else None
        if w is None:
            w = rng.standard_normal(n)
            w /= np.linalg.norm(w)
        plane = MultiPoly.from_terms(
            n, 1, {tuple(int(i == j) for i in range(n)): w[j] for j in range(n)}
            | {(0,) * n: -float(w @ p)},
        )
        poly = plane if poly is None else poly * plane
    terms = poly.terms()
    return MultiPoly.from_terms(n, d_cap, terms).normalized()


def find_high_visibility_surface(
    targets,
    d_cap: int,
    budget: SampleBudget,
    *,
    restarts: int = 10,
    climb_steps: int = 60,
    probe_directions: int = 48,
    probe_fibers: int = 10,
    probe_regions: int = 32,
    table_directions: int = 128,
    table_fibers: int = 12,
    mollified_check: MollifiedQuery | None = MollifiedQuery(),
) -> VisibilitySearchResult:
    """Search the degree-``d_cap`` coefficient sphere for a surface whose
    visibility in every target region meets its demand.

    ``targets`` is a sequence of (region, M) pairs.  Success means
    omega_n * vis >= M for every region (visibility normalized by the
    empty-set baseline 1/omega_n).  On failure the best candidate and its
    achieved table are returned for diagnosis; existence at some
    dimension-dependent degree c(n) (sum M)^{1/n} is guaranteed, so the
    CLI sweeps the degree upward rather than treating failure as final.
    """
    regions = [r for r, _ in targets]
    demands = np.array([float(m) for _, m in targets])
    if np.any(demands < 0):
        raise ValueError("targets must be non-negative")
    n = regions[0].n
    omega = unit_ball_volume(n)
    # soft capacity floor: targets live on the omega_n-normalized scale and
    # regions may overlap heavily, so a small constant absorbs the packing
    floor = max(1, math.ceil(0.25 * (demands.sum() / omega) ** (1.0 / n)))
    if d_cap < 1:
        raise ValueError("degree cap must be at least 1")
    if d_cap < floor:
        raise ValueError(f"degree cap {d_cap} below the search floor {floor}")

    lo = np.min([r.bounding_cube().min_corner for r in regions], axis=0)
    hi = np.max(
        [r.bounding_cube().min_corner + r.bounding_cube().side for r in regions], axis=0
    )
    center = (lo + hi) / 2.0
    scale = max(float(np.max(hi - lo)) / 2.0, 1.0) * 1.2

    probe_dirs = body_direction_set(n, budget.seed, min(probe_directions, 512))
    perm = stream(budget.seed, "vissearch-probe").permutation(len(regions))
    probe_idx = perm[: min(probe_regions, len(regions))]
    weights = np.maximum(demands, 0.25) ** (1.0 / n)

    evaluations = 0

    def probe_score(P: MultiPoly) -> float:
        nonlocal evaluations
        evaluations += 1
        prober = DirectionalProber([P], probe_dirs, center, scale, budget.seed)
        worst = np.inf
        for ri in probe_idx:
            vols = prober.directed_volumes(regions[ri], probe_fibers, region_tag=int(ri))
            vis = 1.0 / _body_from_volumes(probe_dirs, vols).volume()
            target = demands[ri]
            ratio = omega * vis / target if target > 0 else np.inf
            worst = min(worst, ratio)
        return worst

    B = basis_size(n, d_cap)
    best_c = None
    best_score = -np.inf
    for k in range(restarts):
        rng = stream(budget.seed, "vissearch-restart", k)
        if k < 2:
            # pure threading first: for targets strung along tubes these
            # planes run with the tubes, the slab-like construction
            cand = _plane_product(regions, weights, d_cap, n, d_cap, rng, threading=0.95)
        elif k % 2 == 0:
            cand = _plane_product(regions, weights, d_cap, n, d_cap, rng)
        else:
            c = rng.standard_normal(B)
            cand = MultiPoly(n, d_cap, c / np.linalg.norm(c))
        c = cand.coeffs.copy()
        score = probe_score(cand)
        for sigma in np.geomspace(0.25, 0.02, climb_steps):
            xi = rng.standard_normal(B)
            xi -= (xi @ c) * c
            trial = c + sigma * xi / np.linalg.norm(xi)
            trial /= np.linalg.norm(trial)
            trial_score = probe_score(MultiPoly(n, d_cap, trial))
            if trial_score > score:
                score, c = trial_score, trial
        if score > best_score:
            best_score, best_c = score, c.copy()
        if best_score >= 1.25:  # comfortable margin before the full table
            break

    P = MultiPoly(n, d_cap, best_c)
    table_dirs = body_direction_set(n, budget.seed, min(table_directions, 4096))
    prober = DirectionalProber([P], table_dirs, center, scale, budget.seed)
    achieved = np.empty(len(regions))
    for ri, region in enumerate(regions):
        vols = prober.directed_volumes(region, table_fibers, region_tag=int(ri))
        achieved[ri] = 1.0 / _body_from_volumes(table_dirs, vols).volume()
    ratios = np.where(demands > 0, omega * achieved / np.maximum(demands, 1e-300), np.inf)
    success = bool(np.all(ratios >= 1.0))

    moll_ratio = None
    if mollified_check is not None and len(regions) > 0:
        worst_ri = int(np.argmin(ratios))
        polys = _perturbed_polys(P, mollified_check, budget.seed)
        mprober = DirectionalProber(polys, table_dirs, center, scale, budget.seed)
        vols = mprober.directed_volumes(regions[worst_ri], table_fibers, region_tag=worst_ri)
        mvis = 1.0 / _body_from_volumes(table_dirs, vols).volume()
        if demands[worst_ri] > 0:
            moll_ratio = float(omega * mvis / demands[worst_ri])

    return VisibilitySearchResult(
        poly=P,
        targets=demands,
        achieved=achieved,
        ratios=ratios,
        success=success,
        evaluations=evaluations,
        degree=d_cap,
        worst_region_mollified_ratio=moll_ratio,
    )
