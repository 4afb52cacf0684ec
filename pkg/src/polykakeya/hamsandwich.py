"""Simultaneous bisection of finite-volume sets by an algebraic hypersurface.

Existence is guaranteed whenever the number of sets r is at most
N = C(n+d, d) - 1, so the solver treats persistent failure as a budget or
implementation problem, never infeasibility.

The search drives the normalized signed-measure defects of all sets to
zero on the unit coefficient sphere.  Defects are estimated with common
random numbers (one frozen sample set per region), which makes the
objective deterministic and the antipodal identity defects(-P) = -defects(P)
exact.  The hard sign objective is piecewise constant, so the solver runs
annealed Gauss-Newton on a tanh-smoothed defect vector, warm-starting half
the restarts from the subspace where every set's mean of P vanishes (the
exact infinite-temperature solution); the returned candidate is the first
restart (lowest index) meeting the tolerance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measure import SampleBudget, region_volume, signed_measure_split
from .polycore import MultiPoly, basis_size, exponent_matrix
from .streams import stream

DEGENERATE_VOLUME_REL = 1e-6

_ANNEAL_TEMPS = (0.5, 0.3, 0.2, 0.12, 0.08, 0.05, 0.03, 0.02, 0.012, 0.008, 0.005, 0.003)
_STEPS_PER_LEVEL = 8
_MAX_STEP = 0.3
_POLISH_SIGMAS = (0.02, 0.008, 0.003, 0.0012, 0.0005)
_POLISH_TRIES = 40


class Infeasible(Exception):
    """More sets than the degree supports: r > C(n+d,d) - 1."""


class DegenerateSet(Exception):
    """A set with (near-)zero estimated volume cannot be meaningfully bisected."""


class Stalled(Exception):
    """All restarts finished above tolerance; carries the best result found."""

    def __init__(self, result: "BisectionResult"):
        super().__init__(
            f"bisection stalled: max |defect| = {np.max(np.abs(result.defects)):.4g}"
        )
        self.result = result


@dataclass(frozen=True)
class BisectionProblem:
    """r regions to bisect simultaneously at degree ``degree``.

    The feasibility bound r <= C(n+d,d) - 1 is checked at construction.
    """

    sets: tuple
    degree: int
    tolerance: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        if not self.sets:
            raise ValueError("need at least one set")
        n = self.sets[0].n
        if any(s.n != n for s in self.sets):
            raise ValueError("all sets must live in the same dimension")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if len(self.sets) > self.capacity:
            raise Infeasible(
                f"{len(self.sets)} sets exceed the degree-{self.degree} capacity "
                f"{self.capacity}"
            )

    @property
    def n(self) -> int:
        return self.sets[0].n

    @property
    def capacity(self) -> int:
        return basis_size(self.n, self.degree) - 1


@dataclass(frozen=True)
class BisectionResult:
    P: MultiPoly
    defects: np.ndarray
    iterations: int


def _monomial_matrix(points: np.ndarray, n: int, d: int) -> np.ndarray:
    E = exponent_matrix(n, d)
    m = points.shape[0]
    pows = []
    for j in range(n):
        p = np.empty((m, d + 1))
        p[:, 0] = 1.0
        for k in range(1, d + 1):
            p[:, k] = p[:, k - 1] * points[:, j]
        pows.append(p)
    M = pows[0][:, E[:, 0]].copy()
    for j in range(1, n):
        M *= pows[j][:, E[:, j]]
    return M


def _interior_samples(region, m: int, seed: int, tag: int) -> np.ndarray:
    """Exactly m seeded points inside the region, by rejection from its
    bounding cube.  Raises DegenerateSet if the acceptance rate collapses."""
    box = region.bounding_cube()
    got: list[np.ndarray] = []
    have = 0
    tried = 0
    block = 0
    while have < m:
        rng = stream(seed, "bisect-set", tag, block)
        block += 1
        pts = box.min_corner[None, :] + box.side * rng.random((4096, box.n))
        inside = pts[region.contains(pts)]
        tried += 4096
        if inside.size:
            got.append(inside)
            have += inside.shape[0]
        if tried >= 64 * 4096 and have < max(1, tried * DEGENERATE_VOLUME_REL):
            raise DegenerateSet("set has near-zero volume inside its bounding cube")
    return np.concatenate(got, axis=0)[:m]


def _exact_defects(mats: list[np.ndarray], c: np.ndarray) -> np.ndarray:
    return np.array([float(np.mean(np.sign(M @ c))) for M in mats])


def _restart(
    mats: list[np.ndarray],
    coeffs0: np.ndarray,
    rng: np.random.Generator,
    steps_per_level: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Annealed Gauss-Newton on the tanh-smoothed defect vector.

    Each level solves the linearized system of all smoothed defects at
    once (tangentially to the sphere, with a trust-region step cap), then
    the temperature drops.  Exact-sign defects are checkpointed per level
    and a pattern search on the exact objective polishes the winner.
    """
    r = len(mats)
    B = coeffs0.shape[0]
    c = coeffs0.copy()
    t = 0
    best_c = c.copy()
    best_worst = float(np.max(np.abs(_exact_defects(mats, c))))
    F = np.empty(r)
    J = np.empty((r, B))
    for h in _ANNEAL_TEMPS:
        for _ in range(steps_per_level):
            t += 1
            for i, M in enumerate(mats):
                z = M @ c
                s = max(float(np.median(np.abs(z))), 1e-12)
                th = np.tanh(z / (h * s))
                F[i] = np.mean(th)
                J[i] = ((1.0 - th * th) @ M) / (h * s * M.shape[0])
            Jt = J - np.outer(J @ c, c)  # tangent to the sphere
            step, *_ = np.linalg.lstsq(Jt, -F, rcond=1e-8)
            norm = float(np.linalg.norm(step))
            if norm > _MAX_STEP:
                step *= _MAX_STEP / norm
            c = c + step
            c /= np.linalg.norm(c)
        worst = float(np.max(np.abs(_exact_defects(mats, c))))
        if worst < best_worst:
            best_worst, best_c = worst, c.copy()
    c = best_c
    for sigma in _POLISH_SIGMAS:
        for _ in range(_POLISH_TRIES):
            t += 1
            cand = c + sigma * rng.standard_normal(B)
            cand /= np.linalg.norm(cand)
            worst = float(np.max(np.abs(_exact_defects(mats, cand))))
            if worst < best_worst:
                best_worst, c = worst, cand
    return c, _exact_defects(mats, c), t


def solve_bisection(
    problem: BisectionProblem,
    budget: SampleBudget,
    restarts: int = 16,
    threads: int | None = None,
) -> BisectionResult:
    """Find P on the unit coefficient sphere bisecting every set to within
    the problem tolerance.

    Normalized defects are mean signs of P over each region's frozen
    interior samples (defect = F_i(P) / vol(U_i)).  Raises Stalled with the
    best candidate when no restart meets the tolerance.
    """
    n, d = problem.n, problem.degree
    r = len(problem.sets)
    m = max(1024, min(budget.count // max(r, 1), 8192))
    mats = [
        _monomial_matrix(_interior_samples(s, m, budget.seed, i), n, d)
        for i, s in enumerate(problem.sets)
    ]
    B = basis_size(n, d)

    # The infinite-temperature limit of the smoothed objective asks for zero
    # mean of P over every set, a linear condition.  Its near-null subspace
    # supplies start points whose zero set already crosses all sets; odd
    # restarts stay fully random for global coverage.
    mean_rows = np.stack([M.mean(axis=0) for M in mats])
    _, _, Vt = np.linalg.svd(mean_rows)
    null_dim = max(B - r, 1)
    null_basis = Vt[B - null_dim :]

    def one(k: int):
        rng = stream(budget.seed, "bisect-restart", k)
        c0 = rng.standard_normal(B)
        c0 /= np.linalg.norm(c0)
        if k % 2 == 0:
            v = null_basis.T @ rng.standard_normal(null_dim)
            v /= np.linalg.norm(v)
            c0 = v + 0.05 * c0
            c0 /= np.linalg.norm(c0)
        return _restart(mats, c0, rng, _STEPS_PER_LEVEL)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(one, range(restarts)))
    else:
        outs = [one(k) for k in range(restarts)]

    total_iters = 0
    best = None
    for k, (c, defects, iters) in enumerate(outs):
        total_iters += iters
        worst = float(np.max(np.abs(defects)))
        if best is None or worst < best[0]:
            best = (worst, k, c, defects)
        if worst <= problem.tolerance:
            return BisectionResult(MultiPoly(n, d, c), defects, total_iters)
    _, _, c, defects = best
    raise Stalled(BisectionResult(MultiPoly(n, d, c), defects, total_iters))


def bisects(P: MultiPoly, U, tol: float, budget: SampleBudget) -> bool:
    """True iff |F(P)| <= tol * vol(U) on the region's own sample stream."""
    vol = region_volume(U, budget)
    if vol.value <= 0:
        raise DegenerateSet("region has zero estimated volume")
    split = signed_measure_split(P, U, budget)
    return abs(split) <= tol * vol.value
