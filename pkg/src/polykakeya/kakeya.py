"""Multilinear Kakeya functionals: multiplicity tables, transversality
ratios, tube-intersection volumes, the bisection proof trace, and the
visibility-product bound for cubes.

Scenes carry n families of tubes clipped to the side-S scene cube.  The
lattice-discretized functional sum_k F(Q_k)^{1/(n-1)} with
F = prod_j M_j(Q_k) is computed exactly from the table; the experiment-level
claim is that its ratio to theta^{-1/(n-1)} prod_j A(j)^{1/(n-1)} stays
bounded as scenes scale, with the axis-aligned grid as the ratio-1 baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .dirvol import DirectedVolumeQuery, cylinder_bound, directed_volume_fiber
from .geom import Cube, CubeLattice, Tube, clip_tube_to_scene, min_determinant
from .hamsandwich import BisectionProblem, solve_bisection
from .measure import SampleBudget, VolumeEstimate, estimate_volume
from .polycore import MultiPoly, stone_tukey_degree
from .streams import stream
from .visibility import (
    MollifiedQuery,
    mollified_directed_volume,
    value_scaled_mollification,
    visibility,
)


class DegenerateTransversality(Exception):
    """theta = 0: some choice of one direction per family is singular."""


class HypothesisViolated(Exception):
    """A tube direction strays further from its axis than the near-axis
    hypothesis (100 n)^{-1} allows."""


class PrerequisiteViolated(Exception):
    """The augmented surface fails the V >= |v| floor on an active cube."""


@dataclass(frozen=True)
class TubeScene:
    """n families of tubes inside the scene cube [0, S]^n.

    Tubes are clipped to the scene at construction; tubes that miss the
    scene entirely are dropped.
    """

    n: int
    families: tuple[tuple[Tube, ...], ...]
    scene_side: int
    seed: int = 0

    def __post_init__(self):
        if len(self.families) != self.n:
            raise ValueError("need exactly one tube family per dimension")
        scene = Cube(np.zeros(self.n), float(self.scene_side))
        clipped = []
        for fam in self.families:
            kept = []
            for t in fam:
                ct = clip_tube_to_scene(t, scene)
                if ct is not None:
                    kept.append(ct)
            clipped.append(tuple(kept))
        object.__setattr__(self, "families", tuple(clipped))

    @property
    def lattice(self) -> CubeLattice:
        return CubeLattice(self.n, self.scene_side)

    def scene_cube(self) -> Cube:
        return Cube(np.zeros(self.n), float(self.scene_side))

    def family_sizes(self) -> tuple[int, ...]:
        return tuple(len(f) for f in self.families)

    def directions(self, j: int) -> np.ndarray:
        return np.stack([t.direction for t in self.families[j]])


@dataclass(frozen=True)
class CubeTable:
    """Per-cube tube incidences: hits[key][j] lists the indices of family-j
    tubes meeting the cube; M_j is the count and F their product."""

    n: int
    hits: dict[tuple[int, ...], tuple[tuple[int, ...], ...]]

    def multiplicities(self, key) -> tuple[int, ...]:
        return tuple(len(ids) for ids in self.hits[key])

    def F(self, key) -> int:
        out = 1
        for ids in self.hits[key]:
            out *= len(ids)
        return out

    def active_keys(self) -> list[tuple[int, ...]]:
        return sorted(k for k in self.hits if self.F(k) > 0)


def multiplicity_table(scene: TubeScene) -> CubeTable:
    lattice = scene.lattice
    acc: dict[tuple[int, ...], list[list[int]]] = {}
    for j, fam in enumerate(scene.families):
        for a, tube in enumerate(fam):
            for key in geom.cubes_hit_by_tube(tube, lattice):
                acc.setdefault(key, [[] for _ in range(scene.n)])[j].append(a)
    hits = {
        key: tuple(tuple(sorted(ids)) for ids in per_family)
        for key, per_family in acc.items()
    }
    return CubeTable(scene.n, hits)


def kakeya_lhs(table: CubeTable, n: int) -> float:
    """sum_k F(Q_k)^{1/(n-1)}, the lattice form of the functional."""
    if n < 2:
        raise ValueError("the functional needs n >= 2")
    p = 1.0 / (n - 1)
    return float(sum(table.F(k) ** p for k in table.hits))


@dataclass(frozen=True)
class KakeyaRatioReport:
    lhs: float
    theta: float
    theta_exhaustive: bool
    rhs_core: float
    ratio: float


def kakeya_ratio(scene: TubeScene, table: CubeTable | None = None) -> KakeyaRatioReport:
    """lhs / (theta^{-1/(n-1)} prod_j A(j)^{1/(n-1)}) for the scene."""
    n = scene.n
    if any(len(f) == 0 for f in scene.families):
        raise geom.EmptyFamily("every family needs at least one tube in the scene")
    if table is None:
        table = multiplicity_table(scene)
    lhs = kakeya_lhs(table, n)
    det = min_determinant([scene.directions(j) for j in range(n)], seed=scene.seed)
    if det.value <= 0.0:
        raise DegenerateTransversality("some family selection is singular")
    p = 1.0 / (n - 1)
    rhs_core = det.value ** (-p) * float(np.prod([len(f) ** p for f in scene.families]))
    return KakeyaRatioReport(lhs, det.value, det.exhaustive, rhs_core, lhs / rhs_core)


class _TubeIntersection:
    """Region predicate for I = intersection over j of union_a T_{j,a}."""

    def __init__(self, scene: TubeScene):
        self.scene = scene
        self.n = scene.n

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        ok = np.ones(pts.shape[0], dtype=bool)
        for fam in self.scene.families:
            fam_hit = np.zeros(pts.shape[0], dtype=bool)
            for tube in fam:
                fam_hit |= tube.contains(pts)
                if fam_hit.all():
                    break
            ok &= fam_hit
            if not ok.any():
                break
        return ok


def _check_axis_proximity(scene: TubeScene, bound: float):
    for j, fam in enumerate(scene.families):
        e = np.zeros(scene.n)
        e[j] = 1.0
        for a, tube in enumerate(fam):
            angle = math.acos(min(1.0, abs(float(tube.direction @ e))))
            if angle > bound + 1e-12:
                raise HypothesisViolated(
                    f"tube {a} of family {j} tilts {angle:.4f} rad from its axis "
                    f"(bound {bound:.4f})"
                )


def theorem1_volume(scene: TubeScene, budget: SampleBudget) -> VolumeEstimate:
    """Monte Carlo volume of the set of points covered by at least one tube
    from every family.  Directions must stay within (100 n)^{-1} of their
    axes."""
    _check_axis_proximity(scene, 1.0 / (100 * scene.n))
    if any(len(f) == 0 for f in scene.families):
        return VolumeEstimate(0.0, 0.0, budget.count)
    return estimate_volume(_TubeIntersection(scene), scene.scene_cube(), budget)


# -- the bisection proof trace ----------------------------------------------------


@dataclass(frozen=True)
class Theorem1Trace:
    cube_keys: tuple[tuple[int, ...], ...]
    cube_count: int  # V
    degree: int
    degree_bound: float  # (n! (V+1))^{1/n} + 1, which the minimal degree obeys
    bisection_defect: float
    per_cube_choice: dict  # key -> (j, a, mollified directed volume)
    popular_tube: tuple[int, int]
    popular_cube_count: int
    enlarged_tube_volume: VolumeEstimate
    enlarged_cylinder_bound: float
    lhs_cubes_over_tubes: float  # V / A
    rhs_degree_scale: float  # V^{1/n}
    inequality_holds: bool


def theorem1_trace(
    scene: TubeScene,
    budget: SampleBudget,
    *,
    restarts: int = 16,
    mollify: MollifiedQuery | None = None,
) -> Theorem1Trace:
    """Run the five-stage volume argument on a concrete scene.

    Stages: list the cubes meeting the tube intersection; bisect them all
    with one hypersurface at the minimal feasible degree; pick the
    best-directed tube through each cube; pigeonhole the most popular
    tube; and compare the directed volume the popular tube collects
    against its cylinder bound.
    """
    _check_axis_proximity(scene, 1.0 / (100 * scene.n))
    n = scene.n
    A = max(scene.family_sizes())
    mollify = mollify or MollifiedQuery(k=8)

    # stage 1: cubes meeting I, by per-cube sampling over table candidates
    table = multiplicity_table(scene)
    inter = _TubeIntersection(scene)
    keys = []
    for key in table.active_keys():
        cell = scene.lattice.cell(key)
        rng = stream(budget.seed, "trace-cube", key)
        pts = cell.min_corner[None, :] + rng.random((256, n))
        if inter.contains(pts).any():
            keys.append(key)
    V = len(keys)
    if V == 0:
        raise ValueError("no lattice cube meets the tube intersection")

    # stage 2: simultaneous bisection at the minimal feasible degree
    d = stone_tukey_degree(n, V)
    degree_bound = (math.factorial(n) * (V + 1)) ** (1.0 / n) + 1.0
    cubes = [scene.lattice.cell(k) for k in keys]
    problem = BisectionProblem(cubes, degree=d, tolerance=0.01)
    result = solve_bisection(problem, budget, restarts=restarts)
    Z = result.P
    defect = float(np.max(np.abs(result.defects)))

    # stage 3: per cube, the tube with the largest mollified directed volume
    choice: dict = {}
    for key, cube in zip(keys, cubes):
        best = None
        q_cube = value_scaled_mollification(Z, cube, budget.seed, base=mollify)
        for j in range(n):
            for a in table.hits[key][j]:
                v = scene.families[j][a].direction
                est = mollified_directed_volume(
                    Z, cube, v, q_cube, SampleBudget(budget.seed, 256)
                )
                if best is None or est.value > best[2]:
                    best = (j, a, est.value)
        choice[key] = best

    # stage 4: pigeonhole the most popular tube
    counts: dict[tuple[int, int], int] = {}
    for key, (j, a, _) in choice.items():
        counts[(j, a)] = counts.get((j, a), 0) + 1
    popular = min(counts, key=lambda ja: (-counts[ja], ja))
    pop_count = counts[popular]

    # stage 5: directed volume in the sqrt(n)-enlarged popular tube
    tube = scene.families[popular[0]][popular[1]]
    grown = Tube(
        core_point=tube.core_point - math.sqrt(n) * tube.direction,
        direction=tube.direction,
        radius=tube.radius + math.sqrt(n),
        length=(tube.length or 0.0) + 2 * math.sqrt(n),
        family=tube.family,
    )
    dv = directed_volume_fiber(
        DirectedVolumeQuery(Z, grown, tube.direction), budget.with_count(2 ** 14)
    )
    bound = cylinder_bound(n, grown.radius, d)

    lhs = V / A
    rhs = V ** (1.0 / n)
    # measured chain: the popular tube collects pop_count >= V/(nA) cubes,
    # and its directed volume is capped by the degree-d cylinder bound
    holds = (pop_count >= V / (n * A) - 1e-9) and (dv.value <= bound + 3 * dv.std_error)
    return Theorem1Trace(
        cube_keys=tuple(keys),
        cube_count=V,
        degree=d,
        degree_bound=degree_bound,
        bisection_defect=defect,
        per_cube_choice=choice,
        popular_tube=popular,
        popular_cube_count=pop_count,
        enlarged_tube_volume=dv,
        enlarged_cylinder_bound=bound,
        lhs_cubes_over_tubes=lhs,
        rhs_degree_scale=rhs,
        inequality_holds=holds,
    )


# -- the visibility-product bound -------------------------------------------------


def hyperplane_slabs(scene: TubeScene) -> MultiPoly:
    """Product of 2 n ceil(S) axis-perpendicular hyperplanes at half-unit
    spacing across the scene.

    Half-unit spacing (rather than unit) guarantees every unit segment in
    the scene, in any direction, crosses at least one hyperplane per axis
    for n <= 4: a unit segment moves at least 1/sqrt(n) >= 1/2 along its
    best axis.
    """
    n = scene.n
    count = 2 * math.ceil(scene.scene_side)
    poly = None
    for j in range(n):
        for m in range(count):
            c = 0.25 + 0.5 * m
            e = tuple(int(i == j) for i in range(n))
            plane = MultiPoly.from_terms(n, 1, {e: 1.0, (0,) * n: -c})
            poly = plane if poly is None else poly * plane
    return poly


def augment_with_hyperplanes(P0: MultiPoly, scene: TubeScene) -> MultiPoly:
    """Multiply in the hyperplane slabs so every unit direction has
    mollified directed volume at least |v| on active cubes."""
    return (P0 * hyperplane_slabs(scene)).normalized()


@dataclass(frozen=True)
class Lemma61Row:
    key: tuple[int, ...]
    vis: float
    argmin_tubes: tuple[int, ...]
    vbar: tuple[float, ...]
    product_bound: float  # theta^{-1} prod_j vbar_j
    ratio: float


@dataclass(frozen=True)
class Lemma61Report:
    theta: float
    rows: tuple[Lemma61Row, ...]

    @property
    def max_ratio(self) -> float:
        return max(r.ratio for r in self.rows)


def lemma61_check(
    scene: TubeScene,
    P: MultiPoly,
    budget: SampleBudget,
    *,
    mollify: MollifiedQuery | None = None,
    k_directions: int = 64,
    prerequisite_directions: int = 16,
) -> Lemma61Report:
    """Per active cube: mollified visibility against theta^{-1} times the
    product over families of the smallest mollified directed volume.

    ``P`` must already carry the hyperplane augmentation; the V >= |v|
    floor is spot-checked on seeded unit directions and violations raise
    PrerequisiteViolated.
    """
    mollify = mollify or MollifiedQuery(k=8)
    n = scene.n
    table = multiplicity_table(scene)
    det = min_determinant([scene.directions(j) for j in range(n)], seed=scene.seed)
    if det.value <= 0:
        raise DegenerateTransversality("theta = 0")

    rows = []
    for key in table.active_keys():
        cube = scene.lattice.cell(key)
        q_cube = value_scaled_mollification(P, cube, budget.seed, base=mollify)
        # prerequisite: the floor on seeded directions
        probe = geom.body_direction_set(n, budget.seed + 17, prerequisite_directions)
        for u in probe:
            est = mollified_directed_volume(
                P, cube, u, q_cube, SampleBudget(budget.seed, 512)
            )
            if est.value < 1.0 - 3.0 * est.std_error - 0.05:
                raise PrerequisiteViolated(
                    f"cube {key}: mollified volume {est.value:.3f} < 1 along {u}"
                )
        picks = []
        vbars = []
        for j in range(n):
            best = None
            for a in table.hits[key][j]:
                v = scene.families[j][a].direction
                est = mollified_directed_volume(
                    P, cube, v, q_cube, SampleBudget(budget.seed, 512)
                )
                if best is None or est.value < best[1] - 1e-12:
                    best = (a, est.value)
            picks.append(best[0])
            vbars.append(best[1])
        rep = visibility(
            P,
            cube,
            budget.with_count(k_directions * 16),
            k_directions=k_directions,
            with_john=False,
            mollify=q_cube,
        )
        bound = float(np.prod(vbars)) / det.value
        rows.append(
            Lemma61Row(
                key=key,
                vis=rep.vis,
                argmin_tubes=tuple(picks),
                vbar=tuple(vbars),
                product_bound=bound,
                ratio=rep.vis / bound,
            )
        )
    return Lemma61Report(det.value, tuple(rows))
