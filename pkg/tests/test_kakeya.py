import itertools
import math

import numpy as np
import pytest

from polykakeya import geom, kakeya, polycore, scenes
from polykakeya.geom import Cube, Tube
from polykakeya.measure import SampleBudget


def _axis_cross_scene(radius=0.5, side=2):
    """One tube per family through the scene, along each axis."""
    fams = (
        (Tube(np.array([-1.0, 0.5]), np.array([1.0, 0.0]), radius=radius, family=0),),
        (Tube(np.array([0.5, -1.0]), np.array([0.0, 1.0]), radius=radius, family=1),),
    )
    return kakeya.TubeScene(n=2, families=fams, scene_side=side, seed=0)


def test_multiplicity_single_crossing():
    scene = _axis_cross_scene(radius=0.4)
    table = kakeya.multiplicity_table(scene)
    assert table.multiplicities((0, 0)) == (1, 1)
    assert table.F((0, 0)) == 1


def test_multiplicity_empty_scene():
    scene = kakeya.TubeScene(n=2, families=((), ()), scene_side=2, seed=0)
    table = kakeya.multiplicity_table(scene)
    assert table.hits == {}


def test_multiplicity_grid_intersections():
    scene = scenes.grid_scene(2, 3, radius=0.5)
    table = kakeya.multiplicity_table(scene)
    active = table.active_keys()
    assert len(active) == 9
    for key in active:
        assert table.F(key) == 1


def test_lhs_values():
    t1 = kakeya.CubeTable(2, {(0, 0): ((0,), (0,))})
    assert kakeya.kakeya_lhs(t1, 2) == 1.0
    t9 = kakeya.CubeTable(2, {(i, j): ((0,), (0,)) for i in range(3) for j in range(3)})
    assert kakeya.kakeya_lhs(t9, 2) == 9.0
    t8 = kakeya.CubeTable(3, {(0, 0, 0): ((0, 1), (0, 1), (0, 1))})
    assert kakeya.kakeya_lhs(t8, 3) == pytest.approx(math.sqrt(8.0))


def test_grid_ratio_is_exactly_one():
    for n, A in ((2, 4), (2, 8), (3, 3)):
        rep = kakeya.kakeya_ratio(scenes.grid_scene(n, A, radius=0.5))
        assert rep.theta == 1.0
        assert abs(rep.ratio - 1.0) <= 1e-9


def test_single_tube_pair_ratio_is_small():
    rep = kakeya.kakeya_ratio(_axis_cross_scene(radius=0.4))
    assert rep.ratio <= 4.0


def test_degenerate_transversality_rejected():
    e1 = np.array([1.0, 0.0])
    fams = (
        (Tube(np.array([-1.0, 0.5]), e1, radius=0.4, family=0),),
        (Tube(np.array([-1.0, 1.5]), e1, radius=0.4, family=1),),
    )
    scene = kakeya.TubeScene(n=2, families=fams, scene_side=2, seed=0)
    with pytest.raises(kakeya.DegenerateTransversality):
        kakeya.kakeya_ratio(scene)


def test_theorem1_volume_single_crossing():
    # two perpendicular width-2 tubes: the intersection is a 2x2 square
    scene = scenes.grid_scene(2, 1, radius=1.0, spacing=2.0)
    est = kakeya.theorem1_volume(scene, SampleBudget(3, 2 ** 14))
    assert est.value == pytest.approx(4.0, abs=3 * est.std_error + 1e-9)


def test_theorem1_volume_grid_is_exact():
    for A in (2, 4):
        scene = scenes.grid_scene(2, A, radius=1.0, spacing=2.0)
        est = kakeya.theorem1_volume(scene, SampleBudget(3, 2 ** 14))
        assert est.value == pytest.approx(4.0 * A * A, rel=1e-12)
        assert est.std_error == 0.0


def test_theorem1_volume_empty_family_is_zero():
    scene = kakeya.TubeScene(n=2, families=((), ()), scene_side=2, seed=0)
    est = kakeya.theorem1_volume(scene, SampleBudget(3, 2 ** 12))
    assert est.value == 0.0


def test_theorem1_volume_rejects_tilted_tubes():
    a = 0.1  # far beyond 1/(100 n)
    v = np.array([math.cos(a), math.sin(a)])
    fams = (
        (Tube(np.array([-1.0, 1.0]), v, radius=1.0, family=0),),
        (Tube(np.array([1.0, -1.0]), np.array([0.0, 1.0]), radius=1.0, family=1),),
    )
    scene = kakeya.TubeScene(n=2, families=fams, scene_side=2, seed=0)
    with pytest.raises(kakeya.HypothesisViolated):
        kakeya.theorem1_volume(scene, SampleBudget(3, 2 ** 12))


def test_loomis_whitney_bound_for_axis_tubes():
    # exactly axis-parallel tubes: volume is at most (omega_{n-1} A)^{n/(n-1)}
    rng = np.random.default_rng(5)
    for A in (2, 3):
        fams = []
        for j in range(2):
            tubes = []
            for _ in range(A):
                p = np.zeros(2)
                p[1 - j] = rng.uniform(1, 2 * A - 1)
                p[j] = -1.0
                e = np.zeros(2)
                e[j] = 1.0
                tubes.append(Tube(p, e, radius=1.0, family=j))
            fams.append(tuple(tubes))
        scene = kakeya.TubeScene(n=2, families=tuple(fams), scene_side=2 * A, seed=0)
        est = kakeya.theorem1_volume(scene, SampleBudget(int(A), 2 ** 16))
        bound = (geom.unit_ball_volume(1) * A) ** 2.0
        assert est.value <= bound + 3 * est.std_error


def test_scaling_law_on_grids():
    vals = []
    for A in (2, 4, 8):
        scene = scenes.grid_scene(2, A, radius=1.0, spacing=2.0)
        est = kakeya.theorem1_volume(scene, SampleBudget(3, 2 ** 14))
        vals.append(est.value / A ** 2)
    assert max(vals) - min(vals) <= 0.05 * max(vals)


def test_lhs_matches_cubewise_integral_of_table():
    # the integrand of the functional is cube-constant with respect to the
    # table, so the lattice sum equals the cube-by-cube integral exactly
    scene = scenes.grid_scene(2, 3, radius=0.5)
    table = kakeya.multiplicity_table(scene)
    n = scene.n
    direct = sum(
        table.F(key) ** (1.0 / (n - 1)) * scene.lattice.cell(key).volume()
        for key in table.hits
    )
    assert direct == kakeya.kakeya_lhs(table, n)


def test_random_transverse_ratios_stay_bounded():
    ratios = []
    for s in range(6):
        n = 2 if s % 2 == 0 else 3
        A = (8, 16, 24)[s % 3]
        scene = scenes.random_transverse_scene(n, A, seed=300 + s)
        rep = kakeya.kakeya_ratio(scene)
        assert rep.theta >= 0.2
        ratios.append(rep.ratio)
    assert max(ratios) <= 8.0


def test_hull_determinant_identity():
    # vol(hull(+-v_1', ..., +-v_n')) = (2^n / n!) |det|
    rng = np.random.default_rng(9)
    for n in (2, 3):
        for _ in range(5):
            V = rng.standard_normal((n, n))
            det = abs(np.linalg.det(V))
            # cross-polytope volume by summing the 2^n corner simplices
            total = 0.0
            for signs in itertools.product((1.0, -1.0), repeat=n):
                S = V * np.array(signs)[:, None]
                total += abs(np.linalg.det(S)) / math.factorial(n)
            assert total == pytest.approx((2 ** n / math.factorial(n)) * det, rel=1e-9)


def test_trace_single_crossing():
    scene = scenes.grid_scene(2, 1, radius=1.0, spacing=2.0)
    tr = kakeya.theorem1_trace(scene, SampleBudget(21, 2 ** 15))
    assert tr.cube_count == 4
    assert tr.degree == polycore.stone_tukey_degree(2, 4) == 2
    assert tr.popular_cube_count >= 2
    assert tr.inequality_holds


def test_trace_grid_three():
    scene = scenes.grid_scene(2, 3, radius=0.5)
    tr = kakeya.theorem1_trace(scene, SampleBudget(21, 2 ** 15))
    assert tr.cube_count == 9
    assert tr.degree == 3
    assert tr.degree <= tr.degree_bound
    assert tr.bisection_defect <= 0.01
    assert tr.lhs_cubes_over_tubes == pytest.approx(3.0)
    assert tr.rhs_degree_scale == pytest.approx(3.0)
    assert tr.inequality_holds


def _hyperplane_scene(theta, radius=0.5, seed=0):
    alpha = math.acos(theta)
    v2 = np.array([math.sin(alpha), math.cos(alpha)])
    fams = (
        (Tube(np.array([-1.0, 0.5]), np.array([1.0, 0.0]), radius=radius, family=0),),
        (Tube(np.array([0.5, 0.0]) - 3 * v2, v2, radius=radius, family=1),),
    )
    return kakeya.TubeScene(n=2, families=fams, scene_side=2, seed=seed)


COORD_PLANES = polycore.MultiPoly.from_terms(2, 1, {(1, 0): 1.0, (0, 0): -0.5}) * \
    polycore.MultiPoly.from_terms(2, 1, {(0, 1): 1.0, (0, 0): -0.5})


def test_lemma61_coordinate_hyperplanes():
    scene = _hyperplane_scene(1.0)
    Z = kakeya.augment_with_hyperplanes(COORD_PLANES, scene)
    rep = kakeya.lemma61_check(scene, Z, SampleBudget(3, 2 ** 12))
    assert rep.theta == pytest.approx(1.0)
    assert rep.max_ratio <= 2.0
    for row in rep.rows:
        assert row.vis <= row.product_bound / rep.theta * 2.0


def test_lemma61_bound_weakens_with_theta():
    ratios = {}
    for theta in (1.0, 0.5, 0.1):
        scene = _hyperplane_scene(theta)
        Z = kakeya.augment_with_hyperplanes(COORD_PLANES, scene)
        rep = kakeya.lemma61_check(scene, Z, SampleBudget(3, 2 ** 12))
        ratios[theta] = rep.max_ratio
        assert rep.max_ratio <= 2.0
    assert ratios[0.1] <= ratios[0.5] <= ratios[1.0]


def test_lemma61_rejects_unaugmented_surface():
    scene = _hyperplane_scene(1.0)
    bare = polycore.MultiPoly.from_terms(2, 1, {(1, 0): 1.0, (0, 0): -0.5}).normalized()
    with pytest.raises(kakeya.PrerequisiteViolated):
        kakeya.lemma61_check(scene, bare, SampleBudget(3, 2 ** 12))


def test_visibility_targets_from_table():
    # feed the lattice visibility demands of a small grid to the searcher
    scene = scenes.grid_scene(2, 2, radius=0.5)
    table = kakeya.multiplicity_table(scene)
    lhs = kakeya.kakeya_lhs(table, scene.n)
    S = scene.scene_side
    targets = []
    for key in table.active_keys():
        M = math.ceil(S ** scene.n * table.F(key) ** (1.0 / (scene.n - 1)) / lhs)
        targets.append((scene.lattice.cell(key), float(M)))
    from polykakeya.visibility import find_high_visibility_surface

    res = find_high_visibility_surface(
        targets, 6, SampleBudget(4, 2 ** 14), restarts=8, climb_steps=40
    )
    assert res.success
