import math

import numpy as np
import pytest

from polykakeya import dirvol, polycore
from polykakeya.dirvol import DirectedVolumeQuery as Query
from polykakeya.geom import Ball, Cube, Tube, unit_ball_volume
from polykakeya.measure import SampleBudget


SEG = polycore.MultiPoly.from_terms(2, 1, {(0, 1): 1.0})  # Z = {x2 = 0}
CIRCLE = polycore.MultiPoly.from_terms(2, 2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0})
SQUARE = Cube(np.zeros(2), 1.0)
BIGBOX = Cube(np.array([-2.0, -2.0]), 4.0)
E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def test_surface_estimator_segment_normal():
    est = dirvol.directed_volume_surface(Query(SEG, SQUARE, E2), SampleBudget(3, 2 ** 14))
    assert abs(est.value - 1.0) <= max(3 * est.std_error, 0.02)


def test_surface_estimator_segment_tangent():
    est = dirvol.directed_volume_surface(Query(SEG, SQUARE, E1), SampleBudget(3, 2 ** 13))
    assert abs(est.value) < 0.02


def test_surface_estimator_circle():
    # integral of |cos| over the circle is 4
    est = dirvol.directed_volume_surface(Query(CIRCLE, BIGBOX, E1), SampleBudget(3, 2 ** 16))
    assert abs(est.value - 4.0) <= max(3 * est.std_error, 4.0 * 0.02)


def test_surface_estimator_coarea_scheme_agrees():
    est = dirvol.directed_volume_surface(
        Query(CIRCLE, BIGBOX, E1), SampleBudget(3, 2 ** 21), scheme="coarea"
    )
    assert est.value == pytest.approx(4.0, rel=0.03)


def test_fiber_estimator_segment():
    est = dirvol.directed_volume_fiber(Query(SEG, SQUARE, E2), SampleBudget(3, 2 ** 13))
    assert est.value == pytest.approx(1.0, abs=1e-12)


def test_fiber_estimator_hyperplane_in_tube():
    P = polycore.MultiPoly.from_terms(2, 1, {(1, 0): 1.0, (0, 0): -2.0})
    tube = Tube(np.zeros(2), E1, radius=1.0, length=4.0)
    est = dirvol.directed_volume_fiber(Query(P, tube, E1), SampleBudget(3, 2 ** 13))
    assert est.value == pytest.approx(unit_ball_volume(1) * 1.0, abs=1e-12)


def test_fiber_estimator_circle_matches_surface_value():
    est = dirvol.directed_volume_fiber(Query(CIRCLE, BIGBOX, E1), SampleBudget(3, 2 ** 14))
    assert est.value == pytest.approx(4.0, rel=0.02)


def test_cylinder_bound_values():
    assert dirvol.cylinder_bound(2, 1.0, 3) == pytest.approx(6.0)
    assert dirvol.cylinder_bound(3, 1.0, 1) == pytest.approx(math.pi)
    assert dirvol.cylinder_bound(3, 2.0, 4) == pytest.approx(16 * math.pi)


def test_fiber_homogeneity_is_exact():
    b = SampleBudget(11, 2 ** 12)
    base = dirvol.directed_volume_fiber(Query(CIRCLE, BIGBOX, E1), b).value
    for lam in (2.5, -1.25, 0.1):
        v = lam * E1
        got = dirvol.directed_volume_fiber(Query(CIRCLE, BIGBOX, v), b).value
        assert got == abs(lam) * base


def test_fiber_convexity_in_direction():
    rng = np.random.default_rng(2)
    P = polycore.MultiPoly(2, 3, rng.standard_normal(10)).normalized()
    b = SampleBudget(7, 2 ** 14)
    for _ in range(5):
        v = rng.standard_normal(2)
        w = rng.standard_normal(2)
        t = rng.uniform()
        mid = t * v + (1 - t) * w
        fv = dirvol.directed_volume_fiber(Query(P, SQUARE, v), b)
        fw = dirvol.directed_volume_fiber(Query(P, SQUARE, w), b)
        fm = dirvol.directed_volume_fiber(Query(P, SQUARE, mid), b)
        se = 3 * (fv.std_error + fw.std_error + fm.std_error)
        assert fm.value <= t * fv.value + (1 - t) * fw.value + se


class _Rect:
    """Axis-aligned rectangle [0,2] x [0,1]: the union of two unit cubes."""

    n = 2

    def bounding_cube(self):
        return Cube(np.array([0.0, 0.0]), 2.0)

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        return (pts[:, 0] >= 0) & (pts[:, 0] <= 2) & (pts[:, 1] >= 0) & (pts[:, 1] <= 1)

    def line_intervals(self, bases, u):
        t0 = np.full(len(bases), -np.inf)
        t1 = np.full(len(bases), np.inf)
        for j, (lo, hi) in enumerate(((0.0, 2.0), (0.0, 1.0))):
            a = (lo - bases[:, j]) / u[j]
            b = (hi - bases[:, j]) / u[j]
            t0 = np.maximum(t0, np.minimum(a, b))
            t1 = np.minimum(t1, np.maximum(a, b))
        return t0, t1, t0 < t1


def test_fiber_additive_over_disjoint_cubes():
    rng = np.random.default_rng(4)
    P = polycore.MultiPoly(2, 3, rng.standard_normal(10)).normalized()
    left = Cube(np.array([0.0, 0.0]), 1.0)
    right = Cube(np.array([1.0, 0.0]), 1.0)
    v = np.array([0.3, 0.95])
    v /= np.linalg.norm(v)
    b = SampleBudget(5, 2 ** 15)
    fl = dirvol.directed_volume_fiber(Query(P, left, v), b)
    fr = dirvol.directed_volume_fiber(Query(P, right, v), b)
    fu = dirvol.directed_volume_fiber(Query(P, _Rect(), v), b)
    comb = 3 * (fl.std_error + fr.std_error + fu.std_error)
    assert abs(fl.value + fr.value - fu.value) <= comb + 0.02


def test_axis_sum_segment():
    rep = dirvol.axis_sum_lower_bound_check(SEG, SQUARE, [E1, E2], SampleBudget(2, 2 ** 20))
    assert rep.surface_volume.value == pytest.approx(1.0, rel=0.05)
    assert rep.directed_sum == pytest.approx(1.0, abs=0.02)
    assert rep.holds


def test_axis_sum_diagonal():
    # Z = {x1 = x2} in the unit square: Vol = sqrt(2), and each axis carries
    # directed volume |e_j . N| * length = 1, so the sum is 2
    P = polycore.MultiPoly.from_terms(2, 1, {(1, 0): 1.0, (0, 1): -1.0})
    rep = dirvol.axis_sum_lower_bound_check(P, SQUARE, [E1, E2], SampleBudget(2, 2 ** 20))
    assert rep.surface_volume.value == pytest.approx(math.sqrt(2), rel=0.05)
    assert rep.directed_sum == pytest.approx(2.0, abs=0.02)
    assert rep.holds


def test_axis_sum_random_cubics_hold():
    rng = np.random.default_rng(8)
    box = Cube(np.zeros(3), 1.0)
    dirs = [np.eye(3)[j] for j in range(3)]
    for seed in range(4):
        P = polycore.MultiPoly(3, 3, rng.standard_normal(polycore.basis_size(3, 3)))
        rep = dirvol.axis_sum_lower_bound_check(P, box, dirs, SampleBudget(seed, 2 ** 17))
        assert rep.holds


def test_axis_sum_rejects_tilted_direction():
    bad = np.array([math.cos(0.2), math.sin(0.2)])
    with pytest.raises(dirvol.HypothesisViolated):
        dirvol.axis_sum_lower_bound_check(SEG, SQUARE, [bad, E2], SampleBudget(1, 2 ** 12))


def test_estimators_agree_on_random_cases():
    rng = np.random.default_rng(31)
    for seed in range(6):
        d = int(rng.integers(2, 5))
        P = polycore.MultiPoly(2, d, rng.standard_normal(polycore.basis_size(2, d))).normalized()
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        region = Cube(np.array([-1.0, -1.0]), 2.0)
        fib = dirvol.directed_volume_fiber(Query(P, region, v), SampleBudget(seed, 2 ** 15))
        surf = dirvol.directed_volume_surface(Query(P, region, v), SampleBudget(seed, 2 ** 13))
        if fib.value < 0.3:
            continue  # tiny values are dominated by absolute noise
        assert abs(fib.value - surf.value) / fib.value < 0.05


def test_cylinder_estimate_on_random_polynomials():
    rng = np.random.default_rng(17)
    for seed in range(10):
        n = 2 if seed % 2 == 0 else 3
        d = int(rng.integers(1, 6))
        P = polycore.MultiPoly(n, d, rng.standard_normal(polycore.basis_size(n, d))).normalized()
        u = np.zeros(n)
        u[0] = 1.0
        tube = Tube(np.full(n, -0.5) * 0 - np.array([10.0] + [0.0] * (n - 1)), u,
                    radius=1.0, length=20.0)
        est = dirvol.directed_volume_fiber(Query(P, tube, u), SampleBudget(seed, 2 ** 12))
        assert est.value <= dirvol.cylinder_bound(n, 1.0, d) + 3 * est.std_error
