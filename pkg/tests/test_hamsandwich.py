import math

import numpy as np
import pytest

from polykakeya import hamsandwich as hs
from polykakeya import measure, polycore
from polykakeya.geom import Ball, Cube
from polykakeya.measure import SampleBudget


def test_two_disjoint_disks_with_a_line():
    sets = [Ball(np.array([-2.0, 0.0]), 1.0), Ball(np.array([2.0, 0.0]), 1.0)]
    res = hs.solve_bisection(
        hs.BisectionProblem(sets, degree=1), SampleBudget(5, 2 ** 14), restarts=4
    )
    assert np.max(np.abs(res.defects)) <= 0.01


def test_single_square_with_a_line():
    sets = [Cube(np.array([0.0, 0.0]), 1.0)]
    res = hs.solve_bisection(
        hs.BisectionProblem(sets, degree=1), SampleBudget(2, 2 ** 14), restarts=4
    )
    assert abs(res.defects[0]) <= 0.01


def test_five_disks_at_capacity():
    centers = np.array([[0.0, 0.0], [3.0, 0.5], [0.5, 3.0], [-2.5, 2.0], [2.0, -2.5]])
    sets = [Ball(c, 1.0) for c in centers]
    res = hs.solve_bisection(
        hs.BisectionProblem(sets, degree=2), SampleBudget(5, 2 ** 15), restarts=16
    )
    assert np.max(np.abs(res.defects)) <= 0.01


def test_infeasible_rejected_before_search():
    sets = [Ball(np.array([3.0 * k, 0.0]), 1.0) for k in range(6)]
    with pytest.raises(hs.Infeasible):
        hs.BisectionProblem(sets, degree=2)


def test_degenerate_set_rejected():
    class Sliver:
        n = 2

        def bounding_cube(self):
            return Cube(np.zeros(2), 1.0)

        def contains(self, pts):
            return np.zeros(len(pts), dtype=bool)

    with pytest.raises(hs.DegenerateSet):
        hs.solve_bisection(
            hs.BisectionProblem([Sliver()], degree=1), SampleBudget(1, 2 ** 12), restarts=1
        )


def test_bisects_center_line():
    P = polycore.MultiPoly.from_terms(2, 1, {(1, 0): 1.0})
    U = Ball(np.zeros(2), 1.0)
    assert hs.bisects(P, U, 0.01, SampleBudget(3, 2 ** 18))


def test_bisects_false_for_missing_surface():
    P = polycore.MultiPoly.from_terms(2, 1, {(1, 0): 1.0, (0, 0): -10.0})
    U = Ball(np.zeros(2), 1.0)
    assert not hs.bisects(P, U, 0.01, SampleBudget(3, 2 ** 18))


def test_bisects_inner_circle_halves_disk():
    # the radius 1/sqrt(2) circle halves the unit disk by area
    P = polycore.MultiPoly.from_terms(2, 2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -0.5})
    U = Ball(np.zeros(2), 1.0)
    assert hs.bisects(P, U, 0.01, SampleBudget(3, 2 ** 20))


def test_bisects_is_scale_invariant():
    rng = np.random.default_rng(1)
    P = polycore.MultiPoly(2, 2, rng.standard_normal(6))
    U = Ball(np.array([0.2, -0.1]), 1.0)
    b = SampleBudget(9, 2 ** 16)
    for lam in (2.0, -3.5, 0.001):
        assert hs.bisects(P, U, 0.02, b) == hs.bisects(P.scaled(lam), U, 0.02, b)


def test_defects_are_antipodal():
    sets = [Ball(np.array([-2.0, 0.0]), 1.0), Ball(np.array([2.0, 0.0]), 1.0)]
    res = hs.solve_bisection(
        hs.BisectionProblem(sets, degree=1), SampleBudget(5, 2 ** 14), restarts=2
    )
    m = hs._monomial_matrix(hs._interior_samples(sets[0], 2048, 5, 0), 2, 1)
    d_plus = float(np.mean(np.sign(m @ res.P.coeffs)))
    d_minus = float(np.mean(np.sign(m @ (-res.P.coeffs))))
    assert d_minus == -d_plus


def test_capacity_trials_mostly_succeed():
    # random disjoint 5-disk instances at the Stone-Tukey bound
    ok = 0
    trials = 8
    for trial in range(trials):
        rng = np.random.default_rng(1000 + trial)
        centers = []
        while len(centers) < 5:
            c = rng.uniform(-4, 4, 2)
            if all(np.linalg.norm(c - o) > 2.2 for o in centers):
                centers.append(c)
        sets = [Ball(c, 1.0) for c in centers]
        try:
            hs.solve_bisection(
                hs.BisectionProblem(sets, degree=2), SampleBudget(trial, 2 ** 15), restarts=16
            )
            ok += 1
        except hs.Stalled:
            pass
    assert ok >= trials - 1


def test_bisecting_surface_meets_area_floor():
    # a surface bisecting a unit cube has length at least ~1 inside it
    square = Cube(np.array([0.0, 0.0]), 1.0)
    other = Ball(np.array([3.0, 0.5]), 1.0)
    res = hs.solve_bisection(
        hs.BisectionProblem([square, other], degree=2), SampleBudget(4, 2 ** 15), restarts=8
    )
    length = measure.surface_integral(
        res.P, square, lambda x: np.ones(len(x)), SampleBudget(4, 2 ** 20)
    )
    assert length.value >= 0.9


def test_stalled_carries_best_candidate():
    # odd per-set sample counts make a mean sign of exactly zero impossible,
    # so a tolerance below 1/m forces a stall with the best result attached
    centers = np.array([[0.0, 0.0], [3.0, 0.5], [0.5, 3.0], [-2.5, 2.0], [2.0, -2.5]])
    sets = [Ball(c, 1.0) for c in centers]
    problem = hs.BisectionProblem(sets, degree=2, tolerance=1e-4)
    with pytest.raises(hs.Stalled) as err:
        hs.solve_bisection(problem, SampleBudget(0, 5 * 1027), restarts=2)
    assert err.value.result.P.coeffs.shape == (6,)
    assert len(err.value.result.defects) == 5
