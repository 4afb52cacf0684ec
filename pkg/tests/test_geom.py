import math

import numpy as np
import pytest
import scipy.spatial

from polykakeya import geom
from polykakeya.streams import stream


def test_axis_tube_hits_rows_within_reach():
    # radius-1 tube along the x1-axis: cells within center distance
    # 1 + sqrt(n)/2 of the axis are hit, a cell at lattice distance 3 is not
    lat = geom.CubeLattice(2, 4)
    tube = geom.clip_tube_to_scene(
        geom.Tube(np.array([0.0, 0.0]), np.array([1.0, 0.0]), radius=1.0),
        lat.scene_cube(),
    )
    hits = geom.cubes_hit_by_tube(tube, lat)
    rows = {k[1] for k in hits}
    assert rows == {0, 1}
    for k in hits:
        center_dist = k[1] + 0.5
        assert center_dist <= 1 + math.sqrt(2) / 2
    assert all(k[1] != 3 for k in hits)


def test_tube_outside_scene_hits_nothing():
    lat = geom.CubeLattice(2, 4)
    t = geom.Tube(np.array([0.0, 10.0]), np.array([1.0, 0.0]), radius=1.0)
    assert geom.clip_tube_to_scene(t, lat.scene_cube()) is None


def _brute_cells_hit(tube, lat, samples=40000):
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, lat.side, (samples, lat.n))
    inside = pts[tube.contains(pts)]
    return {tuple(int(v) for v in np.floor(p)) for p in inside}


def test_diagonal_tube_covers_all_four_cells():
    lat = geom.CubeLattice(2, 2)
    tube = geom.clip_tube_to_scene(
        geom.Tube(np.zeros(2), np.array([1.0, 1.0]) / math.sqrt(2), radius=1.0),
        lat.scene_cube(),
    )
    hits = geom.cubes_hit_by_tube(tube, lat)
    assert hits == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert _brute_cells_hit(tube, lat) <= hits


def test_hits_match_brute_force_on_random_tubes():
    rng = np.random.default_rng(4)
    lat = geom.CubeLattice(2, 6)
    for _ in range(5):
        u = rng.standard_normal(2)
        u /= np.linalg.norm(u)
        t = geom.Tube(rng.uniform(0, 6, 2), u, radius=float(rng.uniform(0.3, 1.2)))
        tc = geom.clip_tube_to_scene(t, lat.scene_cube())
        hits = geom.cubes_hit_by_tube(tc, lat)
        brute = _brute_cells_hit(tc, lat)
        assert brute <= hits  # sampling can only find a subset


def test_min_determinant_orthonormal():
    fams = [np.eye(3)[j][None, :] for j in range(3)]
    r = geom.min_determinant(fams)
    assert r.value == pytest.approx(1.0) and r.exhaustive


def test_min_determinant_shared_vector_is_zero():
    e1 = np.array([[1.0, 0.0]])
    r = geom.min_determinant([e1, e1])
    assert r.value == pytest.approx(0.0, abs=1e-15)


def test_min_determinant_tilted_pair():
    a = np.array([[1.0, 0.0], [math.cos(math.radians(10)), math.sin(math.radians(10))]])
    b = np.array([[0.0, 1.0]])
    r = geom.min_determinant([a, b])
    assert r.value == pytest.approx(math.cos(math.radians(10)), rel=1e-12)


def test_min_determinant_sampled_flag():
    rng = np.random.default_rng(0)
    fams = [rng.standard_normal((110, 3)) for _ in range(3)]
    for f in fams:
        f /= np.linalg.norm(f, axis=1)[:, None]
    r = geom.min_determinant(fams, exhaustive_limit=10 ** 5, seed=1)
    assert not r.exhaustive
    assert 0.0 <= r.value <= 1.0


def test_min_determinant_never_exceeds_one():
    rng = np.random.default_rng(2)
    fams = [rng.standard_normal((5, 2)) for _ in range(2)]
    for f in fams:
        f /= np.linalg.norm(f, axis=1)[:, None]
    assert geom.min_determinant(fams).value <= 1.0 + 1e-12


def _unit_dirs(k=512, n=2, seed=1):
    return geom.body_direction_set(n, seed, k)


def test_john_of_sphere_is_identity():
    dirs = _unit_dirs()
    E = geom.john_inner_ellipsoid(geom.ConvexBodySample(dirs, np.ones(len(dirs))))
    assert np.max(np.abs(E.quad_form - np.eye(2))) < 1e-3


def _box_radial(dirs, half_x, half_y):
    return np.minimum(
        half_x / np.maximum(np.abs(dirs[:, 0]), 1e-12),
        half_y / np.maximum(np.abs(dirs[:, 1]), 1e-12),
    )


def _grid_search_inscribed_ellipse(dirs, rho):
    """Oracle: largest-area axis-aligned ellipse inside the sampled body."""
    pts = dirs * rho[:, None]
    hull = scipy.spatial.ConvexHull(pts)
    A, b = hull.equations[:, :2], hull.equations[:, 2]
    best = (0.0, None)
    for sa in np.linspace(0.05, 1.5, 80):
        for sb in np.linspace(0.05, 1.5, 80):
            # ellipse (x/sa)^2 + (y/sb)^2 <= 1 fits iff for every facet
            # a.x + b <= 0 holds at the support point
            support = np.sqrt((A[:, 0] * sa) ** 2 + (A[:, 1] * sb) ** 2)
            if np.all(support + b <= 1e-9) and sa * sb > best[0]:
                best = (sa * sb, (sa, sb))
    return best[1]


def test_john_of_box_recovers_inscribed_ellipse():
    dirs = _unit_dirs()
    rho = _box_radial(dirs, 1.0, 0.5)
    E = geom.john_inner_ellipsoid(geom.ConvexBodySample(dirs, rho))
    axes = np.sort(1.0 / np.sqrt(np.linalg.eigvalsh(E.quad_form)))[::-1]
    oracle = _grid_search_inscribed_ellipse(dirs, rho)
    assert oracle is not None
    assert axes[0] == pytest.approx(max(oracle), rel=0.03)
    assert axes[1] == pytest.approx(min(oracle), rel=0.03)
    assert axes[0] == pytest.approx(1.0, rel=0.02)
    assert axes[1] == pytest.approx(0.5, rel=0.02)


def test_john_degenerate_body_raises():
    dirs = _unit_dirs()
    rho = np.zeros(len(dirs))
    rho[0] = 1.0
    with pytest.raises(geom.DegenerateBody):
        geom.john_inner_ellipsoid(geom.ConvexBodySample(dirs, rho))


def test_ellipsoid_distance_identity():
    E = geom.Ellipsoid(np.diag([2.0, 0.5]))
    assert geom.ellipsoid_distance(E, E) == 0.0


def test_ellipsoid_distance_dilation():
    E = geom.Ellipsoid(np.diag([2.0, 0.5]))
    assert geom.ellipsoid_distance(E, E.scaled(2.0)) == pytest.approx(math.log(2), rel=1e-12)


def test_ellipsoid_distance_axes_4_quarter():
    ball = geom.Ellipsoid(np.eye(2))
    other = geom.Ellipsoid(np.diag([1.0 / 16.0, 16.0]))
    assert geom.ellipsoid_distance(ball, other) == pytest.approx(math.log(4), rel=1e-12)


def _random_ellipsoids(k, n=2, seed=3):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        M = rng.standard_normal((n, n))
        Q = M @ M.T + 0.2 * np.eye(n)
        out.append(geom.Ellipsoid(Q))
    return out


def test_ellipsoid_metric_properties():
    Es = _random_ellipsoids(10)
    for E1 in Es:
        for E2 in Es:
            d12 = geom.ellipsoid_distance(E1, E2)
            assert d12 == geom.ellipsoid_distance(E2, E1)  # exact symmetry
            for E3 in Es:
                d13 = geom.ellipsoid_distance(E1, E3)
                d32 = geom.ellipsoid_distance(E3, E2)
                assert d12 <= d13 + d32 + 1e-9


def test_ellipsoid_metric_gl_invariance():
    rng = np.random.default_rng(8)
    Es = _random_ellipsoids(4, seed=5)
    for _ in range(5):
        M = rng.standard_normal((2, 2))
        while abs(np.linalg.det(M)) < 0.2:
            M = rng.standard_normal((2, 2))
        Minv = np.linalg.inv(M)
        for E1 in Es:
            for E2 in Es:
                T1 = geom.Ellipsoid(Minv.T @ E1.quad_form @ Minv)
                T2 = geom.Ellipsoid(Minv.T @ E2.quad_form @ Minv)
                assert geom.ellipsoid_distance(T1, T2) == pytest.approx(
                    geom.ellipsoid_distance(E1, E2), abs=1e-8
                )


def _random_symmetric_body(dirs, seed):
    """Radial samples of the hull of a random symmetric point cloud."""
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((14, dirs.shape[1])) * rng.uniform(0.3, 1.2)
    pts = np.concatenate([pts, -pts])
    hull = scipy.spatial.ConvexHull(pts)
    A, b = hull.equations[:, :-1], hull.equations[:, -1]
    denom = A @ dirs.T  # (facets, k)
    rho = np.full(dirs.shape[0], np.inf)
    for f in range(A.shape[0]):
        pos = denom[f] > 1e-12
        rho[pos] = np.minimum(rho[pos], -b[f] / denom[f][pos])
    return geom.ConvexBodySample(dirs, rho), (A, b)


def test_john_sandwich_on_random_bodies():
    dirs = _unit_dirs(256)
    n = 2
    for seed in range(20):
        body, (A, b) = _random_symmetric_body(dirs, seed)
        E = geom.john_inner_ellipsoid(body)
        # body samples inside sqrt(n) E
        pts = body.points()
        q = np.einsum("ij,jk,ik->i", pts, E.quad_form, pts)
        assert np.all(q <= n * 1.01 ** 2)
        # E boundary samples inside the body hull
        bd = E.boundary_points(dirs)
        assert np.all(A @ bd.T + b[:, None] <= 0.01 + 1e-9)
