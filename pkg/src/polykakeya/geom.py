"""Tubes, lattice cubes, balls, ellipsoids, and sampled convex bodies.

Regions (Cube, Ball, Tube) share a small protocol used by the sampling
engine: ``contains`` for membership of a point batch, ``bounding_cube``,
``diameter``, and ``line_intervals`` giving the parameter interval where a
batch of lines meets the region.  Tubes are clipped to the scene cube
before any lattice computation; all integrals live inside the scene.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .streams import sphere_points, stream

DIRECTION_TOL = 1e-12


class EmptyFamily(Exception):
    """A transversality computation received an empty direction family."""


class DegenerateBody(Exception):
    """Radial samples span a lower-dimensional hull; no inscribed ellipsoid."""


def unit_ball_volume(n: int) -> float:
    """omega_n, the volume of the unit n-ball.

    Computed by the two-step recursion so the low dimensions come out
    exact (omega_0 = 1, omega_1 = 2, omega_2 = pi): hyperplane pieces
    meet the cylinder estimate with equality and must not lose to
    gamma-function rounding.
    """
    if n < 0:
        raise ValueError("dimension must be non-negative")
    out = 1.0 if n % 2 == 0 else 2.0
    for k in range(2 + (n % 2), n + 1, 2):
        out *= 2.0 * math.pi / k
    return out


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return n * unit_ball_volume(n)


# -- regions -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Cube:
    """Axis-aligned cube given by its minimum corner and side length.

    Lattice cubes have integer corners and side 1; the scene cube has side S.
    """

    min_corner: np.ndarray
    side: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.min_corner, dtype=np.float64))
        object.__setattr__(self, "min_corner", c)
        if self.side <= 0:
            raise ValueError("cube side must be positive")

    @property
    def n(self) -> int:
        return self.min_corner.shape[0]

    @property
    def max_corner(self) -> np.ndarray:
        return self.min_corner + self.side

    @property
    def center(self) -> np.ndarray:
        return self.min_corner + self.side / 2.0

    def volume(self) -> float:
        return self.side ** self.n

    def diameter(self) -> float:
        return self.side * math.sqrt(self.n)

    def bounding_cube(self) -> "Cube":
        return self

    def corners(self) -> np.ndarray:
        offs = np.array(list(itertools.product([0.0, 1.0], repeat=self.n)))
        return self.min_corner[None, :] + self.side * offs

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=1)

    def inflated(self, eps: float) -> "Cube":
        return Cube(self.min_corner - eps, self.side + 2 * eps)

    def line_intervals(self, bases: np.ndarray, u: np.ndarray):
        """Slab-clip lines bases[i] + t*u against the cube.

        Returns (t0, t1, valid); rows with valid False miss the cube.
        """
        bases = np.atleast_2d(bases)
        m = bases.shape[0]
        t0 = np.full(m, -np.inf)
        t1 = np.full(m, np.inf)
        for j in range(self.n):
            lo, hi = self.min_corner[j], self.min_corner[j] + self.side
            uj = u[j]
            if abs(uj) < 1e-15:
                outside = (bases[:, j] < lo) | (bases[:, j] > hi)
                t0[outside], t1[outside] = 1.0, 0.0
            else:
                a = (lo - bases[:, j]) / uj
                b = (hi - bases[:, j]) / uj
                t0 = np.maximum(t0, np.minimum(a, b))
                t1 = np.minimum(t1, np.maximum(a, b))
        valid = t0 < t1
        return t0, t1, valid


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.radius ** self.n

    def diameter(self) -> float:
        return 2.0 * self.radius

    def bounding_cube(self) -> Cube:
        return Cube(self.center - self.radius, 2.0 * self.radius)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.sum((pts - self.center) ** 2, axis=1) <= self.radius ** 2

    def inflated(self, eps: float) -> "Ball":
        return Ball(self.center, self.radius + eps)

    def line_intervals(self, bases: np.ndarray, u: np.ndarray):
        bases = np.atleast_2d(bases)
        w = bases - self.center
        b = w @ u  # |u| = 1 assumed
        c = np.sum(w * w, axis=1) - self.radius ** 2
        disc = b * b - c
        valid = disc > 0
        sq = np.sqrt(np.maximum(disc, 0.0))
        return -b - sq, -b + sq, valid


@dataclass(frozen=True, eq=False)
class Tube:
    """Solid cylinder: segment core_point + t*direction for t in [0, length],
    thickened by ``radius``.  ``length=None`` leaves the core unclipped."""

    core_point: np.ndarray
    direction: np.ndarray
    radius: float = 1.0
    length: float | None = None
    family: int | None = None

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.core_point, dtype=np.float64))
        v = np.atleast_1d(np.asarray(self.direction, dtype=np.float64))
        object.__setattr__(self, "core_point", p)
        object.__setattr__(self, "direction", v)
        if abs(np.linalg.norm(v) - 1.0) > DIRECTION_TOL:
            raise ValueError("tube direction must be a unit vector")
        if self.radius <= 0:
            raise ValueError("tube radius must be positive")

    @property
    def n(self) -> int:
        return self.core_point.shape[0]

    def midpoint(self) -> np.ndarray:
        if self.length is None:
            return self.core_point
        return self.core_point + 0.5 * self.length * self.direction

    def volume(self) -> float:
        if self.length is None:
            raise ValueError("unbounded tube has no volume")
        return unit_ball_volume(self.n - 1) * self.radius ** (self.n - 1) * self.length

    def diameter(self) -> float:
        if self.length is None:
            raise ValueError("unbounded tube has no diameter")
        return math.sqrt(self.length ** 2 + (2 * self.radius) ** 2)

    def bounding_cube(self) -> Cube:
        if self.length is None:
            raise ValueError("clip the tube before asking for bounds")
        a = self.core_point
        b = self.core_point + self.length * self.direction
        lo = np.minimum(a, b) - self.radius
        hi = np.maximum(a, b) + self.radius
        side = float(np.max(hi - lo))
        return Cube(lo, side)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        w = pts - self.core_point
        s = w @ self.direction
        trans2 = np.sum(w * w, axis=1) - s * s
        ok = trans2 <= self.radius ** 2 + 1e-12
        if self.length is not None:
            ok &= (s >= 0.0) & (s <= self.length)
        return ok

    def inflated(self, eps: float) -> "Tube":
        length = None if self.length is None else self.length + 2 * eps
        return Tube(
            core_point=self.core_point - eps * self.direction,
            direction=self.direction,
            radius=self.radius + eps,
            length=length,
            family=self.family,
        )

    def line_intervals(self, bases: np.ndarray, u: np.ndarray):
        """Intersection parameters of lines with the solid cylinder."""
        bases = np.atleast_2d(bases)
        m = bases.shape[0]
        v = self.direction
        w = bases - self.core_point
        # transverse components of the line relative to the core
        u_par = u @ v
        u_perp = u - u_par * v
        w_par = w @ v
        w_perp = w - np.outer(w_par, v)
        A = float(u_perp @ u_perp)
        B = w_perp @ u_perp
        C = np.sum(w_perp * w_perp, axis=1) - self.radius ** 2
        t0 = np.full(m, -np.inf)
        t1 = np.full(m, np.inf)
        if A < 1e-15:
            valid = C <= 0
        else:
            disc = B * B - A * C
            valid = disc > 0
            sq = np.sqrt(np.maximum(disc, 0.0))
            t0 = (-B - sq) / A
            t1 = (-B + sq) / A
        if self.length is not None:
            # axial slab: 0 <= w_par + t*u_par <= length
            if abs(u_par) < 1e-15:
                valid = valid & (w_par >= 0.0) & (w_par <= self.length)
            else:
                a = (0.0 - w_par) / u_par
                b = (self.length - w_par) / u_par
                t0 = np.maximum(t0, np.minimum(a, b))
                t1 = np.minimum(t1, np.maximum(a, b))
        valid = valid & (t0 < t1)
        return t0, t1, valid


def clip_tube_to_scene(tube: Tube, scene: Cube) -> Tube | None:
    """Clip a tube's core line to the scene cube inflated by its radius.

    Returns None when the tube misses the scene entirely.  The result is a
    finite tube whose core starts where it enters the inflated scene.
    """
    lo = scene.min_corner - tube.radius
    hi = scene.min_corner + scene.side + tube.radius
    t0, t1 = -np.inf, np.inf
    if tube.length is not None:
        t0, t1 = 0.0, tube.length
    for j in range(tube.n):
        uj = tube.direction[j]
        pj = tube.core_point[j]
        if abs(uj) < 1e-15:
            if pj < lo[j] or pj > hi[j]:
                return None
        else:
            a = (lo[j] - pj) / uj
            b = (hi[j] - pj) / uj
            t0 = max(t0, min(a, b))
            t1 = min(t1, max(a, b))
    if not t0 < t1:
        return None
    return Tube(
        core_point=tube.core_point + t0 * tube.direction,
        direction=tube.direction,
        radius=tube.radius,
        length=float(t1 - t0),
        family=tube.family,
    )


# -- lattice --------------------------------------------------------------------


@dataclass(frozen=True)
class CubeLattice:
    """Unit lattice filling the scene cube [0, S]^n."""

    n: int
    side: int

    def scene_cube(self) -> Cube:
        return Cube(np.zeros(self.n), float(self.side))

    def cell(self, key: tuple[int, ...]) -> Cube:
        return Cube(np.array(key, dtype=np.float64), 1.0)

    def keys_near_segment(self, p: np.ndarray, u: np.ndarray, length: float, margin: float):
        """Candidate cell keys within ``margin`` (Chebyshev, cell-corner
        based) of the segment, found by walking the core."""
        reach = int(math.ceil(margin))
        steps = max(2, int(math.ceil(length / 0.5)) + 1)
        offsets = np.array(
            list(itertools.product(range(-reach, reach + 1), repeat=self.n)), dtype=np.int64
        )
        t = np.linspace(0.0, length, steps)
        bases = np.floor(p[None, :] + t[:, None] * u[None, :]).astype(np.int64)
        keys = (bases[:, None, :] + offsets[None, :, :]).reshape(-1, self.n)
        keys = keys[np.all((keys >= 0) & (keys < self.side), axis=1)]
        if keys.shape[0] == 0:
            return set()
        keys = np.unique(keys, axis=0)
        return {tuple(int(v) for v in row) for row in keys}


def segment_boxes_distance(
    p: np.ndarray, u: np.ndarray, length: float, los: np.ndarray, his: np.ndarray
) -> np.ndarray:
    """Distances from segment {p + t*u, t in [0, length]} to boxes [lo, hi].

    The squared distance is convex in t for every box, so a golden-section
    search runs on all boxes at once; 70 iterations give far better than
    1e-9 accuracy.
    """

    def d2(t: np.ndarray) -> np.ndarray:
        x = p[None, :] + t[:, None] * u[None, :]
        dx = np.maximum(np.maximum(los - x, 0.0), x - his)
        return np.sum(dx * dx, axis=1)

    m = los.shape[0]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a = np.zeros(m)
    b = np.full(m, float(length))
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = d2(c), d2(d)
    for _ in range(70):
        left = fc < fd
        b_new = np.where(left, d, b)
        a_new = np.where(left, a, c)
        c_new = np.where(left, b_new - phi * (b_new - a_new), d)
        d_new = np.where(left, c, a_new + phi * (b_new - a_new))
        fc_eval = d2(c_new)
        fd_eval = d2(d_new)
        fc_new = np.where(left, fc_eval, fd)
        fd_new = np.where(left, fc, fd_eval)
        a, b, c, d, fc, fd = a_new, b_new, c_new, d_new, fc_new, fd_new
    best = np.minimum(np.minimum(fc, fd), np.minimum(d2(a), d2(b)))
    return np.sqrt(best)


def segment_box_distance(
    p: np.ndarray, u: np.ndarray, length: float, lo: np.ndarray, hi: np.ndarray
) -> float:
    return float(
        segment_boxes_distance(p, u, length, lo[None, :], hi[None, :])[0]
    )


def cubes_hit_by_tube(tube: Tube, lattice: CubeLattice) -> set[tuple[int, ...]]:
    """Keys of lattice cells whose closed body meets the closed tube.

    The tube must already be clipped to the scene.  Candidates come from
    walking the core; the batch segment-to-box distance settles them.
    """
    if tube.length is None:
        raise ValueError("clip the tube to the scene before the lattice query")
    margin = tube.radius + math.sqrt(tube.n) / 2.0 + 0.75
    keys = sorted(
        lattice.keys_near_segment(tube.core_point, tube.direction, tube.length, margin)
    )
    if not keys:
        return set()
    los = np.array(keys, dtype=np.float64)
    dists = segment_boxes_distance(
        tube.core_point, tube.direction, tube.length, los, los + 1.0
    )
    return {k for k, dist in zip(keys, dists) if dist <= tube.radius + 1e-9}


# -- transversality ---------------------------------------------------------------


@dataclass(frozen=True)
class DeterminantEstimate:
    """Minimum |det| over one direction from each family.

    ``exhaustive`` False marks a seeded-sample estimate (lower confidence).
    """

    value: float
    exhaustive: bool
    tuples_checked: int


def min_determinant(
    families, *, exhaustive_limit: int = 10 ** 6, seed: int = 0
) -> DeterminantEstimate:
    """min over (v_{1,a_1}, ..., v_{n,a_n}) of |det|, exhaustive when the
    product of family sizes is at most ``exhaustive_limit``."""
    mats = [np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in families]
    n = len(mats)
    for f in mats:
        if f.shape[0] == 0:
            raise EmptyFamily("every family needs at least one direction")
        if f.shape[1] != n:
            raise ValueError("family directions must have dimension n")
    sizes = [f.shape[0] for f in mats]
    total = int(np.prod(sizes))
    chunk = 65536
    best = np.inf
    if total <= exhaustive_limit:
        for lo in range(0, total, chunk):
            flat = np.arange(lo, min(lo + chunk, total))
            idx = np.unravel_index(flat, sizes)
            M = np.stack([mats[j][idx[j]] for j in range(n)], axis=1)
            best = min(best, float(np.min(np.abs(np.linalg.det(M)))))
        return DeterminantEstimate(best, True, total)
    rng = stream(seed, "min-determinant")
    samples = exhaustive_limit
    for lo in range(0, samples, chunk):
        m = min(chunk, samples - lo)
        cols = [rng.integers(0, sizes[j], size=m) for j in range(n)]
        M = np.stack([mats[j][cols[j]] for j in range(n)], axis=1)
        best = min(best, float(np.min(np.abs(np.linalg.det(M)))))
    return DeterminantEstimate(best, False, samples)


# -- ellipsoids -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Center-symmetric ellipsoid {v : v^T Q v <= 1} with Q positive definite."""

    quad_form: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.quad_form, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("quadratic form must be square")
        if np.max(np.abs(Q - Q.T)) > 1e-10 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("quadratic form must be symmetric")
        Q = 0.5 * (Q + Q.T)
        if np.min(np.linalg.eigvalsh(Q)) <= 0:
            raise ValueError("quadratic form must be positive definite")
        object.__setattr__(self, "quad_form", Q)

    @property
    def n(self) -> int:
        return self.quad_form.shape[0]

    def volume(self) -> float:
        return unit_ball_volume(self.n) / math.sqrt(float(np.linalg.det(self.quad_form)))

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(points)
        q = np.einsum("ij,jk,ik->i", pts, self.quad_form, pts)
        return q <= (1.0 + slack) ** 2

    def boundary_points(self, directions: np.ndarray) -> np.ndarray:
        """Boundary point in each given direction."""
        dirs = np.atleast_2d(directions)
        q = np.einsum("ij,jk,ik->i", dirs, self.quad_form, dirs)
        return dirs / np.sqrt(q)[:, None]

    def scaled(self, factor: float) -> "Ellipsoid":
        """Ellipsoid dilated by ``factor`` (body grows, form shrinks)."""
        return Ellipsoid(self.quad_form / factor ** 2)


def ellipsoid_to_dict(E: Ellipsoid) -> dict:
    """Serialize as the upper triangle of the quadratic form, row-major."""
    n = E.n
    upper = [float(E.quad_form[i, j]) for i in range(n) for j in range(i, n)]
    return {"n": n, "upper": upper}


def ellipsoid_from_dict(data: dict) -> Ellipsoid:
    n = int(data["n"])
    Q = np.zeros((n, n))
    it = iter(data["upper"])
    for i in range(n):
        for j in range(i, n):
            Q[i, j] = Q[j, i] = float(next(it))
    return Ellipsoid(Q)


def ellipsoid_distance(E1: Ellipsoid, E2: Ellipsoid) -> float:
    """Least log D with (1/D) E1 inside E2 inside D E1.

    Quadratic forms scale as D^-2, so the answer is max |log lambda| / 2
    over generalized eigenvalues of (Q1, Q2).  The argument order is
    canonicalized so the metric is exactly symmetric in floating point.
    """
    a, b = E1.quad_form, E2.quad_form
    if np.array_equal(a, b):
        return 0.0
    if a.tobytes() > b.tobytes():
        a, b = b, a
    lam = scipy.linalg.eigh(a, b, eigvals_only=True)
    return float(np.max(np.abs(np.log(lam))) / 2.0)


@dataclass(frozen=True, eq=False)
class ConvexBodySample:
    """Symmetric star body sampled by radial values on unit directions."""

    directions: np.ndarray
    radial: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        r = np.atleast_1d(np.asarray(self.radial, dtype=np.float64))
        if d.shape[0] != r.shape[0]:
            raise ValueError("need one radial value per direction")
        if np.any(r < 0):
            raise ValueError("radial values must be non-negative")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "radial", r)

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    def points(self) -> np.ndarray:
        return self.directions * self.radial[:, None]

    def support(self, directions: np.ndarray) -> np.ndarray:
        """Support function of the symmetric hull of the sample points."""
        dirs = np.atleast_2d(directions)
        return np.max(np.abs(dirs @ self.points().T), axis=1)

    def volume(self) -> float:
        """Star-body volume from the radial samples (polar integration)."""
        return unit_ball_volume(self.n) * float(np.mean(self.radial ** self.n))


def default_direction_count(n: int) -> int:
    """Sampling resolution for convex bodies: 512 up to R^3, 4096 in R^4."""
    return 4096 if n >= 4 else 512


def body_direction_set(n: int, seed: int, k: int | None = None) -> np.ndarray:
    if k is None:
        k = default_direction_count(n)
    return sphere_points(stream(seed, "body-directions", n, k), k, n)


def john_inner_ellipsoid(
    body: ConvexBodySample, tol: float = 1e-4, max_iter: int = 200000
) -> Ellipsoid:
    """Maximum-volume inscribed ellipsoid of the symmetric hull of the samples.

    Works on the polar side: boundary points of the polar body are
    y_j = u_j / h(u_j) with h the sampled support function, and the minimum
    volume ellipsoid enclosing them (Khachiyan barycentric ascent) inverts
    to the inscribed ellipsoid.  John's lemma then sandwiches the hull
    between E and sqrt(n) E.
    """
    n, k = body.n, body.k
    if k < n * (n + 3) // 2:
        raise ValueError("too few directions to determine an ellipsoid")
    rmax = float(np.max(body.radial))
    if rmax <= 0:
        raise DegenerateBody("all radial values vanish")
    pts = body.points()
    moments = np.linalg.eigvalsh(pts.T @ pts)
    if moments[0] <= 1e-12 * moments[-1]:
        raise DegenerateBody("sample points span a lower-dimensional space")
    # constrain against the exact hull support on an enriched direction set,
    # otherwise the ellipsoid can bulge out between sparse sample directions
    # near nearly-flat hull vertices
    extra = sphere_points(stream(0, "john-directions", n), max(4 * k, 2048), n)
    dirs = np.concatenate([body.directions, extra], axis=0)
    h = np.max(np.abs(dirs @ pts.T), axis=1)
    if np.min(h) < 1e-12 * rmax:
        raise DegenerateBody("hull is flat in some sampled direction")
    Y = dirs / h[:, None]
    w = np.full(Y.shape[0], 1.0 / Y.shape[0])
    V = Y.T @ (Y * w[:, None])
    for _ in range(max_iter):
        Vinv = np.linalg.inv(V)
        kappa = np.einsum("ij,jk,ik->i", Y, Vinv, Y)
        j = int(np.argmax(kappa))
        km = float(kappa[j])
        if km <= n * (1.0 + tol):
            break
        step = (km - n) / (n * (km - 1.0))
        w *= 1.0 - step
        w[j] += step
        V = (1.0 - step) * V + step * np.outer(Y[j], Y[j])
    # enclosing form for the polar points is V^-1/n; invert back
    return Ellipsoid(n * V)
