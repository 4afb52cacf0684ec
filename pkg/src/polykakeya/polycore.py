"""Multivariate real polynomials on the graded-lex monomial basis.

A polynomial in n variables of degree at most d is a coefficient vector of
length C(n+d, d) over the monomial basis, ordered by total degree and then
lexicographically with earlier variables dominant.  The order is fixed
forever so coefficient vectors are reproducible across runs.

The module also provides restriction of a polynomial to a line (giving a
univariate polynomial of the same degree) and distinct-real-root counting
on an interval via Sturm sequences.  Root counting uses half-open
intervals (a, b] so that consecutive fibers tiled along a line partition
the roots without double counting.  Roots of multiplicity m count once:
tangential intersections are single points of the zero set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _sturmjit

MultiIndex = tuple[int, ...]

# Restriction that collapses to the zero polynomial, relative to the source
# polynomial's largest coefficient.  Exact vanishing on a line is
# measure-zero, but floating noise requires a cutoff.
LINE_CONTAINED_REL = 1e-12

# Sturm chain tolerances, all relative: leading-coefficient strip, remainder
# treated as zero (gcd reached), and evaluation treated as zero when counting
# sign variations.
_STRIP_REL = 1e-12
_CHAIN_STOP_REL = 1e-10
_SIGN_ZERO_REL = 1e-11

_EVAL_CHUNK = 16384


class LineContained(Exception):
    """The restricted polynomial vanished identically: Z contains the line.

    Callers treat the fiber as a measure-zero degeneracy.
    """


def basis_size(n: int, d: int) -> int:
    return math.comb(n + d, d)


@lru_cache(maxsize=None)
def monomial_basis(n: int, d: int) -> tuple[MultiIndex, ...]:
    """All exponent tuples with |e| <= d in graded-lex order.

    Within a degree level, exponents sort lexicographically with x1 major:
    for n=2, d=2 the order is 1, x1, x2, x1^2, x1*x2, x2^2.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if d < 0:
        raise ValueError("degree must be >= 0")
    idxs = [e for e in itertools.product(range(d + 1), repeat=n) if sum(e) <= d]
    idxs.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return tuple(idxs)


@lru_cache(maxsize=None)
def basis_index(n: int, d: int) -> dict[MultiIndex, int]:
    return {e: i for i, e in enumerate(monomial_basis(n, d))}


@lru_cache(maxsize=None)
def exponent_matrix(n: int, d: int) -> np.ndarray:
    """(basis_size, n) integer matrix of exponents in basis order."""
    return np.array(monomial_basis(n, d), dtype=np.int64)


def stone_tukey_degree(n: int, r: int) -> int:
    """Minimal d with C(n+d, d) - 1 >= r: the degree at which a single
    algebraic hypersurface can simultaneously bisect r sets in R^n."""
    if n < 1 or r < 1:
        raise ValueError("need n >= 1 and r >= 1")
    d = 0
    while math.comb(n + d, d) - 1 < r:
        d += 1
    return d


@dataclass(frozen=True, eq=False)
class MultiPoly:
    """Real polynomial in ``n`` variables of degree <= ``d``.

    ``coeffs`` has length C(n+d, d) in graded-lex order.  Hypersurface
    representatives are normalized to the unit coefficient sphere.
    """

    n: int
    d: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (basis_size(self.n, self.d),):
            raise ValueError(
                f"coefficient vector has length {c.shape}, expected "
                f"{basis_size(self.n, self.d)} for n={self.n}, d={self.d}"
            )
        object.__setattr__(self, "coeffs", c)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def from_terms(n: int, d: int, terms: dict[MultiIndex, float]) -> "MultiPoly":
        idx = basis_index(n, d)
        c = np.zeros(basis_size(n, d))
        for e, v in terms.items():
            e = tuple(int(x) for x in e)
            if e not in idx:
                raise ValueError(f"exponent {e} not in the degree-{d} basis")
            c[idx[e]] += float(v)
        return MultiPoly(n, d, c)

    @staticmethod
    def zero(n: int, d: int) -> "MultiPoly":
        return MultiPoly(n, d, np.zeros(basis_size(n, d)))

    def terms(self) -> dict[MultiIndex, float]:
        basis = monomial_basis(self.n, self.d)
        return {basis[i]: float(v) for i, v in enumerate(self.coeffs) if v != 0.0}

    # -- algebra ---------------------------------------------------------------

    def normalized(self) -> "MultiPoly":
        """Rescale onto the unit coefficient sphere."""
        norm = float(np.linalg.norm(self.coeffs))
        if norm == 0.0:
            raise ValueError("cannot normalize the zero polynomial")
        return MultiPoly(self.n, self.d, self.coeffs / norm)

    def scaled(self, factor: float) -> "MultiPoly":
        return MultiPoly(self.n, self.d, self.coeffs * float(factor))

    def __mul__(self, other: "MultiPoly") -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            return NotImplemented
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        out: dict[MultiIndex, float] = {}
        for ea, va in self.terms().items():
            for eb, vb in other.terms().items():
                e = tuple(a + b for a, b in zip(ea, eb))
                out[e] = out.get(e, 0.0) + va * vb
        return MultiPoly.from_terms(self.n, self.d + other.d, out)

    def partial(self, j: int) -> "MultiPoly":
        """Partial derivative with respect to variable j (0-based)."""
        dd = max(self.d - 1, 0)
        out: dict[MultiIndex, float] = {}
        basis = monomial_basis(self.n, self.d)
        for i, v in enumerate(self.coeffs):
            if v == 0.0:
                continue
            e = basis[i]
            if e[j] == 0:
                continue
            e2 = e[:j] + (e[j] - 1,) + e[j + 1 :]
            out[e2] = out.get(e2, 0.0) + v * e[j]
        return MultiPoly.from_terms(self.n, dd, out)

    # -- evaluation --------------------------------------------------------------

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (m, n) array of points; returns shape (m,).

        Per-variable power tables are built by cumulative products (Horner
        recurrence per variable) and monomials combined in basis order.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != self.n:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected {self.n}")
        E = exponent_matrix(self.n, self.d)
        m = pts.shape[0]
        out = np.empty(m)
        for lo in range(0, m, _EVAL_CHUNK):
            hi = min(lo + _EVAL_CHUNK, m)
            chunk = pts[lo:hi]
            # pow[j][:, k] = x_j^k
            pows = []
            for j in range(self.n):
                p = np.empty((hi - lo, self.d + 1))
                p[:, 0] = 1.0
                for k in range(1, self.d + 1):
                    p[:, k] = p[:, k - 1] * chunk[:, j]
                pows.append(p)
            mono = pows[0][:, E[:, 0]]
            for j in range(1, self.n):
                mono *= pows[j][:, E[:, j]]
            out[lo:hi] = mono @ self.coeffs
        return out

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Gradient at an (m, n) array of points; returns shape (m, n)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        g = np.empty_like(pts)
        for j in range(self.n):
            g[:, j] = self._partials()[j].evaluate(pts)
        return g

    def _partials(self) -> tuple["MultiPoly", ...]:
        cached = self.__dict__.get("_partials_cache")
        if cached is None:
            cached = tuple(self.partial(j) for j in range(self.n))
            self.__dict__["_partials_cache"] = cached
        return cached

    @property
    def max_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


# -- serialization ------------------------------------------------------------


def poly_to_dict(P: MultiPoly) -> dict:
    """Structured-text form: nonzero (multi-index, value) pairs in basis order."""
    basis = monomial_basis(P.n, P.d)
    entries = [[list(basis[i]), float(v)] for i, v in enumerate(P.coeffs) if v != 0.0]
    return {"n": P.n, "d": P.d, "coeffs": entries}


def poly_from_dict(data: dict) -> MultiPoly:
    n, d = int(data["n"]), int(data["d"])
    terms = {tuple(int(x) for x in e): float(v) for e, v in data["coeffs"]}
    return MultiPoly.from_terms(n, d, terms)


# -- univariate restriction and root counting ---------------------------------


@dataclass(frozen=True, eq=False)
class UniPoly:
    """Univariate polynomial, ascending coefficients; the leading stored
    coefficient may be zero (restriction can drop degree).

    ``ref_scale`` records the largest coefficient magnitude of the source
    multivariate polynomial, used by the identically-zero test.
    """

    coeffs: np.ndarray
    ref_scale: float | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64))
        object.__setattr__(self, "coeffs", c)

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=np.float64), self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


@lru_cache(maxsize=None)
def _cheb_nodes_and_inverse(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev nodes on [-1, 1] and the inverse power-basis Vandermonde."""
    k = np.arange(d + 1)
    t = np.cos(np.pi * (2 * k + 1) / (2 * (d + 1)))
    V = np.polynomial.polynomial.polyvander(t, d)
    return t, np.linalg.inv(V)


def restrict_to_line(P: MultiPoly, p, u) -> UniPoly:
    """q(t) = P(p + t*u), recovered by interpolation at d+1 Chebyshev nodes."""
    p = np.asarray(p, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    t, Vinv = _cheb_nodes_and_inverse(P.d)
    pts = p[None, :] + t[:, None] * u[None, :]
    vals = P.evaluate(pts)
    return UniPoly(Vinv @ vals, ref_scale=P.max_coeff)


def restrict_many(P: MultiPoly, bases: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Coefficients of q_i(t) = P(bases[i] + t*u) for a batch of base points.

    Returns an (m, d+1) ascending-coefficient array.  One interpolation
    solve serves the whole batch.
    """
    bases = np.atleast_2d(np.asarray(bases, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64)
    t, Vinv = _cheb_nodes_and_inverse(P.d)
    m = bases.shape[0]
    pts = bases[:, None, :] + t[None, :, None] * u[None, None, :]
    vals = P.evaluate(pts.reshape(m * (P.d + 1), P.n)).reshape(m, P.d + 1)
    return vals @ Vinv.T


# -- Sturm kernel ---------------------------------------------------------------
#
# The kernel works on plain Python float lists.  Every chain element is
# normalized to unit max-abs coefficient (a positive rescale, which leaves
# sign-variation counts unchanged) so the chain stays well-scaled, and the
# interval is always mapped to [-1, 1] first so evaluations happen at +-1.


def _strip(c: list[float]) -> list[float]:
    m = max(abs(x) for x in c)
    if m == 0.0:
        return [0.0]
    k = len(c) - 1
    while k > 0 and abs(c[k]) <= _STRIP_REL * m:
        k -= 1
    return c[: k + 1]


def _normalize(c: list[float]) -> list[float]:
    m = max(abs(x) for x in c)
    return [x / m for x in c] if m > 0 else c


def _polymod(a: list[float], b: list[float]) -> list[float]:
    """Remainder of a / b; deg(b) >= 1 and lead(b) nonzero assumed."""
    r = list(a)
    db = len(b) - 1
    lead = b[db]
    while len(r) - 1 >= db:
        dr = len(r) - 1
        q = r[dr] / lead
        off = dr - db
        for i in range(db):
            r[off + i] -= q * b[i]
        r.pop()
        # drop any new tiny leading coefficients
        m = max((abs(x) for x in r), default=0.0)
        while len(r) > 1 and abs(r[-1]) <= _STRIP_REL * max(m, 1e-300):
            r.pop()
        if len(r) == 1:
            break
    return r


def _sturm_chain(c: list[float]) -> list[list[float]]:
    p0 = _normalize(_strip(c))
    chain = [p0]
    if len(p0) - 1 == 0:
        return chain
    p1 = _strip([p0[i] * i for i in range(1, len(p0))])
    chain.append(_normalize(p1))
    while len(chain[-1]) - 1 > 0:
        rem = _polymod(chain[-2], chain[-1])
        m = max(abs(x) for x in rem)
        if m < _CHAIN_STOP_REL:
            break  # gcd reached up to noise
        chain.append([-x / m for x in rem])
    return chain


def _sign_variations(chain: list[list[float]], x: float) -> int:
    signs = []
    for c in chain:
        val = 0.0
        mag = 0.0
        ax = abs(x)
        for coef in reversed(c):
            val = val * x + coef
            mag = mag * ax + abs(coef)
        if abs(val) > _SIGN_ZERO_REL * max(mag, 1e-300):
            signs.append(1.0 if val > 0 else -1.0)
    return sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0)


def _count_roots_pm1(c: list[float]) -> int:
    """Distinct real roots of the polynomial in the interval (-1, 1].

    Zeros of chain values are skipped when counting sign variations, which
    realizes the half-open convention: a root at the left endpoint is
    excluded, one at the right endpoint included.
    """
    chain = _sturm_chain(c)
    deg = len(chain[0]) - 1
    if deg == 0:
        return 0
    count = _sign_variations(chain, -1.0) - _sign_variations(chain, 1.0)
    return max(0, min(count, deg))


def _shift_scale(c: np.ndarray, mid: float, half: float) -> list[float]:
    """Coefficients of t -> q(mid + half*t)."""
    comp = np.polynomial.polynomial.Polynomial(c)(
        np.polynomial.polynomial.Polynomial([mid, half])
    )
    return list(np.atleast_1d(comp.coef))


def count_distinct_roots(q: UniPoly, a: float, b: float) -> int:
    """Distinct real roots of q in the half-open interval (a, b].

    Sturm semantics: a root of multiplicity m counts once.  Raises
    LineContained when q is identically zero relative to ``ref_scale``.
    """
    if not a < b:
        raise ValueError("need a < b")
    c = np.asarray(q.coeffs, dtype=np.float64)
    ref = q.ref_scale if q.ref_scale is not None else float(np.max(np.abs(c)))
    if float(np.max(np.abs(c))) <= LINE_CONTAINED_REL * max(ref, 1e-300):
        raise LineContained("restriction vanished identically")
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    return _count_roots_pm1(_shift_scale(c, mid, half))


LINE_CONTAINED_SENTINEL = -1


class RotatedFiberEvaluator:
    """Fast distinct-root counts along many parallel fibers.

    The polynomial is interpolated once onto a tensor Chebyshev grid in an
    orthonormal frame whose last axis is the fiber direction; the tensor is
    exact because the per-axis degree never exceeds d.  Each fiber then
    costs one small matmul and a Sturm count instead of d+1 fresh
    multivariate evaluations.

    ``frame`` has the n-1 transverse axes as its first columns and the
    fiber direction last; ``center``/``scales`` normalize coordinates so
    the grid matches the data range.
    """

    def __init__(self, P: MultiPoly, center, frame, scales):
        self.P = P
        self.n = P.n
        self.d = P.d
        self.center = np.asarray(center, dtype=np.float64)
        self.frame = np.asarray(frame, dtype=np.float64)
        self.scales = np.asarray(scales, dtype=np.float64)
        d, n = self.d, self.n
        nodes, Vinv = _cheb_nodes_and_inverse(d)
        grids = np.meshgrid(*([nodes] * n), indexing="ij")
        local = np.stack([g.ravel() for g in grids], axis=1) * self.scales[None, :]
        pts = self.center[None, :] + local @ self.frame.T
        vals = P.evaluate(pts).reshape((d + 1,) * n)
        for ax in range(n):
            vals = np.tensordot(Vinv, vals, axes=(1, ax))
            vals = np.moveaxis(vals, 0, ax)
        # flatten transverse axes; rows indexed by tensor powers of y
        self.coeff = np.ascontiguousarray(vals.reshape((d + 1) ** (n - 1), d + 1))
        self.zero_cut = LINE_CONTAINED_REL * max(float(np.max(np.abs(self.coeff))), 1e-300)

    def _transverse_monomials(self, y_norm: np.ndarray) -> np.ndarray:
        """Full tensor powers of the normalized transverse coordinates."""
        m = y_norm.shape[0]
        d, n = self.d, self.n
        out = np.ones((m, 1))
        for j in range(n - 1):
            p = np.empty((m, d + 1))
            p[:, 0] = 1.0
            for k in range(1, d + 1):
                p[:, k] = p[:, k - 1] * y_norm[:, j]
            out = (out[:, :, None] * p[:, None, :]).reshape(m, -1)
        return out

    def count(self, bases: np.ndarray, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
        """Root counts on (t0, t1] along fibers bases[i] + t*direction."""
        bases = np.atleast_2d(np.asarray(bases, dtype=np.float64))
        t0 = np.asarray(t0, dtype=np.float64)
        t1 = np.asarray(t1, dtype=np.float64)
        m = bases.shape[0]
        d = self.d
        local = (bases - self.center[None, :]) @ self.frame
        y_norm = local[:, : self.n - 1] / self.scales[None, : self.n - 1]
        s_base = local[:, self.n - 1]
        rows_1d = self._transverse_monomials(y_norm) @ self.coeff  # (m, d+1)
        # evaluate the 1-d restrictions at Chebyshev nodes of each interval
        nodes, Vinv = _cheb_nodes_and_inverse(d)
        mid = (t0 + t1) / 2.0
        half = (t1 - t0) / 2.0
        s_nodes = (s_base[:, None] + mid[:, None] + half[:, None] * nodes[None, :]) / (
            self.scales[self.n - 1]
        )
        vals = np.zeros_like(s_nodes)
        for k in range(d, -1, -1):
            vals = vals * s_nodes + rows_1d[:, k][:, None]
        coeff_rows = vals @ Vinv.T
        contained = np.max(np.abs(coeff_rows), axis=1) <= self.zero_cut
        out = np.full(m, LINE_CONTAINED_SENTINEL, dtype=np.int64)
        live = ~contained
        if live.any():
            if _sturmjit.batch_count is not None:
                out[live] = _sturmjit.batch_count(np.ascontiguousarray(coeff_rows[live]))
            else:
                out[live] = [_count_roots_pm1(list(row)) for row in coeff_rows[live]]
        return out


def count_roots_batch(
    P: MultiPoly,
    bases: np.ndarray,
    u: np.ndarray,
    t0: np.ndarray,
    t1: np.ndarray,
) -> np.ndarray:
    """Distinct-root counts of P along fibers bases[i] + t*u for t in (t0, t1].

    Returns int counts with LINE_CONTAINED_SENTINEL marking fibers whose
    restriction vanished identically.  Each fiber is re-centered so the
    Sturm kernel works on [-1, 1].
    """
    bases = np.atleast_2d(np.asarray(bases, dtype=np.float64))
    t0 = np.asarray(t0, dtype=np.float64)
    t1 = np.asarray(t1, dtype=np.float64)
    mids = bases + ((t0 + t1) / 2.0)[:, None] * u[None, :]
    halves = (t1 - t0) / 2.0
    # restrict on the re-centered fiber: s in [-1, 1] maps to t in [t0, t1]
    scaled_u = halves[:, None] * u[None, :]
    t, Vinv = _cheb_nodes_and_inverse(P.d)
    m = bases.shape[0]
    pts = mids[:, None, :] + t[None, :, None] * scaled_u[:, None, :]
    vals = P.evaluate(pts.reshape(m * (P.d + 1), P.n)).reshape(m, P.d + 1)
    coeff_rows = vals @ Vinv.T

    zero_cut = LINE_CONTAINED_REL * max(P.max_coeff, 1e-300)
    contained = np.max(np.abs(coeff_rows), axis=1) <= zero_cut
    out = np.full(m, LINE_CONTAINED_SENTINEL, dtype=np.int64)
    live = ~contained
    if live.any():
        if _sturmjit.batch_count is not None:
            out[live] = _sturmjit.batch_count(np.ascontiguousarray(coeff_rows[live]))
        else:
            rows = coeff_rows[live].tolist()
            out[live] = [_count_roots_pm1(row) for row in rows]
    return out
