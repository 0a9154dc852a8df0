"""Convex-body oracles.

Every body exposes membership, Euclidean projection, gauge, support
function, chord intersection and distance to the boundary.  All oracles
accept a single point of shape ``(n,)`` or a batch of shape ``(..., n)``
and return results of the matching batch shape, so that many replica
chains can be advanced together.

Bodies must contain the origin in their interior.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

TOL_PROJ_EXACT = 1e-9
TOL_PROJ = 1e-7
MAX_PROJ_ITERS = 10_000
TOL_MEM = 1e-12
TOL_CHORD = 1e-10
SUPP_ITERS = 500
# active-set guesses tried on the multipliers of a running Dykstra projection
KKT_NEAR = 1e-3
KKT_MAX_ROWS = 8
KKT_MAX_TRIES = 200


class ProjectionError(RuntimeError):
    """Raised when an iterative projection fails to converge.

    ``residual`` is the larger of the last sweep's change (iterate and
    correction vectors) and the remaining constraint violation, i.e. the
    quantity that failed to reach tolerance.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = float(residual)


class ChordError(ValueError):
    """Raised when a chord is requested through a non-interior point."""


@dataclass(frozen=True)
class Chord:
    """Parameter interval ``{t : x + t d in K}``.

    For batched queries ``t_min`` and ``t_max`` are arrays.
    """

    t_min: float | np.ndarray
    t_max: float | np.ndarray

    @property
    def length(self):
        return self.t_max - self.t_min


def _batch(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {x.shape}")
    return x.reshape(-1, n), x.shape[:-1]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


class ConvexBody:
    """Base class for convex bodies containing the origin.

    Subclasses implement the oracles on 2-d batches (``_project``,
    ``_residual``, ``_gauge``, ``_support``, ``_chord``, ``_depth``); the
    public methods take care of reshaping.
    """

    #: whether ``project`` is a closed form (tolerance TOL_PROJ_EXACT)
    exact = True
    #: whether ``support`` is a closed form
    support_is_exact = True
    #: projected-ascent step for the support, in units of the circumradius
    ascent_step = 4.0

    dimension: int
    inradius: float
    circumradius: float

    @property
    def projection_tol(self):
        return TOL_PROJ_EXACT if self.exact else TOL_PROJ

    def residual(self, x):
        """Largest constraint violation at ``x`` (non-positive inside K)."""
        xb, shape = _batch(x, self.dimension)
        return self._residual(xb).reshape(shape)

    def membership(self, x, tol=TOL_MEM):
        xb, shape = _batch(x, self.dimension)
        out = self._residual(xb) <= tol
        return out.reshape(shape) if shape else bool(out[0])

    def project(self, x):
        """Euclidean projection onto the body."""
        x = np.asarray(x, dtype=float)
        xb, _ = _batch(x, self.dimension)
        if not np.all(np.isfinite(xb)):
            raise ValueError("cannot project non-finite point")
        return self._project(xb).reshape(x.shape)

    def gauge(self, x):
        """Minkowski gauge ``inf{t >= 0 : x in tK}``."""
        xb, shape = _batch(x, self.dimension)
        out = self._gauge(xb)
        return out.reshape(shape) if shape else float(out[0])

    def support(self, y):
        """Support function ``sup{<x, y> : x in K}``."""
        yb, shape = _batch(y, self.dimension)
        out = self._support(yb)
        return out.reshape(shape) if shape else float(out[0])

    def chord(self, x, d):
        """Intersection of the line ``x + t d`` with the body.

        ``d`` must be a unit vector and ``x`` an interior point.
        """
        xb, shape = _batch(x, self.dimension)
        db, _ = _batch(np.broadcast_to(d, np.shape(x)), self.dimension)
        lo, hi = self._chord(xb, db)
        if np.any((np.abs(lo) <= TOL_CHORD) & (np.abs(hi) <= TOL_CHORD)):
            raise ChordError("chord requested through a point that is not interior")
        if shape:
            return Chord(lo.reshape(shape), hi.reshape(shape))
        return Chord(float(lo[0]), float(hi[0]))

    def distance_to_boundary(self, x):
        """Distance from a point of K to the boundary of K."""
        xb, shape = _batch(x, self.dimension)
        out = self._depth(xb)
        return out.reshape(shape) if shape else float(out[0])

    def bounding_box(self):
        """Axis-aligned box ``(lower, upper)`` containing the body."""
        raise NotImplementedError

    def _maximizer(self, y):
        """A point of K attaining ``support(y)``, or None without a closed form."""
        return None

    # Fallback support through projected ascent: fixed points of
    # x -> P(x + s u) are exactly the maximizers of <., u> over K.
    def _support_ascent(self, y):
        norms = np.linalg.norm(y, axis=1)
        out = np.zeros(len(y))
        nz = norms > 0
        if not np.any(nz):
            return out
        u = y[nz] / norms[nz, None]
        step = self.ascent_step * self.circumradius
        x = np.zeros_like(u)
        for _ in range(SUPP_ITERS):
            x_new = self._project(x + step * u)
            done = np.max(np.abs(x_new - x)) <= TOL_PROJ
            x = x_new
            if done:
                break
        out[nz] = np.einsum("ij,ij->i", x, y[nz])
        return out


class Ball(ConvexBody):
    """Euclidean ball of the given radius centred at the origin."""

    def __init__(self, radius, dimension):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.dimension = int(dimension)
        self.inradius = self.radius
        self.circumradius = self.radius

    def __repr__(self):
        return f"Ball(radius={self.radius}, dimension={self.dimension})"

    def _residual(self, x):
        return np.linalg.norm(x, axis=1) - self.radius

    def _project(self, x):
        norms = np.linalg.norm(x, axis=1)
        scale = np.where(norms > self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        out = x * scale[:, None]
        # interior points are returned bit-for-bit
        inside = norms <= self.radius
        out[inside] = x[inside]
        return out

    def _gauge(self, x):
        return np.linalg.norm(x, axis=1) / self.radius

    def _support(self, y):
        return self.radius * np.linalg.norm(y, axis=1)

    def _maximizer(self, y):
        norms = np.linalg.norm(y, axis=1)
        return self.radius * y / np.where(norms > 0, norms, 1.0)[:, None]

    def _chord(self, x, d):
        xd = np.einsum("ij,ij->i", x, d)
        disc = xd**2 - np.einsum("ij,ij->i", x, x) + self.radius**2
        root = np.sqrt(np.maximum(disc, 0.0))
        return -xd - root, -xd + root

    def _depth(self, x):
        return self.radius - np.linalg.norm(x, axis=1)

    def bounding_box(self):
        r = np.full(self.dimension, self.radius)
        return -r, r


class AxisBox(ConvexBody):
    """Axis-aligned box ``lower <= x <= upper`` with ``lower < 0 < upper``."""

    def __init__(self, lower, upper):
        self.lower = _frozen(lower)
        self.upper = _frozen(upper)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if np.any(self.lower >= 0) or np.any(self.upper <= 0):
            raise ValueError("box must contain the origin in its interior")
        self.dimension = len(self.lower)
        self.inradius = float(np.min(np.minimum(-self.lower, self.upper)))
        self.circumradius = float(np.linalg.norm(np.maximum(-self.lower, self.upper)))

    @classmethod
    def cube(cls, n, half_width=1.0):
        return cls(np.full(n, -half_width), np.full(n, half_width))

    def __repr__(self):
        return f"AxisBox(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def _residual(self, x):
        return np.max(np.maximum(self.lower - x, x - self.upper), axis=1)

    def _project(self, x):
        return np.clip(x, self.lower, self.upper)

    def _gauge(self, x):
        return np.max(np.maximum(x / self.upper, x / self.lower), axis=1)

    def _support(self, y):
        return np.sum(np.maximum(y * self.upper, y * self.lower), axis=1)

    def _maximizer(self, y):
        return np.where(y > 0, self.upper, np.where(y < 0, self.lower, 0.0))

    def _chord(self, x, d):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (self.lower - x) / d
            b = (self.upper - x) / d
        lo = np.where(d != 0, np.minimum(a, b), -np.inf)
        hi = np.where(d != 0, np.maximum(a, b), np.inf)
        return np.max(lo, axis=1), np.min(hi, axis=1)

    def _depth(self, x):
        return np.min(np.minimum(x - self.lower, self.upper - x), axis=1)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()


class Polytope(ConvexBody):
    """H-polytope ``{x : A x <= b}`` with ``b > 0``.

    Projection runs Dykstra's algorithm over the halfspaces.  Cyclic
    Dykstra crawls near sharp or degenerate vertices, so the multipliers it
    has found are checked against the KKT conditions on a doubling schedule
    and a certified exact point is returned as soon as one exists.  The
    circumradius is computed from the LP bounding box unless given.
    """

    exact = False
    support_is_exact = False

    def __init__(self, A, b, circumradius=None):
        self.A = _frozen(np.atleast_2d(A))
        self.b = _frozen(np.atleast_1d(b))
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b have inconsistent shapes")
        if np.any(self.b <= 0):
            raise ValueError("polytope must contain the origin in its interior (b > 0)")
        self.dimension = self.A.shape[1]
        self._row_norms = np.linalg.norm(self.A, axis=1)
        self._row_sq = self._row_norms**2
        self.inradius = float(np.min(self.b / self._row_norms))
        self._box = None
        if circumradius is None:
            lo, hi = self.bounding_box()
            circumradius = float(np.linalg.norm(np.maximum(-lo, hi)))
        self.circumradius = float(circumradius)

    def __repr__(self):
        return f"Polytope(m={self.A.shape[0]}, n={self.dimension})"

    def _residual(self, x):
        return np.max((x @ self.A.T - self.b) / self._row_norms, axis=1)

    def _kkt_finish(self, x, corr, cur=None):
        """Exact projections certified from the multipliers Dykstra has found.

        Dykstra keeps ``x - cur = sum_i corr_i`` with ``corr_i = lam_i A_i``.
        Rows with ``lam_i > 0`` or almost no slack are candidates for the
        active set.  Projecting onto the affine hull of a subset of them is
        the projection onto K whenever its multipliers are non-negative and
        the point is feasible (KKT), so every accepted point is exact.
        Returns the accepted mask and the points.
        """
        lam = np.einsum("mkn,mn->km", corr, self.A) / self._row_sq
        near = np.zeros_like(lam, dtype=bool)
        if cur is not None:
            near = (self.b - cur @ self.A.T) / self._row_norms <= KKT_NEAR * self.circumradius
        ok = np.zeros(len(x), dtype=bool)
        out = np.empty_like(x)
        n = self.dimension
        for j in range(len(x)):
            active = np.flatnonzero(lam[j] > 0)
            if not len(active):
                continue
            z = None
            if len(active) <= n:
                # drop rows whose multipliers come out negative, one at a time
                rows = list(active)
                while rows:
                    z, mu = self._affine_candidate(x[j], rows)
                    if z is not None or mu is None or np.all(mu >= 0):
                        break
                    rows.pop(int(np.argmin(mu)))
            else:
                # degenerate vertex: more rows than the dimension carry
                # multipliers, and some subset of the candidates is the
                # right one
                cand = np.flatnonzero((lam[j] > 0) | near[j])
                cand = cand[np.argsort(-lam[j, cand])][:KKT_MAX_ROWS]
                subsets = (list(c) for size in range(min(n, len(cand)), 0, -1)
                           for c in itertools.combinations(cand, size))
                for rows in itertools.islice(subsets, KKT_MAX_TRIES):
                    z, _ = self._affine_candidate(x[j], rows)
                    if z is not None:
                        break
            if z is not None:
                ok[j] = True
                out[j] = z
        return ok, out

    def _affine_candidate(self, x, rows):
        """Projection onto ``{A_rows z = b_rows}`` if it passes the KKT check.

        Returns ``(z, mu)``; ``z`` is None when the check fails and ``mu`` is
        None when the rows are linearly dependent.
        """
        a = self.A[rows]
        try:
            mu = np.linalg.solve(a @ a.T, a @ x - self.b[rows])
        except np.linalg.LinAlgError:
            return None, None
        if np.any(mu < 0):
            return None, mu
        z = x - a.T @ mu
        # x - z = a^T mu with mu >= 0, the rows tight at z and z feasible:
        # the KKT conditions of the projection, so z is exact
        if np.max(np.abs(a @ z - self.b[rows]) / self._row_norms[rows]) > TOL_PROJ_EXACT:
            return None, mu
        if self._residual(z[None])[0] > TOL_PROJ_EXACT:
            return None, mu
        return z, mu

    def _project(self, x):
        out = x.copy()
        bad = np.flatnonzero(self._residual(x) > 0)
        if not len(bad):
            return out
        z = x[bad]
        # a single-halfspace projection that lands in K is the projection onto
        # K, since K lies inside that halfspace; only the rest need Dykstra
        viol = np.maximum(z @ self.A.T - self.b, 0.0) / self._row_sq
        cand = z[:, None, :] - viol[:, :, None] * self.A[None]
        fits = (viol > 0) & (np.max(cand @ self.A.T - self.b, axis=2) <= 0)
        ok = np.any(fits, axis=1)
        out[bad[ok]] = cand[ok, np.argmax(fits[ok], axis=1)]
        bad, z = bad[~ok], z[~ok]
        if not len(bad):
            return out
        corr = np.zeros((len(self.b),) + z.shape)
        cur = z.copy()
        for sweep in range(1, MAX_PROJ_ITERS + 1):
            prev, prev_corr = cur.copy(), corr.copy()
            for i in range(len(self.b)):
                v = cur + corr[i]
                viol = np.maximum(v @ self.A[i] - self.b[i], 0.0) / self._row_sq[i]
                cur = v - viol[:, None] * self.A[i]
                corr[i] = v - cur
            # the iterate can stall for a whole sweep while the corrections
            # still move, so both must settle
            change = max(np.max(np.abs(cur - prev)), np.max(np.abs(corr - prev_corr)))
            if change <= TOL_PROJ and np.max(self._residual(cur)) <= TOL_PROJ:
                out[bad] = cur
                return out
            if sweep & (sweep - 1) == 0:
                hit, pts = self._kkt_finish(z, corr, cur)
                out[bad[hit]] = pts[hit]
                if np.all(hit):
                    return out
                keep = ~hit
                bad, z, cur, corr = bad[keep], z[keep], cur[keep], corr[:, keep]
        raise ProjectionError("Dykstra projection onto polytope did not converge",
                              max(change, np.max(self._residual(cur))))

    def _gauge(self, x):
        return np.maximum(np.max(x @ self.A.T / self.b, axis=1), 0.0)

    def _support(self, y):
        return self._support_ascent(y)

    def _chord(self, x, d):
        slack = self.b - x @ self.A.T
        ad = d @ self.A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = slack / ad
        hi = np.min(np.where(ad > 0, t, np.inf), axis=1)
        lo = np.max(np.where(ad < 0, t, -np.inf), axis=1)
        return lo, hi

    def _depth(self, x):
        return np.min((self.b - x @ self.A.T) / self._row_norms, axis=1)

    def bounding_box(self):
        if self._box is None:
            n = self.dimension
            lo, hi = np.empty(n), np.empty(n)
            for i in range(n):
                c = np.zeros(n)
                c[i] = 1.0
                for sign, dest in ((1.0, lo), (-1.0, hi)):
                    res = linprog(sign * c, A_ub=self.A, b_ub=self.b, bounds=(None, None))
                    if res.status != 0:
                        raise ValueError("polytope is unbounded or infeasible")
                    dest[i] = res.x[i]
            self._box = (lo, hi)
        return self._box[0].copy(), self._box[1].copy()


class Intersection(ConvexBody):
    """Intersection of two bodies; projection by Dykstra's algorithm."""

    exact = False
    support_is_exact = False
    # curved pieces: a shorter step keeps the projections near K and cheap
    ascent_step = 1.0

    def __init__(self, first, second):
        if first.dimension != second.dimension:
            raise ValueError("bodies have different dimensions")
        self.first = first
        self.second = second
        self.dimension = first.dimension
        # both pieces contain origin-centred balls
        self.inradius = min(first.inradius, second.inradius)
        self.circumradius = min(first.circumradius, second.circumradius)

    def __repr__(self):
        return f"Intersection({self.first!r}, {self.second!r})"

    def _residual(self, x):
        return np.maximum(self.first._residual(x), self.second._residual(x))

    def _project(self, x):
        out = x.copy()
        bad = self._residual(x) > 0
        if not np.any(bad):
            return out
        # the projection onto one piece is the projection onto K whenever it
        # lies in the other piece, since K is contained in each piece
        idx = np.flatnonzero(bad)
        for piece, other in ((self.first, self.second), (self.second, self.first)):
            pts = piece._project(x[idx])
            fits = other._residual(pts) <= 0
            out[idx[fits]] = pts[fits]
            idx = idx[~fits]
            if not len(idx):
                return out
        bad = np.zeros(len(x), dtype=bool)
        bad[idx] = True
        cur = x[bad]
        p = np.zeros_like(cur)
        q = np.zeros_like(cur)
        for _ in range(MAX_PROJ_ITERS):
            y = self.first._project(cur + p)
            p_new = cur + p - y
            nxt = self.second._project(y + q)
            q_new = y + q - nxt
            change = max(np.max(np.abs(nxt - cur)), np.max(np.abs(p_new - p)),
                         np.max(np.abs(q_new - q)))
            p, q = p_new, q_new
            gap = np.max(np.abs(nxt - y))
            cur = nxt
            if change <= TOL_PROJ and gap <= TOL_PROJ:
                out[bad] = cur
                return out
        raise ProjectionError("Dykstra projection onto intersection did not converge",
                              max(change, gap))

    def _gauge(self, x):
        return np.maximum(self.first._gauge(x), self.second._gauge(x))

    def _support(self, y):
        # a maximizer of one piece that lies in the other piece maximizes over K
        out = np.empty(len(y))
        todo = np.ones(len(y), dtype=bool)
        for piece, other in ((self.first, self.second), (self.second, self.first)):
            arg = piece._maximizer(y[todo])
            if arg is None:
                continue
            fits = other._residual(arg) <= 0
            rows = np.flatnonzero(todo)[fits]
            out[rows] = piece._support(y[rows])
            todo[rows] = False
        if np.any(todo):
            out[todo] = self._support_ascent(y[todo])
        return out

    def _chord(self, x, d):
        lo1, hi1 = self.first._chord(x, d)
        lo2, hi2 = self.second._chord(x, d)
        return np.maximum(lo1, lo2), np.minimum(hi1, hi2)

    def _depth(self, x):
        return np.minimum(self.first._depth(x), self.second._depth(x))

    def bounding_box(self):
        lo1, hi1 = self.first.bounding_box()
        lo2, hi2 = self.second.bounding_box()
        return np.maximum(lo1, lo2), np.minimum(hi1, hi2)


def gauge_by_bisection(body, x, tol=1e-12):
    """Gauge from the membership oracle alone (slow; used as a cross-check)."""
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 0.0
    lo, hi = 0.0, 1.0
    while not body.membership(x / hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if body.membership(x / mid):
            hi = mid
        else:
            lo = mid
    return hi


def check_radii(body, rng, count=32):
    """Spot-check the declared inradius and circumradius."""
    n = body.dimension
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    inner = body.membership(u * body.inradius * (1 - 1e-9))
    x = rng.standard_normal((count, n)) * body.circumradius
    outer = body.gauge(x) >= np.linalg.norm(x, axis=1) / body.circumradius * (1 - 1e-12)
    return bool(np.all(inner) and np.all(outer))


def box_ball(n):
    """``[-1, 1]^n`` intersected with the ball of radius ``sqrt(n)/2``."""
    return Intersection(AxisBox.cube(n), Ball(np.sqrt(n) / 2, n))
