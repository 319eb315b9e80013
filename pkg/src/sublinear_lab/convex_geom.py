"""Vertex-represented convex polytopes.

Everything here works from the vertex list alone: support values are a
maximum over vertices, redundancy and membership are decided by projecting
onto the hull, and Minkowski averages are filtered vertex sums.  No facet
description is ever computed, so degenerate (flat, collinear, single point)
polytopes need no special treatment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sublinear_lab.errors import BudgetExceededError, ConvergenceError, InvalidInputError

REDUNDANCY_TOL = 1e-9
MEMBERSHIP_TOL = 1e-9
CERTIFICATE_TOL = 1e-8
GAP_TOL = 1e-12
MAX_ITER = 100_000
DEFAULT_COMBINATION_BUDGET = 1_000_000


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of ``vertices`` (shape (k, d)); build with :func:`extreme_filter`."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0:
            raise InvalidInputError("a polytope needs at least one vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def d(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        return project(self, x).distance <= tol

    def same_set(self, other: "Polytope", tol: float = REDUNDANCY_TOL) -> bool:
        """Hull equality, checked by mutual vertex membership."""
        return (all(other.contains(v, tol) for v in self.vertices)
                and all(self.contains(v, tol) for v in other.vertices))


@dataclass(frozen=True)
class Projection:
    """Nearest point of a polytope to a query point.

    ``coefficients`` are convex weights over the polytope's vertices that
    reproduce ``point``; ``gap`` is the largest ``<x - point, v - point>``
    over vertices, which is <= 0 at the exact optimum.
    """

    point: np.ndarray
    distance: float
    coefficients: np.ndarray
    gap: float
    iterations: int


def support_value(poly: Polytope, p, return_index: bool = False):
    """``max_v <p, v>`` over the vertices (lowest attaining index on ties)."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape != (poly.d,):
        raise InvalidInputError(f"direction has dimension {p.size}, polytope has {poly.d}")
    scores = poly.vertices @ p
    j = int(np.argmax(scores))
    return (float(scores[j]), j) if return_index else float(scores[j])


def _affine_minimizer(Q):
    """Weights ``a`` with ``sum(a) == 1`` minimizing ``|Q.T @ a|``."""
    k = Q.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = Q @ Q.T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


def _pairwise_polish(P, w, max_iter):
    """Pairwise Frank-Wolfe with exact line search on ``min |P.T w|^2``."""
    y = w @ P
    it = 0
    for it in range(1, max_iter + 1):
        dots = P @ y
        s = int(np.argmin(dots))
        active = np.flatnonzero(w > 0)
        a = int(active[np.argmax(dots[active])])
        if dots[a] - dots[s] <= 0.0:
            break
        direction = P[s] - P[a]
        dd = direction @ direction
        if dd == 0.0:
            break
        step = min(w[a], -(y @ direction) / dd)
        if step <= 0.0:
            break
        w[s] += step
        w[a] -= step
        y = w @ P
    return w, it


def _min_norm_weights(P, tol=GAP_TOL, max_iter=MAX_ITER):
    """Wolfe's nearest-point method: convex weights minimizing ``|P.T w|``.

    Returns the full weight vector and the number of major cycles.
    """
    k = P.shape[0]
    sq = np.einsum("ij,ij->i", P, P)
    scale = max(1.0, float(sq.max()))
    S = [int(np.argmin(sq))]
    w = np.array([1.0])
    it = 0
    for it in range(1, max_iter + 1):
        y = w @ P[S]
        dots = P @ y
        j = int(np.argmin(dots))
        if (y @ y) - dots[j] <= tol * scale or j in S:
            break
        S.append(j)
        w = np.append(w, 0.0)
        stalled = False
        for _ in range(len(S) + 1):
            alpha = _affine_minimizer(P[S])
            if np.all(alpha > 0):
                w = alpha
                break
            neg = np.flatnonzero(alpha <= 0)
            denom = w[neg] - alpha[neg]
            ratios = np.where(denom > 0, w[neg] / np.where(denom > 0, denom, 1.0), 0.0)
            theta = float(np.min(ratios))
            drop = int(neg[np.argmin(ratios)])
            if theta == 0.0 and S[drop] == j:
                # the new point cannot enter the corral: numerically converged
                S.pop()
                w = w[:-1]
                stalled = True
                break
            w = theta * alpha + (1 - theta) * w
            keep = [t for t in range(len(S)) if t != drop and w[t] > 0]
            if not keep:
                keep = [int(np.argmax(w))]
            S = [S[t] for t in keep]
            w = w[keep]
            w = w / w.sum()
        if stalled:
            break
    full = np.zeros(k)
    full[S] = w
    return full, it


def project(poly: Polytope, x, max_iter: int = MAX_ITER) -> Projection:
    """Euclidean projection of ``x`` onto ``poly``.

    Raises :class:`ConvergenceError` if the variational-inequality
    certificate ``<x - point, v - point> <= 1e-8`` fails for some vertex.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (poly.d,):
        raise InvalidInputError(f"point has dimension {x.size}, polytope has {poly.d}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("cannot project a non-finite point")
    V = poly.vertices
    if poly.d == 1:
        lo, hi = int(np.argmin(V[:, 0])), int(np.argmax(V[:, 0]))
        w = np.zeros(len(V))
        if x[0] <= V[lo, 0]:
            w[lo] = 1.0
        elif x[0] >= V[hi, 0]:
            w[hi] = 1.0
        else:
            t = (x[0] - V[lo, 0]) / (V[hi, 0] - V[lo, 0])
            w[lo], w[hi] = 1.0 - t, t
        point = np.clip(x, V[lo], V[hi])
        iterations = 0
    else:
        P = V - x
        w, iterations = _min_norm_weights(P, max_iter=max_iter)
        if _gap(P, w) > CERTIFICATE_TOL:
            w, extra = _pairwise_polish(P, w, max_iter)
            iterations += extra
        point = w @ V
    residual = point - x
    gap = float(np.max((V - point) @ (-residual)))
    if gap > CERTIFICATE_TOL:
        raise ConvergenceError("projection certificate not met", gap)
    point.setflags(write=False)
    w.setflags(write=False)
    return Projection(point, float(np.sqrt(residual @ residual)), w, gap, iterations)


def _gap(P, w):
    y = w @ P
    return float(y @ y - np.min(P @ y))


def distance_sq(poly: Polytope, points) -> np.ndarray:
    """Squared distance to ``poly`` for a batch of points (shape (..., d))."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, poly.d)
    if poly.d == 1:
        lo, hi = poly.vertices.min(), poly.vertices.max()
        out = (flat[:, 0] - np.clip(flat[:, 0], lo, hi)) ** 2
    else:
        out = np.array([project(poly, p).distance ** 2 for p in flat])
    return out.reshape(pts.shape[:-1])


def nearest_points(poly: Polytope, points) -> np.ndarray:
    """Projections of a batch of points (shape (..., d)), same shape out."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, poly.d)
    if poly.d == 1:
        out = np.clip(flat, poly.vertices.min(), poly.vertices.max())
    else:
        out = np.array([project(poly, p).point for p in flat])
    return out.reshape(pts.shape)


def extreme_filter(points, tol: float = REDUNDANCY_TOL) -> Polytope:
    """Irredundant vertex set of the hull of ``points``.

    A point is dropped iff it lies within ``tol`` of the hull of the points
    still kept; input order is preserved among survivors.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInputError("extreme_filter needs a nonempty list of points")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("points must be finite")
    if pts.shape[1] == 1:
        lo, hi = pts[:, 0].min(), pts[:, 0].max()
        return Polytope([[lo]] if hi - lo <= tol else [[lo], [hi]])
    _, first = np.unique(pts, axis=0, return_index=True)
    pts = pts[np.sort(first)]
    keep = list(range(len(pts)))
    for i in range(len(pts)):
        others = [j for j in keep if j != i]
        if others and project(Polytope(pts[others]), pts[i]).distance <= tol:
            keep = others
    return Polytope(pts[keep])


def minkowski_average(polys, budget: int = DEFAULT_COMBINATION_BUDGET) -> Polytope:
    """Vertices of ``(1/n)(P_1 + ... + P_n)``.

    Sums are accumulated one polytope at a time and filtered after every
    step, which leaves the hull unchanged and keeps intermediate vertex
    sets small.  ``budget`` bounds each intermediate combination count.
    """
    polys = list(polys)
    if not polys:
        raise InvalidInputError("minkowski_average needs at least one polytope")
    d = polys[0].d
    if any(p.d != d for p in polys):
        raise InvalidInputError("polytopes disagree on dimension")
    n = len(polys)
    acc = polys[0].vertices / n
    for poly in polys[1:]:
        count = len(acc) * len(poly)
        if count > budget:
            raise BudgetExceededError("vertex combination", count, budget)
        sums = (acc[:, None, :] + poly.vertices[None, :, :] / n).reshape(-1, d)
        acc = extreme_filter(sums).vertices
    return extreme_filter(acc)
