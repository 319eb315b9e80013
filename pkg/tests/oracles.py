"""Test-only reference computations, kept independent of the package's
solvers (no Wolfe iterations, no backward-induction fold, no dual QP)."""

import itertools

import numpy as np


def recursive_upper(seq, func, prefix=()):
    """Independence equation applied front to back, one coordinate at a time."""
    i = len(prefix)
    if i == seq.n:
        return func(np.array(prefix))
    mg = seq.marginals[i]
    inner = [recursive_upper(seq, func, prefix + (tuple(x),)) for x in mg.support]
    return max(sum(p * v for p, v in zip(g, inner)) for g in mg.generators)


def segment_distance(a, b, x):
    ab = b - a
    denom = ab @ ab
    t = 0.0 if denom == 0 else float(np.clip((x - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab - x))


def in_some_triangle(V, x):
    for i, j, k in itertools.combinations(range(len(V)), 3):
        M = np.column_stack([V[j] - V[i], V[k] - V[i]])
        if abs(np.linalg.det(M)) < 1e-14:
            continue
        lam = np.linalg.solve(M, x - V[i])
        if lam.min() >= -1e-13 and lam.sum() <= 1 + 1e-13:
            return True
    return False


def planar_distance(V, x):
    """Distance from ``x`` to conv(V) in d <= 2.

    The hull boundary is a union of segments between vertex pairs and the
    hull itself a union of vertex triangles, so enumerating both is exact.
    """
    V = np.asarray(V, dtype=float)
    x = np.asarray(x, dtype=float)
    if V.shape[1] == 1:
        return float(max(V.min() - x[0], x[0] - V.max(), 0.0))
    if in_some_triangle(V, x):
        return 0.0
    return min(segment_distance(V[i], V[j], x) for i in range(len(V)) for j in range(i, len(V)))


def grid_distance(V, x, steps=60):
    """Dense convex-combination grid (coarse cross-check only)."""
    V = np.asarray(V, dtype=float)
    k = len(V)
    best = np.inf
    for combo in itertools.product(range(steps + 1), repeat=k - 1):
        if sum(combo) > steps:
            continue
        w = np.array(list(combo) + [steps - sum(combo)]) / steps
        best = min(best, float(np.linalg.norm(w @ V - x)))
    return best


def ternary_min(f, lo, hi, iters=200):
    for _ in range(iters):
        a = lo + (hi - lo) / 3
        b = hi - (hi - lo) / 3
        if f(a) <= f(b):
            hi = b
        else:
            lo = a
    x = 0.5 * (lo + hi)
    return f(x), x


def worst_second_moment(mg, theta):
    return max(float(g @ np.sum((mg.support - theta) ** 2, axis=1)) for g in mg.generators)


def sigma_grid_oracle(mg, steps=200):
    """``min_theta max_k E_k|X - theta|^2`` over the hull of generator means.

    theta is parametrized by weights on (at most three) generator means;
    a dense grid locates the basin and nested ternary search refines it
    (the objective is convex in the weights, and so is its partial minimum).
    """
    mu = mg.generators @ mg.support
    K = len(mu)
    if K == 1:
        return worst_second_moment(mg, mu[0])
    if K == 2:
        f = lambda t: worst_second_moment(mg, (1 - t) * mu[0] + t * mu[1])
        grid = min(f(t) for t in np.linspace(0, 1, steps + 1))
        return min(grid, ternary_min(f, 0.0, 1.0)[0])
    assert K == 3

    def h(a, b):
        return worst_second_moment(mg, a * mu[0] + b * mu[1] + (1 - a - b) * mu[2])

    def inner(a):
        return ternary_min(lambda b: h(a, b), 0.0, 1.0 - a, iters=100)[0]

    coarse = min(h(a, b) for a in np.linspace(0, 1, 41) for b in np.linspace(0, 1 - a, 41))
    return min(coarse, ternary_min(inner, 0.0, 1.0, iters=100)[0])
