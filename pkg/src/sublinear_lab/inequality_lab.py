"""Mean sets, the variance proxy, and the sample-mean inequalities.

For a sequence of independent marginals this module builds

* the mean set of each marginal (hull of generator means), whose support
  function is ``p -> E^[<p, X_i>]``;
* the Minkowski average ``Theta`` of those sets;
* ``sigma_bar^2 = max_i min_{theta in Theta_i} E^[|X_i - theta|^2]``;
* the upper expectation of the squared distance from the sample mean to
  ``Theta`` and its minimax form, and checks both against
  ``sigma_bar^2 / n``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from sublinear_lab.convex_geom import (
    MEMBERSHIP_TOL,
    Polytope,
    distance_sq,
    extreme_filter,
    minkowski_average,
    nearest_points,
    project,
    support_value,
)
from sublinear_lab.credal_core import (
    DEFAULT_PATH_BUDGET,
    Marginal,
    Sequence,
    fold_table,
    upper_expectation,
)
from sublinear_lab.errors import ConvergenceError, InvalidInputError

SIGMA_GAP_TOL = 1e-12
SIGMA_MAX_ITER = 100_000

MINIMAX_NOTE = (
    "xi* is the pointwise projection of the sample mean onto Theta; for any "
    "Theta-valued xi, |mean - xi|^2 >= rho_Theta(mean)^2 path by path, so "
    "the infimum over xi is attained by xi* and equals the distance form."
)


@dataclass(frozen=True)
class Tolerances:
    inequality_rel: float = 1e-8
    identity: float = 1e-12
    minimax: float = 1e-9
    membership: float = MEMBERSHIP_TOL
    support: float = 1e-12
    prop22: float = 1e-12

    def slack(self, bound: float) -> float:
        return self.inequality_rel * (1.0 + abs(bound))


def mean_set(marginal: Marginal) -> Polytope:
    """Hull of the generator means: the set of all ``E_P[X]``."""
    return extreme_filter(marginal.generator_means())


def support_g(marginal: Marginal, p) -> float:
    """``E^[<p, X>]`` computed directly from the marginal."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape != (marginal.d,):
        raise InvalidInputError(f"direction has dimension {p.size}, marginal has {marginal.d}")
    return upper_expectation(marginal, marginal.support @ p)


@dataclass(frozen=True)
class SigmaBarResult:
    per_index: tuple
    value: float
    minimizers: tuple
    iterations: tuple
    residuals: tuple


def _worst_second_moment(theta, means, moments):
    """``max_k E_k|X - theta|^2``."""
    return float(np.max(moments - 2.0 * means @ theta) + theta @ theta)


def _active_set_refine(lam, active, mu, s):
    """Exact dual optimum on the face spanned by ``active``, if it stays feasible."""
    k = len(active)
    M = mu[active]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * M @ M.T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.append(s[active], 1.0)
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
    if np.any(sol < 0):
        return lam, lam @ mu
    trial = np.zeros_like(lam)
    trial[active] = sol / sol.sum()
    old_t, new_t = lam @ mu, trial @ mu
    if s @ trial - new_t @ new_t >= s @ lam - old_t @ old_t:
        return trial, new_t
    return lam, old_t


def min_worst_second_moment(marginal: Marginal, tol: float = SIGMA_GAP_TOL, max_iter: int = SIGMA_MAX_ITER):
    """``min_{theta in Theta} max_k E_k|X - theta|^2``.

    Solved through the concave dual ``max_lambda sum_k lambda_k s_k -
    |sum_k lambda_k mu_k|^2`` over generator weights (the worst variance
    over the credal set), with pairwise conditional-gradient steps and exact
    line search.  The primal point ``theta = sum_k lambda_k mu_k`` always
    lies in Theta, and primal minus dual is a certified optimality gap.

    Returns ``(value, theta, iterations, gap)``.
    """
    mu = marginal.generator_means()
    s = marginal.generator_second_moments()
    K = len(s)
    scale = max(1.0, float(np.max(np.abs(s))))

    starts = [np.eye(K)[k] for k in range(K)] + [np.full(K, 1.0 / K)]
    lam = min(starts, key=lambda l: _worst_second_moment(l @ mu, mu, s))
    theta = lam @ mu
    gap = np.inf
    it = 0
    for it in range(max_iter + 1):
        grad = 2.0 * mu @ theta - s
        primal = float(np.max(-grad) + theta @ theta)
        dual = float(s @ lam - theta @ theta)
        gap = primal - dual
        if gap <= tol * scale:
            break
        active = np.flatnonzero(lam > 0)
        if it % 25 == 24:
            lam, theta = _active_set_refine(lam, active, mu, s)
            continue
        fw = int(np.argmin(grad))
        away = int(active[np.argmax(grad[active])])
        u = mu[fw] - mu[away]
        uu = float(u @ u)
        slope = float(grad[fw] - grad[away])
        if slope >= 0.0:
            break
        step = lam[away] if uu == 0.0 else min(lam[away], -slope / (2.0 * uu))
        lam[fw] += step
        lam[away] -= step
        if lam[away] < 0.0:
            lam[away] = 0.0
        theta = lam @ mu
    else:
        raise ConvergenceError("variance-proxy solver hit the iteration cap", gap)
    value = _worst_second_moment(theta, mu, s)
    if gap > 1e-9 * scale:
        raise ConvergenceError("variance-proxy solver stalled", gap)
    return value, theta, it, max(gap, 0.0)


def sigma_bar_sq(seq: Sequence) -> SigmaBarResult:
    """Variance proxy: max over coordinates of the minimal worst second moment."""
    cache = {}
    per, mins, iters, res = [], [], [], []
    for mg in seq.marginals:
        key = id(mg)
        if key not in cache:
            cache[key] = min_worst_second_moment(mg)
        v, th, it, gap = cache[key]
        per.append(max(v, 0.0))
        mins.append(th)
        iters.append(it)
        res.append(gap)
    return SigmaBarResult(tuple(per), max(per), tuple(mins), tuple(iters), tuple(res))


def average_mean_set(seq: Sequence, mean_sets=None) -> Polytope:
    """``Theta``: Minkowski average of the per-coordinate mean sets."""
    if mean_sets is None:
        mean_sets = [mean_set(mg) for mg in seq.marginals]
    return minkowski_average(mean_sets)


def _unique_rows(points, decimals=12):
    flat = points.reshape(-1, points.shape[-1])
    _, first, inverse = np.unique(np.round(flat, decimals), axis=0, return_index=True, return_inverse=True)
    return flat[first], inverse.reshape(-1)


def distance_table(seq: Sequence, theta: Polytope) -> np.ndarray:
    """``rho_Theta(sample mean)^2`` at every path."""
    means = seq.sample_mean()
    if seq.d == 1:
        return distance_sq(theta, means)
    reps, inverse = _unique_rows(means)
    return distance_sq(theta, reps)[inverse].reshape(seq.shape)


def projection_table(seq: Sequence, theta: Polytope) -> np.ndarray:
    """Pointwise projection of the sample mean onto ``theta``, shape ``seq.shape + (d,)``."""
    means = seq.sample_mean()
    if seq.d == 1:
        return nearest_points(theta, means)
    reps, inverse = _unique_rows(means)
    return nearest_points(theta, reps)[inverse].reshape(means.shape)


def lhs_m2(seq: Sequence, budget: int = DEFAULT_PATH_BUDGET, theta: Polytope | None = None) -> float:
    """``E^[rho_Theta(mean)^2]`` by backward induction."""
    seq.check_budget(budget)
    if theta is None:
        theta = average_mean_set(seq)
    return fold_table(seq, distance_table(seq, theta))


def lhs_m3(seq: Sequence, budget: int = DEFAULT_PATH_BUDGET, theta: Polytope | None = None) -> float:
    """``inf_xi E^[|mean - xi|^2]`` over Theta-valued ``xi``, evaluated at the
    pointwise projection (see ``MINIMAX_NOTE``)."""
    seq.check_budget(budget)
    if theta is None:
        theta = average_mean_set(seq)
    diff = seq.sample_mean() - projection_table(seq, theta)
    return fold_table(seq, np.einsum("...i,...i->...", diff, diff))


def scalar_fang_lhs(seq: Sequence, budget: int = DEFAULT_PATH_BUDGET) -> float:
    """One-dimensional form: ``E^[|(mean - upper)^+ + (mean - lower)^-|^2]``.

    ``upper`` and ``lower`` average the upper and lower means of the
    coordinates.
    """
    if seq.d != 1:
        raise InvalidInputError(f"scalar form needs d = 1, got d = {seq.d}")
    seq.check_budget(budget)
    upper = sum(upper_expectation(mg, mg.support[:, 0]) for mg in seq.marginals) / seq.n
    lower = -sum(upper_expectation(mg, -mg.support[:, 0]) for mg in seq.marginals) / seq.n
    mean = seq.sample_mean()[..., 0]
    expr = np.maximum(mean - upper, 0.0) + np.maximum(lower - mean, 0.0)
    return fold_table(seq, expr ** 2)


def classical_mean_variance(seq: Sequence) -> float:
    """``(1/n^2) sum_i Var(X_i)`` for single-generator marginals."""
    if any(mg.K != 1 for mg in seq.marginals):
        raise InvalidInputError("classical variance needs K = 1 for every marginal")
    total = 0.0
    for mg in seq.marginals:
        p = mg.generators[0]
        mu = p @ mg.support
        dev = mg.support - mu
        total += float(p @ np.einsum("ij,ij->i", dev, dev))
    return total / seq.n ** 2


@dataclass
class CheckReport:
    scenario: str
    n: int
    d: int
    theta_i: list
    theta: list
    sigma_bar_sq: float
    sigma_per_index: list
    sigma_minimizers: list
    lhs_m2: float
    lhs_m3: float
    scalar_lhs: float | None
    bound: float
    support_mismatch: float
    conditional_distance: float
    prop22_excess: float
    tolerances: dict
    flags: dict
    seed: int
    rng: str = "PCG64"
    minimax_note: str = MINIMAX_NOTE
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v for v in self.flags.values() if v is not None)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def derive_flags(numbers: dict, tol: Tolerances) -> dict:
    """Pass flags as a pure function of reported numbers and tolerances."""
    bound = numbers["bound"]
    slack = tol.slack(bound)
    flags = {
        "thm32": bool(numbers["lhs_m2"] <= bound + slack),
        "thm34": bool(abs(numbers["lhs_m3"] - numbers["lhs_m2"]) <= tol.minimax
                      and numbers["lhs_m3"] <= bound + slack),
        "thm31": bool(numbers["support_mismatch"] <= tol.support
                      and numbers["conditional_distance"] <= tol.membership),
        "prop22": bool(numbers["prop22_excess"] <= tol.prop22),
        "scalar_identity": None,
    }
    if numbers.get("scalar_lhs") is not None:
        flags["scalar_identity"] = bool(abs(numbers["scalar_lhs"] - numbers["lhs_m2"]) <= tol.identity)
    return flags


def _unit_directions(rng, count, d):
    p = rng.standard_normal((count, d))
    norms = np.linalg.norm(p, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return p / norms


def check_all(seq: Sequence, tolerances: Tolerances = Tolerances(), seed: int = 0,
              scenario: str = "", budget: int = DEFAULT_PATH_BUDGET,
              n_directions: int = 100, n_test_functions: int = 20) -> CheckReport:
    """Compute every derived quantity of ``seq`` and certify the inequalities.

    A failed check is recorded in ``flags``; only budget, convergence and
    input problems raise.
    """
    seq.check_budget(budget)
    rng = np.random.default_rng(seed)
    tol = tolerances
    mean_sets = [mean_set(mg) for mg in seq.marginals]
    theta = average_mean_set(seq, mean_sets)
    sigma = sigma_bar_sq(seq)
    bound = sigma.value / seq.n
    m2 = lhs_m2(seq, budget, theta)
    m3 = lhs_m3(seq, budget, theta)
    scalar = scalar_fang_lhs(seq, budget) if seq.d == 1 else None

    directions = _unit_directions(rng, n_directions, seq.d)
    support_mismatch = 0.0
    conditional_distance = 0.0
    prop22_excess = -np.inf
    for mg, ms in zip(seq.marginals, mean_sets):
        for p in directions:
            support_mismatch = max(support_mismatch, abs(support_g(mg, p) - support_value(ms, p)))
        # the conditional mean at any prefix node is the mean of the
        # generator selected there, so generator means cover every selection
        for mu in mg.generator_means():
            conditional_distance = max(conditional_distance, project(ms, mu).distance)
        lo, hi = mg.support.min(axis=0), mg.support.max(axis=0)
        centers = rng.uniform(lo - 1.0, hi + 1.0, size=(n_test_functions, seq.d))
        dirs = rng.standard_normal((n_test_functions, seq.d))
        dev = mg.support[None, :, :] - centers[:, None, :]
        family = np.vstack([dirs @ mg.support.T, np.einsum("fjd,fjd->fj", dev, dev)])
        linear = mg.generators @ family.T
        prop22_excess = max(prop22_excess, float(np.max(linear - linear.max(axis=0))))

    numbers = dict(bound=bound, lhs_m2=m2, lhs_m3=m3, scalar_lhs=scalar,
                   support_mismatch=support_mismatch, conditional_distance=conditional_distance,
                   prop22_excess=prop22_excess)
    return CheckReport(
        scenario=scenario,
        n=seq.n,
        d=seq.d,
        theta_i=[ms.vertices.tolist() for ms in mean_sets],
        theta=theta.vertices.tolist(),
        sigma_bar_sq=sigma.value,
        sigma_per_index=list(sigma.per_index),
        sigma_minimizers=[np.asarray(t).tolist() for t in sigma.minimizers],
        lhs_m2=m2,
        lhs_m3=m3,
        scalar_lhs=scalar,
        bound=bound,
        support_mismatch=support_mismatch,
        conditional_distance=conditional_distance,
        prop22_excess=prop22_excess,
        tolerances=asdict(tol),
        flags=derive_flags(numbers, tol),
        seed=seed,
        diagnostics={"sigma_iterations": list(sigma.iterations),
                     "sigma_residuals": list(sigma.residuals)},
    )
