"""Seeded random scenarios and the property campaign run over them."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from sublinear_lab.convex_geom import support_value
from sublinear_lab.credal_core import (
    DEFAULT_PATH_BUDGET,
    DEFAULT_SELECTION_BUDGET,
    Marginal,
    Sequence,
    fold_table,
    max_over_selections,
)
from sublinear_lab.errors import BudgetExceededError, ConvergenceError
from sublinear_lab.inequality_lab import (
    Tolerances,
    average_mean_set,
    check_all,
    classical_mean_variance,
    distance_table,
    mean_set,
)
from sublinear_lab.scenario import scenario_dict

RNG_NAME = "numpy.random.PCG64 seeded by SeedSequence([seed, trial])"
ORACLE_REL_TOL = 1e-10
ADDITIVITY_TOL = 1e-9


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 42
    trials: int = 200
    d_range: tuple = (1, 2)
    n_range: tuple = (1, 3)
    m_range: tuple = (1, 3)
    k_range: tuple = (1, 3)
    cube_side: float = 4.0
    n_directions: int = 100
    n_xi: int = 20
    path_budget: int = DEFAULT_PATH_BUDGET
    selection_budget: int = DEFAULT_SELECTION_BUDGET


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial])))


def random_simplex(rng, m):
    """Uniform draw from the probability simplex (normalized exponentials)."""
    e = rng.exponential(size=m)
    return e / e.sum()


def random_marginal(rng, d, m, K, cube_side=4.0, label=""):
    half = cube_side / 2.0
    while True:
        support = rng.uniform(-half, half, size=(m, d))
        diffs = np.abs(support[:, None, :] - support[None, :, :]).max(axis=-1)
        np.fill_diagonal(diffs, np.inf)
        if m == 1 or diffs.min() > 1e-12:
            break
    gens = np.array([random_simplex(rng, m) for _ in range(K)])
    return Marginal(support, gens, label)


def random_sequence(rng, config: FuzzConfig) -> Sequence:
    d = int(rng.integers(config.d_range[0], config.d_range[1] + 1))
    n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
    marginals = []
    for i in range(n):
        m = int(rng.integers(config.m_range[0], config.m_range[1] + 1))
        K = int(rng.integers(config.k_range[0], config.k_range[1] + 1))
        marginals.append(random_marginal(rng, d, m, K, config.cube_side, f"X{i + 1}"))
    return Sequence(tuple(marginals))


def _rel_close(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b)) + 1e-15


def random_theta_valued(rng, seq, theta):
    """Path table of random points of ``theta`` (Dirichlet weights on its vertices)."""
    w = rng.dirichlet(np.ones(len(theta)), size=seq.shape)
    return w @ theta.vertices


def run_trial(config: FuzzConfig, trial: int) -> dict:
    """Generate trial ``trial`` and check every invariant on it."""
    rng = trial_rng(config.seed, trial)
    seq = random_sequence(rng, config)
    record = {
        "trial": trial,
        "n": seq.n,
        "d": seq.d,
        "m": [mg.m for mg in seq.marginals],
        "K": [mg.K for mg in seq.marginals],
    }
    checks = {}
    try:
        report = check_all(seq, Tolerances(), seed=int(rng.integers(2**63)),
                           scenario=f"fuzz-{config.seed}-{trial}", budget=config.path_budget,
                           n_directions=config.n_directions)
        checks.update(report.flags)
        record.update(lhs_m2=report.lhs_m2, lhs_m3=report.lhs_m3, bound=report.bound)

        mean_sets = [mean_set(mg) for mg in seq.marginals]
        theta = average_mean_set(seq, mean_sets)
        rho_sq = distance_table(seq, theta)

        if seq.selection_count() <= config.selection_budget:
            worst = 0.0
            tables = [rho_sq, rng.standard_normal(seq.shape)]
            ok = True
            for table in tables:
                a = fold_table(seq, table)
                b = max_over_selections(seq, table, config.selection_budget, config.path_budget)
                ok = ok and _rel_close(a, b, ORACLE_REL_TOL)
                worst = max(worst, abs(a - b))
            ok = bool(ok)
            checks["oracle"] = ok
            record["oracle_max_abs_diff"] = worst
        else:
            checks["oracle"] = None

        dirs = rng.standard_normal((config.n_directions, seq.d))
        add_err = max(
            abs(support_value(theta, p) - np.mean([support_value(ms, p) for ms in mean_sets]))
            for p in dirs
        )
        checks["additivity"] = bool(add_err <= ADDITIVITY_TOL)
        record["additivity_error"] = float(add_err)

        mean = seq.sample_mean()
        beaten = 0.0
        for _ in range(config.n_xi):
            diff = mean - random_theta_valued(rng, seq, theta)
            val = fold_table(seq, np.einsum("...i,...i->...", diff, diff))
            beaten = max(beaten, report.lhs_m2 - val)
        checks["minimax_xi"] = bool(beaten <= 1e-9)

        if all(mg.K == 1 for mg in seq.marginals):
            checks["classical"] = bool(abs(report.lhs_m2 - classical_mean_variance(seq)) <= 1e-10)
        else:
            checks["classical"] = None
    except (ConvergenceError, BudgetExceededError) as exc:
        checks["error"] = False
        record["error"] = f"{type(exc).__name__}: {exc}"

    record["checks"] = checks
    record["passed"] = all(v for v in checks.values() if v is not None)
    if not record["passed"]:
        record["scenario"] = scenario_dict(seq, name=f"fuzz-{config.seed}-{trial}")
    return record


def _run_trial_args(args):
    return run_trial(*args)


def fuzz(config: FuzzConfig, jobs: int = 1) -> dict:
    """Run ``config.trials`` trials; the summary depends only on ``config``."""
    args = [(config, t) for t in range(config.trials)]
    if jobs > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_trial_args, args, chunksize=8))
    else:
        records = [run_trial(*a) for a in args]
    failed = [r["trial"] for r in records if not r["passed"]]
    oracle_skipped = sum(1 for r in records if r["checks"].get("oracle", False) is None)
    return {
        "config": asdict(config),
        "rng": RNG_NAME,
        "trials": len(records),
        "passed": len(records) - len(failed),
        "failed": len(failed),
        "failed_trials": failed,
        "oracle_skipped": oracle_skipped,
        "records": records,
    }
