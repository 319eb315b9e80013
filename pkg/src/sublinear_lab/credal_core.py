"""Finite discrete sublinear expectation spaces.

A :class:`Marginal` is a finite support in R^d together with finitely many
generating probability vectors; its upper expectation is the maximum of the
linear expectations over the generators (the maximum over their convex hull
is always attained at a generator).  A :class:`Sequence` of marginals is
sequentially independent: the upper expectation of a path function is
computed by folding the last coordinate first (backward induction).

The brute-force counterpart enumerates adapted selections, i.e. one
generator choice per node of the prefix tree.  Each selection induces a
product measure, and the maximum of the linear expectations over all of
them must agree with backward induction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence as Seq, Union

import numpy as np

from sublinear_lab.errors import BudgetExceededError, InvalidInputError

PROB_TOL = 1e-12
SUPPORT_TOL = 1e-12
DEFAULT_PATH_BUDGET = 10_000_000
DEFAULT_SELECTION_BUDGET = 10_000_000


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Marginal:
    """Discrete sublinear distribution on ``m`` support points in R^d.

    Parameters
    ----------
    support : array_like, shape (m, d)
        Distinct support points. A 1-d array is read as ``m`` scalar points.
    generators : array_like, shape (K, m)
        Probability vectors whose convex hull is the credal set.
    label : str
    """

    support: np.ndarray
    generators: np.ndarray
    label: str = ""

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        gens = np.asarray(self.generators, dtype=float)
        if gens.ndim == 1:
            gens = gens[None, :]
        if support.ndim != 2 or support.shape[0] < 1 or support.shape[1] < 1:
            raise InvalidInputError(f"support must have shape (m, d) with m, d >= 1, got {support.shape}")
        if not np.all(np.isfinite(support)):
            raise InvalidInputError("support contains non-finite coordinates")
        m = support.shape[0]
        if gens.ndim != 2 or gens.shape[0] < 1 or gens.shape[1] != m:
            raise InvalidInputError(f"generators must have shape (K, {m}) with K >= 1, got {gens.shape}")
        for k, g in enumerate(gens):
            if not np.all(np.isfinite(g)):
                raise InvalidInputError(f"generator {k} contains non-finite entries")
            if np.any(g < 0):
                raise InvalidInputError(f"generator {k} has a negative entry {g.min()!r}")
            s = float(g.sum())
            if abs(s - 1.0) > PROB_TOL:
                raise InvalidInputError(f"generator {k} sums to {s!r}, expected 1 within {PROB_TOL:g}")
        for a, b in itertools.combinations(range(m), 2):
            if np.max(np.abs(support[a] - support[b])) <= SUPPORT_TOL:
                raise InvalidInputError(f"support points {a} and {b} coincide")
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "generators", _frozen(gens))

    @property
    def m(self) -> int:
        return self.support.shape[0]

    @property
    def d(self) -> int:
        return self.support.shape[1]

    @property
    def K(self) -> int:
        return self.generators.shape[0]

    def generator_means(self) -> np.ndarray:
        """Means ``E_P[X]`` of every generator, shape (K, d)."""
        return self.generators @ self.support

    def generator_second_moments(self) -> np.ndarray:
        """``E_P|X|^2`` for every generator, shape (K,)."""
        return self.generators @ np.einsum("ij,ij->i", self.support, self.support)

    def values(self, f) -> np.ndarray:
        """Evaluate ``f`` on the support; arrays of length ``m`` pass through."""
        if callable(f):
            vals = np.array([np.asarray(f(x), dtype=float).reshape(()) for x in self.support])
        else:
            vals = np.asarray(f, dtype=float).reshape(-1)
            if vals.shape != (self.m,):
                raise InvalidInputError(f"expected {self.m} function values, got {np.shape(f)}")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("function values must be finite on the support")
        return vals

    def __eq__(self, other):
        if not isinstance(other, Marginal):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.generators, other.generators)
        )

    __hash__ = None


def upper_expectation(marginal: Marginal, f, return_index: bool = False):
    """``max_k sum_j p_kj f(x_j)`` over the generators of ``marginal``.

    With ``return_index=True`` also returns the maximizing generator index
    (lowest index on ties).
    """
    vals = marginal.values(f)
    expectations = marginal.generators @ vals
    k = int(np.argmax(expectations))
    value = float(expectations[k])
    return (value, k) if return_index else value


@dataclass(frozen=True, eq=False)
class Sequence:
    """Ordered, sequentially independent marginals sharing one dimension."""

    marginals: tuple

    def __post_init__(self):
        marginals = tuple(self.marginals)
        if not marginals:
            raise InvalidInputError("a sequence needs at least one marginal")
        for i, mg in enumerate(marginals):
            if not isinstance(mg, Marginal):
                raise InvalidInputError(f"marginal {i} is not a Marginal")
        dims = {mg.d for mg in marginals}
        if len(dims) != 1:
            raise InvalidInputError(f"marginals disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "marginals", marginals)

    @classmethod
    def iid(cls, marginal: Marginal, n: int) -> "Sequence":
        if n < 1:
            raise InvalidInputError(f"replication count must be >= 1, got {n}")
        return cls((marginal,) * n)

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def d(self) -> int:
        return self.marginals[0].d

    @property
    def shape(self) -> tuple:
        return tuple(mg.m for mg in self.marginals)

    @property
    def path_count(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def node_counts(self) -> list:
        """Number of prefix-tree nodes at each level (prefixes of length i)."""
        counts, c = [], 1
        for mg in self.marginals:
            counts.append(c)
            c *= mg.m
        return counts

    def selection_count(self) -> int:
        total = 1
        for mg, nodes in zip(self.marginals, self.node_counts()):
            total *= mg.K ** nodes
        return total

    def check_budget(self, budget: int = DEFAULT_PATH_BUDGET):
        if self.path_count > budget:
            raise BudgetExceededError("path", self.path_count, budget)

    def sample_sum(self) -> np.ndarray:
        """Coordinate sums of every path, shape ``self.shape + (d,)``."""
        n = self.n
        total = np.zeros(self.shape + (self.d,))
        for i, mg in enumerate(self.marginals):
            view = [1] * n + [self.d]
            view[i] = mg.m
            total = total + mg.support.reshape(view)
        return total

    def sample_mean(self) -> np.ndarray:
        return self.sample_sum() / self.n

    def paths(self) -> np.ndarray:
        """Every path as an array of shape ``self.shape + (n, d)``."""
        out = np.empty(self.shape + (self.n, self.d))
        for i, mg in enumerate(self.marginals):
            view = [1] * self.n + [self.d]
            view[i] = mg.m
            out[..., i, :] = mg.support.reshape(view)
        return out

    def __eq__(self, other):
        if not isinstance(other, Sequence):
            return NotImplemented
        return self.n == other.n and all(a == b for a, b in zip(self.marginals, other.marginals))

    __hash__ = None


class PathFunction:
    """Real function on full paths ``(x_1, ..., x_n)``.

    Either wraps a callable, evaluated on each path given as an ``(n, d)``
    array (or on the stacked ``(..., n, d)`` array when ``vectorized``), or
    holds a dense table indexed by support indices.
    """

    def __init__(self, func: Callable | None = None, *, table=None, vectorized: bool = False):
        if (func is None) == (table is None):
            raise InvalidInputError("give exactly one of func or table")
        self.func = func
        self.vectorized = vectorized
        self._table = None if table is None else np.asarray(table, dtype=float)

    @classmethod
    def from_table(cls, table) -> "PathFunction":
        return cls(table=table)

    def tabulate(self, seq: Sequence, budget: int = DEFAULT_PATH_BUDGET) -> np.ndarray:
        seq.check_budget(budget)
        if self._table is not None:
            if self._table.shape != seq.shape:
                raise InvalidInputError(f"table shape {self._table.shape} does not match paths {seq.shape}")
            table = self._table
        else:
            paths = seq.paths()
            if self.vectorized:
                table = np.asarray(self.func(paths), dtype=float)
            else:
                flat = paths.reshape(-1, seq.n, seq.d)
                table = np.array([float(self.func(p)) for p in flat]).reshape(seq.shape)
            if table.shape != seq.shape:
                raise InvalidInputError(f"function returned shape {table.shape}, expected {seq.shape}")
        if not np.all(np.isfinite(table)):
            raise InvalidInputError("path function must be finite at every path")
        return table


PathLike = Union[PathFunction, Callable, np.ndarray]


def _as_table(seq: Sequence, F: PathLike, budget: int) -> np.ndarray:
    if isinstance(F, PathFunction):
        return F.tabulate(seq, budget)
    if callable(F):
        return PathFunction(F).tabulate(seq, budget)
    return PathFunction.from_table(F).tabulate(seq, budget)


def fold_table(seq: Sequence, table: np.ndarray) -> float:
    """Backward induction on an already tabulated path function."""
    values = np.asarray(table, dtype=float)
    for mg in reversed(seq.marginals):
        values = (values @ mg.generators.T).max(axis=-1)
    return float(values)


def product_expectation(seq: Sequence, F: PathLike, budget: int = DEFAULT_PATH_BUDGET) -> float:
    """Upper expectation of ``F(X_1, ..., X_n)`` for independent ``X_i``.

    The last coordinate is integrated out first with the upper expectation
    of its marginal, pointwise in the prefix, and so on down to ``X_1``.
    """
    seq.check_budget(budget)
    return fold_table(seq, _as_table(seq, F, budget))


@dataclass(frozen=True, eq=False)
class AdaptedSelection:
    """Generator choice at every prefix-tree node.

    ``choices[i]`` is an integer array of shape ``seq.shape[:i]`` whose entry
    at ``prefix`` is the (0-based) generator of marginal ``i`` used after
    observing ``prefix``.
    """

    sequence: Sequence
    choices: tuple = field(repr=False)

    def path_probabilities(self) -> np.ndarray:
        prob = np.ones(())
        for mg, sel in zip(self.sequence.marginals, self.choices):
            prob = prob[..., None] * mg.generators[sel]
        return prob


def enumerate_adapted_measures(seq: Sequence, budget: int = DEFAULT_SELECTION_BUDGET) -> Iterator[AdaptedSelection]:
    """Yield every adapted selection of ``seq`` exactly once."""
    total = seq.selection_count()
    if total > budget:
        raise BudgetExceededError("adapted selection", total, budget)
    shapes = [seq.shape[:i] for i in range(seq.n)]
    sizes = seq.node_counts()
    ranges = [range(mg.K) for mg, c in zip(seq.marginals, sizes) for _ in range(c)]
    for flat in itertools.product(*ranges):
        choices, pos = [], 0
        for shp, c in zip(shapes, sizes):
            arr = np.array(flat[pos:pos + c], dtype=np.intp).reshape(shp)
            arr.setflags(write=False)
            choices.append(arr)
            pos += c
        yield AdaptedSelection(seq, tuple(choices))


def expectation_under(selection: AdaptedSelection, F: PathLike, budget: int = DEFAULT_PATH_BUDGET) -> float:
    """Linear expectation of ``F`` under the product measure of ``selection``."""
    table = _as_table(selection.sequence, F, budget)
    return float(np.sum(selection.path_probabilities() * table))


def conditional_mean(selection: AdaptedSelection, i: int, prefix: Seq[int] = ()) -> np.ndarray:
    """``E_P[X_i | X_0..X_{i-1} = prefix]`` for the measure of ``selection``.

    ``i`` is 0-based and ``prefix`` holds ``i`` support indices.
    """
    seq = selection.sequence
    if not 0 <= i < seq.n:
        raise IndexError(f"coordinate {i} out of range for n={seq.n}")
    prefix = tuple(int(j) for j in prefix)
    if len(prefix) != i or any(not 0 <= j < m for j, m in zip(prefix, seq.shape)):
        raise IndexError(f"invalid prefix {prefix} for coordinate {i}")
    mg = seq.marginals[i]
    k = int(selection.choices[i][prefix])
    return mg.generators[k] @ mg.support


def max_over_selections(seq: Sequence, F: PathLike, budget: int = DEFAULT_SELECTION_BUDGET,
                        path_budget: int = DEFAULT_PATH_BUDGET, chunk: int = 1 << 15) -> float:
    """Brute-force ``max_P E_P[F]`` over all adapted selections.

    Same enumeration as :func:`enumerate_adapted_measures`, batched through
    numpy: a selection index is decoded in mixed radix into one generator
    digit per prefix-tree node.
    """
    total = seq.selection_count()
    if total > budget:
        raise BudgetExceededError("adapted selection", total, budget)
    table = _as_table(seq, F, path_budget)
    sizes = seq.node_counts()
    best = -np.inf
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        batch = len(idx)
        prob = np.ones((batch,))
        for mg, c, i in zip(seq.marginals, sizes, range(seq.n)):
            digits = np.empty((batch, c), dtype=np.intp)
            for node in range(c):
                digits[:, node] = idx % mg.K
                idx = idx // mg.K
            sel = digits.reshape((batch,) + seq.shape[:i])
            prob = prob[..., None] * mg.generators[sel]
        vals = np.tensordot(prob, table, axes=seq.n)
        best = max(best, float(vals.max()))
    return best
