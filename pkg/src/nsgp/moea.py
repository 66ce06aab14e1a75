"""NSGA-II generational loop over expression trees.

Implements fast non-dominated sorting, crowding distance, crowded binary
tournament selection, and the merge-and-truncate survival scheme. All tie
breaking is deterministic (stable sorts, first pick wins) so a fixed seed
reproduces a run bit for bit, independent of the evaluation worker budget.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .expr_core import ExprTree, one_point_mutation, ramped_half_and_half, subtree_crossover
from .objectives import (
    MODES,
    ObjectiveVector,
    ScalingCoeffs,
    evaluate_individual,
)
from .phi_features import DEFAULT_COEFFICIENTS, PhiCoefficients


@dataclass
class Individual:
    """A tree plus its objectives and NSGA-II bookkeeping.

    ``rank`` and ``crowd`` are only meaningful after a sort pass over the
    population that contains this individual.
    """

    tree: ExprTree
    obj: ObjectiveVector
    scaling: ScalingCoeffs
    rank: int = -1
    crowd: float = 0.0


@dataclass(frozen=True)
class EvolutionConfig:
    pop_size: int = 1000
    generations: int = 100
    crossover_prob: float = 0.9
    tournament_size: int = 2
    mode: str = "phi"
    seed: int = 0
    min_init_depth: int = 1
    max_init_depth: int = 6

    def __post_init__(self):
        if self.pop_size <= 0 or self.pop_size % 2:
            raise ValueError(f"pop_size must be positive and even, got {self.pop_size}")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError(f"crossover_prob must be in [0, 1], got {self.crossover_prob}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")


class TraceRow(NamedTuple):
    generation: int
    best_err: float
    median_err: float
    front_size: int


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff a is no worse than b everywhere and better somewhere (minimization)."""
    not_worse = all(x <= y for x, y in zip(a, b))
    better = any(x < y for x, y in zip(a, b))
    return not_worse and better


def _objective_matrix(pop: Sequence[Individual]) -> np.ndarray:
    return np.array([(ind.obj.err, ind.obj.interp) for ind in pop], dtype=np.float64)


def nondominated_sort_objectives(objs: np.ndarray) -> list[list[int]]:
    """Partition points (rows of an n x m matrix) into Pareto fronts.

    Front k holds exactly the points dominated only by points of earlier
    fronts. Uses a vectorized dominance matrix, so it is O(n^2 m) time but
    fast in practice for the population sizes used here.
    """
    objs = np.asarray(objs, dtype=np.float64)
    n = objs.shape[0]
    if n == 0:
        return []
    le = (objs[:, None, :] <= objs[None, :, :]).all(axis=2)
    lt = (objs[:, None, :] < objs[None, :, :]).any(axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0).astype(np.int64)  # dominators per point
    fronts: list[list[int]] = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append(current.tolist())
        counts[current] = -1
        counts -= dom[current].sum(axis=0)
        current = np.flatnonzero(counts == 0)
    return fronts


def fast_nondominated_sort(pop: Sequence[Individual]) -> list[list[int]]:
    """Sort a population into fronts and assign each individual its rank."""
    fronts = nondominated_sort_objectives(_objective_matrix(pop))
    for k, front in enumerate(fronts):
        for i in front:
            pop[i].rank = k
    return fronts


def crowding_distance(objs: np.ndarray) -> np.ndarray:
    """Deb's crowding distance for the points of one front.

    Per objective the stable-sorted boundary points get infinity and each
    interior point accumulates (next - prev) / (max - min); objectives with
    zero spread contribute only their boundary marks.
    """
    objs = np.asarray(objs, dtype=np.float64)
    if objs.ndim != 2 or objs.shape[0] == 0:
        raise ValueError("need a nonempty n x m objective matrix")
    n, m = objs.shape
    dist = np.zeros(n)
    for j in range(m):
        order = np.argsort(objs[:, j], kind="stable")
        col = objs[order, j]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        spread = col[-1] - col[0]
        if spread > 0 and n > 2:
            interior = order[1:-1]
            dist[interior] += (col[2:] - col[:-2]) / spread
    return dist


def crowded_tournament(pop: Sequence[Individual], rng: np.random.Generator, k: int = 2) -> Individual:
    """Pick k contestants with replacement; lower rank wins, then larger
    crowding distance, then the earlier pick."""
    picks = rng.integers(0, len(pop), size=k)
    best = pop[picks[0]]
    for idx in picks[1:]:
        cand = pop[idx]
        if cand.rank < best.rank or (cand.rank == best.rank and cand.crowd > best.crowd):
            best = cand
    return best


def _survive(merged: list[Individual], pop_size: int) -> list[Individual]:
    """Fill the next population front by front, truncating the split front
    by descending crowding distance (stable)."""
    fronts = fast_nondominated_sort(merged)
    objs = _objective_matrix(merged)
    survivors: list[Individual] = []
    for front in fronts:
        crowd = crowding_distance(objs[front])
        for i, c in zip(front, crowd):
            merged[i].crowd = float(c)
        if len(survivors) + len(front) <= pop_size:
            survivors.extend(merged[i] for i in front)
        else:
            need = pop_size - len(survivors)
            order = np.argsort(-crowd, kind="stable")[:need]
            survivors.extend(merged[front[i]] for i in order)
        if len(survivors) == pop_size:
            break
    return survivors


def _evaluate_trees(
    trees: Sequence[ExprTree],
    X: np.ndarray,
    y: np.ndarray,
    var_y: float,
    mode: str,
    phi_coeffs: PhiCoefficients,
    n_workers: int,
) -> list[Individual]:
    def one(tree: ExprTree) -> Individual:
        obj, scaling = evaluate_individual(
            tree, X, y, mode, var_y=var_y, phi_coeffs=phi_coeffs
        )
        return Individual(tree=tree, obj=obj, scaling=scaling)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(one, trees))
    return [one(t) for t in trees]


def evolve(
    config: EvolutionConfig,
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None = None,
    *,
    phi_coeffs: PhiCoefficients = DEFAULT_COEFFICIENTS,
    n_workers: int = 1,
) -> tuple[list[Individual], list[TraceRow]]:
    """Run the full generational loop on one training split.

    Each generation draws pop_size offspring (two tournament parents per
    pair, subtree crossover with the configured probability, then one-point
    mutation on every offspring), evaluates them, and survives the merged
    parent+offspring pool. The returned trace has one row per generation,
    including generation zero right after initialization.

    The random stream is consumed only in the sequential variation phase;
    evaluation is pure, so the worker budget cannot change the outcome.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    var_y = float(y.var())
    if not var_y > 0:
        raise ValueError("training target has zero variance")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    D = X.shape[1]

    trees = ramped_half_and_half(
        config.pop_size, config.min_init_depth, config.max_init_depth, D, rng
    )
    pop = _evaluate_trees(trees, X, y, var_y, config.mode, phi_coeffs, n_workers)
    fronts = fast_nondominated_sort(pop)
    objs = _objective_matrix(pop)
    for front in fronts:
        crowd = crowding_distance(objs[front])
        for i, c in zip(front, crowd):
            pop[i].crowd = float(c)

    trace = [_trace_row(0, pop)]
    for gen in range(1, config.generations + 1):
        offspring_trees: list[ExprTree] = []
        for _ in range(config.pop_size // 2):
            p1 = crowded_tournament(pop, rng, config.tournament_size)
            p2 = crowded_tournament(pop, rng, config.tournament_size)
            if rng.random() < config.crossover_prob:
                c1, c2 = subtree_crossover(p1.tree, p2.tree, rng)
            else:
                c1, c2 = p1.tree, p2.tree
            offspring_trees.append(one_point_mutation(c1, D, rng))
            offspring_trees.append(one_point_mutation(c2, D, rng))
        offspring = _evaluate_trees(
            offspring_trees, X, y, var_y, config.mode, phi_coeffs, n_workers
        )
        pop = _survive(pop + offspring, config.pop_size)
        trace.append(_trace_row(gen, pop))
    return pop, trace


def _trace_row(gen: int, pop: Sequence[Individual]) -> TraceRow:
    errs = np.array([ind.obj.err for ind in pop])
    return TraceRow(
        generation=gen,
        best_err=float(errs.min()),
        median_err=float(np.median(errs)),
        front_size=sum(1 for ind in pop if ind.rank == 0),
    )
