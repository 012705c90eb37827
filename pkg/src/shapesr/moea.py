"""Multi-objective evolutionary search: NSGA-II and NSGA-III.

Both algorithms share the same generational skeleton: a mu+lambda loop where
the merged parent+offspring pool is cut back to population size by
non-dominated sorting plus a diversity criterion (crowding distance for
NSGA-II, reference-point niching for NSGA-III).  Parents come from
tournaments of ``tournament_size`` drawn with replacement; rank decides,
diversity breaks rank ties, and remaining ties fall to the run RNG.

The evaluation budget counts every fitness evaluation including the initial
population.  The loop stops at the first generation boundary at or past the
budget, so the overshoot is bounded by one offspring batch.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import Expr
from .genetics import GpConfig, crossover, mutate, random_tree
from .objectives import evaluate_individual, is_feasible, nmse

__all__ = [
    "Individual",
    "MoeaConfig",
    "RunResult",
    "dominates",
    "fast_nondominated_sort",
    "crowding_distance",
    "das_dennis",
    "default_divisions",
    "select_champion",
    "run",
]

ALGORITHMS = ("nsga2", "nsga3")


@dataclass(frozen=True, slots=True, eq=False)
class Individual:
    tree: Expr
    objectives: np.ndarray


@dataclass(frozen=True, slots=True)
class MoeaConfig:
    algorithm: str = "nsga2"
    population_size: int = 1000
    max_evaluations: int = 500_000
    tournament_size: int = 5
    reference_divisions: int | None = None  # nsga3 only; None picks automatically

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 2")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be at least 2")
        if self.reference_divisions is not None and self.reference_divisions < 1:
            raise ValueError("reference_divisions must be positive")


# --- dominance and sorting ----------------------------------------------------


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """Pareto dominance, minimization: a is nowhere worse and somewhere better."""
    return bool(np.all(a <= b) and np.any(a < b))


def fast_nondominated_sort(objectives: np.ndarray) -> list[np.ndarray]:
    """Split rows into Pareto fronts (front 0 first, ascending indices inside)."""
    F = np.asarray(objectives, dtype=float)
    n = F.shape[0]
    if n == 0:
        return []
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    dominated_by = dom.sum(axis=0)
    fronts: list[np.ndarray] = []
    assigned = 0
    while assigned < n:
        current = np.where(dominated_by == 0)[0]
        fronts.append(current)
        assigned += current.size
        dominated_by[current] = -1  # never selected again
        dominated_by -= dom[current].sum(axis=0)
    return fronts


def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    """Deb's crowding distance within one front; boundary points get +inf."""
    F = np.asarray(objectives, dtype=float)
    n, m = F.shape
    d = np.zeros(n)
    if n <= 2:
        d[:] = np.inf
        return d
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        d[order[0]] = np.inf
        d[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span <= 0.0:
            continue  # degenerate objective adds nothing
        d[order[1:-1]] += (col[2:] - col[:-2]) / span
    return d


# --- reference points (NSGA-III) ------------------------------------------------


def das_dennis(n_objectives: int, divisions: int) -> np.ndarray:
    """Uniform simplex lattice: all fractions with `divisions` parts summing to 1."""
    if n_objectives < 2:
        raise ValueError("need at least two objectives")
    if divisions < 1:
        raise ValueError("divisions must be positive")
    points: list[list[int]] = []

    def rec(prefix: list[int], left: int, dims_left: int) -> None:
        if dims_left == 1:
            points.append(prefix + [left])
            return
        for i in range(left + 1):
            rec(prefix + [i], left - i, dims_left - 1)

    rec([], divisions, n_objectives)
    return np.array(points, dtype=float) / divisions


def default_divisions(n_objectives: int, population_size: int) -> int:
    """Largest p whose lattice size stays within twice the population."""
    p = 1
    while math.comb(n_objectives + p, p + 1) <= 2 * population_size:
        p += 1
    return p


# --- NSGA-II environmental selection -------------------------------------------


def _nsga2_reduce(F: np.ndarray, fronts: list[np.ndarray], k: int) -> np.ndarray:
    chosen: list[np.ndarray] = []
    taken = 0
    for front in fronts:
        if taken + front.size <= k:
            chosen.append(front)
            taken += front.size
            if taken == k:
                break
            continue
        crowd = crowding_distance(F[front])
        order = np.argsort(-crowd, kind="stable")
        chosen.append(front[order[: k - taken]])
        break
    return np.concatenate(chosen)


# --- NSGA-III environmental selection --------------------------------------------


def _normalize(F: np.ndarray) -> np.ndarray:
    """Deb-Jain adaptive normalization: translate by the ideal point, divide
    by intercepts of the hyperplane through the per-objective ASF extremes."""
    ideal = F.min(axis=0)
    t = F - ideal
    m = F.shape[1]
    weights = np.maximum(np.eye(m), 1e-6)
    asf = (t[:, None, :] / weights[None, :, :]).max(axis=2)  # (n, m)
    extremes = np.argmin(asf, axis=0)
    intercepts = None
    E = t[extremes]
    if len(set(extremes.tolist())) == m:
        try:
            x = np.linalg.solve(E, np.ones(m))
            with np.errstate(divide="ignore", over="ignore"):
                cand = 1.0 / x
            if np.all(np.isfinite(cand)) and np.all(cand > 1e-12):
                intercepts = cand
        except np.linalg.LinAlgError:
            intercepts = None
    if intercepts is None:
        intercepts = t.max(axis=0)
    intercepts = np.where(intercepts > 1e-12, intercepts, 1.0)
    return t / intercepts


def _associate(N: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference ray per point: (ray index, squared perpendicular distance)."""
    unit = ref / np.linalg.norm(ref, axis=1, keepdims=True)
    proj = N @ unit.T
    sq = np.maximum((N * N).sum(axis=1, keepdims=True) - proj * proj, 0.0)
    return np.argmin(sq, axis=1), np.min(sq, axis=1)


def _nsga3_reduce(
    F: np.ndarray,
    fronts: list[np.ndarray],
    k: int,
    ref: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    chosen: list[np.ndarray] = []
    taken = 0
    last = None
    for front in fronts:
        if taken + front.size <= k:
            chosen.append(front)
            taken += front.size
            if taken == k:
                return np.concatenate(chosen)
            continue
        last = front
        break
    assert last is not None
    need = k - taken
    pool = np.concatenate(chosen + [last]) if chosen else last
    N = _normalize(F[pool])
    assoc, sqdist = _associate(N, ref)
    n_sure = pool.size - last.size  # members of the full fronts come first
    rho = np.zeros(len(ref))
    for r in assoc[:n_sure]:
        rho[r] += 1.0
    candidates: dict[int, list[int]] = {}
    for local in range(n_sure, pool.size):
        candidates.setdefault(int(assoc[local]), []).append(local)
    picked: list[int] = []
    while len(picked) < need:
        best = rho.min()
        ties = np.where(rho == best)[0]
        j = int(ties[rng.integers(ties.size)])
        cands = candidates.get(j)
        if not cands:
            rho[j] = np.inf  # exhausted ray, never consider again
            continue
        if best == 0.0:
            local = min(cands, key=lambda i: sqdist[i])
        else:
            local = cands[int(rng.integers(len(cands)))]
        cands.remove(local)
        picked.append(int(pool[local]))
        rho[j] += 1.0
    if chosen:
        return np.concatenate(chosen + [np.array(picked, dtype=int)])
    return np.array(picked, dtype=int)


# --- tournament parent selection --------------------------------------------------


def _population_stats(
    F: np.ndarray, config: MoeaConfig, ref: np.ndarray | None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-individual (rank, tie_key); smaller is better for both."""
    fronts = fast_nondominated_sort(F)
    rank = np.empty(F.shape[0], dtype=int)
    for r, front in enumerate(fronts):
        rank[front] = r
    if config.algorithm == "nsga2":
        tie = np.empty(F.shape[0])
        for front in fronts:
            tie[front] = -crowding_distance(F[front])
    else:
        assoc, _ = _associate(_normalize(F), ref)
        rho = np.bincount(assoc, minlength=len(ref)).astype(float)
        tie = rho[assoc]
    return rank, tie


def _tournament(
    n: int,
    rank: np.ndarray,
    tie: np.ndarray,
    size: int,
    rng: np.random.Generator,
) -> int:
    idxs = rng.integers(n, size=size)
    r = rank[idxs]
    best_rank = r.min()
    idxs = idxs[r == best_rank]
    t = tie[idxs]
    idxs = idxs[t == t.min()]
    if idxs.size == 1:
        return int(idxs[0])
    return int(idxs[rng.integers(idxs.size)])


# --- the generational loop ----------------------------------------------------------


@dataclass(slots=True)
class RunResult:
    instance_name: str
    algorithm: str
    seed: int
    champion: Individual
    train_nmse: float
    test_nmse: float
    feasible: bool
    evaluations: int
    generations: int
    runtime_s: float
    reference_divisions: int | None = None  # nsga3 lattice parameter actually used
    population: list[Individual] = field(repr=False, default_factory=list)
    # one record per generation:
    # (generation, evaluations, best feasible NMSE, min penalty sum, first-front size)
    history: list[tuple[int, int, float, float, int]] = field(
        repr=False, default_factory=list
    )


def select_champion(population: Sequence[Individual]) -> Individual:
    """Reporting model: best data error among certified-feasible individuals;
    if none is feasible, smallest total violation with data error as tie-break."""
    feasible = [ind for ind in population if is_feasible(ind.objectives)]
    if feasible:
        return min(feasible, key=lambda ind: ind.objectives[0])
    return min(
        population,
        key=lambda ind: (float(ind.objectives[1:].sum()), float(ind.objectives[0])),
    )


def run(
    instance,
    gp_config: GpConfig,
    moea_config: MoeaConfig,
    seed: int,
    dataset=None,
    progress: Callable[[int, int, list[Individual]], None] | None = None,
) -> RunResult:
    """Evolve one population against one benchmark instance.

    ``dataset`` defaults to the instance's own data protocol.  With a fixed
    seed the result is bit-reproducible: data and search use the derived
    streams ``[seed, 0]`` and ``[seed, 1]``.
    """
    t0 = time.perf_counter()
    if dataset is None:
        from .bench import generate_dataset  # local import; bench sits above moea

        dataset = generate_dataset(instance, seed)
    X_train, y_train = dataset.train_inputs(), dataset.train_targets()
    X_test, y_test = dataset.test_inputs(), dataset.test_targets()
    n_vars = X_train.shape[1]
    rng = np.random.default_rng([seed, 1])

    def make(tree: Expr) -> Individual:
        return Individual(tree, evaluate_individual(tree, instance, X_train, y_train))

    pop = [make(random_tree(gp_config, n_vars, rng)) for _ in range(moea_config.population_size)]
    evaluations = len(pop)
    generations = 0

    ref = None
    divisions = None
    if moea_config.algorithm == "nsga3":
        m = len(pop[0].objectives)
        divisions = moea_config.reference_divisions or default_divisions(
            m, moea_config.population_size
        )
        ref = das_dennis(m, divisions)

    history: list[tuple[int, int, float, float, int]] = []

    def log_state() -> None:
        objs = np.array([ind.objectives for ind in pop])
        feasible = np.all(objs[:, 1:] == 0.0, axis=1)
        best_feasible = float(objs[feasible, 0].min()) if feasible.any() else math.inf
        min_penalty = float(objs[:, 1:].sum(axis=1).min())
        front0 = len(fast_nondominated_sort(objs)[0])
        history.append((generations, evaluations, best_feasible, min_penalty, front0))
        if progress is not None:
            progress(generations, evaluations, pop)

    log_state()
    while evaluations < moea_config.max_evaluations:
        F = np.array([ind.objectives for ind in pop])
        rank, tie = _population_stats(F, moea_config, ref)
        n = len(pop)
        offspring = []
        for _ in range(moea_config.population_size):
            p1 = pop[_tournament(n, rank, tie, moea_config.tournament_size, rng)]
            p2 = pop[_tournament(n, rank, tie, moea_config.tournament_size, rng)]
            child = mutate(
                crossover(p1.tree, p2.tree, gp_config, rng), gp_config, n_vars, rng
            )
            offspring.append(make(child))
        evaluations += len(offspring)
        merged = pop + offspring
        F = np.array([ind.objectives for ind in merged])
        fronts = fast_nondominated_sort(F)
        if moea_config.algorithm == "nsga2":
            keep = _nsga2_reduce(F, fronts, moea_config.population_size)
        else:
            keep = _nsga3_reduce(F, fronts, moea_config.population_size, ref, rng)
        pop = [merged[i] for i in keep]
        generations += 1
        log_state()

    champion = select_champion(pop)
    train = float(champion.objectives[0])
    test = nmse(y_test, _predict(champion.tree, X_test))
    return RunResult(
        instance_name=getattr(instance, "name", "?"),
        algorithm=moea_config.algorithm,
        seed=seed,
        champion=champion,
        train_nmse=train,
        test_nmse=test,
        feasible=is_feasible(champion.objectives),
        evaluations=evaluations,
        generations=generations,
        runtime_s=time.perf_counter() - t0,
        reference_divisions=divisions,
        population=pop,
        history=history,
    )


def _predict(tree: Expr, X: np.ndarray) -> np.ndarray:
    from .expr import evaluate_batch

    return evaluate_batch(tree, X)
