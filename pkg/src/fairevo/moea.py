"""Pareto machinery, stochastic-ranking survival, variation operators and the
exploration/exploitation reproduction strategy."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .data import Dataset, GroupPartition
from .errors import ConfigurationError, DataError, SelectionError, TrainingError
from .fairmetrics import check_criteria, evaluate
from .nnet import LOSSES, NetSpec, TrainSpec, partial_train

log = logging.getLogger(__name__)

WEIGHT_LIMIT = 1e3


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Individual:
    genome: np.ndarray
    values: np.ndarray
    """Every recorded criterion; the first ``n_obj`` entries are optimized."""
    n_obj: int
    birth_gen: int = 0
    lineage_tag: str = "init"

    @property
    def objectives(self) -> np.ndarray:
        return self.values[:self.n_obj]


@dataclass
class Population:
    """Members ordered by survival rank (index 0 is best)."""

    members: list[Individual]
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigurationError("population capacity must be >= 1")

    def __len__(self):
        return len(self.members)

    def objectives(self) -> np.ndarray:
        return np.array([m.objectives for m in self.members])

    def values(self) -> np.ndarray:
        return np.array([m.values for m in self.members])


@dataclass(frozen=True)
class VariationSpec:
    sigma: float = 0.01
    crossover_prob: float = 1.0
    mutation_prob: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("mutation strength must be positive")
        for p in (self.crossover_prob, self.mutation_prob):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError("crossover/mutation probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class ReproSpec:
    K: int = 10
    losses: tuple[str, ...] = ("CE", "FI", "FG")

    @property
    def m(self) -> int:
        return len(self.losses)

    def kappa(self, lam: int) -> int:
        k = lam - self.m * self.K
        if k < 0:
            raise ConfigurationError(f"m*K = {self.m * self.K} exceeds population size {lam}")
        return k


@dataclass(frozen=True)
class SRAConfig:
    pc_range: tuple[float, float] = (0.4, 0.6)
    kappa: float = 0.05
    passes: int | None = None
    """Bubble sweeps; ``None`` means one per union member."""


@dataclass
class Problem:
    """Everything needed to train and score a genome."""

    net: NetSpec
    train: Dataset
    train_part: GroupPartition
    val: Dataset
    val_part: GroupPartition
    criteria: tuple[str, ...]
    report_criteria: tuple[str, ...] = ()
    alpha: float = 2.0
    tspec: TrainSpec = field(default_factory=TrainSpec)
    columns: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.criteria = check_criteria(self.criteria)
        extra = tuple(c for c in self.report_criteria if c not in self.criteria)
        self.columns = self.criteria + check_criteria(extra) if extra else self.criteria

    @property
    def losses(self) -> tuple[str, ...]:
        return tuple(c for c in self.criteria if c in LOSSES)

    def train_genome(self, genome, loss, seed):
        return partial_train(
            genome, self.net, self.train.features, self.train.labels, self.train_part.group_of,
            replace(self.tspec, loss=loss), alpha=self.alpha, seed=seed,
        )

    def score(self, genome) -> np.ndarray:
        return evaluate(genome, self.net, self.val, self.val_part, self.columns, self.alpha)

    def individual(self, genome, gen=0, tag="init") -> Individual:
        return Individual(genome, self.score(genome), len(self.criteria), gen, tag)


# ---------------------------------------------------------------------------
# dominance
# ---------------------------------------------------------------------------

def dominates(a, b) -> bool:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"cannot compare vectors of shape {a.shape} and {b.shape}")
    return bool((a <= b).all() and (a < b).any())


def nondominated_set(F) -> np.ndarray:
    """Indices of rows of ``F`` not dominated by any other row."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    return np.flatnonzero(_kernels.nondominated_mask(F))


# ---------------------------------------------------------------------------
# stochastic ranking survival
# ---------------------------------------------------------------------------

def _normalize(F):
    lo = F.min(axis=0)
    width = F.max(axis=0) - lo
    width[width <= 0] = 1.0
    return (F - lo) / width


def eps_fitness(F, kappa: float = 0.05) -> np.ndarray:
    """Additive-epsilon indicator fitness over the set (larger is better)."""
    I = _kernels.eps_matrix(F)
    c = np.abs(I).max()
    if c == 0:
        c = 1.0
    E = -np.exp(-I / (c * kappa))
    np.fill_diagonal(E, 0.0)
    return E.sum(axis=0)


def sde_density(F) -> np.ndarray:
    """Shift-based density estimate: distance to the nearest shifted neighbour
    (larger means less crowded)."""
    return _kernels.sde_min_distance(F)


def sra_rank(F, pc: float | None = None, seed=None, cfg: SRAConfig = SRAConfig()) -> np.ndarray:
    """Order of rows of ``F`` from best to worst by stochastic bubble ranking.

    Each adjacent comparison uses the epsilon-indicator fitness with probability
    ``pc`` and the SDE density otherwise; ``pc=None`` draws it from
    ``cfg.pc_range``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    n = F.shape[0]
    rng = np.random.default_rng(seed)
    if pc is None:
        pc = rng.uniform(*cfg.pc_range)
    if not 0.0 <= pc <= 1.0:
        raise ConfigurationError("pc must lie in [0, 1]")
    if n < 2:
        return np.arange(n)
    Fn = _normalize(F)
    fit = eps_fitness(Fn, cfg.kappa)
    sde = sde_density(Fn)
    passes = cfg.passes if cfg.passes is not None else n
    u = rng.random((passes, n - 1))
    return _kernels.stochastic_bubble(np.arange(n), fit, sde, u, pc)


def sra_survival(union: Sequence[Individual], lam: int, pc: float | None = None, seed=None,
                 cfg: SRAConfig = SRAConfig()) -> Population:
    """Keep the best ``lam`` of ``union``.

    With a single objective this is plain truncation on that objective.
    """
    union = list(union)
    if len(union) < lam:
        raise SelectionError(f"cannot select {lam} survivors from {len(union)} individuals")
    F = np.array([ind.objectives for ind in union])
    if F.shape[1] == 1:
        order = np.argsort(F[:, 0], kind="stable")
    else:
        order = sra_rank(F, pc, seed, cfg)
    return Population([union[i] for i in order[:lam]], lam)


def mating_select(pop: Population, kappa: int, seed=None) -> list[Individual]:
    """Binary tournaments with replacement on rank (lower index wins)."""
    n = len(pop)
    if n == 0:
        raise SelectionError("empty population")
    if kappa > n:
        raise SelectionError(f"cannot pick {kappa} parents from {n}")
    rng = np.random.default_rng(seed)
    pairs = rng.integers(0, n, size=(kappa, 2))
    return [pop.members[int(min(a, b))] for a, b in pairs]


# ---------------------------------------------------------------------------
# variation
# ---------------------------------------------------------------------------

def weight_crossover(p, q, seed=None, u=None):
    """Per-weight convex blend; returns both complementary offspring."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DataError("parents differ in genome length")
    if u is None:
        u = np.random.default_rng(seed).random(p.shape)
    else:
        u = np.broadcast_to(np.asarray(u, dtype=np.float64), p.shape)
    return u * p + (1.0 - u) * q, u * q + (1.0 - u) * p


def gaussian_mutation(g, sigma: float, seed=None) -> np.ndarray:
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    g = np.asarray(g, dtype=np.float64)
    return g + np.random.default_rng(seed).normal(0.0, sigma, size=g.shape)


def vary(p, q, vspec: VariationSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """Crossover then mutation, each applied with its probability; clamped."""
    if rng.random() < vspec.crossover_prob:
        o1, o2 = weight_crossover(p, q, rng)
    else:
        o1, o2 = np.array(p, dtype=np.float64), np.array(q, dtype=np.float64)
    out = []
    for o in (o1, o2):
        if rng.random() < vspec.mutation_prob:
            o = gaussian_mutation(o, vspec.sigma, rng)
        out.append(np.clip(o, -WEIGHT_LIMIT, WEIGHT_LIMIT))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# reproduction
# ---------------------------------------------------------------------------

def best_on(pop: Population, column: int, ce_column: int | None) -> Individual:
    """Member minimizing ``column``; ties go to lower CE, then lower rank."""
    V = pop.values()
    ce = V[:, ce_column] if ce_column is not None else np.zeros(len(pop))
    order = np.lexsort((np.arange(len(pop)), ce, V[:, column]))
    return pop.members[int(order[0])]


def _draw_seed(rng):
    return int(rng.integers(0, 2**63 - 1))


def _trained(problem: Problem, genome, loss, seed, gen, tag) -> Individual:
    g = problem.train_genome(genome, loss, seed)
    ind = problem.individual(g, gen, tag)
    if not np.isfinite(ind.values).all():
        raise TrainingError(f"non-finite objectives for offspring trained on {loss}")
    return ind


def _with_retry(make, what):
    try:
        return make(0)
    except TrainingError as exc:
        log.warning("discarding %s (%s); regenerating once", what, exc)
    return make(1)


def reproduce(pop: Population, repro: ReproSpec, vspec: VariationSpec, problem: Problem,
              seed=None, gen: int = 0) -> list[Individual]:
    """Generate ``m*K + lam`` evaluated offspring.

    Exploration: for each loss, vary the population's best member on that
    loss and train it ``K`` successive times on that loss, keeping every
    checkpoint. Exploitation: tournament-pick ``kappa`` parents, breed ``lam``
    children and train each once on a random loss.
    """
    rng = np.random.default_rng(seed)
    lam = pop.capacity
    kappa = repro.kappa(lam)
    cols = list(problem.columns)
    ce_col = cols.index("CE") if "CE" in cols else None
    for loss in repro.losses:
        if loss not in cols:
            raise ConfigurationError(f"loss {loss!r} is not among the evaluated criteria {cols}")

    offspring: list[Individual] = []

    for loss in repro.losses:
        parent = best_on(pop, cols.index(loss), ce_col)
        mate = mating_select(pop, 1, rng)[0]
        start, _ = vary(parent.genome, mate.genome, vspec, rng)
        seeds = [_draw_seed(rng) for _ in range(repro.K)]
        retry_noise = _draw_seed(rng)
        current = start
        for k in range(repro.K):

            def make(attempt, current=current, k=k):
                g = current
                if attempt:
                    g = np.clip(gaussian_mutation(g, vspec.sigma, retry_noise + k), -WEIGHT_LIMIT, WEIGHT_LIMIT)
                return _trained(problem, g, loss, seeds[k] + attempt, gen, loss)

            child = _with_retry(make, f"exploration offspring {loss}#{k}")
            offspring.append(child)
            current = child.genome

    parents = mating_select(pop, max(kappa, 2), rng)
    plans = []
    while len(plans) < lam:
        i = len(plans) % len(parents)
        p = parents[i]
        q = parents[int(rng.integers(len(parents)))]
        o1, o2 = vary(p.genome, q.genome, vspec, rng)
        for o in (o1, o2):
            if len(plans) < lam:
                plans.append((o, p, q, repro.losses[int(rng.integers(repro.m))], _draw_seed(rng)))

    for o, p, q, loss, s in plans:

        def make(attempt, o=o, p=p, q=q, loss=loss, s=s):
            g = o if not attempt else vary(p.genome, q.genome, vspec, np.random.default_rng(s))[0]
            return _trained(problem, g, loss, s + attempt, gen, loss)

        offspring.append(_with_retry(make, f"exploitation offspring ({loss})"))

    return offspring
