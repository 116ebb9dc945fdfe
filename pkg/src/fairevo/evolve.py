"""Generational loop: initialise, partially train, then alternate reproduction
and survival for a fixed number of generations."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, GroupPartition
from .errors import ConfigurationError, FairEvoError
from .fairmetrics import check_criteria
from .moea import (
    Individual,
    Population,
    Problem,
    ReproSpec,
    SRAConfig,
    VariationSpec,
    reproduce,
    sra_survival,
)
from .nnet import NetSpec, TrainSpec, init_genome

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    net: NetSpec
    train_spec: TrainSpec = field(default_factory=TrainSpec)
    vspec: VariationSpec = field(default_factory=VariationSpec)
    K: int = 10
    criteria: tuple[str, ...] = ("CE", "FI", "FG")
    report_criteria: tuple[str, ...] = ()
    generations: int = 200
    lam: int = 100
    alpha: float = 2.0
    seed: int = 0
    checkpoint_every: int = 0
    """Store genomes every this many generations (0: final generation only)."""
    sra: SRAConfig = field(default_factory=SRAConfig)

    def __post_init__(self):
        object.__setattr__(self, "criteria", check_criteria(self.criteria))
        object.__setattr__(self, "report_criteria", tuple(self.report_criteria))
        if "CE" not in self.criteria:
            raise ConfigurationError("criteria must include CE")
        if self.generations < 1:
            raise ConfigurationError("generations must be >= 1")
        if self.lam < 2:
            raise ConfigurationError("population size must be >= 2")
        self.repro.kappa(self.lam)

    @property
    def repro(self) -> ReproSpec:
        losses = tuple(c for c in self.criteria if c in ("CE", "FI", "FG"))
        return ReproSpec(self.K, losses)


@dataclass
class RunHistory:
    columns: tuple[str, ...]
    objectives: list[np.ndarray] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    genomes: dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.objectives)

    def record(self, pop: Population, seed: int, elapsed: float, keep_genomes: bool):
        gen = len(self.objectives)
        self.objectives.append(pop.values())
        self.seeds.append(seed)
        self.wall_times.append(elapsed)
        if keep_genomes:
            self.genomes[gen] = np.array([m.genome for m in pop.members])

    def rows(self):
        """Tidy ``(generation, individual, criterion, value)`` tuples."""
        for gen, F in enumerate(self.objectives):
            for i, row in enumerate(F):
                for c, v in zip(self.columns, row):
                    yield gen, i, c, float(v)

    def write_csv(self, path, provenance: dict | None = None):
        provenance = provenance or {}
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "individual", "criterion", "value", *provenance])
            for gen, i, c, v in self.rows():
                w.writerow([gen, i, c, repr(v), *provenance.values()])

    @classmethod
    def read_csv(cls, path) -> RunHistory:
        gens: dict[int, dict[int, dict[str, float]]] = {}
        columns: list[str] = []
        with Path(path).open(newline="") as fh:
            for rec in csv.DictReader(fh):
                c = rec["criterion"]
                if c not in columns:
                    columns.append(c)
                gens.setdefault(int(rec["generation"]), {}).setdefault(int(rec["individual"]), {})[c] = float(
                    rec["value"]
                )
        hist = cls(tuple(columns))
        for g in sorted(gens):
            rows = gens[g]
            hist.objectives.append(np.array([[rows[i][c] for c in columns] for i in sorted(rows)]))
        return hist


def write_population(path, pop: Population, columns, provenance: dict | None = None):
    """JSON-lines dump: one meta line, then one line per individual."""
    with Path(path).open("w") as fh:
        fh.write(json.dumps({"kind": "meta", "columns": list(columns), **(provenance or {})}) + "\n")
        for i, m in enumerate(pop.members):
            fh.write(json.dumps({
                "kind": "individual",
                "index": i,
                "birth_gen": m.birth_gen,
                "lineage": m.lineage_tag,
                "objectives": {c: float(v) for c, v in zip(columns, m.values)},
                "genome": [float(x) for x in m.genome],
            }) + "\n")


def read_population(path):
    """Return ``(meta, genomes, records)`` from a population dump."""
    meta, genomes, records = {}, [], []
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("kind") == "meta":
                meta = rec
            else:
                genomes.append(np.array(rec["genome"], dtype=np.float64))
                records.append(rec)
    return meta, genomes, records


def run(cfg: RunConfig, train: Dataset, val: Dataset, train_part: GroupPartition,
        val_part: GroupPartition) -> tuple[Population, RunHistory]:
    """Evolve ``cfg.lam`` networks for ``cfg.generations`` generations.

    Training uses ``train``; every evaluation uses ``val``.
    """
    if cfg.net.input_dim != train.dim:
        raise ConfigurationError(f"net input_dim {cfg.net.input_dim} != data width {train.dim}")
    problem = Problem(
        cfg.net, train, train_part, val, val_part, cfg.criteria, cfg.report_criteria,
        cfg.alpha, cfg.train_spec,
    )
    repro = cfg.repro
    rng = np.random.default_rng(cfg.seed)
    hist = RunHistory(problem.columns)

    t0 = time.perf_counter()
    init_seed = int(rng.integers(0, 2**63 - 1))
    init_rng = np.random.default_rng(init_seed)
    members = []
    for i in range(cfg.lam):
        g = init_genome(cfg.net, init_rng)
        loss = repro.losses[i % repro.m]
        g = problem.train_genome(g, loss, int(init_rng.integers(0, 2**63 - 1)))
        members.append(problem.individual(g, 0, loss))
    # initial ordering comes from the same survival ranking used later
    pop = sra_survival(members, cfg.lam, seed=init_rng, cfg=cfg.sra)
    hist.record(pop, init_seed, time.perf_counter() - t0, _keep(cfg, 0))

    for gen in range(1, cfg.generations + 1):
        t0 = time.perf_counter()
        gen_seed = int(rng.integers(0, 2**63 - 1))
        gen_rng = np.random.default_rng(gen_seed)
        try:
            children = reproduce(pop, repro, cfg.vspec, problem, gen_rng, gen)
            pop = sra_survival(pop.members + children, cfg.lam, seed=gen_rng, cfg=cfg.sra)
        except FairEvoError as exc:
            raise type(exc)(f"generation {gen}: {exc}") from exc
        hist.record(pop, gen_seed, time.perf_counter() - t0, _keep(cfg, gen))
        log.debug("generation %d done in %.2fs", gen, hist.wall_times[-1])

    return pop, hist


def _keep(cfg: RunConfig, gen: int) -> bool:
    if gen == cfg.generations:
        return True
    return cfg.checkpoint_every > 0 and gen % cfg.checkpoint_every == 0


def population_from_genomes(genomes, problem: Problem, lam: int | None = None) -> Population:
    members = [problem.individual(g) for g in genomes]
    return Population(members, lam or max(2, len(members)))


__all__ = [
    "Individual", "RunConfig", "RunHistory", "run", "write_population", "read_population",
    "population_from_genomes",
]
