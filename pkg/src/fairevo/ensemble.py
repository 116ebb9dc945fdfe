"""Pick base models out of an evolved population and average their outputs.

Strategies (all start from the nondominated models on the ensemble data):

* ``EnsAll``  every nondominated model
* ``EnsBest`` the best nondominated model for each criterion, deduplicated
* ``EnsKnee`` the ``size`` models bulging furthest below the hyperplane
  through the per-objective extreme points
* ``EnsDiv``  repeatedly drop the most crowded model under the L_{1/m}
  distance until ``size`` remain
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError
from .fairmetrics import check_criteria, evaluate, metrics_from_probs
from .moea import nondominated_set
from .nnet import NetSpec, forward

log = logging.getLogger(__name__)

STRATEGIES = ("EnsAll", "EnsBest", "EnsKnee", "EnsDiv")


@dataclass(frozen=True)
class EnsembleSpec:
    strategy: str = "EnsAll"
    size: int = 50
    criteria: tuple[str, ...] = ("CE", "FI", "FG")
    alpha: float = 2.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.size < 1:
            raise ConfigurationError("ensemble size must be >= 1")
        object.__setattr__(self, "criteria", check_criteria(self.criteria))


@dataclass
class Ensemble:
    members: list[np.ndarray]
    net: NetSpec
    indices: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ConfigurationError("an ensemble needs at least one member")

    def __len__(self):
        return len(self.members)


def _minmax(F):
    lo = F.min(axis=0)
    width = F.max(axis=0) - lo
    width[width <= 0] = 1.0
    return (F - lo) / width


def knee_scores(F) -> np.ndarray:
    """Signed distance of each point below the extreme-point hyperplane
    (positive means bulging toward the ideal point)."""
    Fn = _minmax(np.asarray(F, dtype=np.float64))
    m = Fn.shape[1]
    extremes = Fn[np.argmax(Fn, axis=0)]
    w = None
    try:
        w = np.linalg.solve(extremes, np.ones(m))
    except np.linalg.LinAlgError:
        pass
    if w is None or not np.isfinite(w).all() or (w <= 0).any():
        # degenerate extremes: fall back to unit intercepts of the normalized box
        w = np.ones(m)
    return (1.0 - Fn @ w) / np.linalg.norm(w)


def knee_select(F, size: int, tiebreak=None) -> list[int]:
    F = np.asarray(F, dtype=np.float64)
    score = knee_scores(F)
    tb = np.zeros(len(F)) if tiebreak is None else np.asarray(tiebreak)
    order = np.lexsort((np.arange(len(F)), tb, -score))
    return sorted(int(i) for i in order[:size])


def lp_distance_matrix(F) -> np.ndarray:
    """Pairwise ``(sum |a_k - b_k|^(1/m))^m`` distances."""
    F = np.asarray(F, dtype=np.float64)
    m = F.shape[1]
    diff = np.abs(F[:, None, :] - F[None, :, :]) ** (1.0 / m)
    return diff.sum(axis=2) ** m


def diversity_select(F, size: int) -> list[int]:
    F = np.asarray(F, dtype=np.float64)
    keep = list(range(len(F)))
    if size >= len(keep):
        return keep
    D = lp_distance_matrix(_minmax(F))
    np.fill_diagonal(D, np.inf)
    alive = np.ones(len(F), dtype=bool)
    while alive.sum() > size:
        sub = np.where(alive[:, None] & alive[None, :], D, np.inf)
        i, j = np.unravel_index(np.argmin(sub), sub.shape)
        # drop whichever of the closest pair is more crowded by its other neighbours
        di = np.min(np.delete(sub[i], j))
        dj = np.min(np.delete(sub[j], i))
        if di < dj:
            drop = i
        elif dj < di:
            drop = j
        else:
            drop = max(i, j)
        alive[drop] = False
    return [int(i) for i in np.flatnonzero(alive)]


def select_indices(F, spec: EnsembleSpec) -> list[int]:
    """Indices (into the rows of ``F``) chosen by ``spec.strategy``."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    nd = nondominated_set(F)
    if len(nd) == 0:  # pragma: no cover - a finite nonempty set always has one
        raise DataError("empty nondominated set")
    Fnd = F[nd]
    crit = list(spec.criteria)
    ce = Fnd[:, crit.index("CE")] if "CE" in crit else Fnd[:, 0]
    if spec.strategy == "EnsAll":
        picked = range(len(nd))
    elif spec.strategy == "EnsBest":
        picked = set()
        for k in range(F.shape[1]):
            order = np.lexsort((np.arange(len(nd)), Fnd[:, k]))
            picked.add(int(order[0]))
        picked = sorted(picked)
    else:
        if spec.size > len(nd):
            log.warning("requested %d models but only %d are nondominated; using all", spec.size, len(nd))
            picked = range(len(nd))
        elif spec.strategy == "EnsKnee":
            picked = knee_select(Fnd, spec.size, ce)
        else:
            picked = diversity_select(Fnd, spec.size)
    return [int(nd[i]) for i in picked]


def select(population, net: NetSpec, ens_ds, part, spec: EnsembleSpec) -> Ensemble:
    """Re-evaluate every model on ``ens_ds`` and choose a subset.

    ``population`` may be a :class:`~fairevo.moea.Population` or a sequence of
    genomes.
    """
    genomes = [m.genome for m in population.members] if hasattr(population, "members") else list(population)
    F = np.array([evaluate(g, net, ens_ds, part, spec.criteria, spec.alpha) for g in genomes])
    idx = select_indices(F, spec)
    return Ensemble([genomes[i] for i in idx], net, idx)


def predict(ens: Ensemble, X) -> np.ndarray | float:
    """Arithmetic mean of member probabilities."""
    probs = [forward(g, ens.net, X) for g in ens.members]
    return np.mean(probs, axis=0) if np.ndim(probs[0]) else float(np.mean(probs))


def predict_label(ens: Ensemble, X):
    return (np.asarray(predict(ens, X)) >= 0.5).astype(np.int64)


def evaluate_ensemble(ens: Ensemble, ds, part, criteria: Sequence[str], alpha: float = 2.0) -> np.ndarray:
    return metrics_from_probs(predict(ens, ds.features), ds.labels, part, criteria, alpha)


def write_manifest(path, ens: Ensemble, strategy: str, population_path: str, provenance: dict | None = None):
    with Path(path).open("w") as fh:
        fh.write(json.dumps({
            "kind": "meta",
            "strategy": strategy,
            "net": ens.net.to_dict(),
            "population": str(population_path),
            **(provenance or {}),
        }) + "\n")
        for i in ens.indices:
            fh.write(json.dumps({"kind": "member", "index": int(i)}) + "\n")


def read_manifest(path):
    meta, indices = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("kind") == "meta":
                meta = rec
            else:
                indices.append(int(rec["index"]))
    return meta, indices
