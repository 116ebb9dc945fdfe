"""Accuracy, entropy-index unfairness and confusion-matrix fairness metrics.

Every criterion is expressed so that smaller is better and 0 is ideal:
``ACC`` is reported as the error rate ``1 - accuracy`` and ratio-form
metrics are mapped through ``1 - min(r, 1/r)``.

Metric tags are plain strings: ``CE``, ``ACC``, ``FI``, ``FG`` and
``Fair1`` ... ``Fair16``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DataError, DomainError

FAIR_IDS = tuple(f"Fair{i}" for i in range(1, 17))
REPRESENTATIVE = FAIR_IDS[:8]
ALL_METRICS = ("CE", "ACC", "FI", "FG", *FAIR_IDS)
RATIO_METRICS = frozenset({"Fair3", "Fair6", "Fair8", "Fair9", "Fair11", "Fair12"})
THRESHOLD = 0.5


def check_criteria(criteria: Sequence[str]) -> tuple[str, ...]:
    criteria = tuple(criteria)
    if not criteria:
        raise ConfigurationError("criteria must not be empty")
    bad = [c for c in criteria if c not in ALL_METRICS]
    if bad:
        raise ConfigurationError(f"unknown criteria {bad}; known: {ALL_METRICS}")
    return criteria


# ---------------------------------------------------------------------------
# entropy indices
# ---------------------------------------------------------------------------

def benefit_vector(probs, labels) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise DataError(f"probs {probs.shape} and labels {labels.shape} differ in length")
    return probs - labels + 1.0


def _check_alpha(alpha):
    if alpha == 0 or alpha == 1:
        raise ConfigurationError("alpha must not be 0 or 1 (limit forms are not supported)")


def _check_benefits(b):
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.size == 0:
        raise DataError("benefits must be a nonempty vector")
    if not (b > 0).all():
        raise DomainError("benefits must be strictly positive")
    return b


def generalized_entropy(b, alpha: float) -> float:
    """Individual-level generalized entropy index of the benefits."""
    _check_alpha(alpha)
    b = _check_benefits(b)
    n = b.size
    mu = b.mean()
    return float(np.sum((b / mu) ** alpha - 1.0) / (n * alpha * (alpha - 1.0)))


def generalized_entropy_grad(b, alpha: float):
    """Value and d/db of :func:`generalized_entropy`."""
    _check_alpha(alpha)
    b = _check_benefits(b)
    n = b.size
    mu = b.mean()
    r = b / mu
    ra = r ** alpha
    value = float(np.sum(ra - 1.0) / (n * alpha * (alpha - 1.0)))
    grad = (r ** (alpha - 1.0) - ra.mean()) / (mu * n * (alpha - 1.0))
    return value, grad


def _group_stats(b, ids):
    ids = np.asarray(ids)
    if ids.shape != b.shape:
        raise DataError("group ids and benefits differ in length")
    counts = np.bincount(ids)
    sums = np.bincount(ids, weights=b, minlength=len(counts))
    present = counts > 0
    means = np.zeros(len(counts))
    means[present] = sums[present] / counts[present]
    return counts, means, present


def group_entropy_ids(b, ids, alpha: float) -> float:
    """Between-group entropy index; groups are the distinct values of ``ids``."""
    _check_alpha(alpha)
    b = _check_benefits(b)
    counts, means, present = _group_stats(b, ids)
    n = b.size
    mu = b.mean()
    terms = counts[present] * ((means[present] / mu) ** alpha - 1.0)
    return float(terms.sum() / (n * alpha * (alpha - 1.0)))


def group_entropy_ids_grad(b, ids, alpha: float):
    _check_alpha(alpha)
    b = _check_benefits(b)
    ids = np.asarray(ids)
    counts, means, present = _group_stats(b, ids)
    n = b.size
    mu = b.mean()
    s = np.zeros(len(counts))
    s[present] = means[present] / mu
    sa = s ** alpha
    value = float(np.sum(counts[present] * (sa[present] - 1.0)) / (n * alpha * (alpha - 1.0)))
    weighted = np.sum(counts * sa) / n
    grad = (s[ids] ** (alpha - 1.0) - weighted) / (mu * n * (alpha - 1.0))
    return value, grad


def group_entropy(b, part, alpha: float) -> float:
    """Between-group entropy index over the groups of a :class:`GroupPartition`."""
    b = np.asarray(b, dtype=np.float64)
    if len(part.group_of) != len(b):
        raise DataError("partition and benefits differ in length")
    sizes = np.bincount(part.group_of, minlength=part.n_groups)
    if (sizes == 0).any():
        raise DomainError("group_entropy requires every group to be nonempty")
    return group_entropy_ids(b, part.group_of, alpha)


# ---------------------------------------------------------------------------
# confusion-matrix metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupConfusion:
    """Confusion counts on the privileged side (``*1``) and the other side (``*2``)."""

    tp1: int
    fp1: int
    tn1: int
    fn1: int
    tp2: int
    fp2: int
    tn2: int
    fn2: int

    def side(self, k: int):
        return (self.tp1, self.fp1, self.tn1, self.fn1) if k == 1 else (self.tp2, self.fp2, self.tn2, self.fn2)

    def swapped(self) -> GroupConfusion:
        return GroupConfusion(self.tp2, self.fp2, self.tn2, self.fn2, self.tp1, self.fp1, self.tn1, self.fn1)

    @property
    def total(self) -> int:
        return sum(self.side(1)) + sum(self.side(2))


def confusion(preds, labels, privileged) -> GroupConfusion:
    """Count TP/FP/TN/FN on each side of the binary split.

    ``privileged`` is either a per-sample boolean mask or a
    :class:`~fairevo.data.GroupPartition`.
    """
    if hasattr(privileged, "privileged"):
        privileged = privileged.privileged
    preds = np.asarray(preds).astype(np.int64)
    labels = np.asarray(labels).astype(np.int64)
    privileged = np.asarray(privileged, dtype=bool)
    if not (preds.shape == labels.shape == privileged.shape):
        raise DataError("preds, labels and group mask differ in length")
    # cell code: side*4 + label*2 + pred
    code = (~privileged).astype(np.int64) * 4 + labels * 2 + preds
    c = np.bincount(code, minlength=8)
    # (y,ŷ): (0,0)=TN (0,1)=FP (1,0)=FN (1,1)=TP
    return GroupConfusion(
        int(c[3]), int(c[1]), int(c[0]), int(c[2]),
        int(c[7]), int(c[5]), int(c[4]), int(c[6]),
    )


def _rate(num, den):
    # undefined conditional probability counts as 0
    return num / den if den > 0 else 0.0


def side_rates(tp, fp, tn, fn) -> dict[str, float]:
    n = tp + fp + tn + fn
    return {
        "fpr": _rate(fp, fp + tn),          # P(ŷ=1 | y=0)
        "tpr": _rate(tp, tp + fn),          # P(ŷ=1 | y=1)
        "fnr": _rate(fn, tp + fn),          # P(ŷ=0 | y=1)
        "err": _rate(fp + fn, n),           # P(ŷ≠y)
        "fdr": _rate(fp, tp + fp),          # P(y=0 | ŷ=1)
        "for": _rate(fn, fn + tn),          # P(y=1 | ŷ=0)
        "ppv": _rate(tp, tp + fp),          # P(y=1 | ŷ=1)
        "ppr": _rate(tp + fp, n),           # P(ŷ=1)
    }


def ratio_disparity(a: float, b: float) -> float:
    """``1 - min(a/b, b/a)``; 0 when both are zero, 1 when exactly one is."""
    hi = max(a, b)
    if hi == 0:
        return 0.0
    return 1.0 - min(a, b) / hi


_DIFF = {
    "Fair2": "err", "Fair4": "fpr", "Fair5": "for", "Fair7": "fnr",
    "Fair10": "fdr", "Fair13": "ppr", "Fair14": "tpr", "Fair16": "ppv",
}
_RATIO = {
    "Fair3": "fdr", "Fair6": "for", "Fair8": "fnr", "Fair9": "err",
    "Fair11": "fpr", "Fair12": "ppr",
}


def fairness_metric(metric: str, c: GroupConfusion) -> float:
    r1 = side_rates(*c.side(1))
    r2 = side_rates(*c.side(2))
    if metric in _DIFF:
        key = _DIFF[metric]
        return abs(r1[key] - r2[key])
    if metric in _RATIO:
        key = _RATIO[metric]
        return ratio_disparity(r1[key], r2[key])
    if metric == "Fair1":
        return 0.5 * abs((r1["fpr"] - r2["fpr"]) + (r1["tpr"] - r2["tpr"]))
    if metric == "Fair15":
        return 0.5 * (abs(r1["fpr"] - r2["fpr"]) + abs(r1["tpr"] - r2["tpr"]))
    raise ConfigurationError(f"{metric!r} is not a confusion-matrix fairness metric")


def all_fairness(c: GroupConfusion) -> dict[str, float]:
    return {m: fairness_metric(m, c) for m in FAIR_IDS}


# ---------------------------------------------------------------------------
# whole-vector evaluation
# ---------------------------------------------------------------------------

def cross_entropy(probs, labels) -> float:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def metrics_from_probs(probs, labels, part, criteria: Sequence[str], alpha: float = 2.0) -> np.ndarray:
    """Objective vector for the given criteria from shared predictions."""
    criteria = check_criteria(criteria)
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape != labels.shape:
        raise DataError("probs and labels differ in length")
    preds = (probs >= THRESHOLD).astype(np.int64)
    conf = None
    b = None
    out = np.empty(len(criteria))
    for i, c in enumerate(criteria):
        if c == "CE":
            out[i] = cross_entropy(probs, labels)
        elif c == "ACC":
            out[i] = float(np.mean(preds != labels))
        elif c in ("FI", "FG"):
            if b is None:
                b = benefit_vector(probs, labels)
            out[i] = generalized_entropy(b, alpha) if c == "FI" else group_entropy(b, part, alpha)
        else:
            if conf is None:
                conf = confusion(preds, labels, part)
            out[i] = fairness_metric(c, conf)
    return out


def evaluate(genome, net, ds, part, criteria: Sequence[str], alpha: float = 2.0) -> np.ndarray:
    """One forward pass of ``genome`` on ``ds``, then every requested criterion."""
    from .nnet import forward

    return metrics_from_probs(forward(genome, net, ds.features), ds.labels, part, criteria, alpha)
