"""Set-quality indicators (HV, CPF), dominance-based comparison against a
single reference solution, G-mean and a rank-sum test."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .errors import DataError, DomainError
from .moea import dominates, nondominated_set

log = logging.getLogger(__name__)

REF = 1.1
MC_SAMPLES = 1_000_000
MC_BLOCK = 1 << 16
CPF_SAMPLES = 10_000
EXACT_MAX_DIM = 4


# ---------------------------------------------------------------------------
# pseudo front and normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PseudoFront:
    points: np.ndarray
    ideal: np.ndarray
    nadir: np.ndarray
    degenerate: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return np.where(self.degenerate, 1.0, self.nadir - self.ideal)

    @property
    def m(self) -> int:
        return self.points.shape[1]


def build_pseudo_front(runs: Sequence) -> PseudoFront:
    """Nondominated filter of the union of several objective sets."""
    sets = [np.atleast_2d(np.asarray(r, dtype=np.float64)) for r in runs if np.size(r)]
    if not sets:
        raise DataError("pseudo front needs at least one point")
    dims = {s.shape[1] for s in sets}
    if len(dims) != 1:
        raise DataError(f"objective sets disagree on dimension: {sorted(dims)}")
    U = np.vstack(sets)
    P = U[nondominated_set(U)]
    ideal = P.min(axis=0)
    nadir = P.max(axis=0)
    degenerate = ~(nadir > ideal)
    if degenerate.any():
        log.warning("pseudo front is degenerate in dimensions %s", np.flatnonzero(degenerate).tolist())
    return PseudoFront(P, ideal, nadir, degenerate)


def normalize(points, front: PseudoFront) -> np.ndarray:
    """Map into the front's ideal/nadir box; values are clipped to ``[0, 1.1]``."""
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[1] != front.m:
        raise DataError(f"points have {P.shape[1]} objectives, front has {front.m}")
    return np.clip((P - front.ideal) / front.width, 0.0, REF)


# ---------------------------------------------------------------------------
# hypervolume
# ---------------------------------------------------------------------------

def _hv2d(P, ref):
    order = np.lexsort((P[:, 1], P[:, 0]))
    hv = 0.0
    prev = ref[1]
    for x, y in P[order]:
        if y < prev:
            hv += (ref[0] - x) * (prev - y)
            prev = y
    return hv


def _hv_exact(P, ref):
    n, m = P.shape
    if n == 0:
        return 0.0
    if m == 1:
        return float(ref[0] - P[:, 0].min())
    if m == 2:
        return _hv2d(P, ref)
    # slice along the last objective
    order = np.argsort(P[:, -1], kind="stable")
    P = P[order]
    hv = 0.0
    for i in range(n):
        upper = P[i + 1, -1] if i + 1 < n else ref[-1]
        depth = upper - P[i, -1]
        if depth <= 0:
            continue
        head = P[:i + 1, :-1]
        head = head[nondominated_set(head)]
        hv += depth * _hv_exact(head, ref[:-1])
    return hv


def _prepare(points, ref):
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.size == 0:
        return P.reshape(0, len(ref))
    if (P > ref).any():
        log.warning("points beyond the reference point contribute zero hypervolume")
    P = P[(P < ref).all(axis=1)]
    if len(P):
        P = P[nondominated_set(P)]
    return P


def hypervolume_exact(points, ref=None) -> float:
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ref = np.full(P.shape[1], REF) if ref is None else np.asarray(ref, dtype=np.float64)
    return float(_hv_exact(_prepare(P, ref), ref))


def hypervolume_mc(points, ref=None, n_samples: int = MC_SAMPLES, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo hypervolume and its standard error.

    Samples are drawn uniformly in the box spanned by the points' componentwise
    minimum and the reference point, in fixed-size blocks with per-block
    seeds, so the estimate does not depend on how blocks are scheduled.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ref = np.full(P.shape[1], REF) if ref is None else np.asarray(ref, dtype=np.float64)
    P = _prepare(P, ref)
    if len(P) == 0:
        return 0.0, 0.0
    lo = P.min(axis=0)
    box = float(np.prod(ref - lo))
    n_blocks = -(-n_samples // MC_BLOCK)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    hits = 0
    total = 0
    for b, child in enumerate(children):
        k = min(MC_BLOCK, n_samples - b * MC_BLOCK)
        S = lo + np.random.default_rng(child).random((k, P.shape[1])) * (ref - lo)
        hits += _kernels.count_dominated_samples(P, S)
        total += k
    p = hits / total
    return box * p, box * math.sqrt(p * (1 - p) / total)


def hypervolume(points, m: int | None = None, ref=None, method: str = "auto", n_samples: int = MC_SAMPLES,
                seed: int = 0) -> float:
    """Hypervolume of ``points`` against ``ref`` (default ``1.1`` in every dimension).

    Exact slicing for up to four objectives, Monte Carlo above that.
    """
    return hypervolume_with_error(points, m, ref, method, n_samples, seed)[0]


def hypervolume_with_error(points, m=None, ref=None, method="auto", n_samples=MC_SAMPLES, seed=0):
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if m is not None and P.size and P.shape[1] != m:
        raise DataError(f"points have {P.shape[1]} objectives, expected {m}")
    dim = P.shape[1] if P.size else m
    if method == "auto":
        method = "exact" if dim <= EXACT_MAX_DIM else "mc"
    if method == "exact":
        return hypervolume_exact(P, ref), 0.0
    if method == "mc":
        return hypervolume_mc(P, ref, n_samples, seed)
    raise ValueError(f"unknown hypervolume method {method!r}")


# ---------------------------------------------------------------------------
# coverage over the front
# ---------------------------------------------------------------------------

def _cell_halfwidth(F):
    U = np.unique(F, axis=0)
    if len(U) < 2:
        return 0.0
    D = np.abs(U[:, None, :] - U[None, :, :]).max(axis=2)
    np.fill_diagonal(D, np.inf)
    return 0.5 * float(np.median(D.min(axis=1)))


def cpf(points, front: PseudoFront, n_samples: int = CPF_SAMPLES, seed: int = 0) -> float:
    """Fraction of the reference front attained by ``points``.

    The front is represented by boxes of half-width ``h`` (half the median
    nearest-neighbour Chebyshev gap between front points) around each front
    point. Monte-Carlo samples are drawn inside those boxes; a sample ``z`` is
    covered when some point weakly dominates ``z + h``. A set equal to the
    front covers every sample, and a set far behind the front covers none.
    """
    Fn = normalize(front.points, front)
    if len(np.unique(Fn, axis=0)) < 2 or front.degenerate.all():
        log.warning("degenerate reference front; CPF is 0")
        return 0.0
    P = normalize(points, front)
    if len(P) == 0:
        return 0.0
    h = _cell_halfwidth(Fn)
    rng = np.random.default_rng(seed)
    centers = Fn[rng.integers(0, len(Fn), size=n_samples)]
    Z = centers + rng.uniform(-h, h, size=centers.shape)
    return _kernels.count_dominated_samples(P, Z + h) / n_samples


# ---------------------------------------------------------------------------
# comparison against a single solution
# ---------------------------------------------------------------------------

@dataclass
class TrialArchive:
    trials: list[np.ndarray]
    s: np.ndarray

    def __post_init__(self):
        self.trials = [np.atleast_2d(np.asarray(t, dtype=np.float64)) if np.size(t) else np.empty((0, 0))
                       for t in self.trials]
        self.s = np.asarray(self.s, dtype=np.float64)

    def nonempty(self) -> list[np.ndarray]:
        kept = [t for t in self.trials if t.size]
        if len(kept) < len(self.trials):
            log.warning("%d empty trials excluded", len(self.trials) - len(kept))
        if not kept:
            raise DataError("archive has no nonempty trials")
        return kept


def _relations(P, s):
    """Per-point booleans: point dominates s, s dominates point."""
    fwd = np.array([dominates(p, s) for p in P])
    back = np.array([dominates(s, p) for p in P])
    return fwd, back


def dominate_metric(arch: TrialArchive) -> float:
    """Share of trials holding at least one point that dominates ``s``."""
    trials = arch.nonempty()
    return float(np.mean([_relations(P, arch.s)[0].any() for P in trials]))


def incomparable_metric(arch: TrialArchive) -> float:
    """Mean within-trial share of points neither dominating nor dominated by ``s``."""
    trials = arch.nonempty()
    vals = []
    for P in trials:
        fwd, back = _relations(P, arch.s)
        vals.append(np.mean(~fwd & ~back))
    return float(np.mean(vals))


def dominated_metric(arch: TrialArchive) -> float:
    """Mean within-trial share of points dominated by ``s``."""
    trials = arch.nonempty()
    return float(np.mean([np.mean(_relations(P, arch.s)[1]) for P in trials]))


# ---------------------------------------------------------------------------
# scalar summaries and tests
# ---------------------------------------------------------------------------

def g_mean(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DataError("g_mean of nothing")
    if (v < 0).any():
        raise DomainError("g_mean needs nonnegative values")
    if (v == 0).any():
        return 0.0
    return float(np.exp(np.mean(np.log(v))))


VERDICT_SYMBOL = {"better": "+", "similar": "≈", "worse": "-"}


def mann_whitney(a, b) -> tuple[float, float, float]:
    """``(U_a, z, p)``: U of sample ``a``, continuity-corrected normal score
    with tie correction, and the two-sided p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    n = n1 + n2
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    _, t = np.unique(np.concatenate([a, b]), return_counts=True)
    tie = float(np.sum(t ** 3 - t))
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return u, 0.0, 1.0
    mu = n1 * n2 / 2.0
    diff = u - mu
    z = (diff - math.copysign(0.5, diff)) / math.sqrt(var) if diff else 0.0
    return u, z, math.erfc(abs(z) / math.sqrt(2.0))


def rank_sum_test(a, b, alpha: float = 0.05, greater_is_better: bool = True) -> str:
    """``better`` / ``similar`` / ``worse`` verdict for sample ``a`` against ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 3 or len(b) < 3:
        raise DataError("rank-sum test needs at least 3 observations per sample")
    u, z, p = mann_whitney(a, b)
    if z == 0.0 and p == 1.0 and np.ptp(np.concatenate([a, b])) == 0:
        log.warning("rank-sum test on constant samples; reporting 'similar'")
    if p >= alpha:
        return "similar"
    med_a, med_b = np.median(a), np.median(b)
    a_larger = med_a > med_b if med_a != med_b else u > len(a) * len(b) / 2
    return "better" if a_larger == greater_is_better else "worse"
