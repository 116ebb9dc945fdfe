"""Independent reference implementations used only by the tests.

They deliberately avoid the package's own helpers: metrics are computed from
sample-level boolean masks, dominance by pairwise loops, hypervolume by
inclusion-exclusion over box intersections.
"""
from itertools import combinations

import numpy as np


def expand_confusion(counts, seed=0):
    """Sample arrays (pred, label, privileged) realising an 8-cell table
    ``(tp1, fp1, tn1, fn1, tp2, fp2, tn2, fn2)``, shuffled."""
    cells = [(1, 1, True), (1, 0, True), (0, 0, True), (0, 1, True),
             (1, 1, False), (1, 0, False), (0, 0, False), (0, 1, False)]
    pred, lab, priv = [], [], []
    for (p, y, g), k in zip(cells, counts):
        pred += [p] * k
        lab += [y] * k
        priv += [g] * k
    perm = np.random.default_rng(seed).permutation(len(pred))
    return np.array(pred)[perm], np.array(lab)[perm], np.array(priv)[perm]


def cond_prob(event, given):
    """P(event | given) from masks; an empty conditioning set gives 0."""
    n = given.sum()
    return float((event & given).sum() / n) if n else 0.0


def _ratio(a, b):
    if a == 0 and b == 0:
        return 0.0
    if a == 0 or b == 0:
        return 1.0
    return 1.0 - min(a / b, b / a)


def fairness_oracle(pred, lab, priv):
    """All sixteen metrics written directly as conditional probabilities."""
    yh1, yh0 = pred == 1, pred == 0
    y1, y0 = lab == 1, lab == 0
    g1, g2 = priv, ~priv

    def P(event, cond):
        return cond_prob(event, cond)

    out = {}
    out["Fair1"] = 0.5 * abs(P(yh1, y0 & g1) + P(yh1, y1 & g1) - P(yh1, y0 & g2) - P(yh1, y1 & g2))
    out["Fair2"] = abs(P(pred != lab, g1) - P(pred != lab, g2))
    out["Fair3"] = _ratio(P(y0, yh1 & g1), P(y0, yh1 & g2))
    out["Fair4"] = abs(P(yh1, y0 & g1) - P(yh1, y0 & g2))
    out["Fair5"] = abs(P(y1, yh0 & g1) - P(y1, yh0 & g2))
    out["Fair6"] = _ratio(P(y1, yh0 & g1), P(y1, yh0 & g2))
    out["Fair7"] = abs(P(yh0, y1 & g1) - P(yh0, y1 & g2))
    out["Fair8"] = _ratio(P(yh0, y1 & g1), P(yh0, y1 & g2))
    out["Fair9"] = _ratio(P(pred != lab, g1), P(pred != lab, g2))
    out["Fair10"] = abs(P(y0, yh1 & g1) - P(y0, yh1 & g2))
    out["Fair11"] = _ratio(P(yh1, y0 & g1), P(yh1, y0 & g2))
    out["Fair12"] = _ratio(P(yh1, g1), P(yh1, g2))
    out["Fair13"] = abs(P(yh1, g1) - P(yh1, g2))
    out["Fair14"] = abs(P(yh1, y1 & g1) - P(yh1, y1 & g2))
    out["Fair15"] = 0.5 * (abs(P(yh1, y0 & g1) - P(yh1, y0 & g2)) + abs(P(yh1, y1 & g1) - P(yh1, y1 & g2)))
    out["Fair16"] = abs(P(y1, yh1 & g1) - P(y1, yh1 & g2))
    return out


def entropy_loop(b, alpha):
    n = len(b)
    mu = sum(b) / n
    return sum((x / mu) ** alpha - 1 for x in b) / (n * alpha * (alpha - 1))


def group_entropy_loop(b, groups, alpha):
    n = len(b)
    mu = sum(b) / n
    total = 0.0
    for g in set(groups):
        members = [x for x, gg in zip(b, groups) if gg == g]
        mg = sum(members) / len(members)
        total += len(members) * ((mg / mu) ** alpha - 1)
    return total / (n * alpha * (alpha - 1))


def dominates_loop(a, b):
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def nondominated_brute(F):
    return [i for i in range(len(F)) if not any(dominates_loop(F[j], F[i]) for j in range(len(F)) if j != i)]


def hv_inclusion_exclusion(points, ref):
    """Union volume of the boxes [p, ref] by inclusion-exclusion (small sets only)."""
    pts = [np.asarray(p, float) for p in points if np.all(np.asarray(p) < ref)]
    total = 0.0
    for k in range(1, len(pts) + 1):
        for combo in combinations(pts, k):
            corner = np.max(combo, axis=0)
            total += (-1) ** (k + 1) * float(np.prod(np.clip(ref - corner, 0, None)))
    return total
