from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairevo import indicators as ind
from fairevo.errors import DataError, DomainError
from oracles import dominates_loop, hv_inclusion_exclusion, nondominated_brute


# ---------------------------------------------------------------- pseudo front / normalization

def test_pseudo_front_examples():
    pf = ind.build_pseudo_front([np.array([[0, 1], [1, 0]]), np.array([[1, 1]])])
    assert sorted(map(tuple, pf.points.tolist())) == [(0, 1), (1, 0)]
    single = np.array([[0.2, 0.5], [0.4, 0.1], [0.5, 0.6]])
    assert ind.build_pseudo_front([single]).points.tolist() == single[:2].tolist()
    with pytest.raises(DataError):
        ind.build_pseudo_front([])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_pseudo_front_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    runs = [rng.integers(0, 8, size=(10, 3)).astype(float) for _ in range(5)]
    U = np.vstack(runs)
    expected = U[nondominated_brute(U.tolist())]
    assert ind.build_pseudo_front(runs).points.tolist() == expected.tolist()


def test_normalization_examples():
    pf = ind.build_pseudo_front([np.array([[0.0, 4.0], [2.0, 0.0]])])
    assert ind.normalize(pf.ideal, pf).tolist() == [[0.0, 0.0]]
    assert ind.normalize(pf.nadir, pf).tolist() == [[1.0, 1.0]]
    assert ind.normalize([[1.0, 2.0]], pf).tolist() == [[0.5, 0.5]]
    assert ind.normalize([[10.0, -3.0]], pf).tolist() == [[1.1, 0.0]]


# ---------------------------------------------------------------- hypervolume

def test_hv_hand_cases():
    assert abs(ind.hypervolume([[0.0, 0.0]], 2) - 1.21) <= 1e-12
    assert ind.hypervolume([[1.1, 1.1]], 2) == 0.0
    assert abs(ind.hypervolume([[0.0, 0.5], [0.5, 0.0]], 2) - 0.96) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(2, 4), st.integers(0, 10**6))
def test_exact_hv_matches_inclusion_exclusion(n, m, seed):
    P = np.random.default_rng(seed).random((n, m))
    ref = np.full(m, 1.1)
    assert ind.hypervolume_exact(P) == pytest.approx(hv_inclusion_exclusion(P, ref), abs=1e-12)


def test_hv_ignores_dominated_points_and_wrong_dimension():
    P = np.array([[0.2, 0.3], [0.1, 0.1]])
    assert ind.hypervolume(P) == ind.hypervolume(P[1:])
    with pytest.raises(DataError):
        ind.hypervolume(P, m=3)


def test_mc_hv_is_deterministic_per_seed():
    P = np.random.default_rng(0).random((20, 6))
    a = ind.hypervolume_mc(P, n_samples=200_000, seed=3)
    assert a == ind.hypervolume_mc(P, n_samples=200_000, seed=3)
    assert a != ind.hypervolume_mc(P, n_samples=200_000, seed=4)


@pytest.mark.parametrize("seed", range(3))
def test_mc_hv_within_three_stderr_on_projected_sets(seed):
    rng = np.random.default_rng(seed)
    P3 = rng.random((15, 3))
    exact = ind.hypervolume_exact(P3) * 1.1 ** 6
    P9 = np.hstack([P3, np.zeros((15, 6))])
    value, se = ind.hypervolume_with_error(P9, 9, n_samples=1_000_000, seed=seed)
    assert se > 0
    assert abs(value - exact) <= 3 * se


# ---------------------------------------------------------------- CPF

def _front(k=40):
    t = np.linspace(0, 1, k)
    return np.column_stack([t, 1 - t])


def test_cpf_full_and_empty_coverage():
    F = _front()
    pf = ind.build_pseudo_front([F])
    assert ind.cpf(F, pf) == pytest.approx(1.0, abs=0.02)
    assert ind.cpf(F + 5.0, pf) == pytest.approx(0.0, abs=0.02)


def test_cpf_monotone_in_nested_subsets():
    F = _front()
    pf = ind.build_pseudo_front([F])
    vals = [ind.cpf(F[:k], pf, seed=1) for k in (5, 10, 20, 30, 40)]
    assert 0 < vals[2] < 1
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_cpf_degenerate_front_is_zero():
    F = np.array([[0.5, 0.5]])
    assert ind.cpf(F, ind.build_pseudo_front([F])) == 0.0


# ---------------------------------------------------------------- Dominate / Incomparable / Dominated

def brute_metrics(trials, s):
    dom = np.mean([any(dominates_loop(p, s) for p in P) for P in trials])
    inc = np.mean([np.mean([not dominates_loop(p, s) and not dominates_loop(s, p) for p in P]) for P in trials])
    dd = np.mean([np.mean([dominates_loop(s, p) for p in P]) for P in trials])
    return dom, inc, dd


def test_dominance_metric_examples():
    s = np.array([0.5, 0.5])
    trials = [np.array([[0.1, 0.4], [0.9, 0.9]]), np.array([[0.2, 0.2]]), np.array([[0.0, 0.5]])]
    assert ind.dominate_metric(ind.TrialArchive(trials, s)) == 1.0
    same = [np.array([[0.5, 0.5]])] * 3
    arch = ind.TrialArchive(same, s)
    assert ind.dominate_metric(arch) == 0.0
    assert ind.incomparable_metric(arch) == 1.0 and ind.dominated_metric(arch) == 0.0
    worse = [np.array([[0.6, 0.7], [0.9, 0.5]])] * 3
    arch = ind.TrialArchive(worse, s)
    assert ind.dominated_metric(arch) == 1.0 and ind.incomparable_metric(arch) == 0.0


def test_hand_built_three_trial_archive():
    s = np.array([0.4, 0.4, 0.4])
    trials = [
        np.array([[0.3, 0.3, 0.3], [0.5, 0.5, 0.5], [0.1, 0.9, 0.4]]),
        np.array([[0.6, 0.6, 0.4], [0.4, 0.4, 0.4]]),
        np.array([[0.2, 0.5, 0.4], [0.5, 0.5, 0.6], [0.4, 0.4, 0.3], [0.9, 0.1, 0.1]]),
    ]
    arch = ind.TrialArchive(trials, s)
    # trial 1: dominating, dominated, incomparable; trial 2: dominated, equal;
    # trial 3: incomparable, dominated, dominating, incomparable
    assert ind.dominate_metric(arch) == 2 / 3
    assert ind.incomparable_metric(arch) == pytest.approx((1 / 3 + 1 / 2 + 2 / 4) / 3, abs=0)
    assert ind.dominated_metric(arch) == pytest.approx((1 / 3 + 1 / 2 + 1 / 4) / 3, abs=0)
    assert (ind.dominate_metric(arch), ind.incomparable_metric(arch), ind.dominated_metric(arch)) == \
        brute_metrics(trials, s)


def test_mixed_four_point_case():
    s = np.array([1.0, 1.0])
    P = np.array([[0.5, 0.5], [2.0, 2.0], [0.5, 3.0], [1.0, 1.0]])
    arch = ind.TrialArchive([P], s)
    assert (ind.dominate_metric(arch), ind.incomparable_metric(arch), ind.dominated_metric(arch)) == (1.0, 0.5, 0.25)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_within_trial_proportions_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    trials = [rng.integers(0, 4, size=(int(rng.integers(1, 8)), 3)).astype(float) for _ in range(3)]
    s = rng.integers(0, 4, size=3).astype(float)
    for P in trials:
        arch = ind.TrialArchive([P], s)
        share_dominating = np.mean([dominates_loop(p, s) for p in P])
        total = ind.dominated_metric(arch) + ind.incomparable_metric(arch) + share_dominating
        assert total == pytest.approx(1.0, abs=1e-12)
    arch = ind.TrialArchive(trials, s)
    assert (ind.dominate_metric(arch), ind.incomparable_metric(arch), ind.dominated_metric(arch)) == \
        pytest.approx(brute_metrics(trials, s), abs=1e-15)


def test_empty_trials_excluded():
    s = np.array([0.5, 0.5])
    arch = ind.TrialArchive([np.array([[0.1, 0.1]]), np.empty((0, 2))], s)
    assert ind.dominate_metric(arch) == 1.0
    with pytest.raises(DataError):
        ind.dominate_metric(ind.TrialArchive([np.empty((0, 2))], s))


# ---------------------------------------------------------------- G-mean and rank-sum

def test_g_mean_examples():
    assert ind.g_mean([0.3] * 9) == pytest.approx(0.3, abs=1e-15)
    assert ind.g_mean([0.04, 0.01]) == pytest.approx(0.02, abs=1e-15)
    assert ind.g_mean([0.5, 0.0, 0.2]) == 0.0
    with pytest.raises(DomainError):
        ind.g_mean([0.5, -0.1])


def test_rank_sum_verdicts():
    a = np.linspace(0, 1, 30)
    assert ind.rank_sum_test(a, a) == "similar"
    assert ind.rank_sum_test(a + 100, a) == "better"
    assert ind.rank_sum_test(a, a + 100) == "worse"
    assert ind.rank_sum_test(a, a + 100, greater_is_better=False) == "better"
    assert [ind.VERDICT_SYMBOL[v] for v in ("better", "similar", "worse")] == ["+", "≈", "-"]
    with pytest.raises(DataError):
        ind.rank_sum_test([1, 2], [3, 4, 5])


def _exact_null_u(n1, n2):
    counts = {}
    for chosen in combinations(range(1, n1 + n2 + 1), n1):
        u = sum(chosen) - n1 * (n1 + 1) // 2
        counts[u] = counts.get(u, 0) + 1
    return counts, sum(counts.values())


def test_u_statistic_and_five_by_five_critical_value():
    a = np.array([1.1, 3.4, 2.2, 5.0, 0.3])
    b = np.array([4.1, 6.2, 2.9, 7.7, 5.5])
    u, z, p = ind.mann_whitney(a, b)
    assert u == sum(x > y for x in a for y in b)
    # exact null distribution by enumeration: the largest U with two-sided p <= 0.05 is 2
    counts, total = _exact_null_u(5, 5)
    cdf = np.cumsum([counts.get(k, 0) for k in range(26)]) / total
    crit = max(k for k in range(26) if 2 * cdf[k] <= 0.05)
    assert crit == 2
    # the continuity-corrected normal approximation puts the 0.05 boundary at the same place
    b = np.array([4.0, 5, 6, 7, 8])
    u2, _, p2 = ind.mann_whitney(np.array([0.0, 1, 2, 3, 5.5]), b)
    u3, _, p3 = ind.mann_whitney(np.array([0.0, 1, 2, 3, 6.5]), b)
    assert (u2, u3) == (crit, crit + 1)
    assert p2 <= 0.05 < p3
