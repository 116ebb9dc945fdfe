import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairevo import moea
from fairevo.data import make_groups, split, SplitSpec, standardize, synth_biased
from fairevo.errors import ConfigurationError, DataError, SelectionError
from fairevo.moea import Individual, Population, ReproSpec, VariationSpec
from fairevo.nnet import NetSpec, TrainSpec, init_genome
from oracles import dominates_loop, nondominated_brute


def make_pop(F, capacity=None):
    F = np.asarray(F, dtype=float)
    members = [Individual(np.full(3, float(i)), row, F.shape[1]) for i, row in enumerate(F)]
    return Population(members, capacity or len(members))


# ---------------------------------------------------------------- dominance

def test_dominance_examples():
    assert moea.dominates([0, 0], [1, 1])
    assert not moea.dominates([0, 1], [1, 0]) and not moea.dominates([1, 0], [0, 1])
    assert not moea.dominates([0.3, 0.2], [0.3, 0.2])
    with pytest.raises(DataError):
        moea.dominates([0, 1], [0, 1, 2])


def test_nondominated_examples():
    F = np.array([[0, 2], [1, 1], [2, 0], [1, 2]])
    assert moea.nondominated_set(F).tolist() == [0, 1, 2]
    assert moea.nondominated_set(np.array([[0.4, 0.1]])).tolist() == [0]
    assert moea.nondominated_set(np.array([[0, 1], [0, 1], [2, 2]])).tolist() == [0, 1]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200), st.integers(2, 5), st.integers(0, 10**6))
def test_nondominated_matches_brute_force(n, m, seed):
    rng = np.random.default_rng(seed)
    # a coarse grid forces ties and duplicates
    F = rng.integers(0, 6, size=(n, m)).astype(float)
    assert moea.nondominated_set(F).tolist() == nondominated_brute(F.tolist())


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_dominance_matches_loop(a, b):
    assert moea.dominates(a, b) == dominates_loop(a, b)
    assert not (moea.dominates(a, b) and moea.dominates(b, a))


# ---------------------------------------------------------------- indicators

def test_eps_fitness_against_direct_sum():
    rng = np.random.default_rng(0)
    F = rng.random((7, 3))
    I = np.array([[max(F[i] - F[j]) for j in range(7)] for i in range(7)])
    c = np.abs(I).max()
    ref = [sum(-np.exp(-I[i, j] / (c * 0.05)) for i in range(7) if i != j) for j in range(7)]
    assert np.allclose(moea.eps_fitness(F, 0.05), ref, rtol=1e-12)


def test_sde_against_direct_loop():
    rng = np.random.default_rng(1)
    F = rng.random((6, 3))
    ref = []
    for i in range(6):
        d = [np.linalg.norm(np.maximum(0, F[j] - F[i])) for j in range(6) if j != i]
        ref.append(min(d))
    assert np.allclose(moea.sde_density(F), ref, rtol=1e-12)


# ---------------------------------------------------------------- SRA survival

def test_survival_full_union_returns_everyone():
    pop = make_pop(np.random.default_rng(0).random((5, 3)))
    out = moea.sra_survival(pop.members, 5, seed=1)
    assert sorted(id(m) for m in out.members) == sorted(id(m) for m in pop.members)


def test_survival_too_small_union():
    pop = make_pop(np.random.default_rng(0).random((3, 2)))
    with pytest.raises(SelectionError):
        moea.sra_survival(pop.members, 4, seed=0)


def test_pc_one_equals_sort_by_eps_fitness():
    for seed in range(20):
        F = np.random.default_rng(seed).random((12, 3))
        order = moea.sra_rank(F, pc=1.0, seed=seed)
        fit = moea.eps_fitness(moea._normalize(F))
        expected = sorted(range(12), key=lambda i: -fit[i])
        assert order.tolist() == expected


def test_pc_zero_equals_sort_by_sde():
    F = np.random.default_rng(3).random((10, 3))
    order = moea.sra_rank(F, pc=0.0, seed=0)
    sde = moea.sde_density(moea._normalize(F))
    assert order.tolist() == sorted(range(10), key=lambda i: -sde[i])


def test_dominating_individual_always_survives():
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        F = rng.random((10, 3)) + 0.1
        star = int(rng.integers(10))
        F[star] = F.min(axis=0) - 0.05
        pop = make_pop(F)
        lam = int(rng.integers(1, 10))
        out = moea.sra_survival(pop.members, lam, seed=trial)
        assert pop.members[star] in out.members


def test_survival_is_deterministic_per_seed():
    pop = make_pop(np.random.default_rng(9).random((30, 3)))
    a = moea.sra_survival(pop.members, 12, seed=5)
    b = moea.sra_survival(pop.members, 12, seed=5)
    assert [id(m) for m in a.members] == [id(m) for m in b.members]


def test_single_objective_survival_is_truncation():
    pop = make_pop([[0.3], [0.1], [0.2], [0.1]])
    out = moea.sra_survival(pop.members, 2, seed=0)
    assert [m.values[0] for m in out.members] == [0.1, 0.1]
    assert out.members[0] is pop.members[1]


def test_pc_outside_unit_interval():
    with pytest.raises(ConfigurationError):
        moea.sra_rank(np.random.default_rng(0).random((4, 2)), pc=1.5)


# ---------------------------------------------------------------- mating

def test_mating_select_tournament_rules():
    pop = make_pop(np.random.default_rng(0).random((6, 2)))
    a = moea.mating_select(pop, 6, seed=3)
    assert [id(m) for m in a] == [id(m) for m in moea.mating_select(pop, 6, seed=3)]
    with pytest.raises(SelectionError):
        moea.mating_select(make_pop(np.random.default_rng(1).random((2, 2))), 3, seed=0)
    with pytest.raises(SelectionError):
        moea.mating_select(Population([], 1), 1)


def test_every_member_can_be_picked():
    # ranks are survival positions, so even identical objectives keep a strict order
    pop = make_pop(np.zeros((5, 2)))
    picked = {id(m) for s in range(50) for m in moea.mating_select(pop, 5, seed=s)}
    assert len(picked) == 5


def test_tournament_winner_is_lower_rank():
    rng = np.random.default_rng(0)
    pop = make_pop(rng.random((8, 2)))
    counts = np.zeros(8)
    for s in range(400):
        for m in moea.mating_select(pop, 8, seed=s):
            counts[pop.members.index(m)] += 1
    # with replacement, index i wins with probability (2(n-i)-1)/n^2
    expected = np.array([(2 * (8 - i) - 1) / 64 for i in range(8)]) * 3200
    assert np.all(np.abs(counts - expected) < 5 * np.sqrt(expected) + 5)
    assert counts[0] > counts[-1]


# ---------------------------------------------------------------- variation

def test_crossover_examples():
    p = np.array([1.0, -2.0, 3.0])
    q = np.array([0.0, 4.0, -1.0])
    o1, o2 = moea.weight_crossover(p, q, u=1.0)
    assert np.array_equal(o1, p) and np.array_equal(o2, q)
    o1, o2 = moea.weight_crossover(p, q, u=0.5)
    assert np.array_equal(o1, (p + q) / 2) and np.array_equal(o2, (p + q) / 2)
    with pytest.raises(DataError):
        moea.weight_crossover(p, q[:2])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10**6))
def test_crossover_preserves_sum(n, seed):
    rng = np.random.default_rng(seed)
    p, q = rng.normal(size=n), rng.normal(size=n)
    o1, o2 = moea.weight_crossover(p, q, seed)
    assert np.allclose(o1 + o2, p + q, atol=1e-12)
    lo, hi = np.minimum(p, q), np.maximum(p, q)
    assert np.all(o1 >= lo - 1e-12) and np.all(o1 <= hi + 1e-12)


def test_mutation_small_sigma_and_statistics():
    g = np.linspace(-1, 1, 10)
    assert np.allclose(moea.gaussian_mutation(g, 1e-14, 0), g, atol=1e-12)
    big = moea.gaussian_mutation(np.zeros(100_000), 0.01, 1)
    assert abs(big.std() - 0.01) < 2e-4
    with pytest.raises(ConfigurationError):
        moea.gaussian_mutation(g, 0.0)
    with pytest.raises(ConfigurationError):
        VariationSpec(sigma=-1)


# ---------------------------------------------------------------- reproduction

def _problem(criteria=("CE", "FI", "FG"), n=200):
    ds = synth_biased(n, 3, 0.3, 0)
    tr, va = standardize(*split(ds, SplitSpec((0.5, 0.5), 0)))
    net = NetSpec(ds.dim, 4)
    return moea.Problem(net, tr, make_groups(tr, ["s"], ["1"]), va, make_groups(va, ["s"], ["1"]), criteria,
                        tspec=TrainSpec(batch_size=20))


def test_offspring_count_formula():
    assert ReproSpec(10, ("CE", "FI", "FG")).kappa(100) == 70
    assert 3 * 10 + 100 == 130
    assert ReproSpec(10, ("CE",)).kappa(300) == 290
    with pytest.raises(ConfigurationError):
        ReproSpec(10, ("CE", "FI", "FG")).kappa(20)


@pytest.mark.parametrize("criteria,K,lam", [(("CE", "FI", "FG"), 2, 8), (("CE",), 3, 5)])
def test_reproduce_produces_mK_plus_lambda(criteria, K, lam):
    prob = _problem(criteria)
    members = [prob.individual(init_genome(prob.net, i)) for i in range(lam)]
    pop = Population(members, lam)
    repro = ReproSpec(K, prob.losses)
    kids = moea.reproduce(pop, repro, VariationSpec(), prob, seed=1, gen=1)
    assert len(kids) == repro.m * K + lam
    assert all(k.birth_gen == 1 and k.lineage_tag in prob.losses for k in kids)
    again = moea.reproduce(pop, repro, VariationSpec(), prob, seed=1, gen=1)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(kids, again))


def test_best_on_tie_breaks_by_ce_then_rank():
    pop = make_pop([[0.5, 0.1], [0.4, 0.1], [0.4, 0.1], [0.1, 0.3]])
    assert moea.best_on(pop, 1, 0) is pop.members[1]
    assert moea.best_on(pop, 0, 0) is pop.members[3]
