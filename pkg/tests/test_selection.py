import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from babel_ledger.generators import random_instance
from babel_ledger.market import CandidateTransaction as Cand
from babel_ledger.selection import (
    DpTuple, EmptyMempool, SelectionInstance, TooLarge, TupleNotFound, ValueModel, brute_force, dominates,
    get_block, optimal_table, processing_order, prune_dominated, scaled_total_value, scaling_factor,
    select_approx, select_optimal, utility, value,
)

THREE = SelectionInstance([Cand(1, 10, 0, 5), Cand(2, 7, 2, 4), Cand(3, 6, 3, 3)], 8, 4)
# the reserve binds: the optimum {2, 3} passes through a tuple that (space, value) pruning drops
RESIDUAL_TRAP = SelectionInstance([Cand(1, 10, 5, 1), Cand(2, 6, 0, 1), Cand(3, 11, 5, 2)], 3, 5)

seeds = st.integers(0, 2**32)
epsilons = st.sampled_from([Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)])


def _ids(result):
    return set(result.block)


def test_value_examples():
    c = Cand(1, 10, 0, 1, "T")
    other = Cand(2, 3, 0, 1, "T")
    assert value(c, [], ValueModel("token_decay", Fraction(1, 2))) == 10
    assert value(c, [other], ValueModel("token_decay", Fraction(1, 2))) == 5
    assert value(c, [other, Cand(3, 1, 0, 1, "T"), Cand(4, 1, 0, 1, "T")], ValueModel("token_decay", 1)) == 0
    assert value(c, [other], ValueModel("token_decay", 0)) == value(c, [other], ValueModel()) == 10
    assert value(c, [Cand(5, 1, 0, 1, "U")], ValueModel("token_decay", Fraction(1, 2))) == 10


def test_three_candidate_example():
    r = select_optimal(THREE)
    assert (_ids(r), r.utility, r.residual) == ({1, 3}, 16, 1)
    table = optimal_table(THREE)
    assert set(get_block(table, 3, 8)) == {1, 3}
    assert get_block(table, 1, 0) == []
    with pytest.raises(TupleNotFound):
        get_block(table, 1, 7)


def test_three_candidate_approx_and_oracle():
    assert brute_force(THREE).utility == 16
    assert select_approx(THREE, Fraction(1, 2)).utility >= 8


def test_empty_and_zero_reserve():
    empty = SelectionInstance([], 10, 7)
    assert select_optimal(empty) == brute_force(empty)
    assert (select_optimal(empty).block, select_optimal(empty).utility, select_optimal(empty).residual) == ([], 0, 7)
    broke = SelectionInstance([Cand(1, 5, 1, 1), Cand(2, 9, 3, 2)], 10, 0)
    r = select_optimal(broke)
    assert (r.block, r.utility, r.residual) == ([], 0, 0)
    with pytest.raises(EmptyMempool):
        select_approx(empty, Fraction(1, 2))
    with pytest.raises(ValueError):
        select_approx(THREE, Fraction(1))


def test_brute_force_guard():
    big = SelectionInstance([Cand(i, 1, 0, 1) for i in range(21)], 5, 0)
    with pytest.raises(TooLarge):
        brute_force(big)


def test_prune_examples():
    a, b = DpTuple(2, 5, 0, 0), DpTuple(3, 4, 0, 0)
    assert prune_dominated([a, b]) == [a]
    assert prune_dominated([b]) == [b]
    # equal (space, value): larger residual, then bit 0, survives
    assert prune_dominated([DpTuple(1, 1, 0, 0), DpTuple(1, 1, 3, 1)]) == [DpTuple(1, 1, 3, 1)]
    assert prune_dominated([DpTuple(1, 1, 3, 1), DpTuple(1, 1, 3, 0)]) == [DpTuple(1, 1, 3, 0)]
    # full dominance keeps the tuple with more reserve left
    kept = prune_dominated([DpTuple(1, 10, 0, 1), DpTuple(1, 6, 5, 1)], "full")
    assert len(kept) == 2


def test_processing_order_ties():
    order = processing_order([Cand(3, 4, 0, 2), Cand(2, 2, 0, 1), Cand(1, 4, 0, 2)])
    assert [c.id for c in order] == [2, 1, 3]


def test_space_value_pruning_misses_optimum_when_reserve_binds():
    assert brute_force(RESIDUAL_TRAP).utility == 17
    assert select_optimal(RESIDUAL_TRAP).utility == 17
    assert select_optimal(RESIDUAL_TRAP, "space_value").utility == 16


def test_scaling_factor_floor_and_feasible_max():
    assert scaling_factor(THREE, Fraction(1, 10)) == 1
    inst = SelectionInstance([Cand(1, 1000, 0, 100), Cand(2, 90, 0, 1)], 10, 0)
    # the oversized candidate does not set the scale
    assert scaling_factor(inst, Fraction(1, 2)) == 45
    assert scaled_total_value(inst, Fraction(1, 2)) == 1000 // 45 + 2


@settings(max_examples=150)
@given(seeds, st.booleans())
def test_optimal_matches_brute_force(seed, decay):
    inst = random_instance(random.Random(seed), 9, decay)
    assert select_optimal(inst).utility == brute_force(inst).utility


@settings(max_examples=100)
@given(seeds, st.booleans())
def test_blocks_are_feasible(seed, decay):
    inst = random_instance(random.Random(seed), 12, decay)
    by_id = {c.id: c for c in inst.mempool}
    for r in (select_optimal(inst), select_approx(inst, Fraction(1, 4)), select_optimal(inst, "space_value")):
        block = [by_id[i] for i in r.block]
        assert sum(c.size for c in block) <= inst.block_size
        assert r.residual == inst.reserve - sum(c.liability_cost for c in block) >= 0
        assert r.utility == utility(block, inst.model)


@settings(max_examples=100)
@given(seeds, st.booleans(), epsilons)
def test_approx_bound(seed, decay, eps):
    inst = random_instance(random.Random(seed), 14, decay)
    assert select_approx(inst, eps).utility >= (1 - eps) * select_optimal(inst).utility


@settings(max_examples=100)
@given(seeds)
def test_small_scale_reproduces_optimum(seed):
    inst = random_instance(random.Random(seed), 12, False)
    eps = Fraction(1, 10**6)
    assert scaling_factor(inst, eps) == 1
    assert select_approx(inst, eps).utility == select_optimal(inst).utility


@given(st.integers(1, 100), st.integers(0, 20), st.integers(1, 50), epsilons)
def test_single_fitting_candidate_selected(v, c, s, eps):
    inst = SelectionInstance([Cand(1, v, c, s)], s, c)
    assert select_approx(inst, eps).block == [1]


@settings(max_examples=60)
@given(seeds, st.booleans(), st.sampled_from(["full", "space_value"]))
def test_lists_are_antichains(seed, decay, dominance):
    inst = random_instance(random.Random(seed), 12, decay)
    lists = []
    select_optimal(inst, dominance, on_list=lambda j, u: lists.append(u))
    for u in lists:
        for a in u:
            for b in u:
                assert a is b or not dominates(a, b, dominance)


@settings(max_examples=60)
@given(seeds, st.booleans())
def test_space_value_lists_within_frontier_bound(seed, decay):
    inst = random_instance(random.Random(seed), 14, decay)
    bound = min(inst.block_size + 1, sum(c.initial_value for c in inst.mempool) + 1)
    lists = []
    select_optimal(inst, "space_value", on_list=lambda j, u: lists.append(u))
    for u in lists:
        assert len(u) <= bound
        assert all(x.space < y.space and x.value < y.value for x, y in zip(u, u[1:]))
