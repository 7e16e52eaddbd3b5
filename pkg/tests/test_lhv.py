import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellscale import BellExpression, CorrelationTerm, StructureError, build_bell_expression
from bellscale.errors import BellError
from bellscale.lhv import (
    DeterministicStrategy,
    algebraic_bound,
    lhv_max,
    lhv_sample,
    lhv_value,
    partition_values,
    shard_ranges,
)
from oracles import brute_force_lhv_max, product_form_value


def strat(*pairs):
    return DeterministicStrategy(len(pairs), tuple(pairs))


def test_lhv_value_examples():
    e2 = build_bell_expression(2, -1)
    assert lhv_value(e2, strat((1, 1), (1, -1))) == 1
    assert lhv_value(e2, strat((1, 1), (1, 1))) == -1
    e3 = build_bell_expression(3, -1, leader=1)
    # observable 2 of the leader is multiplied by a zero partition; either value works
    for a2 in (1, -1):
        assert lhv_value(e3, strat((1, a2), (1, 1), (1, -1))) == 1


def test_lhv_value_type_is_exact():
    value = lhv_value(build_bell_expression(4, 1), DeterministicStrategy.from_index(4, 37))
    assert isinstance(value, Fraction)


@pytest.mark.parametrize("n,sign,leader", [(2, 1, 1), (3, -1, 1), (3, 1, 3), (4, -1, 1), (5, 1, 2)])
def test_lhv_value_matches_product_form_oracle(n, sign, leader):
    expr = build_bell_expression(n, sign, leader)
    for idx in range(4**n):
        s = DeterministicStrategy.from_index(n, idx)
        num, den = product_form_value(n, sign, s.assignment, leader)
        assert lhv_value(expr, s) == Fraction(num, den)


def test_lhv_value_dimension_mismatch():
    with pytest.raises(BellError):
        lhv_value(build_bell_expression(3, 1), DeterministicStrategy.from_index(2, 0))


@pytest.mark.parametrize(
    "inputs,expected",
    [
        ((1, 1, 1, -1), (2, 0)),
        ((1, 1, 1, 1), (0, 2)),
        ((1, -1, -1, 1), (0, 2)),
        ((1, 1, -1, -1), (0, -2)),
    ],
)
def test_partition_values_examples(inputs, expected):
    assert partition_values(*inputs) == expected


def test_partition_exclusivity_all_assignments():
    for a1, a2, b1, b2 in itertools.product((1, -1), repeat=4):
        pm, pp = partition_values(a1, a2, b1, b2)
        assert pm * pm + pp * pp == 4
        assert (pm == 0) != (pp == 0)
        assert {abs(pm), abs(pp)} == {0, 2}


def test_partition_values_rejects_non_pm1():
    with pytest.raises(BellError):
        partition_values(1, 0, 1, 1)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_strategy_encoding_round_trip(n):
    for idx in range(4**n):
        s = DeterministicStrategy.from_index(n, idx)
        assert s.index == idx
        assert all(v in (1, -1) for pair in s.assignment for v in pair)


def test_strategy_encoding_layout():
    # site 1 owns the top bit pair; observable 1 is the high bit of the pair
    s = DeterministicStrategy.from_index(3, 0b10_00_01)
    assert s.assignment == ((-1, 1), (1, 1), (1, -1))
    with pytest.raises(BellError):
        DeterministicStrategy.from_index(2, 16)


@pytest.mark.parametrize("n", range(2, 9))
@pytest.mark.parametrize("sign", [1, -1])
def test_lhv_max_is_one(n, sign):
    result = lhv_max(build_bell_expression(n, sign))
    assert result.max_value == 1
    assert result.exhaustive
    assert result.evaluated == 4**n
    assert abs(lhv_value(build_bell_expression(n, sign), result.witness)) == 1


@pytest.mark.parametrize("n,sign,leader", [(2, 1, 1), (3, -1, 1), (3, 1, 2), (4, 1, 1), (5, -1, 4)])
def test_lhv_max_matches_brute_force(n, sign, leader):
    num, den = brute_force_lhv_max(n, sign, leader)
    assert lhv_max(build_bell_expression(n, sign, leader)).max_value == Fraction(num, den)


def test_lhv_max_chsh_witness():
    result = lhv_max(build_bell_expression(2, 1))
    assert result.max_value == 1
    # index 0 is all +1: the plus partition is active (P- = 0, P+ = 2)
    assert result.witness.index == 0
    (a1, a2), (b1, b2) = result.witness.assignment
    assert partition_values(a1, a2, b1, b2) == (0, 2)


def test_lhv_max_witness_is_lowest_index():
    expr = build_bell_expression(4, -1)
    result = lhv_max(expr)
    first = next(i for i in range(4**4) if abs(lhv_value(expr, DeterministicStrategy.from_index(4, i))) == 1)
    assert result.witness.index == first


def test_lhv_max_on_hand_built_expression():
    # two terms that can both be +1: max is 2 * normalization
    expr = BellExpression(
        n=2, sign=1, leader=1, norm_exponent=1,
        terms=(CorrelationTerm(1, (1, 1)), CorrelationTerm(1, (2, 2))),
    )
    assert lhv_max(expr).max_value == 1
    expr = BellExpression(
        n=2, sign=1, leader=1, norm_exponent=2,
        terms=(CorrelationTerm(1, (1, 1)), CorrelationTerm(1, (2, 2))),
    )
    assert lhv_max(expr).max_value == Fraction(1, 2)


def test_lhv_max_cap():
    with pytest.raises(BellError, match="cap"):
        lhv_max(build_bell_expression(6, 1), cap=5)


def test_lhv_sample_is_lower_bound():
    expr = build_bell_expression(6, 1)
    result = lhv_sample(expr, 500, seed=3)
    assert not result.exhaustive
    assert 0 <= result.max_value <= 1
    assert lhv_value(expr, result.witness) in (result.max_value, -result.max_value)


@pytest.mark.parametrize("n", [3, 4])
def test_global_negation(n):
    expr = build_bell_expression(n, -1)
    for idx in range(4**n):
        s = DeterministicStrategy.from_index(n, idx)
        flipped = DeterministicStrategy(n, tuple((-a, -b) for a, b in s.assignment))
        assert lhv_value(expr, flipped) == (-1) ** n * lhv_value(expr, s)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 6),
    sign=st.sampled_from([1, -1]),
    cuts=st.lists(st.floats(0, 1), max_size=6),
)
def test_sharding_soundness(n, sign, cuts):
    expr = build_bell_expression(n, sign)
    total = 4**n
    edges = sorted({0, total, *(int(c * total) for c in cuts)})
    ranges = [(lo, hi) for lo, hi in zip(edges, edges[1:]) if hi > lo]
    sharded = lhv_max(expr, ranges=ranges, threads=2)
    whole = lhv_max(expr, threads=1)
    assert sharded.max_value == whole.max_value
    assert sharded.witness.index == whole.witness.index


def test_shard_ranges_cover():
    for total, shards in [(16, 3), (1024, 7), (5, 10)]:
        ranges = shard_ranges(total, shards)
        assert ranges[0][0] == 0 and ranges[-1][1] == total
        assert all(a[1] == b[0] for a, b in zip(ranges, ranges[1:]))


@pytest.mark.parametrize("n,sign", [(4, -1), (9, 1), (2, 1), (3, -1), (7, 1)])
def test_algebraic_bound(n, sign):
    assert algebraic_bound(build_bell_expression(n, sign)) == 1


def test_algebraic_bound_refuses_unknown_structure():
    expr = BellExpression(
        n=2, sign=1, leader=1, norm_exponent=1,
        terms=(CorrelationTerm(1, (1, 1)), CorrelationTerm(1, (2, 2))),
    )
    with pytest.raises(StructureError, match="structure unknown"):
        algebraic_bound(expr)
