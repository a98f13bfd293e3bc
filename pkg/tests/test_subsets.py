from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncsched.errors import ContractViolation
from ncsched.subsets import action_to_subset, membership_matrix, n_actions, subset_to_action


def test_singleton_enumeration():
    assert action_to_subset(0, 3, 1) == (1,)
    assert action_to_subset(1, 3, 1) == (2,)
    assert action_to_subset(2, 3, 1) == (3,)


def test_colex_first_and_last():
    assert n_actions(6, 3) == 20
    assert action_to_subset(0, 6, 3) == (1, 2, 3)
    assert action_to_subset(19, 6, 3) == (4, 5, 6)


def test_round_trip_exhaustive():
    for n in range(2, 9):
        for m in range(1, n):
            seen = set()
            for a in range(comb(n, m)):
                subset = action_to_subset(a, n, m)
                assert len(subset) == m
                assert subset == tuple(sorted(subset))
                assert subset_to_action(subset, n, m) == a
                seen.add(subset)
            assert len(seen) == comb(n, m)


def test_colex_order_is_increasing():
    subsets = [action_to_subset(a, 6, 3) for a in range(20)]
    # colex: compare reversed tuples
    keys = [tuple(reversed(s)) for s in subsets]
    assert keys == sorted(keys)


def test_out_of_range_action():
    with pytest.raises(ContractViolation):
        action_to_subset(3, 3, 1)
    with pytest.raises(ContractViolation):
        action_to_subset(-1, 3, 1)
    with pytest.raises(ContractViolation):
        subset_to_action((1, 1), 3, 2)
    with pytest.raises(ContractViolation):
        subset_to_action((0, 1), 3, 2)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_round_trip_property(data):
    n = data.draw(st.integers(2, 12))
    m = data.draw(st.integers(1, n - 1))
    a = data.draw(st.integers(0, comb(n, m) - 1))
    assert subset_to_action(action_to_subset(a, n, m), n, m) == a


def test_membership_matrix():
    table = membership_matrix(3, 1)
    assert table.shape == (3, 3)
    assert table.sum() == 3
    assert table[0, 0] and table[1, 1] and table[2, 2]
    table63 = membership_matrix(6, 3)
    assert table63.shape == (20, 6)
    assert (table63.sum(axis=1) == 3).all()
