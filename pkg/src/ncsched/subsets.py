"""Colexicographic encoding of M-subsets of {1..N} as action indices.

Subsets are represented as sorted tuples of 1-based subsystem ids.  In
colex order a subset precedes another iff its largest differing element
is smaller, so for N=3, M=1 the order is {1},{2},{3} and for N=6, M=3 it
runs from {1,2,3} (index 0) to {4,5,6} (index C(6,3)-1).
"""

from math import comb

import numpy as np

from .errors import ContractViolation


def n_actions(n_subsystems, n_channels):
    return comb(n_subsystems, n_channels)


def action_to_subset(action, n_subsystems, n_channels):
    """Unrank `action` into a sorted tuple of 1-based subsystem ids."""
    count = comb(n_subsystems, n_channels)
    if not 0 <= action < count:
        raise ContractViolation(
            f"action index {action} out of range [0, {count}) for "
            f"N={n_subsystems}, M={n_channels}"
        )
    members = [0] * n_channels
    rank = int(action)
    n = n_subsystems
    k = n_channels
    while k > 0:
        n -= 1
        offset = comb(n, k)
        if rank >= offset:
            rank -= offset
            k -= 1
            members[k] = n + 1  # store 1-based
    return tuple(members)


def subset_to_action(subset, n_subsystems, n_channels):
    """Colex rank of a subset given as 1-based subsystem ids."""
    members = sorted(subset)
    if len(members) != n_channels or len(set(members)) != n_channels:
        raise ContractViolation(f"subset {subset} is not an {n_channels}-subset")
    if members and (members[0] < 1 or members[-1] > n_subsystems):
        raise ContractViolation(f"subset {subset} not within 1..{n_subsystems}")
    return sum(comb(c - 1, j + 1) for j, c in enumerate(members))


def membership_matrix(n_subsystems, n_channels):
    """Boolean (n_actions, N) table: row a marks the members of subset a."""
    count = comb(n_subsystems, n_channels)
    table = np.zeros((count, n_subsystems), dtype=bool)
    for a in range(count):
        for member in action_to_subset(a, n_subsystems, n_channels):
            table[a, member - 1] = True
    return table
