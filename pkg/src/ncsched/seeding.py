"""Deterministic RNG stream derivation.

Every random stream in an experiment is derived from the master seed and a
tuple key via numpy's ``SeedSequence(master_seed, spawn_key=key)``, which
hashes the pair.  The conventions:

    training run r proper        key = (r, ...)
    subsystem i, noise tag t     key = (..., i, t)      t in {INIT, PROCESS, MEAS}
    agent stream tag t           key = (..., AGENT_NS, t)
    evaluation rollout r         key = (EVAL_NS, r, ...)

Two runs of anything with the same master seed and key tuple therefore see
identical noise, independent of what other streams were consumed.
"""

import numpy as np

STREAM_INIT = 0
STREAM_PROCESS = 1
STREAM_MEAS = 2

AGENT_NS = 1_000  # agent tags: weight init / exploration / replay sampling
AGENT_WEIGHTS = 0
AGENT_EXPLORE = 1
AGENT_REPLAY = 2

EVAL_NS = 1_000_000


def substream(seed, key=()):
    """Generator for the stream identified by (seed, key)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def generator_state(gen):
    return gen.bit_generator.state


def restore_generator(state):
    gen = np.random.default_rng(0)
    gen.bit_generator.state = state
    return gen
