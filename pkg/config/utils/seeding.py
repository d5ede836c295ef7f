"""
Seed derivation for reproducible replication studies.

Every training set and every metropolis chain draws from its own PCG64
stream. A row's seed is a 64-bit blake2b digest of
(master_seed, scenario, n, beta, replication), so any single row can be
reproduced in isolation and the output never depends on worker count.
"""

import hashlib
import math

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64+SeedSequence/blake2b-64"


def canonical_beta(beta):
    """Stable text form of an inverse temperature ("inf" for plug-in)."""
    if math.isinf(beta):
        return "inf"
    return format(float(beta), ".17g")


def derive_seed(master_seed, scenario_id, n, beta, replication):
    """
    64-bit seed for one replication.
    """
    raw = f"{int(master_seed)}|{scenario_id}|{int(n)}|{canonical_beta(beta)}|{int(replication)}"
    digest = hashlib.blake2b(raw.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def make_rng(seed, *spawn_key):
    """
    Generator for ``seed``; ``spawn_key`` selects an independent child
    stream (e.g. the chain index of a metropolis run).
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(sequence))
