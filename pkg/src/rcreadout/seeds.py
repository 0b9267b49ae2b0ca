"""Deterministic 64-bit seed derivation.

Every random draw in a pipeline run descends from a single master seed
through `derive_seed`.  Domains keep training data, test data, network
sampling and head initialization statistically independent; within a
domain, trajectories (or networks, or restarts) are indexed.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

DOMAIN_TRAIN_DATA = 1
DOMAIN_TEST_DATA = 2
DOMAIN_NETWORK = 3
DOMAIN_HEAD_INIT = 4

DOMAIN_NAMES = {
    DOMAIN_TRAIN_DATA: "train-data",
    DOMAIN_TEST_DATA: "test-data",
    DOMAIN_NETWORK: "network",
    DOMAIN_HEAD_INIT: "head-init",
}


def mix64(x: int) -> int:
    """One round of the splitmix64 avalanche finalizer."""
    x &= _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def derive_seed(master_seed: int, domain: int, index: int) -> int:
    """Derive the seed for item `index` of `domain` under `master_seed`.

    Two avalanche rounds of splitmix64 over the (master, domain, index)
    concatenation; distinct (domain, index) pairs collide only with
    probability ~2^-64.
    """
    if domain not in DOMAIN_NAMES:
        raise ValueError(f"unknown seed domain {domain}")
    if index < 0:
        raise ValueError("seed index must be nonnegative")
    x = (master_seed + _GOLDEN * domain) & _MASK
    x = mix64(x)
    x = mix64(x ^ ((index * _GOLDEN) & _MASK))
    return x
