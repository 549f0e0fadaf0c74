"""Deterministic sub-stream derivation for seeded computations."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 63) - 1


def sub_rng(*components: int) -> np.random.Generator:
    """Generator keyed by an ordered tuple of integers.

    Distinct component tuples yield independent streams; the same tuple always
    yields the same stream. Negative components are folded into the non-negative
    range SeedSequence requires.
    """
    entropy = [int(c) & _MASK for c in components]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sub_seed(*components: int) -> int:
    """Stable 63-bit integer derived from the components, for nested configs."""
    entropy = [int(c) & _MASK for c in components]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0] & _MASK)
