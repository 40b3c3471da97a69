"""Deterministic random-number plumbing.

Every Monte Carlo run gets its own counter-based stream so that results
never depend on scheduling or worker count:

* the per-run key is ``splitmix64(master_seed + (run_id + 1) * GOLDEN)``,
  a bijective 64-bit mix, so distinct run ids can never collide for a
  given master seed;
* the stream itself is Philox (counter-based), keyed with that value.

A stage declares how many standard-normal draws it consumes per step and
the kernel hands it exactly that many; stages never see the generator.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
# Weyl increment used by the splitmix64 generator; odd, so multiples are
# distinct mod 2**64.
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    """Finalizing mix of splitmix64. Bijective on 64-bit integers."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_run_seed(master_seed: int, run_id: int) -> int:
    """64-bit stream key for one run of an ensemble.

    Deterministic in (master_seed, run_id) and injective in run_id for a
    fixed master seed, so no two runs of an ensemble share a stream.
    """
    if not 0 <= master_seed < 1 << 64:
        raise ValueError(f"master_seed must be in [0, 2**64), got {master_seed}")
    if run_id < 0:
        raise ValueError(f"run_id must be non-negative, got {run_id}")
    return splitmix64((master_seed + (run_id + 1) * GOLDEN_GAMMA) & _MASK64)


def make_stream(seed: int) -> np.random.Generator:
    """Counter-based generator for one run, keyed with a 64-bit seed."""
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"stream seed must be in [0, 2**64), got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))
