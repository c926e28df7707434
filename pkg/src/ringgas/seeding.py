"""Named substreams from a single root seed.

Every stochastic consumer gets its own stream derived from (seed, name), so
adding a consumer never perturbs the draws of existing ones.
"""

import numpy as np


def _sequence(seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(name.encode("utf-8")))


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Generator for the (seed, name) substream."""
    return np.random.default_rng(_sequence(seed, name))


def derive_seed(seed: int, name: str) -> int:
    """Integer sub-seed for APIs that take a plain seed."""
    return int(_sequence(seed, name).generate_state(2, np.uint64)[0])
