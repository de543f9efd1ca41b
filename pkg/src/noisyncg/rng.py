"""Seeded, splittable random streams for reproducible solver runs.

Every run owns a single root seed.  Each (iteration, oracle) pair maps to
an independent substream derived from that seed, so a run is bit-for-bit
reproducible regardless of how many draws an individual oracle consumes,
and oracle draws are independent across iterations.
"""

import numpy as np

# Oracle slots, one substream per (iteration, slot).
F_INCUMBENT = 0
F_TRIAL = 1
GRADIENT = 2
HESSIAN = 3
SUBSAMPLE_GRADIENT = 4
SUBSAMPLE_HESSIAN = 5


class RunRng:
    """Factory of per-(iteration, oracle) numpy Generators for one run."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, iteration: int, oracle: int) -> np.random.Generator:
        """Return the Generator for the given iteration and oracle slot.

        The same (seed, iteration, oracle) triple always yields the same
        stream; distinct triples yield statistically independent streams.
        """
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(int(iteration), int(oracle)))
        return np.random.default_rng(ss)
