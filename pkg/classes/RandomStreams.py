"""Derived random streams.

Every stream is a function of (seed, purpose, index) only, so replicate r or
trial m draws the same numbers whichever worker runs it and in whatever order.
"""
import numpy as np

from classes.Errors import InvalidParameterError


class RandomStreams:
    DATA = 0
    BOOTSTRAP = 1
    CROSS_VALIDATION = 2
    TRIAL = 3

    @staticmethod
    def stream(seed: int, purpose: int, index: int) -> np.random.Generator:
        """Generator for one (seed, purpose, index) triple"""
        return np.random.default_rng(
            np.random.SeedSequence([int(seed), int(purpose), int(index)])
        )

    @staticmethod
    def derive_seed(seed: int, purpose: int, index: int) -> int:
        """A fresh 63-bit seed for nested work, e.g. the bootstrap inside trial m"""
        state = np.random.SeedSequence([int(seed), int(purpose), int(index)])
        return int(state.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

    @staticmethod
    def resample(n: int, rng: np.random.Generator) -> np.ndarray:
        """n indices drawn uniformly from 0..n-1 with replacement"""
        if n < 1:
            raise InvalidParameterError(f"n must be at least 1, got {n}")
        return rng.integers(0, n, size=n)
