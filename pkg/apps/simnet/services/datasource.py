"""
Ground-truth signal served by the simulated data sources.

value(t) = base + drift * t + W(t), where W is a random walk on a 10 ms grid
with Gaussian steps of variance noise_std**2 * step, interpolated linearly
between grid points. With a positive ``reversion`` time constant the walk is
pulled back towards zero (an Ornstein-Uhlenbeck walk): over a few seconds it
moves like the plain walk, over a long run it stays within about
noise_std * sqrt(reversion / 2) of the base. Steps are drawn lazily in
fixed-size chunks, each from its own seeded generator, so any time can be
replayed exactly from the seed.
"""
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.signal import lfilter

from apps.oracle.exceptions import ContractViolation

GRID_STEP = 0.01
CHUNK_STEPS = 4096


@dataclass
class DataSourceProcess:
    base_value: float
    drift_rate: float = 0.0
    noise_std: float = 0.0
    seed: int = 0
    reversion: float = 0.0
    _walk: List[np.ndarray] = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        if self.noise_std < 0:
            raise ContractViolation(f"noise_std must be >= 0, got {self.noise_std}")
        if self.reversion < 0:
            raise ContractViolation(f"reversion must be >= 0, got {self.reversion}")

    def _step_law(self) -> Tuple[float, float]:
        """(carry-over factor, step std) of one grid step."""
        if self.reversion > 0:
            phi = math.exp(-GRID_STEP / self.reversion)
            return phi, self.noise_std * math.sqrt(self.reversion * (1 - phi * phi) / 2)
        return 1.0, self.noise_std * math.sqrt(GRID_STEP)

    def _extend_to(self, chunk: int):
        phi, scale = self._step_law()
        while len(self._walk) <= chunk:
            index = len(self._walk)
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, index]))
            steps = rng.normal(0.0, scale, CHUNK_STEPS)
            start = float(self._walk[-1][-1]) if self._walk else 0.0
            path, _ = lfilter([1.0], [1.0, -phi], steps, zi=[phi * start])
            self._walk.append(np.concatenate(([start], path)))

    def _walk_at(self, step: int) -> float:
        chunk, offset = divmod(step, CHUNK_STEPS)
        self._extend_to(chunk)
        return float(self._walk[chunk][offset])

    def walk(self, time: float) -> float:
        if self.noise_std == 0:
            return 0.0
        position = time / GRID_STEP
        lower = int(math.floor(position))
        fraction = position - lower
        left = self._walk_at(lower)
        if fraction == 0:
            return left
        right = self._walk_at(lower + 1)
        return left + (right - left) * fraction

    def value_at(self, time: float) -> float:
        if time < 0:
            raise ContractViolation(f"time must be >= 0, got {time}")
        if time == 0:
            return self.base_value
        return self.base_value + self.drift_rate * time + self.walk(time)


def ground_truth(source: DataSourceProcess, time: float) -> float:
    return source.value_at(time)
