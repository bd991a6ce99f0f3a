"""Node response latency model."""
import numpy as np
from scipy.stats import truncnorm

from apps.oracle.exceptions import ContractViolation

LATENCY_FLOOR = 0.001
JITTER_RATIO = 0.25
REJECTION_TRIES = 8


def sample_latency(mu: float, sigma: float, rng: np.random.Generator) -> float:
    """
    One draw from N(mu, sigma**2) truncated below at 1 ms.

    Draws under the floor are redrawn; when the floor sits far out in the
    upper tail the draw comes from ``scipy.stats.truncnorm`` instead.
    """
    if mu <= 0:
        raise ContractViolation(f"latency mean must be > 0, got {mu}")
    if sigma <= 0:
        return float(mu)
    for _ in range(REJECTION_TRIES):
        draw = float(rng.normal(mu, sigma))
        if draw >= LATENCY_FLOOR:
            return draw
    lower = (LATENCY_FLOOR - mu) / sigma
    return float(truncnorm.rvs(lower, np.inf, loc=mu, scale=sigma, random_state=rng))


def node_latency_mean(mu: float, sigma: float, rng: np.random.Generator) -> float:
    """Per-node fixed mean latency, drawn once at scenario setup."""
    return sample_latency(mu, sigma, rng)


def request_latency(node_mean: float, sigma: float, rng: np.random.Generator) -> float:
    """Per-request latency: the node's own mean plus N(0, (sigma/4)**2) jitter."""
    return sample_latency(node_mean, sigma * JITTER_RATIO, rng)
