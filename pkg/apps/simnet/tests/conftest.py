import pytest

from apps.simnet.services.config import SimConfig


@pytest.fixture
def small_config():
    """Twenty nodes, committee of five, ten tasks."""
    return SimConfig.from_settings(
        node_count=20,
        committee_size=5,
        task_count=10,
        seed=7,
    )


@pytest.fixture
def honest_config(small_config):
    """No adversaries and a noise-free source."""
    return small_config.with_overrides(malicious_fraction=0.0, source_noise=0.0)
