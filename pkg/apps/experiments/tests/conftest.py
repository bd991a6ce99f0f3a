import pytest
from rest_framework.test import APIClient

from apps.simnet.services.config import SimConfig

from .factories import ExperimentRunFactory


@pytest.fixture
def api_client():
    return APIClient()


@pytest.fixture
def tiny_config():
    """Fifteen nodes, committee of four, three tasks."""
    return SimConfig.from_settings(node_count=15, committee_size=4, task_count=3, seed=3)


@pytest.fixture
def stored_runs(db):
    return [
        ExperimentRunFactory(label='headline', variant='full', seed=1),
        ExperimentRunFactory(label='headline', variant='baseline', seed=1, accuracy=0.9),
        ExperimentRunFactory(label='alpha', variant='full', seed=2),
    ]
