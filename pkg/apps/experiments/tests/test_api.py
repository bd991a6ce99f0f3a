"""
Tests for the read-only experiment run API.
"""
import pytest

from apps.experiments.models import ExperimentRun
from apps.experiments.tests.factories import ExperimentRunFactory

RUNS_URL = '/api/v1/experiments/runs/'


@pytest.mark.django_db
class TestRunList:
    """Listing and filtering stored runs."""

    def test_lists_all_runs(self, api_client, stored_runs):
        response = api_client.get(RUNS_URL)
        assert response.status_code == 200
        assert response.data['count'] == 3
        assert 'reputation_trace' not in response.data['results'][0]

    def test_filter_by_label(self, api_client, stored_runs):
        response = api_client.get(RUNS_URL, {'label': 'headline'})
        assert response.data['count'] == 2
        assert {run['variant'] for run in response.data['results']} == {'full', 'baseline'}

    def test_filter_by_variant_and_label(self, api_client, stored_runs):
        response = api_client.get(RUNS_URL, {'label': 'headline', 'variant': 'baseline'})
        assert response.data['count'] == 1
        assert response.data['results'][0]['accuracy'] == 0.9

    def test_min_accuracy(self, api_client, stored_runs):
        response = api_client.get(RUNS_URL, {'min_accuracy': 0.95})
        assert response.data['count'] == 2

    def test_failed_runs_filter(self, api_client, stored_runs):
        ExperimentRunFactory(status='FAILED', accuracy=None, error='ValidationError: bad')
        response = api_client.get(RUNS_URL, {'status': 'FAILED'})
        assert response.data['count'] == 1
        assert response.data['results'][0]['status_display'] == 'Failed'

    def test_ordering_by_accuracy(self, api_client, stored_runs):
        response = api_client.get(RUNS_URL, {'ordering': 'accuracy'})
        assert response.data['results'][0]['accuracy'] == 0.9

    def test_read_only(self, api_client, stored_runs):
        response = api_client.post(RUNS_URL, {'label': 'x'}, format='json')
        assert response.status_code == 405


@pytest.mark.django_db
class TestRunDetail:

    def test_detail_includes_trace(self, api_client, stored_runs):
        run = stored_runs[0]
        response = api_client.get(f'{RUNS_URL}{run.id}/')
        assert response.status_code == 200
        assert response.data['trace_length'] == 1
        assert response.data['metrics']['variant'] == 'full'
        assert response.data['config']['committee_size'] == 10

    def test_unknown_run(self, api_client, db):
        response = api_client.get(f'{RUNS_URL}00000000-0000-0000-0000-000000000000/')
        assert response.status_code == 404


@pytest.mark.django_db
class TestRecord:
    """ExperimentRun.record from report rows."""

    def test_failed_row(self):
        run = ExperimentRun.record('sweep', {'variant': 'full', 'seed': 3, 'accuracy': 0.5,
                                             'error': 'ValidationError: bad'})
        assert run.status == 'FAILED'
        assert run.accuracy is None

    def test_nan_is_stored_as_null(self):
        run = ExperimentRun.record('sweep', {'variant': 'full', 'seed': 3, 'mean_variance': float('nan')})
        run.refresh_from_db()
        assert run.metrics['mean_variance'] is None
        assert run.mean_variance is None
        assert run.status == 'COMPLETED'


@pytest.mark.django_db
class TestHealth:

    def test_healthy(self, api_client, stored_runs):
        response = api_client.get('/api/v1/health/')
        assert response.status_code == 200
        assert response.data == {'status': 'healthy', 'database': 'ok', 'runs': 3}
