"""
Scheme-level outcomes over many seeds: headline comparison, variant ordering
and the malicious-fraction, committee-size and alpha sweeps.
"""
import numpy as np
import pytest

from apps.experiments.services.harness import run_scenario
from apps.experiments.services.variants import SchemeVariant
from apps.simnet.services.config import SimConfig

SEEDS = range(20)


def median_of(values) -> float:
    return float(np.median(list(values)))


def run_seeds(config: SimConfig, variant: SchemeVariant, seeds=SEEDS) -> list:
    return [run_scenario(config.with_overrides(seed=seed), variant) for seed in seeds]


@pytest.fixture(scope='module')
def headline_runs():
    """Full, Baseline and the two ablations on the default config, 1000 tasks."""
    config = SimConfig.from_settings(task_count=1000)
    return {variant: run_seeds(config, variant) for variant in SchemeVariant}


@pytest.mark.slow
@pytest.mark.integration
class TestHeadline:
    """Full against Baseline on the same seeds."""

    def test_full_is_more_accurate(self, headline_runs):
        full, baseline = headline_runs[SchemeVariant.FULL], headline_runs[SchemeVariant.BASELINE]
        gains = [f.accuracy - b.accuracy for f, b in zip(full, baseline)]
        assert median_of(gains) >= 0.02
        assert sum(g > 0 for g in gains) >= 16

    def test_full_reduces_variance(self, headline_runs):
        full, baseline = headline_runs[SchemeVariant.FULL], headline_runs[SchemeVariant.BASELINE]
        reductions = [1 - f.mean_variance / b.mean_variance for f, b in zip(full, baseline)]
        assert median_of(reductions) >= 0.30
        assert sum(r > 0 for r in reductions) >= 18

    def test_runs_conserve_tokens(self, headline_runs):
        assert all(m.tokens_conserved for runs in headline_runs.values() for m in runs)

    def test_filter_helps_accuracy(self, headline_runs):
        full = median_of(m.accuracy for m in headline_runs[SchemeVariant.FULL])
        no_filter = median_of(m.accuracy for m in headline_runs[SchemeVariant.NO_FILTER])
        assert full >= no_filter

    def test_reputation_helps_variance(self, headline_runs):
        full = median_of(m.mean_variance for m in headline_runs[SchemeVariant.FULL])
        no_reputation = median_of(m.mean_variance for m in headline_runs[SchemeVariant.NO_REPUTATION])
        assert full <= no_reputation


@pytest.mark.slow
@pytest.mark.integration
class TestSweeps:

    def test_malicious_fraction_hurts_baseline_more(self):
        base = SimConfig.from_settings(task_count=500)
        accuracy = {}
        for fraction in (0.05, 0.1, 0.2):
            config = base.with_overrides(malicious_fraction=fraction)
            for variant in (SchemeVariant.FULL, SchemeVariant.BASELINE):
                accuracy[variant, fraction] = median_of(m.accuracy for m in run_seeds(config, variant))
        for fraction in (0.05, 0.1, 0.2):
            assert accuracy[SchemeVariant.FULL, fraction] >= accuracy[SchemeVariant.BASELINE, fraction]
        full_decline = accuracy[SchemeVariant.FULL, 0.05] - accuracy[SchemeVariant.FULL, 0.2]
        baseline_decline = accuracy[SchemeVariant.BASELINE, 0.05] - accuracy[SchemeVariant.BASELINE, 0.2]
        assert full_decline < baseline_decline

    def test_committee_size_slows_baseline_only(self):
        base = SimConfig.from_settings(task_count=300)
        response = {}
        for size in (5, 10, 20, 40):
            config = base.with_overrides(committee_size=size)
            for variant in (SchemeVariant.FULL, SchemeVariant.BASELINE):
                response[variant, size] = median_of(
                    m.mean_response_time for m in run_seeds(config, variant))
        baseline = [response[SchemeVariant.BASELINE, size] for size in (5, 10, 20, 40)]
        assert all(b > a for a, b in zip(baseline, baseline[1:]))
        full_increase = response[SchemeVariant.FULL, 40] - response[SchemeVariant.FULL, 5]
        assert full_increase <= (baseline[-1] - baseline[0]) / 2

    def test_higher_alpha_trades_accuracy_for_speed(self):
        base = SimConfig.from_settings(task_count=300, strategy='mean')
        accuracy, response = [], []
        for alpha in (0.1, 0.5, 0.9):
            runs = run_seeds(base.with_overrides(alpha=alpha), SchemeVariant.FULL)
            accuracy.append(median_of(m.accuracy for m in runs))
            response.append(median_of(m.mean_response_time for m in runs))
        assert all(b <= a for a, b in zip(accuracy, accuracy[1:]))
        assert all(b <= a for a, b in zip(response, response[1:]))
