"""
Tests for the temporary consensus network and aggregation.
"""
import pytest

from apps.oracle.exceptions import ConsensusAborted, ContractViolation
from apps.oracle.services.aggregation import (
    AggregationStrategy,
    JoinKind,
    NetworkRound,
    agreed,
    aggregate_values,
    detect_outliers,
    join_network,
    local_views,
    rank_results,
    run_round1,
    run_round2_and_aggregate,
    submit_result,
)
from apps.oracle.services.selection import CostCounter

from .conftest import timed


def build_network(distances, capacity=None):
    """Join nodes ``n<i>`` in the given order with the given distances."""
    net = None
    for i, distance in enumerate(distances):
        net, _ = join_network(net, f'n{i}', distance, event_id='q', capacity=capacity or len(distances))
    return net


class TestJoinNetwork:
    """Priority-gated membership."""

    def test_first_responder_creates_and_leads(self):
        net, outcome = join_network(None, 'a', 50, event_id='q', capacity=3)
        assert outcome.kind == JoinKind.CREATED
        assert net.leader == 'a'
        assert net.round == NetworkRound.FORMING

    def test_members_kept_in_priority_order(self):
        net = build_network([30, 10, 20])
        assert net.member_ids == ['n1', 'n2', 'n0']

    def test_full_network_evicts_lowest(self):
        net = build_network([30, 10], capacity=2)
        net, outcome = join_network(net, 'c', 5)
        assert outcome == outcome.__class__(JoinKind.EVICTED, victim='n0')
        assert net.member_ids == ['c', 'n1']

    def test_evicted_leader_is_replaced(self):
        net = build_network([50, 10], capacity=2)
        net, _ = join_network(net, 'c', 5)
        assert net.leader == 'c'

    def test_lower_priority_rejected_when_full(self):
        net = build_network([10, 20], capacity=2)
        net, outcome = join_network(net, 'c', 30)
        assert outcome.kind == JoinKind.REJECTED
        assert len(net.members) == 2

    def test_duplicate_join(self):
        net = build_network([10, 20], capacity=3)
        _, outcome = join_network(net, 'n0', 10)
        assert outcome.kind == JoinKind.DUPLICATE

    def test_creation_needs_capacity(self):
        with pytest.raises(ContractViolation):
            join_network(None, 'a', 1, event_id='q', capacity=0)


class TestRound1:
    """Agreement on revealed results."""

    def test_members_agree_on_leader_view(self):
        net = build_network([10, 20, 30])
        view = [timed('n2', 3.0, distance=30), timed('n0', 1.0, distance=10), timed('n1', 2.0, distance=20)]
        proposal = run_round1(net, {'n0': view})
        assert [r.node_id for r in proposal] == ['n0', 'n1', 'n2']
        assert agreed(net)
        assert net.round == NetworkRound.ROUND1

    def test_leader_crash_fails_over(self):
        net = build_network([10, 20, 30])
        net.crash('n0')
        view = [timed('n1', 2.0, distance=20)]
        proposal = run_round1(net, {'n1': view})
        assert net.leader == 'n1'
        assert [r.node_id for r in proposal] == ['n1']

    def test_no_quorum_aborts(self):
        net = build_network([10, 20, 30, 40])
        net.crash('n1')
        net.crash('n2')
        with pytest.raises(ConsensusAborted):
            run_round1(net, {'n0': []})

    def test_late_result_missing_from_leader_view_is_left_out(self):
        net = build_network([10, 20, 30])
        results = [
            timed('n0', 1.0, timestamp=1.00, distance=10),
            timed('n1', 2.0, timestamp=1.02, distance=20),
            timed('n2', 3.0, timestamp=1.09, distance=30),
        ]
        views = local_views(results, {'n0': 1.05, 'n1': 1.05, 'n2': 1.10})
        assert [r.node_id for r in views['n2']] == ['n0', 'n1', 'n2']
        proposal = run_round1(net, views)
        assert [r.node_id for r in proposal] == ['n0', 'n1']
        assert agreed(net)

    def test_rank_results_dedupes_and_counts(self):
        counter = CostCounter()
        results = [timed('a', 1.0, distance=5), timed('a', 9.0, distance=5), timed('b', 2.0, distance=1)]
        ranked = rank_results(results, 5, counter)
        assert [r.node_id for r in ranked] == ['b', 'a']
        assert ranked[1].value == 1.0
        assert counter.comparisons > 0


class TestOutliers:

    def test_single_outlier(self):
        assert detect_outliers([5, 5, 5, 50]) == {3}

    def test_zero_mad_flags_every_deviation(self):
        assert detect_outliers([1, 1, 1, 5, 5]) == {3, 4}

    def test_spread_values_have_no_outliers(self):
        assert detect_outliers([99.0, 100.0, 101.0, 100.5]) == set()

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            detect_outliers([])

    def test_strategies(self):
        assert aggregate_values([1.0, 2.0, 10.0], AggregationStrategy.MEDIAN) == 2.0
        assert aggregate_values([1.0, 2.0, 9.0], AggregationStrategy.MEAN) == 4.0


class TestRound2:
    """Aggregation over the filtered set."""

    def _committee(self):
        return [
            timed('n0', 100.0, distance=10),
            timed('n1', 100.0, distance=20),
            timed('n2', 100.0, distance=30),
            timed('n3', 500.0, distance=40),
        ]

    def test_outlier_is_incorrect_and_aggregate_uses_filtered(self):
        net = build_network([10, 20, 30, 40])
        committee = self._committee()
        filtered = committee[:2] + committee[3:]
        result = run_round2_and_aggregate(net, filtered, top_t=committee)
        assert result.value == 100.0
        assert result.contributors == ('n0', 'n1', 'n3')
        assert result.correct_flags == {'n0': True, 'n1': True, 'n2': False, 'n3': False}
        assert result.outliers == ('n3',)
        assert agreed(net)

    def test_filter_dropped_node_is_incorrect_and_unpaid(self):
        net = build_network([10, 20, 30])
        committee = self._committee()[:3]
        result = run_round2_and_aggregate(net, committee[:2], top_t=committee)
        assert result.correct_flags['n2'] is False
        assert 'n2' not in result.contributors
        assert result.correct_nodes == ['n0', 'n1']

    def test_flagged_submitters_are_incorrect(self):
        net = build_network([10, 20, 30, 40])
        committee = self._committee()[:3]
        result = run_round2_and_aggregate(net, committee, top_t=committee, flagged=['n3'])
        assert result.correct_flags['n3'] is False
        assert result.correct_nodes == ['n0', 'n1', 'n2']

    def test_empty_filtered_set_rejected(self):
        net = build_network([10])
        with pytest.raises(ContractViolation):
            run_round2_and_aggregate(net, [])

    def test_leader_submits_once(self):
        net = build_network([10, 20, 30])
        calls = []

        def submit(result, node_id):
            calls.append(node_id)
            return True

        result = run_round2_and_aggregate(net, self._committee()[:3], submit=submit)
        assert calls == ['n0']
        assert result.submitted_by == 'n0'
        assert net.round == NetworkRound.SUBMITTED

    def test_crashed_leader_hands_over_submission(self):
        net = build_network([10, 20, 30])
        result = run_round2_and_aggregate(net, self._committee()[:3])
        net.crash('n0')
        calls = []
        assert submit_result(net, result, lambda r, node_id: calls.append(node_id) or True)
        assert calls == ['n1']

    def test_refused_submission_is_not_retried(self):
        net = build_network([10, 20, 30])
        result = run_round2_and_aggregate(net, self._committee()[:3])
        assert submit_result(net, result, lambda r, node_id: False) is False


class TestLocalViews:
    """Per-member arrival cut-offs."""

    def test_each_member_sees_results_up_to_its_cutoff(self):
        results = [timed('a', 1.0, timestamp=0.5), timed('b', 2.0, timestamp=0.9), timed('c', 3.0, timestamp=1.2)]
        views = local_views(results, {'a': 0.95, 'b': 0.6, 'c': 0.4})
        assert [r.node_id for r in views['a']] == ['a', 'b']
        assert [r.node_id for r in views['b']] == ['a', 'b']
        assert [r.node_id for r in views['c']] == ['c']

    def test_own_result_always_visible(self):
        views = local_views([timed('a', 1.0, timestamp=5.0)], {'a': 0.0})
        assert len(views['a']) == 1
