"""
Tests for hash-ring anchoring, priorities and top-t selection.
"""
from collections import Counter
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from apps.oracle.exceptions import ContractViolation
from apps.oracle.services.crypto_vrf import RING_SIZE, hash_to_ring, vrf_setup
from apps.oracle.services.selection import (
    CostCounter,
    assign_data_source,
    clockwise_distance,
    compute_anchor,
    compute_ring_priority,
    select_top_t,
    verify_ring_priority,
)

from .conftest import fake_claim


@pytest.fixture
def keys():
    return vrf_setup(11)


@pytest.fixture
def event():
    return compute_anchor('q1', 'b1')


class TestComputeAnchor:
    """Event anchors on the ring."""

    def test_deterministic(self):
        assert compute_anchor('q1', 'b1') == compute_anchor('q1', 'b1')

    def test_equals_hash_of_concatenation(self):
        assert compute_anchor('q1', 'b1').anchor == hash_to_ring(b'q1b1')

    def test_beacon_changes_anchor(self):
        anchors = {compute_anchor('q1', f'beacon-{i}').anchor for i in range(10_000)}
        assert len(anchors) == 10_000

    def test_empty_event_id_rejected(self):
        with pytest.raises(ContractViolation):
            compute_anchor('', 'b1')


class TestRingPriority:
    """Position expansion and winning distance."""

    def test_unit_reputation_gives_one_position(self, keys, event):
        assert len(compute_ring_priority(keys.secret_key, event, 1.0).positions) == 1

    def test_fractional_reputation_rounds_up(self, keys, event):
        assert len(compute_ring_priority(keys.secret_key, event, 2.3).positions) == 3

    def test_reputation_below_one_rejected(self, keys, event):
        with pytest.raises(ContractViolation):
            compute_ring_priority(keys.secret_key, event, 0.5)

    def test_clockwise_distance_wraps(self):
        assert clockwise_distance(100, 90) == RING_SIZE - 10
        assert clockwise_distance(100, 110) == 10

    def test_winning_position_is_nearest_clockwise(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 4.0)
        brute = min(clockwise_distance(event.anchor, p) for p in claim.positions)
        assert claim.distance == brute
        assert claim.priority == Fraction(1, max(brute, 1))

    def test_more_positions_never_increase_distance(self, keys, event):
        one = compute_ring_priority(keys.secret_key, event, 1.0)
        five = compute_ring_priority(keys.secret_key, event, 5.0)
        assert five.positions[0] == one.positions[0]
        assert five.distance <= one.distance


class TestVerifyRingPriority:
    """Anyone can recompute a published claim."""

    def test_honest_claim_accepted(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 3.0, 'node-a')
        assert verify_ring_priority(keys.public_key, event, claim, reputation=3.0)

    def test_wrong_public_key_rejected(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 1.0)
        assert not verify_ring_priority(vrf_setup(12).public_key, event, claim)

    def test_other_event_rejected(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 1.0)
        assert not verify_ring_priority(keys.public_key, compute_anchor('q2', 'b1'), claim)

    def test_inflated_position_count_rejected(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 3.0)
        assert not verify_ring_priority(keys.public_key, event, claim, reputation=1.0)

    def test_single_field_mutations_rejected(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 3.0)
        mutations = [
            replace(claim, distance=claim.distance + 1),
            replace(claim, winning_position=(claim.winning_position + 1) % RING_SIZE),
            replace(claim, positions=claim.positions[:-1]),
            replace(claim, positions=((claim.positions[0] + 1) % RING_SIZE,) + claim.positions[1:]),
            replace(claim, positions=()),
            replace(claim, proof=replace(claim.proof, value=(claim.proof.value + 1) % RING_SIZE)),
            replace(claim, proof=replace(claim.proof, proof=b'\x00' * 32)),
        ]
        for mutated in mutations:
            assert not verify_ring_priority(keys.public_key, event, mutated, reputation=3.0)


class TestSelectTopT:
    """Top-t ordering."""

    def _claims(self, event, n=8):
        return [
            compute_ring_priority(vrf_setup(100 + i).secret_key, event, 1.0, f'node-{i}')
            for i in range(n)
        ]

    def test_sorted_by_distance(self, event):
        top = select_top_t(self._claims(event), 3)
        distances = [c.distance for c in top]
        assert distances == sorted(distances)
        assert len(top) == 3

    def test_fewer_claims_than_t(self, event):
        assert len(select_top_t(self._claims(event, 2), 5)) == 2

    def test_independent_of_input_order(self, event):
        claims = self._claims(event)
        assert select_top_t(claims, 4) == select_top_t(list(reversed(claims)), 4)

    def test_counts_comparisons(self, event):
        counter = CostCounter()
        select_top_t(self._claims(event), 3, counter)
        assert counter.comparisons > 0

    def test_non_positive_t_rejected(self, event):
        with pytest.raises(ContractViolation):
            select_top_t(self._claims(event), 0)

    def test_data_source_assignment(self, keys, event):
        claim = compute_ring_priority(keys.secret_key, event, 1.0)
        assert assign_data_source(claim, 4) == claim.winning_position % 4
        with pytest.raises(ContractViolation):
            assign_data_source(claim, 0)


@pytest.mark.slow
class TestSelectionStatistics:
    """Frequency checks over many events."""

    EVENTS = 10_000

    def test_equal_reputations_select_uniformly(self):
        keys = [vrf_setup(200 + i) for i in range(10)]
        wins = Counter()
        for e in range(self.EVENTS):
            event = compute_anchor(f'event-{e}', 'beacon')
            claims = [compute_ring_priority(k.secret_key, event, 1.0, str(i)) for i, k in enumerate(keys)]
            wins[select_top_t(claims, 1)[0].node_id] += 1
        counts = [wins[str(i)] for i in range(len(keys))]
        assert chisquare(counts).pvalue >= 0.001

    def test_extra_positions_raise_selection_frequency(self):
        keys = [vrf_setup(300 + i) for i in range(10)]
        heavy_wins = 0
        for e in range(self.EVENTS):
            event = compute_anchor(f'event-{e}', 'beacon')
            claims = [
                compute_ring_priority(k.secret_key, event, 5.0 if i == 0 else 1.0, str(i))
                for i, k in enumerate(keys)
            ]
            heavy_wins += select_top_t(claims, 1)[0].node_id == '0'
        # minimum of 14 uniform positions: the heavy node holds 5 of them
        expected = self.EVENTS * 5 / 14
        assert abs(heavy_wins - expected) <= 0.25 * expected


class TestSelectionProperties:
    """Anchor spread, source balance and top-t ordering laws."""

    PAIRS = 10_000

    def test_no_anchor_collisions_across_beacon_pairs(self):
        rng = np.random.default_rng(41)
        pairs = {(rng.bytes(16), rng.bytes(16)) for _ in range(self.PAIRS)}
        anchors = {compute_anchor(event_id, beacon).anchor for event_id, beacon in pairs}
        assert len(anchors) == len(pairs)

    @pytest.mark.slow
    def test_data_sources_are_balanced(self):
        key = vrf_setup(17)
        tally = Counter(
            assign_data_source(compute_ring_priority(key.secret_key, compute_anchor(f'req-{e}', 'b'), 1.0), 4)
            for e in range(self.PAIRS)
        )
        assert set(tally) == {0, 1, 2, 3}
        for count in tally.values():
            assert abs(count / self.PAIRS - 0.25) <= 0.02

    def test_first_pick_is_the_nearest_claim(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            distances = rng.integers(0, 1 << 20, size=int(rng.integers(1, 15)))
            claims = [fake_claim(f'node-{i}', int(d)) for i, d in enumerate(distances)]
            best = select_top_t(claims, 1)[0]
            assert best.distance == min(int(d) for d in distances)
            assert best.rank_key == min(c.rank_key for c in claims)

    def test_selection_depends_only_on_rank(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(2, 15))
            distances = rng.choice(1 << 20, size=n, replace=False)
            claims = [fake_claim(f'node-{i}', int(d)) for i, d in enumerate(distances)]
            t = int(rng.integers(1, n + 1))
            # a monotone rescaling of the distances keeps the selection
            stretched = [replace(c, distance=3 * c.distance + 7) for c in claims]
            picked = [c.node_id for c in select_top_t(claims, t)]
            assert picked == [c.node_id for c in select_top_t(stretched, t)]
            shuffled = [claims[i] for i in rng.permutation(n)]
            assert picked == [c.node_id for c in select_top_t(shuffled, t)]
            assert picked == [c.node_id for c in sorted(claims, key=lambda c: c.distance)[:t]]
