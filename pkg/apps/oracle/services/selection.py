"""
Reputation-weighted node selection on the hash ring.

A request event is anchored at G_q = H(q || beacon). Each node signs the same
input with its VRF key, expands the signature into ceil(R_i) ring positions and
keeps the one with the smallest clockwise distance to the anchor. Smaller
distance means higher priority; all ordering is done on the exact integer
distance.
"""
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from apps.oracle.exceptions import ContractViolation
from apps.oracle.services.crypto_vrf import (
    RING_SIZE,
    VrfOutput,
    hash_to_ring,
    vrf_generate,
    vrf_verify,
)


def as_bytes(value) -> bytes:
    if isinstance(value, str):
        return value.encode('utf-8')
    return bytes(value)


@dataclass
class CostCounter:
    """Comparisons performed by selection sorting and the filter sweep."""
    comparisons: int = 0

    def tick(self, n: int = 1):
        self.comparisons += n


@dataclass(frozen=True)
class EventAnchor:
    event_id: bytes
    beacon: bytes
    anchor: int

    @property
    def vrf_input(self) -> bytes:
        return self.event_id + self.beacon


@dataclass(frozen=True)
class RingPriority:
    node_id: str
    positions: tuple
    winning_position: int
    distance: int
    proof: VrfOutput = field(repr=False)

    @property
    def priority(self) -> Fraction:
        return Fraction(1, max(self.distance, 1))

    @property
    def rank_key(self) -> tuple:
        """Ascending sort key: higher priority first, ties by node id."""
        return (self.distance, self.node_id)

    def to_record(self) -> dict:
        """Canonical audit record for CSV logs."""
        return {
            'node_id': self.node_id,
            'winning_position': self.winning_position,
            'distance': self.distance,
            'proof': self.proof.to_bytes().hex(),
        }


def clockwise_distance(anchor: int, position: int) -> int:
    return (position - anchor) % RING_SIZE


def compute_anchor(event_id, beacon) -> EventAnchor:
    event_id = as_bytes(event_id)
    beacon = as_bytes(beacon)
    if not event_id:
        raise ContractViolation("event_id must be nonempty")
    return EventAnchor(event_id=event_id, beacon=beacon, anchor=hash_to_ring(event_id + beacon))


def ring_positions(proof: VrfOutput, count: int) -> tuple:
    """Y = {H(g || k) | 1 <= k <= count} with k as an 8-byte big-endian counter."""
    generator = proof.to_bytes()
    return tuple(hash_to_ring(generator + k.to_bytes(8, 'big')) for k in range(1, count + 1))


def position_count(reputation) -> int:
    return math.ceil(reputation)


def _winning(anchor: int, positions: Sequence[int]) -> tuple:
    best_position, best_distance = None, None
    for position in positions:
        distance = clockwise_distance(anchor, position)
        if best_distance is None or distance < best_distance:
            best_position, best_distance = position, distance
    return best_position, best_distance


def compute_ring_priority(sk: bytes, anchor: EventAnchor, reputation, node_id: str = '') -> RingPriority:
    if reputation < 1:
        raise ContractViolation(f"reputation must be >= 1, got {reputation}")
    proof = vrf_generate(sk, anchor.vrf_input)
    positions = ring_positions(proof, position_count(reputation))
    winning_position, distance = _winning(anchor.anchor, positions)
    return RingPriority(
        node_id=node_id,
        positions=positions,
        winning_position=winning_position,
        distance=distance,
        proof=proof,
    )


def verify_ring_priority(pk: bytes, anchor: EventAnchor, claim: RingPriority,
                         reputation: Optional[float] = None) -> bool:
    """
    Recompute a published priority from public data.

    When ``reputation`` is given (the verifier read it from the reputation
    contract) the claimed position count must match ceil(reputation) as well.
    """
    if not claim.positions:
        return False
    if not vrf_verify(pk, anchor.vrf_input, claim.proof):
        return False
    if reputation is not None and len(claim.positions) != position_count(reputation):
        return False
    if tuple(claim.positions) != ring_positions(claim.proof, len(claim.positions)):
        return False
    winning_position, distance = _winning(anchor.anchor, claim.positions)
    return claim.distance == distance and claim.winning_position == winning_position


def select_top_t(claims: Iterable[RingPriority], t: int,
                 counter: Optional[CostCounter] = None) -> list:
    if t < 1:
        raise ContractViolation(f"t must be positive, got {t}")
    snapshot = list(claims)

    def compare(a: RingPriority, b: RingPriority) -> int:
        if counter is not None:
            counter.tick()
        ka, kb = a.rank_key, b.rank_key
        return (ka > kb) - (ka < kb)

    ranked = sorted(snapshot, key=functools.cmp_to_key(compare))
    return ranked[:min(t, len(ranked))]


def assign_data_source(claim: RingPriority, source_count: int) -> int:
    if source_count < 1:
        raise ContractViolation("source_count must be >= 1")
    return claim.winning_position % source_count
