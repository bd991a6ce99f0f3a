import hashlib

import pytest

from apps.oracle.services.collection import attest, seal_feedback, source_id_for
from apps.oracle.services.contracts import Ledger
from apps.oracle.services.crypto_vrf import VrfOutput, vrf_setup
from apps.oracle.services.filtering import TimedResult
from apps.oracle.services.reputation import ReputationParams
from apps.oracle.services.selection import RingPriority, compute_anchor, compute_ring_priority

SOURCE_COUNT = 2
NODE_COUNT = 6


def fake_claim(node_id, distance):
    """Priority claim with a chosen distance; only for ordering tests."""
    return RingPriority(
        node_id=node_id,
        positions=(distance,),
        winning_position=distance,
        distance=distance,
        proof=VrfOutput(value=0, proof=b'\x00' * 32),
    )


def timed(node_id, value, timestamp=1.0, distance=None):
    priority = fake_claim(node_id, distance) if distance is not None else None
    return TimedResult(node_id=node_id, value=value, timestamp=timestamp, priority=priority)


@pytest.fixture
def params():
    return ReputationParams(alpha=0.5)


@pytest.fixture
def ledger(params):
    return Ledger(params, min_deposit=100)


@pytest.fixture
def source_keys(ledger):
    """Registered data sources ``source-0`` and ``source-1``."""
    keys = {}
    for i in range(SOURCE_COUNT):
        source_id = f'source-{i}'
        keys[source_id] = vrf_setup(5000 + i)
        ledger.register_source(source_id, keys[source_id].public_key)
    return keys


@pytest.fixture
def node_keys(ledger):
    """Six registered oracle nodes with the minimum deposit."""
    keys = {}
    for i in range(NODE_COUNT):
        node_id = f'node-{i:04d}'
        keys[node_id] = vrf_setup(1000 + i)
        ledger.mint(node_id, 100)
        ledger.register_node(node_id, keys[node_id].public_key, 100)
    return keys


@pytest.fixture
def anchor(ledger):
    return compute_anchor('req-1', ledger.state.beacon)


def temp_secret(node_id, salt=b''):
    return hashlib.sha256(b'temp/' + node_id.encode() + salt).digest()


@pytest.fixture
def make_envelope(ledger, node_keys, source_keys, anchor):
    """Build an honest sealed envelope for a registered node."""

    def build(node_id, value, timestamp=1.0, source_id=None):
        claim = compute_ring_priority(node_keys[node_id].secret_key, anchor, 1.0, node_id)
        source_id = source_id or source_id_for(claim, SOURCE_COUNT)
        attestation = attest(source_keys[source_id].secret_key, source_id, value, timestamp)
        sk_temp = temp_secret(node_id)
        envelope = seal_feedback(
            sk_temp, anchor.event_id, value, timestamp, attestation, claim,
            directory=ledger, anchor=anchor, reputation=ledger.reputation.reputation(node_id),
        )
        return envelope, sk_temp

    return build
