"""
Oracle node behavior engines.

Behavior is fixed per node per scenario. Honest nodes read their assigned data
source when the request reaches them and seal the value truthfully. The
adversarial kinds deviate in one respect each:

  false_data        the source session is tampered with, so the node holds a
                    validly attested but distorted reading
  lazy              waits ``extra_delay`` seconds before reading the source
  targeted_offline  knocked offline after its broadcasts were observed
                    ``trigger`` times
  freeloader        never contacts a source; re-broadcasts a ciphertext it
                    observed under its own temporary key
  sybil_member      honest mechanics, counted as one controller's identity
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from apps.oracle.services.collection import (
    FeedbackEnvelope,
    KeyDirectory,
    attest,
    build_envelope,
    seal_feedback,
    source_id_for,
)
from apps.oracle.services.crypto_vrf import KEY_LENGTH, KeyPair
from apps.oracle.services.selection import EventAnchor, RingPriority
from apps.simnet.services.config import ADVERSARY_KINDS, SimConfig
from apps.simnet.services.datasource import DataSourceProcess, ground_truth
from apps.simnet.services.latency import request_latency

logger = logging.getLogger(__name__)


class BehaviorKind(str, Enum):
    HONEST = 'honest'
    FALSE_DATA = 'false_data'
    LAZY = 'lazy'
    TARGETED_OFFLINE = 'targeted_offline'
    FREELOADER = 'freeloader'
    SYBIL_MEMBER = 'sybil_member'


@dataclass(frozen=True)
class NodeBehavior:
    kind: BehaviorKind = BehaviorKind.HONEST
    offset_std: float = 0.0
    extra_delay: float = 0.0
    trigger: int = 0
    cluster_id: Optional[int] = None

    @classmethod
    def honest(cls) -> 'NodeBehavior':
        return cls()

    @classmethod
    def false_data(cls, offset_std: float) -> 'NodeBehavior':
        return cls(kind=BehaviorKind.FALSE_DATA, offset_std=offset_std)

    @classmethod
    def lazy(cls, extra_delay: float) -> 'NodeBehavior':
        return cls(kind=BehaviorKind.LAZY, extra_delay=extra_delay)

    @classmethod
    def targeted_offline(cls, trigger: int) -> 'NodeBehavior':
        return cls(kind=BehaviorKind.TARGETED_OFFLINE, trigger=trigger)

    @classmethod
    def freeloader(cls) -> 'NodeBehavior':
        return cls(kind=BehaviorKind.FREELOADER)

    @classmethod
    def sybil_member(cls, cluster_id: int = 0) -> 'NodeBehavior':
        return cls(kind=BehaviorKind.SYBIL_MEMBER, cluster_id=cluster_id)

    @property
    def is_adversarial(self) -> bool:
        return self.kind != BehaviorKind.HONEST


@dataclass
class OracleNode:
    node_id: str
    keys: KeyPair
    behavior: NodeBehavior
    latency_mean: float
    rng: np.random.Generator = field(repr=False)
    observed_broadcasts: int = 0
    offline: bool = False

    def response_delay(self, sigma: float) -> float:
        delay = request_latency(self.latency_mean, sigma, self.rng)
        if self.behavior.kind == BehaviorKind.LAZY:
            delay += self.behavior.extra_delay
        return delay

    def observe_broadcast(self):
        """An adversary saw this node's envelope go out."""
        if self.behavior.kind != BehaviorKind.TARGETED_OFFLINE or self.offline:
            return
        self.observed_broadcasts += 1
        if self.observed_broadcasts >= self.behavior.trigger:
            self.offline = True
            logger.info(f"Node {self.node_id} knocked offline after {self.observed_broadcasts} observed broadcasts")


@dataclass(frozen=True)
class Silent:
    reason: str = ''


@dataclass(frozen=True)
class Response:
    envelope: FeedbackEnvelope
    temp_secret: bytes = field(repr=False)


@dataclass
class ResponseContext:
    """What a node can see when the request reaches it."""
    event_id: bytes
    anchor: EventAnchor
    claim: RingPriority
    reputation: float
    directory: KeyDirectory
    source_keys: Mapping[str, bytes] = field(repr=False)
    signal: DataSourceProcess = field(repr=False)
    source_count: int = 1
    now: float = 0.0
    observed: Sequence[FeedbackEnvelope] = ()


def node_respond(node: OracleNode, ctx: ResponseContext,
                 behavior: Optional[NodeBehavior] = None) -> Union[Response, Silent]:
    behavior = behavior or node.behavior
    if node.offline:
        return Silent('offline')

    sk_temp = node.rng.bytes(KEY_LENGTH)
    if behavior.kind == BehaviorKind.FREELOADER:
        candidates = [e for e in ctx.observed if e.submitter != node.node_id]
        if not candidates:
            return Silent('nothing_to_copy')
        copied = candidates[int(node.rng.integers(len(candidates)))]
        envelope = build_envelope(sk_temp, ctx.event_id, node.node_id, copied.ciphertext,
                                  copied.source_proof, ctx.now, ctx.claim)
        return Response(envelope=envelope, temp_secret=sk_temp)

    source_id = source_id_for(ctx.claim, ctx.source_count)
    value = ground_truth(ctx.signal, ctx.now)
    if behavior.kind == BehaviorKind.FALSE_DATA:
        value += float(node.rng.normal(0.0, behavior.offset_std))
    attestation = attest(ctx.source_keys[source_id], source_id, value, ctx.now)
    envelope = seal_feedback(
        sk_temp, ctx.event_id, value, ctx.now, attestation, ctx.claim,
        directory=ctx.directory, anchor=ctx.anchor, reputation=ctx.reputation,
    )
    return Response(envelope=envelope, temp_secret=sk_temp)


def assign_behaviors(config: SimConfig, node_ids: Sequence[str],
                     rng: np.random.Generator) -> Dict[str, NodeBehavior]:
    """
    Pick the malicious set and split it across ``adversary_mix``.

    Mix fractions are shares of the malicious set, taken in a fixed kind
    order; whatever the mix leaves over is false_data.
    """
    behaviors = {node_id: NodeBehavior.honest() for node_id in node_ids}
    count = config.malicious_count
    if count == 0:
        return behaviors
    chosen = [node_ids[i] for i in sorted(rng.permutation(len(node_ids))[:count])]
    chosen = [chosen[i] for i in rng.permutation(len(chosen))]

    factories = {
        'false_data': lambda: NodeBehavior.false_data(config.false_data_offset_std),
        'lazy': lambda: NodeBehavior.lazy(config.lazy_extra_delay),
        'targeted_offline': lambda: NodeBehavior.targeted_offline(config.targeted_trigger),
        'freeloader': NodeBehavior.freeloader,
        'sybil_member': lambda: NodeBehavior.sybil_member(0),
    }
    start = 0
    cumulative = 0.0
    for kind in ADVERSARY_KINDS:
        cumulative += config.adversary_mix.get(kind, 0.0)
        end = min(count, int(round(cumulative * count)))
        for node_id in chosen[start:end]:
            behaviors[node_id] = factories[kind]()
        start = max(start, end)
    for node_id in chosen[start:]:
        behaviors[node_id] = factories['false_data']()
    return behaviors
