"""
Off-chain aggregation through a temporary priority-gated consensus network.

The network holds at most t members ordered by priority. The first responder
creates it and leads; a full network admits a newcomer only by evicting its
lowest-priority member. Two one-shot rounds follow, each a leader proposal
acknowledged by a majority of the members (crash-fault fidelity): round one
agrees on the revealed top-t results, round two on the filtered set and the
aggregate, which the leader then submits to the message contract.
"""
import functools
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from apps.oracle.exceptions import ConsensusAborted, ContractViolation
from apps.oracle.services.filtering import TimedResult
from apps.oracle.services.selection import CostCounter, as_bytes

logger = logging.getLogger(__name__)

K_MAD = 3.0
EPS_REL = 1e-6
EPS_FLOOR = 1e-9


class NetworkRound(str, Enum):
    FORMING = 'FORMING'
    ROUND1 = 'ROUND1'
    ROUND2 = 'ROUND2'
    SUBMITTED = 'SUBMITTED'


class JoinKind(str, Enum):
    CREATED = 'CREATED'
    JOINED = 'JOINED'
    EVICTED = 'EVICTED'
    REJECTED = 'REJECTED'
    DUPLICATE = 'DUPLICATE'


class AggregationStrategy(str, Enum):
    MEDIAN = 'median'
    MEAN = 'mean'


@dataclass(frozen=True)
class JoinOutcome:
    kind: JoinKind
    victim: Optional[str] = None


@dataclass(frozen=True)
class Member:
    node_id: str
    distance: int

    @property
    def rank_key(self) -> tuple:
        return (self.distance, self.node_id)


@dataclass
class TempNetwork:
    event_id: bytes
    capacity: int
    members: List[Member]
    leader: str
    round: NetworkRound = NetworkRound.FORMING
    crashed: Set[str] = field(default_factory=set)
    states: Dict[str, bytes] = field(default_factory=dict)

    @property
    def member_ids(self) -> List[str]:
        return [m.node_id for m in self.members]

    @property
    def is_full(self) -> bool:
        return len(self.members) >= self.capacity

    @property
    def lowest(self) -> Member:
        return self.members[-1]

    @property
    def quorum(self) -> int:
        return len(self.members) // 2 + 1

    def responsive(self) -> List[Member]:
        return [m for m in self.members if m.node_id not in self.crashed]

    def crash(self, node_id: str):
        if node_id in self.member_ids:
            self.crashed.add(node_id)


def _elect(net: TempNetwork) -> Optional[str]:
    alive = net.responsive()
    return alive[0].node_id if alive else None


def join_network(net: Optional[TempNetwork], node_id: str, distance: int, *,
                 event_id=None, capacity: Optional[int] = None) -> Tuple[TempNetwork, JoinOutcome]:
    """
    Admit a verified responder into the event's consensus network.

    ``distance`` is the responder's winning ring distance; a smaller distance
    is a higher priority.
    """
    joiner = Member(node_id=node_id, distance=distance)
    if net is None:
        if event_id is None or capacity is None or capacity < 1:
            raise ContractViolation("creating a network needs event_id and a positive capacity")
        net = TempNetwork(event_id=as_bytes(event_id), capacity=capacity,
                          members=[joiner], leader=node_id)
        return net, JoinOutcome(JoinKind.CREATED)

    if node_id in net.member_ids:
        return net, JoinOutcome(JoinKind.DUPLICATE)

    if not net.is_full:
        net.members.append(joiner)
        net.members.sort(key=lambda m: m.rank_key)
        return net, JoinOutcome(JoinKind.JOINED)

    victim = net.lowest
    if joiner.rank_key >= victim.rank_key:
        return net, JoinOutcome(JoinKind.REJECTED)

    net.members.pop()
    net.members.append(joiner)
    net.members.sort(key=lambda m: m.rank_key)
    net.crashed.discard(victim.node_id)
    if victim.node_id == net.leader:
        net.leader = _elect(net) or net.members[0].node_id
        logger.info(f"Leader {victim.node_id} evicted from network; {net.leader} now leads")
    return net, JoinOutcome(JoinKind.EVICTED, victim=victim.node_id)


def _ensure_quorum(net: TempNetwork, stage: str):
    alive = net.responsive()
    if len(alive) < net.quorum:
        raise ConsensusAborted(
            f"{stage}: {len(alive)} of {len(net.members)} members responsive, quorum is {net.quorum}"
        )
    if net.leader in net.crashed:
        previous = net.leader
        net.leader = alive[0].node_id
        logger.warning(f"{stage}: leader {previous} unresponsive; {net.leader} elected")


def encode_results(results: Sequence[TimedResult]) -> bytes:
    """Canonical serialization of a round's agreed result list."""
    parts = []
    for result in results:
        node = result.node_id.encode('utf-8')
        parts.append(struct.pack('>I', len(node)) + node + struct.pack('>dd', result.value, result.timestamp))
    return b''.join(parts)


def _priority_key(result: TimedResult) -> tuple:
    claim = result.priority
    distance = claim.distance if claim is not None else 0
    return (distance, result.node_id)


def rank_results(results: Iterable[TimedResult], t: int,
                 counter: Optional[CostCounter] = None) -> List[TimedResult]:
    """Dedupe by submitter, sort by priority, keep the top t."""

    def compare(a: TimedResult, b: TimedResult) -> int:
        if counter is not None:
            counter.tick()
        ka, kb = _priority_key(a), _priority_key(b)
        return (ka > kb) - (ka < kb)

    seen = {}
    for result in sorted(results, key=functools.cmp_to_key(compare)):
        seen.setdefault(result.node_id, result)
    return list(seen.values())[:t]


def local_views(results: Sequence[TimedResult], cutoffs: Mapping[str, float]) -> Dict[str, List[TimedResult]]:
    """
    What each member has seen when round one opens.

    A member holds its own result plus every result that reached it by its
    cut-off time.
    """
    return {
        member: [r for r in results if r.node_id == member or r.timestamp <= cutoff]
        for member, cutoff in cutoffs.items()
    }


def run_round1(net: TempNetwork, local_views: Mapping[str, Sequence[TimedResult]],
               counter: Optional[CostCounter] = None) -> List[TimedResult]:
    """
    Agree on the revealed results.

    The leader proposes its own view, deduplicated, priority-sorted and
    truncated to the network capacity; every responsive member adopts it.
    """
    _ensure_quorum(net, 'round1')
    proposal = rank_results(local_views.get(net.leader, ()), net.capacity, counter)
    encoded = encode_results(proposal)
    for member in net.responsive():
        net.states[member.node_id] = encoded
    net.round = NetworkRound.ROUND1
    return proposal


def detect_outliers(values: Sequence[float], k_mad: float = K_MAD) -> Set[int]:
    if len(values) < 1:
        raise ContractViolation("detect_outliers needs at least one value")
    data = np.asarray(values, dtype=float)
    median = float(np.median(data))
    deviations = np.abs(data - median)
    mad = float(np.median(deviations))
    threshold = max(EPS_REL * abs(median) + EPS_FLOOR, k_mad * mad)
    return {int(i) for i in np.flatnonzero(deviations > threshold)}


def aggregate_values(values: Sequence[float], strategy: AggregationStrategy) -> float:
    data = np.asarray(values, dtype=float)
    if strategy == AggregationStrategy.MEAN:
        return float(np.mean(data))
    return float(np.median(data))


@dataclass
class AggregationResult:
    event_id: bytes
    value: float
    strategy: AggregationStrategy
    contributors: tuple
    correct_flags: Dict[str, bool]
    response_time: float = 0.0
    outliers: tuple = ()
    submitted_by: Optional[str] = None

    @property
    def correct_nodes(self) -> List[str]:
        return [node for node, ok in self.correct_flags.items() if ok]

    def to_contract_record(self) -> dict:
        return {
            'event_id': self.event_id.decode('utf-8', errors='replace'),
            'value': self.value,
            'strategy': self.strategy.value,
            'contributors': list(self.contributors),
            'correct_flags': dict(sorted(self.correct_flags.items())),
        }


def run_round2_and_aggregate(net: TempNetwork, filtered: Sequence[TimedResult],
                             strategy: AggregationStrategy = AggregationStrategy.MEDIAN, *,
                             top_t: Sequence[TimedResult] = (),
                             flagged: Iterable[str] = (),
                             response_time: float = 0.0,
                             submit: Optional[Callable[['AggregationResult', str], bool]] = None
                             ) -> AggregationResult:
    """
    Agree on the filtered set, aggregate it and (optionally) submit.

    The aggregate is taken over the filtered set only. Correctness is judged
    on the committee: a top-t node is incorrect when the filter dropped it or
    its value is an outlier among the top-t values. Submitters flagged at
    reveal are incorrect as well.
    """
    if not filtered:
        raise ContractViolation("round2 needs a nonempty filtered set")
    _ensure_quorum(net, 'round2')

    ordered = sorted(filtered, key=_priority_key)
    values = [r.value for r in ordered]
    committee = sorted(top_t, key=_priority_key) or ordered
    outliers = {committee[i].node_id for i in detect_outliers([r.value for r in committee])}

    kept = {r.node_id for r in ordered}
    correct_flags = {}
    for result in committee:
        correct_flags[result.node_id] = result.node_id in kept and result.node_id not in outliers
    for node_id in flagged:
        correct_flags[node_id] = False

    result = AggregationResult(
        event_id=net.event_id,
        value=aggregate_values(values, strategy),
        strategy=strategy,
        contributors=tuple(r.node_id for r in ordered),
        correct_flags=correct_flags,
        response_time=response_time,
        outliers=tuple(sorted(outliers)),
    )
    encoded = encode_results(ordered) + struct.pack('>d', result.value)
    for member in net.responsive():
        net.states[member.node_id] = encoded
    net.round = NetworkRound.ROUND2

    if submit is not None:
        submit_result(net, result, submit)
    return result


def submit_result(net: TempNetwork, result: AggregationResult,
                  submit: Callable[[AggregationResult, str], bool]) -> bool:
    """
    Hand the agreed result to the message contract.

    The leader submits; if it has crashed, the next responsive member in
    priority order does. The contract refuses a second write for the event.
    """
    candidates = [net.leader] + [m.node_id for m in net.members if m.node_id != net.leader]
    for node_id in candidates:
        if node_id in net.crashed:
            continue
        result.submitted_by = node_id
        if submit(result, node_id):
            net.leader = node_id
            net.round = NetworkRound.SUBMITTED
            return True
        return False
    raise ConsensusAborted("no responsive member left to submit the result")


def agreed(net: TempNetwork) -> bool:
    """All responsive members hold byte-identical round state."""
    states = {net.states.get(m.node_id) for m in net.responsive()}
    return len(states) == 1 and None not in states
