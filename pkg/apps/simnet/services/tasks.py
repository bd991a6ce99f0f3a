"""
Per-task state machine.

One ``TaskRun`` drives a request through the oracle pipeline on the event loop:

    POSTED -> COLLECTING -> REVEALING -> ROUND1 -> ROUND2 -> SUBMITTING -> FINALIZED
                  ^             |           |
                  +-- retry ----+-----------+        (any phase) -> FAILED

A collection attempt selects participants, schedules their responses and a
deadline. The group signature triggers the reveal one consensus hop later;
envelopes arriving before the reveal are still accepted. A retry (deadline
without a group signature, or a filtered set below ``min_count``) opens a new
attempt under a fresh event id; retries are bounded by ``max_retries`` and a
task that runs out of them, or loses its consensus quorum, is aborted with a
refund.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np

from apps.oracle.exceptions import ConsensusAborted, ContractRejected
from apps.oracle.services.aggregation import (
    AggregationResult,
    AggregationStrategy,
    NetworkRound,
    TempNetwork,
    join_network,
    local_views,
    run_round1,
    run_round2_and_aggregate,
    submit_result,
)
from apps.oracle.services.collection import (
    CollectionState,
    RevealOutcome,
    reveal_and_decrypt,
    try_form_group_signature,
)
from apps.oracle.services.contracts import RequestEvent
from apps.oracle.services.crypto_vrf import RING_SIZE
from apps.oracle.services.filtering import (
    FilterPolicy,
    Retry,
    TimedResult,
    apply_retry_policy,
    decide_window,
)
from apps.oracle.services.selection import (
    CostCounter,
    RingPriority,
    compute_anchor,
    compute_ring_priority,
    position_count,
    select_top_t,
)
from apps.simnet.services.behaviors import (
    OracleNode,
    Response,
    ResponseContext,
    Silent,
    node_respond,
)
from apps.simnet.services.datasource import ground_truth
from apps.simnet.services.latency import JITTER_RATIO, sample_latency

if TYPE_CHECKING:
    from apps.simnet.services.simulation import Simulation

logger = logging.getLogger(__name__)

CRASH_PHASE_CHOICES = ('round1', 'round2', 'submit')


class TaskPhase(str, Enum):
    POSTED = 'POSTED'
    COLLECTING = 'COLLECTING'
    REVEALING = 'REVEALING'
    ROUND1 = 'ROUND1'
    ROUND2 = 'ROUND2'
    SUBMITTING = 'SUBMITTING'
    FINALIZED = 'FINALIZED'
    FAILED = 'FAILED'


@dataclass(frozen=True)
class PipelineFlags:
    """
    Switches that distinguish the scheme variants.

    ``weighted_positions`` off gives every node a single ring position;
    ``filtering`` off keeps the whole top-t set; ``fixed_committee`` replaces
    self-selection with the top-t single-position VRF committee, all of whose
    members respond and are all waited for.
    """
    weighted_positions: bool = True
    filtering: bool = True
    fixed_committee: bool = False


@dataclass
class TaskRecord:
    task_index: int
    request_id: str
    status: str
    posted_at: float
    finished_at: float
    response_time: float = 0.0
    value: Optional[float] = None
    ground_truth: Optional[float] = None
    accurate: bool = False
    variance: Optional[float] = None
    retries: int = 0
    top_t: Tuple[str, ...] = ()
    contributors: Tuple[str, ...] = ()
    dropped: Tuple[str, ...] = ()
    outliers: Tuple[str, ...] = ()
    flagged: Dict[str, str] = field(default_factory=dict)
    correct_flags: Dict[str, bool] = field(default_factory=dict)
    payouts: Dict[str, int] = field(default_factory=dict)
    selection_comparisons: int = 0
    filter_comparisons: int = 0
    crash_phase: str = ''
    failure: str = ''

    @property
    def completed(self) -> bool:
        return self.status == 'completed'


def accuracy_tolerance(truth: float, eps_rel: float, eps_abs: float) -> float:
    return max(eps_rel * abs(truth), eps_abs)


class TaskRun:
    def __init__(self, sim: 'Simulation', task_index: int):
        self.sim = sim
        self.config = sim.config
        self.flags = sim.flags
        self.task_index = task_index
        self.request_id = f"task-{task_index:05d}"
        self.phase = TaskPhase.POSTED
        self.attempt = 0
        self.retries = 0
        self.widenings = 0
        self.window = self.config.window_width
        self.posted = None
        self.posted_at = 0.0
        self.selection_counter = CostCounter()
        self.filter_counter = CostCounter()
        self.delivered: Optional[float] = None
        self.payouts: Dict[str, int] = {}
        self.record: Optional[TaskRecord] = None
        self._reset_attempt()

    def _reset_attempt(self):
        self.event_id = b''
        self.anchor = None
        self.collection: Optional[CollectionState] = None
        self.net: Optional[TempNetwork] = None
        self.responses: Dict[str, Response] = {}
        self.claims: Dict[str, RingPriority] = {}
        self.response_times: Dict[str, float] = {}
        self.attempt_started_at = 0.0
        self.reveal_scheduled = False
        self.outcome: Optional[RevealOutcome] = None
        self.top_t: List[TimedResult] = []
        self.filtered: List[TimedResult] = []
        self.dropped: Tuple[str, ...] = ()
        self.result: Optional[AggregationResult] = None
        self.truth: Optional[float] = None
        self.crash_plan: Tuple[str, Tuple[str, ...]] = ('none', ())

    @property
    def done(self) -> bool:
        return self.phase in (TaskPhase.FINALIZED, TaskPhase.FAILED)

    # -- posting and collection --------------------------------------------

    def start(self):
        config = self.config
        event = RequestEvent(
            q=self.request_id,
            d=tuple(self.sim.source_ids),
            f=config.reward,
            t=config.committee_size,
            w=config.window_width,
        )
        self.posted = self.sim.ledger.post_request(
            self.sim.requester, event, config.fee, callback=self._on_callback)
        self.posted_at = self.sim.loop.now
        self._start_attempt()

    def _attempt_event_id(self) -> str:
        if self.attempt == 0:
            return self.request_id
        return f"{self.request_id}/retry-{self.attempt}"

    def _reputation_used(self, node_id: str) -> float:
        if not self.flags.weighted_positions:
            return 1.0
        return self.sim.ledger.reputation.reputation(node_id)

    def _participants(self, claims: Dict[str, RingPriority], reputations: Dict[str, float]) -> List[RingPriority]:
        t = self.config.committee_size
        if self.flags.fixed_committee:
            return select_top_t(claims.values(), t, self.selection_counter)
        total = sum(position_count(r) for r in reputations.values())
        margin = Fraction(self.config.participation_margin) * (2 ** self.widenings)
        cutoff = RING_SIZE * margin * t / total
        return sorted((c for c in claims.values() if c.distance < cutoff), key=lambda c: c.rank_key)

    def _start_attempt(self):
        self._reset_attempt()
        sim = self.sim
        self.phase = TaskPhase.COLLECTING
        self.attempt_started_at = sim.loop.now
        event_id = self._attempt_event_id()
        self.anchor = compute_anchor(event_id, self.posted.beacon)
        self.event_id = self.anchor.event_id
        threshold = self.config.committee_size

        reputations = {}
        for node_id in sim.ledger.eligible_nodes():
            node = sim.nodes[node_id]
            reputations[node_id] = self._reputation_used(node_id)
            self.claims[node_id] = compute_ring_priority(
                node.keys.secret_key, self.anchor, reputations[node_id], node_id)

        if not self.claims:
            self._fail('no eligible nodes')
            return

        participants = self._participants(self.claims, reputations)
        if self.flags.fixed_committee:
            threshold = len(participants)
        self.collection = CollectionState(event_id, max(threshold, 1), audit=sim.audit)

        attempt = self.attempt
        for claim in participants:
            node = sim.nodes[claim.node_id]
            delay = node.response_delay(self.config.latency_std)
            sim.loop.schedule(
                delay, 'respond',
                lambda node=node, claim=claim: self._on_response(attempt, node, claim, reputations[node.node_id]),
                detail=f"{event_id} {node.node_id}",
            )
        sim.loop.schedule(self.config.collection_deadline, 'deadline',
                          lambda: self._on_deadline(attempt), detail=event_id)
        logger.debug(f"{event_id}: {len(participants)} participants of {len(self.claims)} eligible")

    def _stale(self, attempt: int) -> bool:
        return self.done or attempt != self.attempt

    def _on_response(self, attempt: int, node: OracleNode, claim: RingPriority, reputation: float):
        if self._stale(attempt) or self.collection.closed:
            return
        sim = self.sim
        ctx = ResponseContext(
            event_id=self.event_id,
            anchor=self.anchor,
            claim=claim,
            reputation=reputation,
            directory=sim.ledger,
            source_keys=sim.source_keys,
            signal=sim.signal,
            source_count=len(sim.source_ids),
            now=sim.loop.now,
            observed=self.collection.observed_ciphertexts(),
        )
        reply = node_respond(node, ctx)
        if isinstance(reply, Silent):
            return
        if not self.collection.submit(reply.envelope, at=sim.loop.now):
            return
        node.observe_broadcast()
        self.responses[node.node_id] = reply
        self.response_times[node.node_id] = sim.loop.now - self.attempt_started_at
        self.net, _ = join_network(self.net, node.node_id, claim.distance,
                                   event_id=self.event_id, capacity=self.config.committee_size)
        if self.collection.group_signature is not None and not self.reveal_scheduled:
            self._schedule_reveal(attempt)

    def _schedule_reveal(self, attempt: int):
        self.reveal_scheduled = True
        self.sim.loop.schedule(self.config.consensus_hop, 'reveal',
                               lambda: self._on_reveal(attempt), detail=self.event_id.decode())

    def _on_deadline(self, attempt: int):
        if self._stale(attempt) or self.reveal_scheduled:
            return
        if self.flags.fixed_committee and self.collection.envelopes:
            envelopes = list(self.collection.envelopes.values())
            group_sig = try_form_group_signature(envelopes, len(envelopes))
            if group_sig is not None:
                self.collection.group_signature = group_sig
                self.sim.audit.group_signature_formed(self.event_id, self.sim.loop.now)
                self._schedule_reveal(attempt)
                return
        self._retry('collection_deadline', widen=True)

    def _retry(self, reason: str, new_window: Optional[float] = None, widen: bool = False):
        if self.retries >= self.config.max_retries:
            self._fail(f"{reason}: retries exhausted")
            return
        self.retries += 1
        self.attempt += 1
        if widen:
            self.widenings += 1
        if new_window is not None:
            self.window = new_window
        logger.info(f"{self.request_id}: retry {self.retries} after {reason} (window {self.window:.3f}s)")
        self._start_attempt()

    # -- reveal and consensus ----------------------------------------------

    def _plan_crashes(self):
        config = self.config
        if config.crash_faults <= 0 or self.net is None:
            return
        rng = self.sim.fault_rng
        phase = config.crash_phase
        if phase == 'random':
            phase = CRASH_PHASE_CHOICES[int(rng.integers(len(CRASH_PHASE_CHOICES)))]
        if phase == 'none':
            return
        members = self.net.member_ids
        count = min(config.crash_faults, len(members))
        victims = tuple(members[i] for i in sorted(rng.choice(len(members), size=count, replace=False)))
        self.crash_plan = (phase, victims)

    def _crash_phase(self) -> str:
        phase, victims = self.crash_plan
        return phase if victims else ''

    def _apply_crashes(self, phase: str):
        planned, victims = self.crash_plan
        if planned != phase:
            return
        for node_id in victims:
            self.net.crash(node_id)
        logger.info(f"{self.request_id}: crashed {', '.join(victims)} at {phase}")

    def _on_reveal(self, attempt: int):
        if self._stale(attempt):
            return
        sim = self.sim
        self.phase = TaskPhase.REVEALING
        self.collection.close()
        envelopes = self.collection.observed_ciphertexts()
        revealed = {e.submitter: self.responses[e.submitter].temp_secret for e in envelopes}
        self.outcome = reveal_and_decrypt(
            envelopes, self.collection.group_signature, revealed,
            directory=sim.ledger, source_count=len(sim.source_ids), audit=sim.audit,
            observer=self.net.leader, at=sim.loop.now,
        )
        self._plan_crashes()
        sim.loop.schedule(self.config.consensus_hop, 'round1',
                          lambda: self._on_round1(attempt), detail=self.event_id.decode())

    def _round1_cutoffs(self) -> Dict[str, float]:
        """Each member's view closes one gossip hop, with jitter, before round one."""
        hop = self.config.consensus_hop
        now = self.sim.loop.now
        cutoffs = {}
        for node_id in self.net.member_ids:
            lag = sample_latency(hop, hop * JITTER_RATIO, self.sim.nodes[node_id].rng) if hop > 0 else 0.0
            cutoffs[node_id] = now - lag
        return cutoffs

    def _on_round1(self, attempt: int):
        if self._stale(attempt):
            return
        self.phase = TaskPhase.ROUND1
        self._apply_crashes('round1')
        views = local_views(self.outcome.results, self._round1_cutoffs())
        try:
            proposal = run_round1(self.net, views, counter=self.selection_counter)
        except ConsensusAborted as e:
            self._fail(f"round1: {e}")
            return
        if not proposal:
            self._retry('no_valid_results')
            return
        self.top_t = proposal

        if self.flags.filtering:
            decision = decide_window(proposal, self.window, self.filter_counter)
            logger.debug(f"filter decision {decision.to_log(self.request_id)}")
            verdict = apply_retry_policy(len(decision.kept), FilterPolicy(self.window, self.config.min_count))
            if isinstance(verdict, Retry):
                self._retry('min_count', new_window=verdict.new_width)
                return
            self.filtered = list(decision.kept)
            self.dropped = tuple(r.node_id for r in decision.dropped)
        else:
            self.filtered = list(proposal)
        self.sim.loop.schedule(self.config.consensus_hop, 'round2',
                               lambda: self._on_round2(attempt), detail=self.event_id.decode())

    def _on_round2(self, attempt: int):
        if self._stale(attempt):
            return
        self.phase = TaskPhase.ROUND2
        self._apply_crashes('round2')
        try:
            self.result = run_round2_and_aggregate(
                self.net, self.filtered, AggregationStrategy(self.config.strategy),
                top_t=self.top_t, flagged=self.outcome.flagged.keys(),
            )
        except ConsensusAborted as e:
            self._fail(f"round2: {e}")
            return
        self.truth = ground_truth(self.sim.signal, self.sim.loop.now)
        self.sim.loop.schedule(self.config.consensus_hop, 'submit',
                               lambda: self._on_submit(attempt), detail=self.event_id.decode())

    def _submit(self, result: AggregationResult, node_id: str) -> bool:
        try:
            self.payouts = self.sim.ledger.finalize_task(self.request_id, result, self.response_times)
        except ContractRejected as e:
            logger.warning(f"{self.request_id}: submission by {node_id} rejected ({e.code})")
            return False
        return True

    def _on_submit(self, attempt: int):
        if self._stale(attempt):
            return
        self.phase = TaskPhase.SUBMITTING
        self._apply_crashes('submit')
        self.result.response_time = self.sim.loop.now - self.posted_at
        try:
            submitted = submit_result(self.net, self.result, self._submit)
        except ConsensusAborted as e:
            self._fail(f"submit: {e}")
            return
        if not submitted or self.net.round != NetworkRound.SUBMITTED:
            self._fail('submission rejected')
            return
        self._complete()

    def _on_callback(self, request_id: str, value: float):
        self.delivered = value

    # -- outcomes ------------------------------------------------------------

    def _complete(self):
        config = self.config
        result = self.result
        values = np.asarray([r.value for r in self.filtered], dtype=float)
        self.phase = TaskPhase.FINALIZED
        self.record = TaskRecord(
            task_index=self.task_index,
            request_id=self.request_id,
            status='completed',
            posted_at=self.posted_at,
            finished_at=self.sim.loop.now,
            response_time=result.response_time,
            value=result.value,
            ground_truth=self.truth,
            accurate=abs(result.value - self.truth) <= accuracy_tolerance(
                self.truth, config.eps_rel, config.eps_abs),
            variance=float(np.var(values)),
            retries=self.retries,
            top_t=tuple(r.node_id for r in self.top_t),
            contributors=tuple(result.contributors),
            dropped=self.dropped,
            outliers=tuple(result.outliers),
            flagged=dict(self.outcome.flagged),
            correct_flags=dict(result.correct_flags),
            payouts=dict(self.payouts),
            selection_comparisons=self.selection_counter.comparisons,
            filter_comparisons=self.filter_counter.comparisons,
            crash_phase=self._crash_phase(),
        )
        self.sim.task_finished(self)

    def _fail(self, reason: str):
        self.phase = TaskPhase.FAILED
        try:
            self.sim.ledger.abort_task(self.request_id)
        except ContractRejected as e:
            logger.warning(f"{self.request_id}: abort rejected ({e.code})")
        logger.warning(f"{self.request_id} failed: {reason}")
        self.record = TaskRecord(
            task_index=self.task_index,
            request_id=self.request_id,
            status='failed',
            posted_at=self.posted_at,
            finished_at=self.sim.loop.now,
            response_time=self.sim.loop.now - self.posted_at,
            retries=self.retries,
            top_t=tuple(r.node_id for r in self.top_t),
            selection_comparisons=self.selection_counter.comparisons,
            filter_comparisons=self.filter_counter.comparisons,
            crash_phase=self._crash_phase(),
            failure=reason,
        )
        self.sim.task_finished(self)


def seat_counts(records: List[TaskRecord]) -> Counter:
    """How often each node held a top-t seat across completed tasks."""
    counts = Counter()
    for record in records:
        if record.completed:
            counts.update(record.top_t)
    return counts
