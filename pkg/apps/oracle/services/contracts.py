"""
Simulated on-chain layer.

One ``Ledger`` state machine plays the four sub-contracts: registration
(deposits, public keys, confiscation), message (request events, results,
callbacks), payment (fee escrow, rewards) and reputation (service records).
All calls are totally ordered by the simulator; a rejected call raises
``ContractRejected`` and leaves the state untouched.

Token amounts are integers. Outside of ``mint``, the sum of balances, deposits,
escrowed fees and the reward pool never changes.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

from apps.oracle.exceptions import ContractRejected, ContractViolation
from apps.oracle.services.aggregation import AggregationResult
from apps.oracle.services.reputation import ReputationParams, ReputationStore, should_slash

logger = logging.getLogger(__name__)

GENESIS_BEACON = hashlib.sha256(b'oraclenet/genesis-beacon').digest()
REWARD_POOL = '__reward_pool__'


@dataclass(frozen=True)
class RequestEvent:
    q: str
    d: tuple
    f: int
    t: int
    w: float

    def __post_init__(self):
        if not self.q:
            raise ContractViolation("request id q must be nonempty")
        if len(self.d) < 1:
            raise ContractViolation("request needs at least one data source")
        if self.t < 1:
            raise ContractViolation("t must be >= 1")
        if self.w <= 0:
            raise ContractViolation("w must be > 0")
        if self.f < 0:
            raise ContractViolation("reward f must be >= 0")


@dataclass
class PostedRequest:
    event: RequestEvent
    requester: str
    fee: int
    beacon: bytes
    task_index: int
    callback: Optional[Callable[[str, float], None]] = None


@dataclass
class LedgerState:
    balances: Dict[str, int] = field(default_factory=dict)
    deposits: Dict[str, int] = field(default_factory=dict)
    escrow: Dict[str, int] = field(default_factory=dict)
    reward_pool: int = 0
    registry: Dict[str, bytes] = field(default_factory=dict)
    sources: Dict[str, bytes] = field(default_factory=dict)
    event_log: List[RequestEvent] = field(default_factory=list)
    results: Dict[str, AggregationResult] = field(default_factory=dict)
    beacon: bytes = GENESIS_BEACON
    slashed: set = field(default_factory=set)
    minted: int = 0


class Ledger:
    def __init__(self, params: ReputationParams, min_deposit: int = 100):
        self.state = LedgerState()
        self.params = params
        self.min_deposit = min_deposit
        self.reputation = ReputationStore(params)
        self.requests: Dict[str, PostedRequest] = {}
        self.callbacks_delivered: List[tuple] = []

    # -- registry lookups ---------------------------------------------------

    def public_key_of(self, node_id: str) -> Optional[bytes]:
        return self.state.registry.get(node_id)

    def source_key_of(self, source_id: str) -> Optional[bytes]:
        return self.state.sources.get(source_id)

    def is_eligible(self, node_id: str) -> bool:
        return node_id in self.state.registry and node_id not in self.state.slashed

    def eligible_nodes(self) -> List[str]:
        return sorted(n for n in self.state.registry if n not in self.state.slashed)

    # -- setup --------------------------------------------------------------

    def mint(self, account: str, amount: int):
        if amount < 0:
            raise ContractViolation("mint amount must be >= 0")
        self.state.balances[account] = self.state.balances.get(account, 0) + amount
        self.state.minted += amount

    def register_source(self, source_id: str, public_key: bytes):
        self.state.sources[source_id] = public_key

    # -- registration contract ---------------------------------------------

    def register_node(self, node_id: str, public_key: bytes, deposit: int):
        if node_id in self.state.registry:
            raise ContractRejected('duplicate_registration', f"{node_id} is already registered")
        if deposit < self.min_deposit:
            raise ContractRejected(
                'insufficient_deposit', f"deposit {deposit} below minimum {self.min_deposit}")
        if self.state.balances.get(node_id, 0) < deposit:
            raise ContractRejected('insufficient_funds', f"{node_id} cannot cover deposit {deposit}")

        self.state.balances[node_id] -= deposit
        self.state.deposits[node_id] = deposit
        self.state.registry[node_id] = public_key
        self.reputation.enroll(node_id)
        logger.info(f"Registered oracle node {node_id} with deposit {deposit}")

    def confiscate_deposit(self, node_id: str) -> int:
        if node_id not in self.state.registry:
            raise ContractRejected('not_registered', f"{node_id} is not registered")
        amount = self.state.deposits.get(node_id, 0)
        if amount == 0:
            raise ContractRejected('empty_deposit', f"{node_id} has no deposit left")
        self.state.deposits[node_id] = 0
        self.state.reward_pool += amount
        self.state.slashed.add(node_id)
        logger.warning(f"Confiscated deposit {amount} from {node_id}")
        return amount

    # -- message / payment contracts ---------------------------------------

    def post_request(self, requester: str, event: RequestEvent, fee: int,
                     callback: Optional[Callable[[str, float], None]] = None) -> PostedRequest:
        if event.q in self.requests:
            raise ContractRejected('duplicate_request', f"request {event.q} already posted")
        if fee < event.f:
            raise ContractRejected('insufficient_funds', f"fee {fee} below reward {event.f}")
        if self.state.balances.get(requester, 0) < fee:
            raise ContractRejected('insufficient_funds', f"{requester} cannot cover fee {fee}")

        self.state.balances[requester] -= fee
        self.state.escrow[event.q] = fee
        self.state.event_log.append(event)
        self.state.beacon = hashlib.sha256(self.state.beacon + event.q.encode('utf-8')).digest()
        posted = PostedRequest(
            event=event,
            requester=requester,
            fee=fee,
            beacon=self.state.beacon,
            task_index=len(self.state.event_log) - 1,
            callback=callback,
        )
        self.requests[event.q] = posted
        return posted

    def finalize_task(self, q: str, result: AggregationResult,
                      response_times: Mapping[str, float]) -> Dict[str, int]:
        """
        Record the aggregate, pay correct contributors, update reputations.

        The reward f plus the current reward pool is split equally among the
        contributors flagged correct; the integer remainder goes to the
        submitting leader (or the first correct contributor). Any fee above f
        joins the reward pool. With no correct contributor the whole fee is
        pooled. Returns the payout per node.
        """
        posted = self.requests.get(q)
        if posted is None:
            raise ContractRejected('unknown_request', f"request {q} was never posted")
        if q in self.state.results or q not in self.state.escrow:
            raise ContractRejected('already_finalized', f"request {q} already settled")

        fee = self.state.escrow.pop(q)
        self.state.results[q] = result
        reward = posted.event.f
        self.state.reward_pool += fee - reward

        correct = [n for n in result.contributors if result.correct_flags.get(n)]
        payouts: Dict[str, int] = {}
        if correct:
            pot = reward + self.state.reward_pool
            self.state.reward_pool = 0
            share, remainder = divmod(pot, len(correct))
            for node_id in correct:
                payouts[node_id] = share
            lucky = result.submitted_by if result.submitted_by in payouts else correct[0]
            payouts[lucky] += remainder
            for node_id, amount in payouts.items():
                self.state.balances[node_id] = self.state.balances.get(node_id, 0) + amount
        else:
            self.state.reward_pool += reward

        for node_id in sorted(result.correct_flags):
            if node_id not in self.reputation:
                continue
            response_time = max(response_times.get(node_id, posted.event.w), 1e-3)
            record = self.reputation.apply_service(
                node_id, response_time, result.correct_flags[node_id], posted.task_index)
            if should_slash(record, self.params) and self.state.deposits.get(node_id, 0) > 0:
                self.confiscate_deposit(node_id)

        if posted.callback is not None:
            posted.callback(q, result.value)
        self.callbacks_delivered.append((q, result.value))
        return payouts

    def abort_task(self, q: str):
        """Refund the escrowed fee of a request that could not be served."""
        posted = self.requests.get(q)
        if posted is None:
            raise ContractRejected('unknown_request', f"request {q} was never posted")
        if q not in self.state.escrow:
            raise ContractRejected('already_finalized', f"request {q} already settled")
        fee = self.state.escrow.pop(q)
        self.state.balances[posted.requester] = self.state.balances.get(posted.requester, 0) + fee
        logger.info(f"Request {q} aborted; refunded {fee} to {posted.requester}")

    # -- audit --------------------------------------------------------------

    def total_tokens(self) -> int:
        s = self.state
        return (sum(s.balances.values()) + sum(s.deposits.values())
                + sum(s.escrow.values()) + s.reward_pool)

    def is_conserved(self) -> bool:
        return self.total_tokens() == self.state.minted

    def snapshot(self) -> str:
        """
        Canonical text snapshot.

        Field order: beacon, reward_pool, balances, deposits, escrow,
        registry, slashed, events, results; keys sorted within each section.
        """
        s = self.state
        lines = [f"beacon {s.beacon.hex()}", f"reward_pool {s.reward_pool}"]
        lines += [f"balance {k} {v}" for k, v in sorted(s.balances.items())]
        lines += [f"deposit {k} {v}" for k, v in sorted(s.deposits.items())]
        lines += [f"escrow {k} {v}" for k, v in sorted(s.escrow.items())]
        lines += [f"registry {k} {v.hex()}" for k, v in sorted(s.registry.items())]
        lines += [f"slashed {k}" for k in sorted(s.slashed)]
        lines += [
            f"event {e.q} {','.join(e.d)} {e.f} {e.t} {e.w!r}" for e in s.event_log
        ]
        lines += [
            f"result {q} {r.value!r} {r.strategy.value} {','.join(r.contributors)}"
            for q, r in sorted(s.results.items())
        ]
        return '\n'.join(lines) + '\n'
