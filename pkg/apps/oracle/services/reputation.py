"""
Reputation bookkeeping.

R_i = log(S_i) * (alpha / T_i + (1 - alpha) * A_i), clamped below at the
reputation floor so every registered node keeps at least one ring position.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional

from apps.oracle.exceptions import ContractViolation

logger = logging.getLogger(__name__)

LOG_BASE = 10
INITIAL_RESPONSE_TIME = 1.0


@dataclass(frozen=True)
class ReputationParams:
    alpha: float = 0.5
    reputation_floor: float = 1.0
    slash_threshold: float = 0.0
    log_base: float = LOG_BASE

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ContractViolation(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.log_base <= 1:
            raise ContractViolation("log_base must be > 1")


@dataclass(frozen=True)
class ReputationRecord:
    node_id: str
    total_services: int = 1
    mean_response_time: float = INITIAL_RESPONSE_TIME
    correct_count: int = 1

    def __post_init__(self):
        if self.total_services < 1:
            raise ContractViolation("total_services must be >= 1")
        if self.mean_response_time <= 0:
            raise ContractViolation("mean_response_time must be > 0")
        if not 0 <= self.correct_count <= self.total_services:
            raise ContractViolation("correct_count must lie in [0, total_services]")

    @property
    def accuracy(self) -> float:
        return self.correct_count / self.total_services

    @classmethod
    def new(cls, node_id: str) -> 'ReputationRecord':
        """Record assigned at registration: S=1, T=1.0 s, A=1.0."""
        return cls(node_id=node_id)


def _log(value: float, base: float) -> float:
    if base == 10:
        return math.log10(value)
    return math.log(value, base)


def raw_reputation(record: ReputationRecord, params: ReputationParams) -> float:
    weight = params.alpha / record.mean_response_time + (1 - params.alpha) * record.accuracy
    return _log(record.total_services, params.log_base) * weight


def compute_reputation(record: ReputationRecord, params: ReputationParams) -> float:
    return max(params.reputation_floor, raw_reputation(record, params))


def record_service(record: ReputationRecord, response_time: float, correct: bool) -> ReputationRecord:
    if response_time <= 0:
        raise ContractViolation(f"response_time must be > 0, got {response_time}")
    services = record.total_services + 1
    mean = (record.mean_response_time * record.total_services + response_time) / services
    return replace(
        record,
        total_services=services,
        mean_response_time=mean,
        correct_count=record.correct_count + (1 if correct else 0),
    )


def should_slash(record: ReputationRecord, params: ReputationParams) -> bool:
    if params.slash_threshold <= 0:
        return False
    return raw_reputation(record, params) < params.slash_threshold


class ReputationStore:
    """
    Records owned by the reputation contract.

    Single writer: only the ledger calls ``apply_service``. Readers get
    immutable records.
    """

    def __init__(self, params: ReputationParams):
        self.params = params
        self._records: Dict[str, ReputationRecord] = {}
        self.trace: List[dict] = []

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._records

    def enroll(self, node_id: str) -> ReputationRecord:
        record = ReputationRecord.new(node_id)
        self._records[node_id] = record
        return record

    def get(self, node_id: str) -> ReputationRecord:
        return self._records[node_id]

    def reputation(self, node_id: str) -> float:
        return compute_reputation(self._records[node_id], self.params)

    def total_positions(self, node_ids: Optional[Iterable[str]] = None) -> int:
        ids = self._records.keys() if node_ids is None else node_ids
        return sum(math.ceil(self.reputation(node_id)) for node_id in ids)

    def apply_service(self, node_id: str, response_time: float, correct: bool,
                      task_index: int) -> ReputationRecord:
        record = record_service(self._records[node_id], response_time, correct)
        self._records[node_id] = record
        self.trace.append({
            'task_index': task_index,
            'node_id': node_id,
            'S': record.total_services,
            'T': record.mean_response_time,
            'A': record.accuracy,
            'R': compute_reputation(record, self.params),
        })
        return record

    def snapshot(self) -> Dict[str, ReputationRecord]:
        return dict(self._records)
