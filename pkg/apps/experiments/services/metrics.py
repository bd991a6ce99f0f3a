"""
Run metrics.

Task accuracy compares each finalized aggregate with the simulated ground truth
at aggregation time: a task is accurate when the error is within
max(eps_rel * |truth|, eps_abs). All means run over completed tasks only;
failed tasks are counted separately. ``node_accuracy`` is the mean of the
per-node A_i the reputation contract tracks, reported next to task accuracy
so the two are not conflated.
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from apps.simnet.services.behaviors import BehaviorKind
from apps.simnet.services.simulation import SimulationOutcome
from apps.simnet.services.tasks import seat_counts

METRIC_COLUMNS = [
    'label',
    'variant',
    'replication',
    'seed',
    'node_count',
    'malicious_fraction',
    'committee_size',
    'window_width',
    'alpha',
    'min_count',
    'task_count',
    'completed_tasks',
    'failed_tasks',
    'accuracy',
    'node_accuracy',
    'mean_variance',
    'mean_response_time',
    'retry_count',
    'selection_comparisons',
    'filter_comparisons',
    'sybil_share',
    'freeloader_rewards',
    'audit_violations',
    'tokens_conserved',
    'aborted',
    'trace_digest',
    'error',
]

TRACE_COLUMNS = ['label', 'variant', 'replication', 'seed', 'task_index', 'node_id', 'S', 'T', 'A', 'R']

CONFIG_COLUMNS = ('node_count', 'malicious_fraction', 'committee_size', 'window_width',
                  'alpha', 'min_count', 'task_count')


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else float('nan')


@dataclass
class RunMetrics:
    variant: str
    seed: int
    task_count: int
    completed_tasks: int
    failed_tasks: int
    accuracy: float
    node_accuracy: float
    mean_variance: float
    mean_response_time: float
    retry_count: int
    selection_comparisons: float
    filter_comparisons: float
    sybil_share: float
    freeloader_rewards: int
    audit_violations: int
    tokens_conserved: bool
    aborted: bool
    trace_digest: str
    reputation_traces: List[dict] = field(default_factory=list, repr=False)
    selection_counts: Dict[str, int] = field(default_factory=dict, repr=False)
    final_reputations: Dict[str, float] = field(default_factory=dict, repr=False)
    behaviors: Dict[str, str] = field(default_factory=dict, repr=False)
    config: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'RunMetrics':
        return cls(**data)

    def to_row(self, label: str = '', replication: int = 0, error: str = '') -> dict:
        row = {
            'label': label,
            'variant': self.variant,
            'replication': replication,
            'seed': self.seed,
        }
        for name in CONFIG_COLUMNS:
            row[name] = self.config.get(name)
        row.update({
            'completed_tasks': self.completed_tasks,
            'failed_tasks': self.failed_tasks,
            'accuracy': self.accuracy,
            'node_accuracy': self.node_accuracy,
            'mean_variance': self.mean_variance,
            'mean_response_time': self.mean_response_time,
            'retry_count': self.retry_count,
            'selection_comparisons': self.selection_comparisons,
            'filter_comparisons': self.filter_comparisons,
            'sybil_share': self.sybil_share,
            'freeloader_rewards': self.freeloader_rewards,
            'audit_violations': self.audit_violations,
            'tokens_conserved': self.tokens_conserved,
            'aborted': self.aborted,
            'trace_digest': self.trace_digest,
            'error': error,
        })
        return row

    def trace_rows(self, label: str = '', replication: int = 0) -> List[dict]:
        return [
            {'label': label, 'variant': self.variant, 'replication': replication, 'seed': self.seed, **entry}
            for entry in self.reputation_traces
        ]

    def nodes_of_kind(self, kind: BehaviorKind) -> List[str]:
        return sorted(n for n, k in self.behaviors.items() if k == kind.value)


def compute_metrics(outcome: SimulationOutcome, variant: str) -> RunMetrics:
    records = outcome.records
    completed = [r for r in records if r.completed]
    behaviors = outcome.behaviors
    ledger = outcome.ledger

    seats = seat_counts(records)
    total_seats = sum(seats.values())
    sybil_seats = sum(n for node_id, n in seats.items()
                      if behaviors[node_id].kind == BehaviorKind.SYBIL_MEMBER)

    freeloaders = {n for n, b in behaviors.items() if b.kind == BehaviorKind.FREELOADER}
    freeloader_rewards = sum(amount for record in records
                             for node_id, amount in record.payouts.items() if node_id in freeloaders)

    records_by_node = ledger.reputation.snapshot()
    return RunMetrics(
        variant=variant,
        seed=outcome.config.seed,
        task_count=outcome.config.task_count,
        completed_tasks=len(completed),
        failed_tasks=len(records) - len(completed),
        accuracy=sum(r.accurate for r in completed) / len(completed) if completed else 0.0,
        node_accuracy=_mean([rec.accuracy for rec in records_by_node.values()]),
        mean_variance=_mean([r.variance for r in completed]),
        mean_response_time=_mean([r.response_time for r in completed]),
        retry_count=sum(r.retries for r in records),
        selection_comparisons=_mean([r.selection_comparisons for r in records]),
        filter_comparisons=_mean([r.filter_comparisons for r in records]),
        sybil_share=sybil_seats / total_seats if total_seats else 0.0,
        freeloader_rewards=freeloader_rewards,
        audit_violations=len(outcome.audit.violations()),
        tokens_conserved=ledger.is_conserved(),
        aborted=outcome.aborted,
        trace_digest=outcome.digest,
        reputation_traces=list(ledger.reputation.trace),
        selection_counts=dict(sorted(seats.items())),
        final_reputations={n: ledger.reputation.reputation(n) for n in sorted(records_by_node)},
        behaviors={n: b.kind.value for n, b in sorted(behaviors.items())},
        config=outcome.config.to_dict(),
    )
