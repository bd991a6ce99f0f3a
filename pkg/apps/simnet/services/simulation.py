"""
Scenario wiring and the simulation driver.

All randomness descends from one ``numpy.random.SeedSequence(config.seed)``;
each concern (keys, latencies, behaviors, per-node draws, faults, the data
source) gets its own spawned stream, so adding draws to one concern never
shifts another. Tasks run one after another: the next request is posted
``task_interval`` seconds after the previous one finalized or failed.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from apps.oracle.exceptions import ScheduleOverflow
from apps.oracle.services.collection import InformationFlowAudit
from apps.oracle.services.contracts import Ledger
from apps.oracle.services.crypto_vrf import KEY_LENGTH, key_scope, keypair_from_secret
from apps.oracle.services.reputation import ReputationParams
from apps.simnet.services.behaviors import NodeBehavior, OracleNode, assign_behaviors
from apps.simnet.services.config import SimConfig
from apps.simnet.services.datasource import DataSourceProcess
from apps.simnet.services.eventloop import EventLoop
from apps.simnet.services.latency import node_latency_mean
from apps.simnet.services.tasks import PipelineFlags, TaskRecord, TaskRun

logger = logging.getLogger(__name__)

REQUESTER = 'requester'


def node_name(index: int) -> str:
    return f"node-{index:04d}"


@dataclass
class Scenario:
    config: SimConfig
    flags: PipelineFlags = field(default_factory=PipelineFlags)
    behaviors: Dict[str, NodeBehavior] = field(default_factory=dict)


@dataclass
class SimulationOutcome:
    config: SimConfig
    flags: PipelineFlags
    records: List[TaskRecord]
    trace: List[str]
    digest: str
    ledger: Ledger
    audit: InformationFlowAudit
    nodes: Dict[str, OracleNode]
    aborted: bool = False
    abort_reason: str = ''

    @property
    def behaviors(self) -> Dict[str, NodeBehavior]:
        return {node_id: node.behavior for node_id, node in self.nodes.items()}


class Simulation:
    def __init__(self, scenario: Scenario):
        config = scenario.config
        config.validate()
        self.config = config
        self.flags = scenario.flags
        self.requester = REQUESTER

        root = np.random.SeedSequence(config.seed)
        keys_seq, latency_seq, behavior_seq, node_seq, fault_seq, source_seq = root.spawn(6)
        key_rng = np.random.default_rng(keys_seq)
        latency_rng = np.random.default_rng(latency_seq)
        self.fault_rng = np.random.default_rng(fault_seq)

        self.loop = EventLoop(horizon=config.horizon)
        self.audit = InformationFlowAudit()
        self.ledger = Ledger(
            ReputationParams(alpha=config.alpha, slash_threshold=config.slash_threshold),
            min_deposit=config.min_deposit,
        )
        self.signal = DataSourceProcess(
            base_value=config.source_base,
            drift_rate=config.source_drift,
            noise_std=config.source_noise,
            reversion=config.source_reversion,
            seed=int(source_seq.generate_state(1)[0]),
        )

        self.source_ids = [f"source-{i}" for i in range(config.source_count)]
        self.source_keys: Dict[str, bytes] = {}
        for source_id in self.source_ids:
            pair = keypair_from_secret(key_rng.bytes(KEY_LENGTH))
            self.source_keys[source_id] = pair.secret_key
            self.ledger.register_source(source_id, pair.public_key)

        node_ids = [node_name(i) for i in range(config.node_count)]
        behaviors = assign_behaviors(config, node_ids, np.random.default_rng(behavior_seq))
        behaviors.update(scenario.behaviors)
        node_streams = node_seq.spawn(config.node_count)

        self.nodes: Dict[str, OracleNode] = {}
        for node_id, stream in zip(node_ids, node_streams):
            pair = keypair_from_secret(key_rng.bytes(KEY_LENGTH))
            self.nodes[node_id] = OracleNode(
                node_id=node_id,
                keys=pair,
                behavior=behaviors[node_id],
                latency_mean=node_latency_mean(config.latency_mean, config.latency_std, latency_rng),
                rng=np.random.default_rng(stream),
            )
            self.ledger.mint(node_id, config.deposit)
            self.ledger.register_node(node_id, pair.public_key, config.deposit)

        self.ledger.mint(self.requester, config.fee * config.task_count)
        self.records: List[TaskRecord] = []
        self.current: Optional[TaskRun] = None

    def _post(self, task_index: int):
        self.current = TaskRun(self, task_index)
        self.current.start()

    def task_finished(self, run: TaskRun):
        self.records.append(run.record)
        self.current = None
        next_index = run.task_index + 1
        if next_index < self.config.task_count:
            self.loop.schedule(self.config.task_interval, 'post',
                               lambda: self._post(next_index), detail=f"task-{next_index:05d}")

    def run(self) -> SimulationOutcome:
        aborted, reason = False, ''
        try:
            if self.config.task_count > 0:
                self.loop.schedule(0.0, 'post', lambda: self._post(0), detail='task-00000')
            self.loop.run()
        except ScheduleOverflow as e:
            aborted, reason = True, str(e)
            logger.warning(f"Simulation stopped early after {len(self.records)} tasks: {e}")
        return SimulationOutcome(
            config=self.config,
            flags=self.flags,
            records=list(self.records),
            trace=list(self.loop.trace),
            digest=self.loop.digest(),
            ledger=self.ledger,
            audit=self.audit,
            nodes=self.nodes,
            aborted=aborted,
            abort_reason=reason,
        )


def run_event_loop(config: SimConfig, scenario: Optional[Scenario] = None) -> SimulationOutcome:
    """
    Run every scheduled event of the scenario in (time, sequence) order.

    Keys created during the run live in their own registry and are released
    when it returns.
    """
    scenario = scenario or Scenario(config=config)
    if scenario.config is not config:
        scenario = Scenario(config=config, flags=scenario.flags, behaviors=scenario.behaviors)
    with key_scope():
        return Simulation(scenario).run()
