"""
Experiment harness: single scenarios, parameter sweeps and fault sweeps.

A matrix is the cross product of variants, grid points and replications.
Replication r of any cell runs with seed ``base.seed + r``, so every variant
and grid point sees the same seeds. Cells are dispatched as Celery tasks
(in-process when ``CELERY_TASK_ALWAYS_EAGER`` is on); a failing cell becomes
a row with its ``error`` column set and the matrix carries on.
"""
import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import pandas as pd
from django.conf import settings

from apps.experiments.services.metrics import (
    CONFIG_COLUMNS,
    METRIC_COLUMNS,
    RunMetrics,
    compute_metrics,
)
from apps.experiments.services.variants import SchemeVariant
from apps.oracle.exceptions import ContractViolation
from apps.simnet.services.behaviors import NodeBehavior
from apps.simnet.services.config import SimConfig
from apps.simnet.services.simulation import Scenario, SimulationOutcome, run_event_loop

logger = logging.getLogger(__name__)

FAULT_PHASES = ('round1', 'round2', 'submit')


@dataclass(frozen=True)
class Preset:
    name: str
    grid: Dict[str, list]
    variants: tuple
    description: str = ''
    overrides: Dict[str, object] = field(default_factory=dict)


PRESETS = {
    'headline': Preset(
        name='headline',
        grid={},
        variants=tuple(SchemeVariant),
        description='Default parameters, all four variants',
    ),
    'malicious': Preset(
        name='malicious',
        grid={'malicious_fraction': [0.05, 0.1, 0.2]},
        variants=(SchemeVariant.FULL, SchemeVariant.BASELINE),
        description='Malicious-fraction sweep',
    ),
    'committee': Preset(
        name='committee',
        grid={'committee_size': [5, 10, 20, 40]},
        variants=(SchemeVariant.FULL, SchemeVariant.BASELINE),
        description='Committee-size sweep',
    ),
    'alpha': Preset(
        name='alpha',
        grid={'alpha': [0.1, 0.5, 0.9, 0.999]},
        variants=(SchemeVariant.FULL,),
        description='Reputation weighting sweep',
        # the median hides a minority of false values, so weigh every contributor
        overrides={'strategy': 'mean'},
    ),
}


def simulate(config: SimConfig, variant: SchemeVariant,
             behaviors: Optional[Dict[str, NodeBehavior]] = None) -> SimulationOutcome:
    variant = SchemeVariant(variant)
    scenario = Scenario(config=config, flags=variant.flags, behaviors=dict(behaviors or {}))
    return run_event_loop(config, scenario)


def run_scenario(config: SimConfig, variant: SchemeVariant,
                 behaviors: Optional[Dict[str, NodeBehavior]] = None) -> RunMetrics:
    """Run ``config.task_count`` tasks end to end under one scheme variant."""
    config.validate()
    variant = SchemeVariant(variant)
    outcome = simulate(config, variant, behaviors)
    metrics = compute_metrics(outcome, variant.value)
    logger.info(
        f"{variant.value} seed={config.seed}: accuracy={metrics.accuracy:.4f} "
        f"variance={metrics.mean_variance:.6g} response={metrics.mean_response_time:.4f}s "
        f"failed={metrics.failed_tasks}"
    )
    return metrics


@dataclass(frozen=True)
class MatrixCell:
    label: str
    variant: str
    grid_point: dict
    replication: int
    config: dict

    def to_payload(self) -> dict:
        return {
            'label': self.label,
            'variant': self.variant,
            'grid_point': self.grid_point,
            'replication': self.replication,
            'config': self.config,
        }


def build_cells(base_config: SimConfig, grid: Dict[str, Sequence], variants: Iterable,
                replications: int = 1, label: str = '') -> List[MatrixCell]:
    if replications < 1:
        raise ContractViolation("replications must be >= 1")
    names = sorted(grid)
    if any(len(grid[name]) == 0 for name in names):
        raise ContractViolation("every grid parameter needs at least one value")
    points = [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]

    cells = []
    for point in points:
        for variant in variants:
            for replication in range(replications):
                config = base_config.with_overrides(seed=base_config.seed + replication, **point)
                cells.append(MatrixCell(
                    label=label,
                    variant=SchemeVariant(variant).value,
                    grid_point=point,
                    replication=replication,
                    config=config.to_dict(),
                ))
    return cells


def execute_cell(payload: dict) -> dict:
    """
    Run one matrix cell and return ``{'row': ..., 'metrics': ...}``.

    Failures are reported in the row instead of raised.
    """
    label = payload.get('label', '')
    replication = payload.get('replication', 0)
    try:
        config = SimConfig(**payload['config'])
        metrics = run_scenario(config, SchemeVariant(payload['variant']))
    except Exception as e:
        logger.exception(f"Matrix cell {payload.get('variant')} {payload.get('grid_point')} failed")
        row = {column: None for column in METRIC_COLUMNS}
        row.update({
            'label': label,
            'variant': payload.get('variant'),
            'replication': replication,
            'seed': payload.get('config', {}).get('seed'),
            'error': f"{type(e).__name__}: {e}",
        })
        for name in CONFIG_COLUMNS:
            row[name] = payload.get('config', {}).get(name)
        return {'row': row, 'metrics': None}
    return {'row': metrics.to_row(label, replication), 'metrics': metrics.to_dict()}


@dataclass
class MatrixResult:
    table: pd.DataFrame
    metrics: List[Optional[RunMetrics]]
    cells: List[MatrixCell]

    @property
    def failed(self) -> int:
        return int(self.table['error'].fillna('').astype(bool).sum())


def _dispatch(cells: List[MatrixCell]) -> List[dict]:
    from celery import group

    from apps.experiments.tasks import run_matrix_cell

    if getattr(settings, 'CELERY_TASK_ALWAYS_EAGER', True):
        return [run_matrix_cell.apply(args=(cell.to_payload(),)).get() for cell in cells]
    job = group(run_matrix_cell.s(cell.to_payload()) for cell in cells)
    return job.apply_async().get()


def run_matrix(base_config: SimConfig, grid: Dict[str, Sequence],
               variants: Iterable = tuple(SchemeVariant), replications: int = 1,
               label: str = '') -> MatrixResult:
    """One CSV row per variant x grid point x replication."""
    variants = [SchemeVariant(v) for v in variants]
    if not variants:
        raise ContractViolation("run_matrix needs at least one variant")
    cells = build_cells(base_config, grid, variants, replications, label)
    logger.info(f"Running matrix '{label}' with {len(cells)} cells")
    results = _dispatch(cells)
    table = pd.DataFrame([r['row'] for r in results], columns=METRIC_COLUMNS)
    metrics = [RunMetrics.from_dict(r['metrics']) if r['metrics'] else None for r in results]
    return MatrixResult(table=table, metrics=metrics, cells=cells)


def run_preset(name: str, base_config: SimConfig, replications: Optional[int] = None) -> MatrixResult:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ContractViolation(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    if replications is None:
        replications = settings.ORACLENET.get('REPLICATIONS', 20)
    if preset.overrides:
        base_config = base_config.with_overrides(**preset.overrides)
    return run_matrix(base_config, preset.grid, preset.variants, replications, label=name)


@dataclass
class FaultSweepResult:
    schedules: int
    crashes_per_task: int
    tasks: int
    finalized: int
    phases: Dict[str, int]

    @property
    def finalize_ratio(self) -> float:
        return self.finalized / self.tasks if self.tasks else 0.0

    def summary(self) -> str:
        phases = ', '.join(f"{k}={v}" for k, v in sorted(self.phases.items()))
        return (f"fault sweep: {self.schedules} schedules, {self.crashes_per_task} crashes per task, "
                f"{self.finalized}/{self.tasks} tasks finalized ({self.finalize_ratio:.2%}); phases {phases}")


def run_fault_sweep(base_config: SimConfig, schedules: int, phase: str = 'random',
                    variant: SchemeVariant = SchemeVariant.FULL) -> FaultSweepResult:
    """
    Crash floor(t/3) consensus members per task across ``schedules`` seeded runs.

    ``phase`` is one of round1, round2, submit, or random (a fresh pick per
    task). Honest nodes only, so every failure is down to the crashes.
    """
    if schedules < 1:
        raise ContractViolation("schedules must be >= 1")
    crashes = base_config.committee_size // 3
    tasks = finalized = 0
    phases = Counter()
    for schedule in range(schedules):
        config = base_config.with_overrides(
            seed=base_config.seed + schedule,
            crash_faults=crashes,
            crash_phase=phase,
            malicious_fraction=0.0,
        )
        outcome = simulate(config, variant)
        tasks += len(outcome.records)
        finalized += sum(1 for r in outcome.records if r.completed)
        phases.update(r.crash_phase for r in outcome.records if r.crash_phase)
    result = FaultSweepResult(schedules=schedules, crashes_per_task=crashes, tasks=tasks,
                              finalized=finalized, phases=dict(phases))
    logger.info(result.summary())
    return result
