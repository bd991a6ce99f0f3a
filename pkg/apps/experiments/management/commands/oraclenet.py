"""
Management command to run oracle network simulations and experiment matrices.

Usage:
    # One scenario under the full scheme, report bundle in ./out
    python manage.py oraclenet run --nodes 100 --malicious 0.1 --committee 10 --out out

    # Same scenario from a scenario file, baseline variant
    python manage.py oraclenet run --scenario scenarios/table2.txt --variant baseline --out out

    # A preset study with 20 seeds per cell
    python manage.py oraclenet matrix --preset malicious --replications 20 --out out/malicious

    # Ad hoc sweep
    python manage.py oraclenet matrix --grid committee_size=5,10,20 --variants full baseline --out out/t

    # Re-emit the report bundle for stored runs
    python manage.py oraclenet report --label malicious --out out/malicious

    # Crash floor(t/3) members per task over 100 schedules
    python manage.py oraclenet faults --schedules 100 --phase random

ORACLENET_SEED in the environment overrides --seed for every action.
Configuration problems and unwritable output paths exit with status 2.
"""
import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.models import ExperimentRun
from apps.experiments.services.harness import (
    FAULT_PHASES,
    PRESETS,
    run_fault_sweep,
    run_matrix,
    run_preset,
    run_scenario,
)
from apps.experiments.services.report import emit_report
from apps.experiments.services.variants import SchemeVariant
from apps.oracle.exceptions import ContractViolation
from apps.simnet.services.config import SimConfig, effective_seed, load_scenario

logger = logging.getLogger(__name__)

USAGE_ERROR = 2

# CLI flag -> SimConfig field
FLAG_FIELDS = {
    'nodes': 'node_count',
    'malicious': 'malicious_fraction',
    'committee': 'committee_size',
    'window': 'window_width',
    'alpha': 'alpha',
    'zeta': 'min_count',
    'tasks': 'task_count',
    'seed': 'seed',
}


def _validation_message(error: ValidationError) -> str:
    if hasattr(error, 'message_dict'):
        return '; '.join(f"{field}: {' '.join(messages)}" for field, messages in sorted(error.message_dict.items()))
    return ' '.join(error.messages)


def _parse_grid(items):
    grid = {}
    for item in items or []:
        name, sep, raw = item.partition('=')
        name = name.strip()
        if not sep or name not in SimConfig.__dataclass_fields__:
            raise CommandError(f'Invalid grid entry "{item}"; expected field=v1,v2,...', returncode=USAGE_ERROR)
        kind = SimConfig.__dataclass_fields__[name].type
        cast = int if kind in (int, 'int') else float
        try:
            grid[name] = [cast(v) for v in raw.split(',') if v.strip()]
        except ValueError:
            raise CommandError(f'Invalid values in grid entry "{item}"', returncode=USAGE_ERROR)
    return grid


class Command(BaseCommand):
    help = 'Run oracle network simulations, experiment matrices and fault sweeps'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='action', help='Action to perform')

        # Run command
        run_parser = subparsers.add_parser('run', help='Run a single scenario')
        self._add_scenario_arguments(run_parser)
        run_parser.add_argument('--variant', type=str, default=SchemeVariant.FULL.value,
                                choices=SchemeVariant.choices(), help='Scheme variant (default: full)')
        run_parser.add_argument('--out', type=str, required=True, help='Output directory for the report bundle')
        run_parser.add_argument('--label', type=str, default='run', help='Label stored with the run')

        # Matrix command
        matrix_parser = subparsers.add_parser('matrix', help='Run a parameter sweep')
        self._add_scenario_arguments(matrix_parser)
        matrix_parser.add_argument('--preset', type=str, choices=sorted(PRESETS),
                                   help='Predefined study (overrides --grid and --variants)')
        matrix_parser.add_argument('--grid', type=str, action='append',
                                   help='Sweep entry field=v1,v2,... (repeatable)')
        matrix_parser.add_argument('--variants', type=str, nargs='+', choices=SchemeVariant.choices(),
                                   default=[SchemeVariant.FULL.value, SchemeVariant.BASELINE.value],
                                   help='Scheme variants to run (default: full baseline)')
        matrix_parser.add_argument('--replications', type=int, default=None,
                                   help='Seeds per cell (default: ORACLENET REPLICATIONS, or 1 without a preset)')
        matrix_parser.add_argument('--out', type=str, required=True, help='Output directory for the report bundle')
        matrix_parser.add_argument('--label', type=str, help='Label stored with the runs (default: preset name or "matrix")')

        # Report command
        report_parser = subparsers.add_parser('report', help='Re-emit the report bundle for stored runs')
        report_parser.add_argument('--label', type=str, required=True, help='Label of the stored runs')
        report_parser.add_argument('--out', type=str, required=True, help='Output directory')

        # Faults command
        faults_parser = subparsers.add_parser('faults', help='Crash floor(t/3) consensus members per task')
        self._add_scenario_arguments(faults_parser)
        faults_parser.add_argument('--schedules', type=int, default=100, help='Number of seeded schedules')
        faults_parser.add_argument('--phase', type=str, default='random', choices=FAULT_PHASES + ('random',),
                                   help='Phase at which members crash (default: random per task)')
        faults_parser.add_argument('--variant', type=str, default=SchemeVariant.FULL.value,
                                   choices=SchemeVariant.choices(), help='Scheme variant (default: full)')

    def _add_scenario_arguments(self, parser):
        parser.add_argument('--scenario', type=str, help='Scenario file (field = value lines)')
        parser.add_argument('--nodes', type=int, help='Number of oracle nodes')
        parser.add_argument('--malicious', type=float, help='Fraction of malicious nodes')
        parser.add_argument('--committee', type=int, help='Consensus group size t')
        parser.add_argument('--window', type=float, help='Filter window width in seconds')
        parser.add_argument('--alpha', type=float, help='Reputation weighting alpha')
        parser.add_argument('--zeta', type=int, help='Minimum responses kept by the filter')
        parser.add_argument('--tasks', type=int, help='Number of oracle tasks')
        parser.add_argument('--seed', type=int, help='Root seed (ORACLENET_SEED wins)')

    def handle(self, *args, **options):
        action = options.get('action')

        try:
            if action == 'run':
                self.handle_run(options)
            elif action == 'matrix':
                self.handle_matrix(options)
            elif action == 'report':
                self.handle_report(options)
            elif action == 'faults':
                self.handle_faults(options)
            else:
                raise CommandError('Please specify an action: run, matrix, report, or faults',
                                   returncode=USAGE_ERROR)
        except ValidationError as e:
            raise CommandError(f'Invalid configuration: {_validation_message(e)}', returncode=USAGE_ERROR)
        except ContractViolation as e:
            raise CommandError(str(e), returncode=USAGE_ERROR)

    def load_config(self, options) -> SimConfig:
        overrides = {field: options.get(flag) for flag, field in FLAG_FIELDS.items()}
        overrides['seed'] = effective_seed(overrides['seed'])
        if options.get('scenario'):
            try:
                return load_scenario(options['scenario'], **overrides)
            except OSError as e:
                raise CommandError(f'Cannot read scenario file: {e}', returncode=USAGE_ERROR)
        return SimConfig.from_settings(**overrides)

    def write_report(self, rows, out, trace_rows=(), notes=()):
        try:
            paths = emit_report(rows, out, trace_rows=trace_rows, notes=notes)
        except OSError as e:
            raise CommandError(f'Cannot write report to "{out}": {e}', returncode=USAGE_ERROR)
        for kind, path in paths.items():
            self.stdout.write(f'  {kind}: {path}')
        return paths

    def handle_run(self, options):
        config = self.load_config(options)
        label = options['label']
        metrics = run_scenario(config, SchemeVariant(options['variant']))

        row = metrics.to_row(label)
        trace_rows = metrics.trace_rows(label)
        ExperimentRun.record(label, row, trace_rows, config=config.to_dict())

        self.stdout.write(
            f'{metrics.variant} seed={metrics.seed}: accuracy={metrics.accuracy:.4f} '
            f'variance={metrics.mean_variance:.6g} response={metrics.mean_response_time:.4f}s '
            f'completed={metrics.completed_tasks} failed={metrics.failed_tasks}'
        )
        self.write_report([row], options['out'], trace_rows)
        self.stdout.write(self.style.SUCCESS(f'Successfully ran scenario "{label}"'))

    def handle_matrix(self, options):
        config = self.load_config(options)
        preset = options.get('preset')
        replications = options.get('replications')

        if preset:
            label = options.get('label') or preset
            result = run_preset(preset, config, replications)
        else:
            grid = _parse_grid(options.get('grid'))
            label = options.get('label') or 'matrix'
            result = run_matrix(config, grid, options['variants'], replications or 1, label=label)

        rows = result.table.to_dict('records')
        trace_rows = []
        for cell, row, metrics in zip(result.cells, rows, result.metrics):
            cell_traces = metrics.trace_rows(label, cell.replication) if metrics else []
            trace_rows.extend(cell_traces)
            ExperimentRun.record(label, row, cell_traces, grid_point=cell.grid_point, config=cell.config)

        self.write_report(rows, options['out'], trace_rows)
        if result.failed:
            self.stdout.write(self.style.WARNING(f'{result.failed} of {len(rows)} cells failed; see the error column'))
        self.stdout.write(self.style.SUCCESS(f'Successfully ran matrix "{label}" ({len(rows)} rows)'))

    def handle_report(self, options):
        label = options['label']
        runs = list(ExperimentRun.objects.filter(label=label).order_by('variant', 'seed', 'created_at'))
        if not runs:
            raise CommandError(f'No stored runs with label "{label}"', returncode=USAGE_ERROR)

        rows = [run.metrics for run in runs]
        trace_rows = [entry for run in runs for entry in run.reputation_trace]
        self.write_report(rows, options['out'], trace_rows)
        self.stdout.write(self.style.SUCCESS(f'Successfully re-emitted report for "{label}" ({len(rows)} runs)'))

    def handle_faults(self, options):
        config = self.load_config(options)
        result = run_fault_sweep(config, options['schedules'], phase=options['phase'],
                                 variant=SchemeVariant(options['variant']))
        self.stdout.write(result.summary())
        if result.finalized == result.tasks:
            self.stdout.write(self.style.SUCCESS('All tasks finalized'))
        else:
            self.stdout.write(self.style.WARNING(f'{result.tasks - result.finalized} tasks failed to finalize'))
