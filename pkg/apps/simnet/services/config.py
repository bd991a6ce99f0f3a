"""
Simulation configuration and scenario files.

Defaults come from ``settings.ORACLENET``; scenario files and CLI flags
override them field by field. A scenario file is flat text, one
``field = value`` per line with ``#`` comments, using the SimConfig field
names. ``adversary_mix`` is written as ``kind:fraction,kind:fraction``.
"""
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional

from django.conf import settings
from django.core.exceptions import ValidationError

logger = logging.getLogger(__name__)

ADVERSARY_KINDS = ('false_data', 'lazy', 'targeted_offline', 'freeloader', 'sybil_member')
STRATEGIES = ('median', 'mean')
CRASH_PHASES = ('none', 'round1', 'round2', 'submit', 'random')
SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class SimConfig:
    node_count: int = 100
    malicious_fraction: float = 0.1
    committee_size: int = 10
    window_width: float = 1.0
    alpha: float = 0.5
    min_count: int = 1
    latency_mean: float = 1.0
    latency_std: float = 0.5
    task_count: int = 1000
    seed: int = 0
    adversary_mix: Dict[str, float] = field(default_factory=lambda: {'false_data': 0.5, 'lazy': 0.5})
    source_count: int = 4
    source_base: float = 100.0
    source_drift: float = 0.0
    source_noise: float = 0.8
    source_reversion: float = 60.0
    false_data_offset_std: float = 10.0
    lazy_extra_delay: float = 1.5
    targeted_trigger: int = 3
    reward: int = 80
    fee: int = 100
    deposit: int = 100
    min_deposit: int = 100
    slash_threshold: float = 0.0
    strategy: str = 'median'
    participation_margin: float = 2.0
    collection_deadline: float = 5.0
    consensus_hop: float = 0.05
    task_interval: float = 10.0
    max_retries: int = 3
    eps_rel: float = 1e-2
    eps_abs: float = 1e-6
    horizon: float = 1e7
    crash_faults: int = 0
    crash_phase: str = 'none'

    @classmethod
    def from_settings(cls, **overrides) -> 'SimConfig':
        """Build a validated config from ``settings.ORACLENET`` plus overrides."""
        names = {f.name for f in fields(cls)}
        defaults = {
            key.lower(): value
            for key, value in getattr(settings, 'ORACLENET', {}).items()
            if key.lower() in names
        }
        unknown = set(overrides) - names
        if unknown:
            raise ValidationError({name: 'Unknown configuration field.' for name in sorted(unknown)})
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        config = cls(**defaults)
        config.validate()
        return config

    def with_overrides(self, **overrides) -> 'SimConfig':
        config = replace(self, **{k: v for k, v in overrides.items() if v is not None})
        config.validate()
        return config

    @property
    def malicious_count(self) -> int:
        return int(round(self.malicious_fraction * self.node_count))

    def validate(self):
        """Raise ValidationError with one message per offending field."""
        errors = {}

        def check(name, ok, message):
            if not ok and name not in errors:
                errors[name] = message

        check('node_count', self.node_count >= 1, 'Must be at least 1.')
        check('committee_size', 1 <= self.committee_size <= self.node_count,
              'Must lie between 1 and node_count.')
        check('malicious_fraction', 0 <= self.malicious_fraction < 1, 'Must lie in [0, 1).')
        check('window_width', self.window_width > 0, 'Must be positive.')
        check('alpha', 0 < self.alpha < 1, 'Must lie in (0, 1).')
        check('min_count', 1 <= self.min_count <= self.committee_size,
              'Must lie between 1 and committee_size.')
        check('latency_mean', self.latency_mean > 0, 'Must be positive.')
        check('latency_std', self.latency_std >= 0, 'Must be non-negative.')
        check('task_count', self.task_count >= 0, 'Must be non-negative.')
        check('seed', 0 <= self.seed < SEED_LIMIT, 'Must be a 64-bit unsigned integer.')

        mix = self.adversary_mix or {}
        bad_kinds = sorted(set(mix) - set(ADVERSARY_KINDS))
        check('adversary_mix', not bad_kinds, f"Unknown behaviors: {', '.join(bad_kinds)}.")
        check('adversary_mix', all(v >= 0 for v in mix.values()), 'Fractions must be non-negative.')
        check('adversary_mix', sum(mix.values()) <= 1 + 1e-9, 'Fractions must sum to at most 1.')

        check('source_count', self.source_count >= 1, 'Must be at least 1.')
        check('source_noise', self.source_noise >= 0, 'Must be non-negative.')
        check('source_reversion', self.source_reversion >= 0, 'Must be non-negative.')
        check('false_data_offset_std', self.false_data_offset_std >= 0, 'Must be non-negative.')
        check('lazy_extra_delay', self.lazy_extra_delay >= 0, 'Must be non-negative.')
        check('targeted_trigger', self.targeted_trigger >= 1, 'Must be at least 1.')
        check('reward', self.reward >= 0, 'Must be non-negative.')
        check('fee', self.fee >= self.reward, 'Must cover the reward.')
        check('min_deposit', self.min_deposit >= 0, 'Must be non-negative.')
        check('deposit', self.deposit >= self.min_deposit, 'Must be at least min_deposit.')
        check('slash_threshold', self.slash_threshold >= 0, 'Must be non-negative.')
        check('strategy', self.strategy in STRATEGIES, f"Must be one of {', '.join(STRATEGIES)}.")
        check('participation_margin', self.participation_margin > 0, 'Must be positive.')
        check('collection_deadline', self.collection_deadline > 0, 'Must be positive.')
        check('consensus_hop', self.consensus_hop >= 0, 'Must be non-negative.')
        check('task_interval', self.task_interval > 0, 'Must be positive.')
        check('max_retries', self.max_retries >= 0, 'Must be non-negative.')
        check('eps_rel', self.eps_rel >= 0, 'Must be non-negative.')
        check('eps_abs', self.eps_abs > 0, 'Must be positive.')
        check('horizon', self.horizon > 0, 'Must be positive.')
        check('crash_faults', 0 <= self.crash_faults < self.committee_size,
              'Must lie between 0 and committee_size - 1.')
        check('crash_phase', self.crash_phase in CRASH_PHASES,
              f"Must be one of {', '.join(CRASH_PHASES)}.")

        if errors:
            raise ValidationError(errors)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(value)}")
        return '\n'.join(lines) + '\n'


def _format_value(value) -> str:
    if isinstance(value, dict):
        return ','.join(f"{kind}:{fraction!r}" for kind, fraction in sorted(value.items()))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name: str, raw: str):
    kind = SimConfig.__dataclass_fields__[name].type
    raw = raw.strip()
    if name == 'adversary_mix':
        mix = {}
        for item in filter(None, (part.strip() for part in raw.split(','))):
            behavior, _, fraction = item.partition(':')
            mix[behavior.strip()] = float(fraction)
        return mix
    if kind in (int, 'int'):
        return int(raw)
    if kind in (float, 'float'):
        return float(raw)
    return raw


def parse_scenario(text: str) -> Dict[str, object]:
    """Parse scenario text into SimConfig field values."""
    values = {}
    errors = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        name, sep, raw = line.partition('=')
        name = name.strip()
        if not sep:
            errors[f"line {number}"] = 'Expected "field = value".'
            continue
        if name not in SimConfig.__dataclass_fields__:
            errors[name] = 'Unknown configuration field.'
            continue
        try:
            values[name] = _coerce(name, raw)
        except ValueError:
            errors[name] = f'Invalid value "{raw.strip()}".'
    if errors:
        raise ValidationError(errors)
    return values


def load_scenario(path, **overrides) -> SimConfig:
    text = Path(path).read_text(encoding='utf-8')
    values = parse_scenario(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    logger.info(f"Loaded scenario {path}")
    return SimConfig.from_settings(**values)


def dump_scenario(config: SimConfig, path) -> Path:
    target = Path(path)
    target.write_text(config.to_text(), encoding='utf-8')
    return target


def effective_seed(seed: Optional[int]) -> Optional[int]:
    """``ORACLENET_SEED`` from the environment wins over any seed passed in."""
    forced = getattr(settings, 'ORACLENET_SEED', None)
    return forced if forced is not None else seed
