"""Scheme variants compared by the experiments."""
from enum import Enum

from apps.simnet.services.tasks import PipelineFlags


class SchemeVariant(str, Enum):
    FULL = 'full'
    NO_REPUTATION = 'no_reputation'
    NO_FILTER = 'no_filter'
    BASELINE = 'baseline'

    @property
    def flags(self) -> PipelineFlags:
        if self is SchemeVariant.NO_REPUTATION:
            return PipelineFlags(weighted_positions=False)
        if self is SchemeVariant.NO_FILTER:
            return PipelineFlags(filtering=False)
        if self is SchemeVariant.BASELINE:
            return PipelineFlags(weighted_positions=False, filtering=False, fixed_committee=True)
        return PipelineFlags()

    @classmethod
    def choices(cls) -> list:
        return [v.value for v in cls]
