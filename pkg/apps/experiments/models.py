import math
import uuid

from django.db import models


def json_safe(value):
    """NaN and infinities become None; JSON columns reject them."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


class ExperimentRun(models.Model):
    """
    One simulated scenario run under one scheme variant.

    ``metrics`` holds the CSV row; ``reputation_trace`` the per-task
    reputation records so a report can be re-emitted without re-running.
    """

    STATUS_CHOICES = [
        ('COMPLETED', 'Completed'),
        ('FAILED', 'Failed'),
    ]

    VARIANT_CHOICES = [
        ('full', 'Full scheme'),
        ('no_reputation', 'Without reputation weighting'),
        ('no_filter', 'Without window filter'),
        ('baseline', 'Baseline'),
    ]

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)

    label = models.CharField(max_length=100, db_index=True, help_text="Run or matrix label")
    variant = models.CharField(max_length=20, choices=VARIANT_CHOICES, db_index=True)
    seed = models.BigIntegerField()
    replication = models.IntegerField(default=0)

    grid_point = models.JSONField(default=dict, blank=True)
    config = models.JSONField(default=dict)
    metrics = models.JSONField(default=dict, blank=True)
    reputation_trace = models.JSONField(default=list, blank=True)

    accuracy = models.FloatField(null=True, blank=True)
    mean_variance = models.FloatField(null=True, blank=True)
    mean_response_time = models.FloatField(null=True, blank=True)

    status = models.CharField(
        max_length=20,
        choices=STATUS_CHOICES,
        default='COMPLETED',
        db_index=True
    )
    error = models.TextField(blank=True, default='')

    created_at = models.DateTimeField(auto_now_add=True, db_index=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        db_table = 'experiments_experimentrun'
        ordering = ['-created_at']
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'
        indexes = [
            models.Index(fields=['label', 'variant'], name='exprun_label_variant_idx'),
            models.Index(fields=['label', 'status'], name='exprun_label_status_idx'),
        ]

    def __str__(self):
        return f"{self.label} {self.variant} seed={self.seed} ({self.status})"

    @classmethod
    def record(cls, label, row, trace_rows=(), grid_point=None, config=None):
        """Persist one report row (as produced by RunMetrics.to_row or a failed matrix cell)."""
        row = json_safe(dict(row))
        failed = bool(row.get('error'))
        return cls.objects.create(
            label=label,
            variant=row.get('variant') or '',
            seed=row.get('seed') or 0,
            replication=row.get('replication') or 0,
            grid_point=json_safe(grid_point or {}),
            config=json_safe(config or {}),
            metrics=row,
            reputation_trace=json_safe(list(trace_rows)),
            accuracy=None if failed else row.get('accuracy'),
            mean_variance=None if failed else row.get('mean_variance'),
            mean_response_time=None if failed else row.get('mean_response_time'),
            status='FAILED' if failed else 'COMPLETED',
            error=row.get('error') or '',
        )
