"""
Experiment API Serializers.

List responses stay light; the reputation trace is only in the detail view.
"""
from rest_framework import serializers
from apps.experiments.models import ExperimentRun


class ExperimentRunListSerializer(serializers.ModelSerializer):
    status_display = serializers.CharField(source='get_status_display', read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id',
            'label',
            'variant',
            'seed',
            'replication',
            'status',
            'status_display',
            'accuracy',
            'mean_variance',
            'mean_response_time',
            'created_at',
        ]
        read_only_fields = fields


class ExperimentRunDetailSerializer(serializers.ModelSerializer):
    status_display = serializers.CharField(source='get_status_display', read_only=True)
    trace_length = serializers.SerializerMethodField()

    class Meta:
        model = ExperimentRun
        fields = [
            'id',
            'label',
            'variant',
            'seed',
            'replication',
            'status',
            'status_display',
            'error',
            'grid_point',
            'config',
            'metrics',
            'reputation_trace',
            'trace_length',
            'accuracy',
            'mean_variance',
            'mean_response_time',
            'created_at',
            'updated_at',
        ]
        read_only_fields = fields

    def get_trace_length(self, obj) -> int:
        return len(obj.reputation_trace or [])
