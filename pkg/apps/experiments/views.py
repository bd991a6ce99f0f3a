"""
Experiment API Views.

Read-only access to persisted simulation runs.
"""
import logging
from django.db import connection
from django_filters import rest_framework as filters
from rest_framework import viewsets
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from apps.experiments.models import ExperimentRun
from apps.experiments.serializers import (
    ExperimentRunDetailSerializer,
    ExperimentRunListSerializer,
)

logger = logging.getLogger(__name__)


class ExperimentRunFilter(filters.FilterSet):
    label = filters.CharFilter(field_name='label')
    variant = filters.ChoiceFilter(choices=ExperimentRun.VARIANT_CHOICES)
    status = filters.ChoiceFilter(choices=ExperimentRun.STATUS_CHOICES)
    min_accuracy = filters.NumberFilter(field_name='accuracy', lookup_expr='gte')

    class Meta:
        model = ExperimentRun
        fields = ['label', 'variant', 'status', 'seed']


class ExperimentRunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    API endpoints for experiment runs.

    Endpoints:
    - GET /api/v1/experiments/runs/ - List runs (filter by label, variant, status, seed)
    - GET /api/v1/experiments/runs/{id}/ - Run detail with config, metrics and trace
    """
    queryset = ExperimentRun.objects.all().order_by('-created_at')
    filterset_class = ExperimentRunFilter
    ordering_fields = ['created_at', 'accuracy', 'mean_variance', 'mean_response_time', 'seed']
    lookup_field = 'id'

    def get_serializer_class(self):
        if self.action == 'list':
            return ExperimentRunListSerializer
        return ExperimentRunDetailSerializer


@api_view(['GET'])
@permission_classes([AllowAny])
def health_check(request):
    """Liveness plus a database round trip."""
    try:
        with connection.cursor() as cursor:
            cursor.execute('SELECT 1')
        database = 'ok'
    except Exception as e:
        logger.error(f"Health check database error: {e}")
        database = 'error'
    status_code = 200 if database == 'ok' else 503
    return Response({
        'status': 'healthy' if database == 'ok' else 'degraded',
        'database': database,
        'runs': ExperimentRun.objects.count() if database == 'ok' else None,
    }, status=status_code)
