"""
Experiments URL Configuration.
"""
from django.urls import path, include
from rest_framework.routers import DefaultRouter
from apps.experiments.views import ExperimentRunViewSet, health_check

router = DefaultRouter()
router.register(r'runs', ExperimentRunViewSet, basename='experiment-runs')

app_name = 'experiments'

urlpatterns = [
    path('', include(router.urls)),
]

health_urlpatterns = [
    path('health/', health_check, name='health'),
]
