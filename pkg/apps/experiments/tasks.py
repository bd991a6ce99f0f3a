"""Celery tasks for matrix cells; each cell owns an isolated simulator."""
from celery import shared_task

from apps.experiments.services.harness import execute_cell


@shared_task(name='experiments.run_matrix_cell')
def run_matrix_cell(payload: dict) -> dict:
    return execute_cell(payload)
