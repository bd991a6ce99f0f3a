from django.contrib import admin
from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = [
        'label',
        'variant',
        'seed',
        'replication',
        'status',
        'accuracy',
        'mean_variance',
        'mean_response_time',
        'created_at',
    ]
    list_filter = ['status', 'variant', 'label', 'created_at']
    search_fields = ['label', 'error']
    readonly_fields = ['id', 'created_at', 'updated_at']

    fieldsets = (
        ('Run', {
            'fields': ('id', 'label', 'variant', 'seed', 'replication', 'status', 'error')
        }),
        ('Headline Metrics', {
            'fields': ('accuracy', 'mean_variance', 'mean_response_time')
        }),
        ('Details', {
            'fields': ('grid_point', 'config', 'metrics', 'reputation_trace'),
            'classes': ('collapse',)
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at')
        }),
    )
