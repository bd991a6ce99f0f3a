# Generated by Django 4.2.7 on 2026-10-19 09:12

from django.db import migrations, models
import uuid


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.UUIDField(
                        default=uuid.uuid4,
                        editable=False,
                        primary_key=True,
                        serialize=False,
                    ),
                ),
                (
                    "label",
                    models.CharField(
                        db_index=True, help_text="Run or matrix label", max_length=100
                    ),
                ),
                (
                    "variant",
                    models.CharField(
                        choices=[
                            ("full", "Full scheme"),
                            ("no_reputation", "Without reputation weighting"),
                            ("no_filter", "Without window filter"),
                            ("baseline", "Baseline"),
                        ],
                        db_index=True,
                        max_length=20,
                    ),
                ),
                ("seed", models.BigIntegerField()),
                ("replication", models.IntegerField(default=0)),
                ("grid_point", models.JSONField(blank=True, default=dict)),
                ("config", models.JSONField(default=dict)),
                ("metrics", models.JSONField(blank=True, default=dict)),
                ("reputation_trace", models.JSONField(blank=True, default=list)),
                ("accuracy", models.FloatField(blank=True, null=True)),
                ("mean_variance", models.FloatField(blank=True, null=True)),
                ("mean_response_time", models.FloatField(blank=True, null=True)),
                (
                    "status",
                    models.CharField(
                        choices=[("COMPLETED", "Completed"), ("FAILED", "Failed")],
                        db_index=True,
                        default="COMPLETED",
                        max_length=20,
                    ),
                ),
                ("error", models.TextField(blank=True, default="")),
                ("created_at", models.DateTimeField(auto_now_add=True, db_index=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
            ],
            options={
                "verbose_name": "Experiment Run",
                "verbose_name_plural": "Experiment Runs",
                "db_table": "experiments_experimentrun",
                "ordering": ["-created_at"],
                "indexes": [
                    models.Index(
                        fields=["label", "variant"], name="exprun_label_variant_idx"
                    ),
                    models.Index(
                        fields=["label", "status"], name="exprun_label_status_idx"
                    ),
                ],
            },
        ),
    ]
