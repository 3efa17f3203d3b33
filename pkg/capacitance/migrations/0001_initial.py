import capacitance.models
from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SolverRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("scenario", models.CharField(choices=[("parallel-plate", "Parallel plate"), ("cube", "Unit cube"), ("square", "Maxwell square"), ("custom", "Custom geometry"), ("verify", "Kernel verification")], max_length=20)),
                ("tiers", models.CharField(blank=True, max_length=40)),
                ("seed", models.BigIntegerField(default=0)),
                ("config", models.JSONField(blank=True, default=dict)),
                ("summary", models.JSONField(blank=True, default=dict)),
                ("passed", models.BooleanField(default=True)),
                ("created_at", models.DateTimeField(default=capacitance.models._now)),
            ],
            options={
                "ordering": ["-created_at", "-id"],
            },
        ),
        migrations.CreateModel(
            name="ConvergencePoint",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("tier", models.CharField(choices=[("point", "Point charge"), ("double", "Center collocation"), ("quad", "Galerkin quadruple")], max_length=10)),
                ("n", models.PositiveIntegerField()),
                ("tiles", models.PositiveIntegerField()),
                ("capacitance_farads", models.FloatField()),
                ("capacitance_normalized", models.FloatField()),
                ("assembly_seconds", models.FloatField(default=0.0)),
                ("solve_seconds", models.FloatField(default=0.0)),
                ("flagged", models.BooleanField(default=False)),
                ("run", models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name="points", to="capacitance.solverrun")),
            ],
            options={
                "ordering": ["tier", "n"],
                "constraints": [models.UniqueConstraint(fields=("run", "tier", "n"), name="unique_point_per_run_tier_n")],
            },
        ),
    ]
