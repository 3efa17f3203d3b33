from __future__ import annotations

from django.db import models
from django.utils import timezone

from .constants import SCENARIO_CHOICES, TIER_CHOICES


def _now():
    return timezone.now()


class SolverRun(models.Model):
    scenario = models.CharField(max_length=20, choices=SCENARIO_CHOICES)
    tiers = models.CharField(max_length=40, blank=True)  # comma separated
    seed = models.BigIntegerField(default=0)

    config = models.JSONField(default=dict, blank=True)
    summary = models.JSONField(default=dict, blank=True)
    passed = models.BooleanField(default=True)

    created_at = models.DateTimeField(default=_now)

    class Meta:
        ordering = ["-created_at", "-id"]

    def __str__(self):
        return f"#{self.pk} {self.scenario} ({self.tiers})"

    def as_dict(self) -> dict:
        return {
            "id": self.pk,
            "scenario": self.scenario,
            "tiers": [t for t in self.tiers.split(",") if t],
            "seed": self.seed,
            "passed": self.passed,
            "created_at": self.created_at.isoformat(),
            "config": self.config,
            "summary": self.summary,
        }


class ConvergencePoint(models.Model):
    run = models.ForeignKey(SolverRun, on_delete=models.CASCADE, related_name="points")
    tier = models.CharField(max_length=10, choices=TIER_CHOICES)
    n = models.PositiveIntegerField()
    tiles = models.PositiveIntegerField()

    capacitance_farads = models.FloatField()
    capacitance_normalized = models.FloatField()
    assembly_seconds = models.FloatField(default=0.0)
    solve_seconds = models.FloatField(default=0.0)

    # Coarse point-charge results kept for the record but left out of plots.
    flagged = models.BooleanField(default=False)

    class Meta:
        ordering = ["tier", "n"]
        constraints = [
            models.UniqueConstraint(fields=["run", "tier", "n"], name="unique_point_per_run_tier_n"),
        ]

    def __str__(self):
        return f"{self.tier} n={self.n}: {self.capacitance_normalized:.6f}"

    def as_dict(self) -> dict:
        return {
            "tier": self.tier,
            "n": self.n,
            "tiles": self.tiles,
            "capacitance_F": self.capacitance_farads,
            "capacitance_4pie0": self.capacitance_normalized,
            "assembly_s": self.assembly_seconds,
            "solve_s": self.solve_seconds,
            "flagged": self.flagged,
        }

    def to_record(self):
        from .experiments import ConvergenceRecord
        from .kernels import KernelTier

        return ConvergenceRecord(
            tier=KernelTier.parse(self.tier),
            n=self.n,
            tile_count=self.tiles,
            capacitance_farads=self.capacitance_farads,
            capacitance_normalized=self.capacitance_normalized,
            assembly_seconds=self.assembly_seconds,
            solve_seconds=self.solve_seconds,
            flagged=self.flagged,
        )
