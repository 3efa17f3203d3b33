from django.contrib import admin

from .models import ConvergencePoint, SolverRun


class ConvergencePointInline(admin.TabularInline):
    model = ConvergencePoint
    extra = 0
    readonly_fields = ("tier", "n", "tiles", "capacitance_farads", "capacitance_normalized",
                       "assembly_seconds", "solve_seconds", "flagged")


@admin.register(SolverRun)
class SolverRunAdmin(admin.ModelAdmin):
    list_display = ("id", "scenario", "tiers", "seed", "passed", "created_at")
    list_filter = ("scenario", "passed")
    inlines = [ConvergencePointInline]


@admin.register(ConvergencePoint)
class ConvergencePointAdmin(admin.ModelAdmin):
    list_display = ("run", "tier", "n", "tiles", "capacitance_normalized", "flagged")
    list_filter = ("tier", "flagged")
