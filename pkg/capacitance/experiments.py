"""Scenario runners behind the ``capacitance`` management command.

Each runner solves its geometry for every requested tier and mesh density,
writes its artifacts to ``RunConfig.output_dir`` (when set) and returns the
records. ``run_scenario`` dispatches on the scenario name and also builds the
summary stored by ``record_run``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .constants import (
    CUBE_REFERENCE_NORMALIZED,
    MAXWELL_DIVISIONS,
    MAXWELL_GROUPS,
    POINT_TIER_FLAGGED_POINTS,
    SCENARIO_CUBE,
    SCENARIO_CUSTOM,
    SCENARIO_PARALLEL_PLATE,
    SCENARIO_SQUARE,
    SCENARIO_VERIFY,
    SCENARIO_CHOICES,
)
from .exceptions import ConductorCountError, ConfigurationError
from .exports import write_charge_map_csv, write_convergence_csv, write_json
from .geometry import build_cube, build_parallel_plate, build_square, load_geometry_file
from .kernels import DEFAULT_TIER, KernelTier, PhysicalConstants
from .oracle import VerificationReport, verify_kernels
from .solver import charge_map, extract

logger = logging.getLogger(__name__)

SCENARIOS = tuple(key for key, _ in SCENARIO_CHOICES)

DEFAULT_SWEEPS = {
    SCENARIO_PARALLEL_PLATE: (4, 8, 16, 24),
    SCENARIO_CUBE: (1, 2, 4, 8),
}


def parse_tiers(value) -> tuple[KernelTier, ...]:
    if value in (None, ""):
        return (DEFAULT_TIER,)
    if isinstance(value, str):
        if value.strip().lower() == "all":
            return tuple(KernelTier)
        value = value.split(",")
    try:
        tiers = tuple(KernelTier.parse(v) for v in value)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    if len(set(tiers)) != len(tiers):
        raise ConfigurationError(f"tier listed twice in {[t.value for t in tiers]}")
    return tiers


def parse_sweep(value) -> tuple[int, ...]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            value = [int(p) for p in parts]
        except ValueError:
            raise ConfigurationError(f"sweep must be a comma separated list of integers, got {value!r}") from None
    return tuple(value)


@dataclass
class RunConfig:
    scenario: str
    n_values: tuple[int, ...] | None = None
    tiers: tuple[KernelTier, ...] = (DEFAULT_TIER,)
    width: float = 1.0
    depth: float = 1.0
    gap: float = 0.1
    edge: float = 1.0
    voltage: float = 1.0
    geometry_path: Path | None = None
    output_dir: Path | None = None
    seed: int = 0
    trials: int | None = None
    memory_cap_gib: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        self.tiers = parse_tiers(self.tiers)

        if self.n_values is None:
            self.n_values = DEFAULT_SWEEPS.get(self.scenario, ())
        self.n_values = parse_sweep(self.n_values)
        if not self.n_values and self.scenario in (SCENARIO_PARALLEL_PLATE, SCENARIO_CUBE):
            raise ConfigurationError(f"the {self.scenario} scenario needs at least one mesh division")
        for n in self.n_values:
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
                raise ConfigurationError(f"mesh divisions must be positive integers, got {n!r}")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ConfigurationError(f"sweep must be strictly increasing, got {list(self.n_values)}")

        for name in ("width", "depth", "gap", "edge"):
            value = float(getattr(self, name))
            if not value > 0:
                raise ConfigurationError(f"--{name} must be positive, got {value}")
            setattr(self, name, value)
        self.voltage = float(self.voltage)
        if self.voltage == 0:
            raise ConfigurationError("--voltage must be non-zero")

        if self.scenario == SCENARIO_CUSTOM and self.geometry_path is None:
            raise ConfigurationError("the custom scenario needs --geometry")
        if self.geometry_path is not None:
            self.geometry_path = Path(self.geometry_path)
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)
        if self.trials is not None and self.trials < 1:
            raise ConfigurationError(f"--trials must be positive, got {self.trials}")
        if self.memory_cap_gib is not None and not self.memory_cap_gib > 0:
            raise ConfigurationError(f"--memory-cap-gib must be positive, got {self.memory_cap_gib}")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_values": list(self.n_values),
            "tiers": [t.value for t in self.tiers],
            "width": self.width,
            "depth": self.depth,
            "gap": self.gap,
            "edge": self.edge,
            "voltage": self.voltage,
            "geometry": str(self.geometry_path) if self.geometry_path else None,
            "seed": self.seed,
            "trials": self.trials,
            "memory_cap_gib": self.memory_cap_gib,
        }

    def artifact(self, name: str) -> Path | None:
        return self.output_dir / name if self.output_dir is not None else None


@dataclass(frozen=True)
class ConvergenceRecord:
    tier: KernelTier
    n: int
    tile_count: int
    capacitance_farads: float
    capacitance_normalized: float
    assembly_seconds: float
    solve_seconds: float
    flagged: bool = False

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["tier"] = self.tier.value
        return payload


@dataclass
class ScenarioOutcome:
    summary: dict
    records: list[ConvergenceRecord] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)
    passed: bool = True


def _sweep(config: RunConfig, build, artifacts: list[Path]) -> list[ConvergenceRecord]:
    records = []
    for tier in config.tiers:
        tier_records = []
        last = None
        for idx, n in enumerate(config.n_values):
            mesh = build(n)
            extraction = extract(mesh, tier, memory_cap_gib=config.memory_cap_gib)
            result = extraction.result
            record = ConvergenceRecord(
                tier=tier,
                n=n,
                tile_count=len(mesh),
                capacitance_farads=result.capacitance_farads,
                capacitance_normalized=result.capacitance_normalized,
                assembly_seconds=extraction.assembly_seconds,
                solve_seconds=extraction.solve_seconds,
                flagged=tier is KernelTier.POINT_CHARGE and idx < POINT_TIER_FLAGGED_POINTS,
            )
            logger.info("%s %s n=%d: %d tiles, C=%.6e F (%.6f)", config.scenario, tier.value, n,
                        record.tile_count, record.capacitance_farads, record.capacitance_normalized)
            tier_records.append(record)
            last = (n, mesh, result)

        path = config.artifact(f"{config.scenario}_{tier.value}.csv")
        if path is not None:
            artifacts.append(write_convergence_csv(tier_records, path))
            n, mesh, result = last
            artifacts.append(write_charge_map_csv(
                charge_map(result, mesh), config.artifact(f"{config.scenario}_{tier.value}_n{n}_charge_map.csv"),
            ))
        records.extend(tier_records)
    return records


def plate_summary(config: RunConfig, records) -> dict:
    constants = PhysicalConstants.from_settings()
    return {
        "scenario": config.to_dict(),
        "ideal_capacitance_F": constants.epsilon_0 * config.width * config.depth / config.gap,
        "results": [r.to_dict() for r in records],
    }


def cube_summary(config: RunConfig, records) -> dict:
    results = []
    for r in records:
        entry = r.to_dict()
        entry["relative_error_vs_reference"] = abs(r.capacitance_normalized - CUBE_REFERENCE_NORMALIZED) / CUBE_REFERENCE_NORMALIZED
        results.append(entry)
    return {
        "scenario": config.to_dict(),
        "reference_4pie0": CUBE_REFERENCE_NORMALIZED,
        "results": results,
    }


def run_parallel_plate_sweep(config: RunConfig, artifacts: list[Path] | None = None) -> list[ConvergenceRecord]:
    artifacts = artifacts if artifacts is not None else []
    records = _sweep(config, lambda n: build_parallel_plate(config.width, config.depth, config.gap, n), artifacts)
    path = config.artifact("parallel-plate_summary.json")
    if path is not None:
        artifacts.append(write_json(plate_summary(config, records), path))
    return records


def run_cube(config: RunConfig, artifacts: list[Path] | None = None) -> list[ConvergenceRecord]:
    artifacts = artifacts if artifacts is not None else []
    records = _sweep(config, lambda n: build_cube(config.edge, n), artifacts)
    path = config.artifact("cube_summary.json")
    if path is not None:
        artifacts.append(write_json(cube_summary(config, records), path))
    return records


def maxwell_group(row: int, col: int, divisions: int = MAXWELL_DIVISIONS) -> str:
    """Letter of a tile in Maxwell's square, from its distance to the nearest edges."""
    i = min(row, divisions - 1 - row)
    j = min(col, divisions - 1 - col)
    return MAXWELL_GROUPS[(min(i, j), max(i, j))]


def count_distinct(values, rtol: float = 1e-6) -> int:
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        return 0
    gaps = np.abs(np.diff(ordered)) > rtol * np.abs(ordered[1:])
    return int(gaps.sum()) + 1


@dataclass(frozen=True)
class ChargeGroup:
    letter: str
    count: int
    mean_charge: float
    mean_density: float
    relative_spread: float


@dataclass
class MaxwellReport:
    tier: KernelTier
    groups: dict[str, ChargeGroup]
    distinct_values: int
    capacitance_farads: float
    capacitance_normalized: float
    total_charge: float

    @property
    def populations(self) -> dict[str, int]:
        return {letter: g.count for letter, g in self.groups.items()}

    def to_dict(self) -> dict:
        return {
            "tier": self.tier.value,
            "groups": {k: asdict(v) for k, v in self.groups.items()},
            "distinct_values": self.distinct_values,
            "capacitance_F": self.capacitance_farads,
            "capacitance_4pie0": self.capacitance_normalized,
            "total_charge_C": self.total_charge,
        }


def run_maxwell_square(config: RunConfig, artifacts: list[Path] | None = None) -> list[MaxwellReport]:
    artifacts = artifacts if artifacts is not None else []
    divisions = MAXWELL_DIVISIONS
    mesh = build_square(config.edge, divisions, config.voltage)
    letters = [maxwell_group(idx // divisions, idx % divisions, divisions) for idx in range(len(mesh))]

    reports = []
    for tier in config.tiers:
        result = extract(mesh, tier, memory_cap_gib=config.memory_cap_gib).result
        groups = {}
        for letter in sorted(set(letters)):
            members = np.array([i for i, l in enumerate(letters) if l == letter])
            charges = result.charges[members]
            mean = float(charges.mean())
            groups[letter] = ChargeGroup(
                letter=letter,
                count=int(members.size),
                mean_charge=mean,
                mean_density=float(result.charge_densities[members].mean()),
                relative_spread=float((charges.max() - charges.min()) / abs(mean)),
            )
        report = MaxwellReport(
            tier=tier,
            groups=groups,
            distinct_values=count_distinct(result.charges),
            capacitance_farads=result.capacitance_farads,
            capacitance_normalized=result.capacitance_normalized,
            total_charge=float(result.charges.sum()),
        )
        logger.info("Maxwell square (%s): %d distinct charges, C=%.6e F", tier.value, report.distinct_values,
                    report.capacitance_farads)
        reports.append(report)

        path = config.artifact(f"square_{tier.value}_charge_map.csv")
        if path is not None:
            artifacts.append(write_charge_map_csv(charge_map(result, mesh), path))

    path = config.artifact("square_summary.json")
    if path is not None:
        artifacts.append(write_json({"scenario": config.to_dict(), "results": [r.to_dict() for r in reports]}, path))
    return reports


def run_custom(config: RunConfig, artifacts: list[Path] | None = None) -> dict:
    artifacts = artifacts if artifacts is not None else []
    mesh = load_geometry_file(config.geometry_path)
    if len(mesh.conductors) > 2:
        raise ConductorCountError(len(mesh.conductors))

    results = {}
    for tier in config.tiers:
        extraction = extract(mesh, tier, memory_cap_gib=config.memory_cap_gib)
        entry = extraction.result.summary()
        entry["assembly_s"] = extraction.assembly_seconds
        entry["solve_s"] = extraction.solve_seconds
        results[tier.value] = entry

        path = config.artifact(f"custom_{tier.value}_charge_map.csv")
        if path is not None:
            artifacts.append(write_charge_map_csv(charge_map(extraction.result, mesh), path))

    summary = {
        "scenario": config.to_dict(),
        "tiles": len(mesh),
        "conductors": {str(k): v for k, v in mesh.conductors.items()},
        "results": results,
    }
    path = config.artifact("custom_summary.json")
    if path is not None:
        artifacts.append(write_json(summary, path))
    return summary


def run_verify(config: RunConfig, artifacts: list[Path] | None = None) -> VerificationReport:
    artifacts = artifacts if artifacts is not None else []
    report = verify_kernels(config.trials, config.seed)
    path = config.artifact("verification.json")
    if path is not None:
        artifacts.append(write_json(report.to_dict(), path))
    return report


def run_scenario(config: RunConfig) -> ScenarioOutcome:
    artifacts: list[Path] = []
    if config.scenario == SCENARIO_PARALLEL_PLATE:
        records = run_parallel_plate_sweep(config, artifacts)
        return ScenarioOutcome(plate_summary(config, records), records, artifacts)
    if config.scenario == SCENARIO_CUBE:
        records = run_cube(config, artifacts)
        return ScenarioOutcome(cube_summary(config, records), records, artifacts)
    if config.scenario == SCENARIO_SQUARE:
        reports = run_maxwell_square(config, artifacts)
        return ScenarioOutcome({"scenario": config.to_dict(), "results": [r.to_dict() for r in reports]},
                               artifacts=artifacts)
    if config.scenario == SCENARIO_CUSTOM:
        return ScenarioOutcome(run_custom(config, artifacts), artifacts=artifacts)
    if config.scenario == SCENARIO_VERIFY:
        report = run_verify(config, artifacts)
        return ScenarioOutcome(report.summary(), artifacts=artifacts, passed=report.passed)
    raise ConfigurationError(f"unknown scenario {config.scenario!r}")


def record_run(config: RunConfig, outcome: ScenarioOutcome):
    """Persist a finished run and its sweep points."""
    from .models import ConvergencePoint, SolverRun

    run = SolverRun.objects.create(
        scenario=config.scenario,
        tiers=",".join(t.value for t in config.tiers),
        seed=config.seed,
        config=config.to_dict(),
        summary=outcome.summary,
        passed=outcome.passed,
    )
    ConvergencePoint.objects.bulk_create([
        ConvergencePoint(
            run=run,
            tier=r.tier.value,
            n=r.n,
            tiles=r.tile_count,
            capacitance_farads=r.capacitance_farads,
            capacitance_normalized=r.capacitance_normalized,
            assembly_seconds=r.assembly_seconds,
            solve_seconds=r.solve_seconds,
            flagged=r.flagged,
        )
        for r in outcome.records
    ])
    logger.info("Recorded run #%d (%s, %d points)", run.pk, run.scenario, len(outcome.records))
    return run
