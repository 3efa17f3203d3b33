"""Assembly of the coupling matrix ``P`` (``V = P Q``) and the dense solve."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .conf import solver_setting
from .constants import MAX_CONDITION, MAX_RELATIVE_RESIDUAL
from .exceptions import ConductorCountError, MemoryCapError, SolverError
from .geometry import Mesh
from .kernels import BLOCK_EVALUATORS, DEFAULT_TIER, KernelTier, PhysicalConstants

logger = logging.getLogger(__name__)

_BYTES_PER_ENTRY = np.dtype(np.float64).itemsize


@dataclass(frozen=True)
class CouplingMatrix:
    entries: np.ndarray
    tier: KernelTier
    constants: PhysicalConstants

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise SolverError(f"coupling matrix must be square, got shape {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def symmetry_error(self) -> float:
        """Largest ``|P - P.T|`` relative to the largest entry."""
        scale = np.abs(self.entries).max()
        return float(np.abs(self.entries - self.entries.T).max() / scale) if scale else 0.0


@dataclass(frozen=True)
class SolveResult:
    charges: np.ndarray
    conductor_charges: dict[int, float]
    voltages: dict[int, float]
    charge_densities: np.ndarray
    capacitance_farads: float | None
    capacitance_normalized: float | None
    residual: float
    condition_estimate: float
    factorization: str

    def summary(self) -> dict:
        return {
            "tiles": int(self.charges.size),
            "conductor_charges_C": {str(k): v for k, v in self.conductor_charges.items()},
            "voltages_V": {str(k): v for k, v in self.voltages.items()},
            "capacitance_F": self.capacitance_farads,
            "capacitance_4pie0": self.capacitance_normalized,
            "relative_residual": self.residual,
            "condition_estimate": self.condition_estimate,
            "factorization": self.factorization,
        }


@dataclass(frozen=True)
class ChargeRecord:
    center: tuple[float, float, float]
    area: float
    charge: float
    density: float


@dataclass(frozen=True)
class Extraction:
    matrix: CouplingMatrix
    result: SolveResult
    assembly_seconds: float
    solve_seconds: float


def check_memory(tiles: int, memory_cap_gib: float | None = None) -> int:
    """Raise MemoryCapError if an ``n x n`` float64 matrix exceeds the cap."""
    cap_gib = float(memory_cap_gib if memory_cap_gib is not None else solver_setting("MEMORY_CAP_GIB"))
    cap_bytes = int(cap_gib * 2**30)
    required = tiles * tiles * _BYTES_PER_ENTRY
    if required > cap_bytes:
        raise MemoryCapError(tiles, required, cap_bytes)
    return required


def _row_blocks(n: int, chunk_pairs: int):
    rows = max(1, chunk_pairs // max(n, 1))
    for start in range(0, n, rows):
        yield start, min(n, start + rows)


def assemble(
    mesh: Mesh,
    tier=DEFAULT_TIER,
    memory_cap_gib: float | None = None,
    constants: PhysicalConstants | None = None,
    workers: int | None = None,
) -> CouplingMatrix:
    """Dense coupling matrix in mesh tile order.

    The Galerkin tier only evaluates the upper triangle and mirrors it. Work
    is split into row blocks of about ``ASSEMBLY_CHUNK_PAIRS`` entries; blocks
    write disjoint entries so they can run on a thread pool.
    """
    tier = KernelTier.parse(tier)
    constants = constants if constants is not None else PhysicalConstants.from_settings()
    n = len(mesh)
    if n < 1:
        raise SolverError("mesh has no tiles")
    check_memory(n, memory_cap_gib)

    arrays = mesh.arrays
    evaluator = BLOCK_EVALUATORS[tier]
    symmetric = tier is KernelTier.GALERKIN_QUADRUPLE
    chunk_pairs = int(solver_setting("ASSEMBLY_CHUNK_PAIRS"))
    workers = int(workers if workers is not None else solver_setting("ASSEMBLY_WORKERS"))

    started = time.perf_counter()
    entries = np.empty((n, n), dtype=np.float64)

    def fill(block):
        start, stop = block
        cols = np.arange(start if symmetric else 0, n)
        i, j = np.meshgrid(np.arange(start, stop), cols, indexing="ij")
        if symmetric:
            keep = j >= i
            i, j = i[keep], j[keep]
        else:
            i, j = i.ravel(), j.ravel()
        values = evaluator(arrays, i, j, constants)
        entries[i, j] = values
        if symmetric:
            entries[j, i] = values

    blocks = list(_row_blocks(n, chunk_pairs))
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for block in blocks:
            fill(block)

    diagonal = np.diag(entries)
    if not np.all(diagonal > 0):
        raise SolverError(f"non-positive self coupling on {int(np.sum(diagonal <= 0))} tiles")
    if not np.all(np.isfinite(entries)):
        raise SolverError("coupling matrix has non-finite entries")

    logger.info("Assembled %dx%d %s matrix in %.3fs (%d blocks, %d workers)",
                n, n, tier.value, time.perf_counter() - started, len(blocks), workers)
    return CouplingMatrix(entries=entries, tier=tier, constants=constants)


def _factor_and_solve(matrix: CouplingMatrix, rhs: np.ndarray):
    entries = matrix.entries
    anorm = float(np.abs(entries).sum(axis=0).max())
    if matrix.tier is KernelTier.GALERKIN_QUADRUPLE:
        try:
            factor = linalg.cho_factor(entries, lower=False)
        except linalg.LinAlgError as exc:
            raise SolverError(f"Galerkin matrix is not positive definite: {exc}") from None
        rcond, info = lapack.dpocon(factor[0], anorm, uplo="U")
        kind = "cholesky"
        solve = lambda: linalg.cho_solve(factor, rhs)  # noqa: E731
    else:
        lu, piv = linalg.lu_factor(entries)
        rcond, info = lapack.dgecon(lu, anorm, norm="1")
        kind = "lu"
        solve = lambda: linalg.lu_solve((lu, piv), rhs)  # noqa: E731
    if info != 0:
        raise SolverError(f"condition estimate failed (LAPACK info {info})")
    condition = np.inf if rcond == 0 else 1.0 / float(rcond)
    if condition > MAX_CONDITION:
        raise SolverError(f"coupling matrix is ill-conditioned (condition estimate {condition:.3e})")
    return solve(), condition, kind


def _capacitance_from(conductor_charges: dict[int, float], voltages: dict[int, float]) -> float:
    if len(voltages) == 1:
        (cid, voltage), = voltages.items()
        if voltage == 0:
            raise SolverError("self capacitance needs a non-zero conductor voltage")
        return conductor_charges[cid] / voltage
    if len(voltages) == 2:
        high, low = sorted(voltages, key=lambda cid: voltages[cid], reverse=True)
        difference = voltages[high] - voltages[low]
        if difference == 0:
            raise SolverError("two-conductor capacitance needs different conductor voltages")
        return conductor_charges[high] / difference
    raise ConductorCountError(len(voltages))


def solve(matrix: CouplingMatrix, mesh: Mesh) -> SolveResult:
    n = len(mesh)
    if matrix.n != n:
        raise SolverError(f"matrix is {matrix.n}x{matrix.n} but the mesh has {n} tiles")

    rhs = mesh.tile_voltages()
    charges, condition, kind = _factor_and_solve(matrix, rhs)

    v_norm = np.abs(rhs).max()
    residual_abs = np.abs(matrix.entries @ charges - rhs).max()
    residual = float(residual_abs / v_norm) if v_norm else float(residual_abs)
    if not residual < MAX_RELATIVE_RESIDUAL:
        raise SolverError(f"relative residual {residual:.3e} exceeds {MAX_RELATIVE_RESIDUAL:.0e}")

    index = mesh.conductor_index
    conductor_charges = {cid: float(charges[index == cid].sum()) for cid in mesh.conductors}
    voltages = dict(mesh.conductors)

    farads = normalized = None
    if len(voltages) <= 2:
        farads = _capacitance_from(conductor_charges, voltages)
        normalized = farads * matrix.constants.coulomb_constant

    densities = charges / mesh.arrays.area
    charges.setflags(write=False)
    densities.setflags(write=False)
    logger.info("Solved %d tiles by %s: condition %.3e, residual %.3e", n, kind, condition, residual)
    return SolveResult(
        charges=charges,
        conductor_charges=conductor_charges,
        voltages=voltages,
        charge_densities=densities,
        capacitance_farads=farads,
        capacitance_normalized=normalized,
        residual=residual,
        condition_estimate=condition,
        factorization=kind,
    )


def capacitance(result: SolveResult, mesh: Mesh) -> float:
    """Self capacitance (one conductor) or ``Q_A / (V_A - V_B)`` (two)."""
    return _capacitance_from(result.conductor_charges, dict(mesh.conductors))


def charge_map(result: SolveResult, mesh: Mesh) -> list[ChargeRecord]:
    return [
        ChargeRecord(center=tile.center, area=tile.area, charge=float(q), density=float(rho))
        for tile, q, rho in zip(mesh.tiles, result.charges, result.charge_densities)
    ]


def extract(mesh: Mesh, tier=DEFAULT_TIER, memory_cap_gib: float | None = None,
            constants: PhysicalConstants | None = None) -> Extraction:
    started = time.perf_counter()
    matrix = assemble(mesh, tier, memory_cap_gib=memory_cap_gib, constants=constants)
    assembled = time.perf_counter()
    result = solve(matrix, mesh)
    return Extraction(matrix, result, assembled - started, time.perf_counter() - assembled)
