import numpy as np
import pytest

from capacitance.constants import CUBE_N48_NORMALIZED, CUBE_REFERENCE_NORMALIZED
from capacitance.exceptions import ConductorCountError, MemoryCapError, SolverError
from capacitance.geometry import Panel, build_cube, build_mesh, build_parallel_plate, build_square
from capacitance.kernels import KernelTier, PhysicalConstants
from capacitance.solver import assemble, capacitance, charge_map, check_memory, extract, solve

CONSTANTS = PhysicalConstants(8.8541878128e-12)
K = CONSTANTS.coulomb_constant


def test_single_tile_matrix():
    matrix = assemble(build_square(1.0, 1), KernelTier.GALERKIN_QUADRUPLE, constants=CONSTANTS)
    assert matrix.n == 1
    assert matrix.entries[0, 0] / K == pytest.approx(2.97321, rel=1e-5)


def test_single_tile_capacitance():
    mesh = build_square(1.0, 1)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    assert result.capacitance_normalized == pytest.approx(1 / 2.97321, rel=1e-5)
    assert result.capacitance_normalized == pytest.approx(0.33634, rel=1e-4)
    assert result.charges[0] == pytest.approx(1.0 / assemble(mesh, constants=CONSTANTS).entries[0, 0])


def test_entries_are_read_only():
    matrix = assemble(build_square(1.0, 2), constants=CONSTANTS)
    with pytest.raises(ValueError):
        matrix.entries[0, 0] = 1.0


def test_two_plate_matrix_is_symmetric_with_equal_diagonals():
    matrix = assemble(build_parallel_plate(1, 1, 0.1, 1), constants=CONSTANTS)
    assert matrix.entries.shape == (2, 2)
    assert matrix.entries[0, 1] == matrix.entries[1, 0]
    assert matrix.entries[0, 0] == pytest.approx(matrix.entries[1, 1], rel=1e-14)


@pytest.mark.parametrize("mesh", [
    build_cube(1.0, 2),
    build_parallel_plate(1.0, 0.5, 0.2, 3),
    build_mesh([
        Panel(2, 0.0, (0, 1), (0, 1), 2, 3, conductor_id=0, voltage=1.0),
        Panel(0, 1.5, (0, 1), (-1, 0), 3, 2, conductor_id=1, voltage=0.0),
    ]),
])
def test_galerkin_matrix_is_symmetric_positive_definite(mesh):
    matrix = assemble(mesh, constants=CONSTANTS)
    assert matrix.symmetry_error() <= 1e-12
    assert np.all(np.diag(matrix.entries) > 0)
    np.linalg.cholesky(matrix.entries)
    assert solve(matrix, mesh).factorization == "cholesky"


def test_other_tiers_use_lu():
    mesh = build_parallel_plate(1, 1, 0.1, 2)
    for tier in (KernelTier.POINT_CHARGE, KernelTier.CENTER_COLLOCATION):
        result = solve(assemble(mesh, tier, constants=CONSTANTS), mesh)
        assert result.factorization == "lu"


def test_threaded_assembly_matches_serial(settings):
    settings.CAPACITANCE = {"ASSEMBLY_CHUNK_PAIRS": 64}
    mesh = build_cube(1.0, 2)
    serial = assemble(mesh, constants=CONSTANTS, workers=1)
    threaded = assemble(mesh, constants=CONSTANTS, workers=4)
    np.testing.assert_array_equal(serial.entries, threaded.entries)


def test_residual_contract():
    mesh = build_cube(1.0, 3)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    assert result.residual < 1e-10
    assert result.condition_estimate < 1e12


def test_plates_carry_opposite_charges():
    mesh = build_parallel_plate(1, 1, 0.1, 4)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    q_high, q_low = result.conductor_charges[0], result.conductor_charges[1]
    assert q_high > 0
    assert q_low == pytest.approx(-q_high, rel=1e-10)
    assert capacitance(result, mesh) == pytest.approx(abs(q_low) / 2.0, rel=1e-10)


def test_conductor_charges_and_densities():
    mesh = build_parallel_plate(2, 1, 0.3, 2)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    index = mesh.conductor_index
    for cid, total in result.conductor_charges.items():
        assert total == pytest.approx(result.charges[index == cid].sum(), rel=1e-14)
    np.testing.assert_allclose(result.charge_densities, result.charges / mesh.arrays.area, rtol=1e-15)


def test_cube_single_tile_per_face():
    mesh = build_cube(1.0, 1)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    np.testing.assert_allclose(result.charges, result.charges[0], rtol=1e-10)
    # one uniform charge per face bounds the capacitance from below
    assert 0.98 * CUBE_REFERENCE_NORMALIZED < result.capacitance_normalized < CUBE_REFERENCE_NORMALIZED


def test_voltage_scaling():
    mesh = build_parallel_plate(1, 1, 0.1, 3)
    scaled_mesh = mesh.with_voltages({0: 2.5, 1: -2.5})
    base = solve(assemble(mesh, constants=CONSTANTS), mesh)
    scaled = solve(assemble(scaled_mesh, constants=CONSTANTS), scaled_mesh)
    np.testing.assert_allclose(scaled.charges, 2.5 * base.charges, rtol=1e-12)
    assert scaled.capacitance_farads == pytest.approx(base.capacitance_farads, rel=1e-12)


def test_charge_map_records():
    mesh = build_parallel_plate(1, 1, 0.1, 2)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    records = charge_map(result, mesh)
    assert len(records) == len(mesh)
    assert records[0].center == mesh.tiles[0].center
    assert records[0].density == pytest.approx(records[0].charge / records[0].area)


def test_plate_corners_crowd_charge():
    mesh = build_parallel_plate(1, 1, 0.1, 16)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    upper = np.abs(result.charge_densities[mesh.conductor_index == 1]).reshape(16, 16)
    corners = [upper[0, 0], upper[0, -1], upper[-1, 0], upper[-1, -1]]
    rest = upper.copy()
    for r, c in [(0, 0), (0, -1), (-1, 0), (-1, -1)]:
        rest[r, c] = 0.0
    assert min(corners) > rest.max()


def test_plate_density_has_mirror_symmetry():
    mesh = build_parallel_plate(1, 1, 0.1, 8)
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    lower = result.charge_densities[mesh.conductor_index == 0].reshape(8, 8)
    np.testing.assert_allclose(lower, lower[:, ::-1], rtol=1e-8)
    np.testing.assert_allclose(lower, lower[::-1, :], rtol=1e-8)
    np.testing.assert_allclose(lower, lower.T, rtol=1e-8)


def test_memory_cap_is_checked_before_assembly():
    with pytest.raises(MemoryCapError) as info:
        assemble(build_cube(1.0, 48), memory_cap_gib=0.5, constants=CONSTANTS)
    assert info.value.tiles == 13824
    assert info.value.required_bytes == 13824 * 13824 * 8
    assert check_memory(10, memory_cap_gib=1.0) == 800


def test_three_conductors_have_no_capacitance():
    mesh = build_mesh([
        Panel(2, 0.0, (0, 1), (0, 1), conductor_id=0, voltage=1.0),
        Panel(2, 1.0, (0, 1), (0, 1), conductor_id=1, voltage=0.0),
        Panel(2, 2.0, (0, 1), (0, 1), conductor_id=2, voltage=-1.0),
    ])
    result = solve(assemble(mesh, constants=CONSTANTS), mesh)
    assert result.capacitance_farads is None
    with pytest.raises(ConductorCountError, match="3 conductors"):
        capacitance(result, mesh)


def test_equal_voltages_are_rejected():
    mesh = build_parallel_plate(1, 1, 0.1, 1).with_voltages({0: 1.0, 1: 1.0})
    with pytest.raises(SolverError):
        solve(assemble(mesh, constants=CONSTANTS), mesh)


def test_matrix_mesh_mismatch():
    matrix = assemble(build_square(1.0, 2), constants=CONSTANTS)
    with pytest.raises(SolverError):
        solve(matrix, build_square(1.0, 3))


def test_extract_reports_timings():
    extraction = extract(build_cube(1.0, 1), constants=CONSTANTS)
    assert extraction.assembly_seconds >= 0
    assert extraction.solve_seconds >= 0
    assert extraction.result.capacitance_farads == pytest.approx(
        extraction.result.capacitance_normalized / K, rel=1e-14,
    )


def cube_capacitances(divisions):
    return [extract(build_cube(1.0, n), constants=CONSTANTS).result.capacitance_normalized for n in divisions]


def test_nested_refinement_never_lowers_cube_capacitance():
    c1, c2, c4, c8 = cube_capacitances((1, 2, 4, 8))
    # every tile at n=2 touches a corner, so the charge stays uniform
    assert c2 == pytest.approx(c1, rel=1e-12)
    assert c2 < c4 < c8 < CUBE_REFERENCE_NORMALIZED
    assert c8 == pytest.approx(CUBE_REFERENCE_NORMALIZED, rel=0.01)


def refinement_steps(values):
    return [abs(a - b) / b for a, b in zip(values, values[1:])]


def test_cube_refinement_steps_shrink():
    steps = refinement_steps(cube_capacitances((2, 4, 8, 16)))
    assert all(b < a for a, b in zip(steps, steps[1:]))
    assert steps[-1] < 0.005


@pytest.mark.slow
def test_cube_refinement_steps_shrink_through_n32():
    steps = refinement_steps(cube_capacitances((2, 4, 8, 16, 32)))
    assert all(b < a for a, b in zip(steps, steps[1:]))


@pytest.mark.slow
def test_fine_cube_matches_published_value():
    result = extract(build_cube(1.0, 48), memory_cap_gib=4.0, constants=CONSTANTS).result
    assert result.capacitance_normalized == pytest.approx(CUBE_N48_NORMALIZED, abs=5e-4)
