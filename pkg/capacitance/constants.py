import math

AXES = ("x", "y", "z")

# CODATA 2018
EPSILON_0 = 8.8541878128e-12

SQRT_PI = math.sqrt(math.pi)

# Summands whose coefficient falls below this fraction of scale**3 are dropped.
SINGULAR_SKIP_RATIO = 1e-30

# Best literature value for the unit cube, in units of 4*pi*eps0*1m.
CUBE_REFERENCE_NORMALIZED = 0.660678
# Galerkin result for the cube at 48 divisions per face edge.
CUBE_N48_NORMALIZED = 0.66047

TIER_POINT = "point"
TIER_DOUBLE = "double"
TIER_QUAD = "quad"
TIER_CHOICES = [
    (TIER_POINT, "Point charge"),
    (TIER_DOUBLE, "Center collocation"),
    (TIER_QUAD, "Galerkin quadruple"),
]

SCENARIO_PARALLEL_PLATE = "parallel-plate"
SCENARIO_CUBE = "cube"
SCENARIO_SQUARE = "square"
SCENARIO_CUSTOM = "custom"
SCENARIO_VERIFY = "verify"
SCENARIO_CHOICES = [
    (SCENARIO_PARALLEL_PLATE, "Parallel plate"),
    (SCENARIO_CUBE, "Unit cube"),
    (SCENARIO_SQUARE, "Maxwell square"),
    (SCENARIO_CUSTOM, "Custom geometry"),
    (SCENARIO_VERIFY, "Kernel verification"),
]

# Maxwell's 6x6 square: letter by folded (row, col) distance from the edge.
MAXWELL_DIVISIONS = 6
MAXWELL_GROUPS = {
    (0, 0): "A",
    (0, 1): "B",
    (0, 2): "C",
    (1, 1): "D",
    (1, 2): "E",
    (2, 2): "F",
}

# Point-charge results at the coarsest sweep points are flagged, not plotted.
POINT_TIER_FLAGGED_POINTS = 5

CONVERGENCE_CSV_HEADER = ["n", "tiles", "capacitance_F", "capacitance_4pie0", "assembly_s", "solve_s"]
CHARGE_MAP_CSV_HEADER = ["cx", "cy", "cz", "area", "charge_C", "density_C_per_m2"]

MAX_CONDITION = 1e12
MAX_RELATIVE_RESIDUAL = 1e-10

QUAD_PASS_TOLERANCE = 1e-8
MC_MIN_SAMPLES = 10_000
MC_SIGMAS = 3.0
TOUCHING_GAP_RATIO = 1e-6
RNG_ALGORITHM = "PCG64"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3
