from __future__ import annotations

from .constants import EXIT_NUMERICAL, EXIT_USAGE


class CapacitanceError(Exception):
    exit_code = EXIT_NUMERICAL


class ConfigurationError(CapacitanceError, ValueError):
    exit_code = EXIT_USAGE


class GeometryError(CapacitanceError, ValueError):
    exit_code = EXIT_USAGE


class ConductorCountError(CapacitanceError):
    """Capacitance is only defined here for one or two conductors."""

    exit_code = EXIT_USAGE

    def __init__(self, count: int):
        self.count = count
        super().__init__(
            f"{count} conductors given; only self capacitance (1) or two-conductor "
            "capacitance (2) is supported, not a full capacitance matrix"
        )


class KernelError(CapacitanceError, ValueError):
    pass


class OracleError(CapacitanceError):
    pass


class QuadratureConvergenceError(OracleError):
    def __init__(self, message: str, *, best_estimate: float, error_estimate: float):
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate
        super().__init__(message)


class SolverError(CapacitanceError):
    pass


class MemoryCapError(SolverError):
    def __init__(self, tiles: int, required_bytes: int, cap_bytes: int):
        self.tiles = tiles
        self.required_bytes = required_bytes
        self.cap_bytes = cap_bytes
        super().__init__(
            f"dense matrix for {tiles} tiles needs {required_bytes / 2**30:.2f} GiB, "
            f"cap is {cap_bytes / 2**30:.2f} GiB"
        )


class OutputError(CapacitanceError):
    exit_code = EXIT_USAGE

    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
