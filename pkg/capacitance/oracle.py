"""Brute-force integration used to validate the closed-form kernels.

Two estimators are provided: a Gauss-Legendre tensor product for separated
pairs (smooth integrand, fast convergence) and a seeded Monte Carlo average
of ``1/d`` over uniform point pairs for anything that touches. Both report in
the ``I`` form used by :mod:`capacitance.kernels`, i.e. ``sqrt(pi)/2`` times
the quadruple integral of ``1/d``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .conf import solver_setting
from .constants import (
    MC_MIN_SAMPLES,
    MC_SIGMAS,
    QUAD_PASS_TOLERANCE,
    RNG_ALGORITHM,
    SQRT_PI,
    TOUCHING_GAP_RATIO,
)
from .exceptions import OracleError, QuadratureConvergenceError
from .geometry import CanonicalPair, Relation, Tile, in_plane_axes
from .kernels import PhysicalConstants, collocation_double_P, quadruple_I

logger = logging.getLogger(__name__)

_ROW_CHUNK = 512


class OracleMethod(str, Enum):
    TENSOR_QUADRATURE = "tensor-quadrature"
    MONTE_CARLO = "monte-carlo"
    ADAPTIVE_QUADRATURE = "adaptive-quadrature"


@dataclass(frozen=True)
class QuadratureSpec:
    points: int = 4
    max_levels: int = 5
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.points < 2:
            raise OracleError(f"points per axis must be at least 2, got {self.points}")
        if self.max_levels < 1:
            raise OracleError(f"max_levels must be at least 1, got {self.max_levels}")
        if not self.tolerance > 0:
            raise OracleError(f"tolerance must be positive, got {self.tolerance}")

    @classmethod
    def from_settings(cls) -> QuadratureSpec:
        return cls(**solver_setting("QUADRATURE"))


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    error_estimate: float
    method: OracleMethod
    samples: int = 0


def _rule(lo: float, hi: float, n: int):
    if hi == lo:
        return np.array([lo]), np.array([1.0])
    nodes, weights = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


def _rectangle_rule(spans, n: int):
    """Tensor Gauss-Legendre points on a rectangle given as three axis spans."""
    rules = [_rule(lo, hi, n) for lo, hi in spans]
    grids = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    weights = np.einsum("i,j,k->ijk", *(r[1] for r in rules))
    points = np.stack([g.ravel() for g in grids], axis=-1)
    return points, weights.ravel()


def _tensor_integral(first_spans, second_spans, n: int) -> float:
    """Quadruple integral of ``1/d`` over two rectangles with ``n`` points per axis."""
    p1, w1 = _rectangle_rule(first_spans, n)
    p2, w2 = _rectangle_rule(second_spans, n)
    total = 0.0
    for start in range(0, len(p1), _ROW_CHUNK):
        diff = p1[start:start + _ROW_CHUNK, None, :] - p2[None, :, :]
        inv = 1.0 / np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        total += float(w1[start:start + _ROW_CHUNK] @ inv @ w2)
    return total


def _tile_spans(tile: Tile):
    return tuple(tile.interval(axis) for axis in range(3))


def _converge(first_spans, second_spans, spec: QuadratureSpec) -> OracleEstimate:
    n = spec.points
    previous = None
    difference = math.inf
    estimate = 0.0
    for _ in range(spec.max_levels):
        estimate = 0.5 * SQRT_PI * _tensor_integral(first_spans, second_spans, n)
        if previous is not None:
            difference = abs(estimate - previous)
            if difference <= spec.tolerance * abs(estimate):
                return OracleEstimate(estimate, difference, OracleMethod.TENSOR_QUADRATURE, samples=n)
        previous = estimate
        n *= 2
    logger.warning("Tensor quadrature did not converge: last difference %.3e at %d points/axis", difference, n // 2)
    raise QuadratureConvergenceError(
        f"tensor quadrature did not reach relative tolerance {spec.tolerance} "
        f"within {spec.max_levels} levels (last difference {difference:.3e})",
        best_estimate=estimate,
        error_estimate=difference,
    )


def quad_oracle(pair: CanonicalPair, spec: QuadratureSpec | None = None) -> OracleEstimate:
    spec = spec or QuadratureSpec.from_settings()
    if pair.relation in (Relation.SELF, Relation.COPLANAR) or pair.min_gap() <= TOUCHING_GAP_RATIO * pair.scale():
        raise OracleError(
            f"{pair.relation.value} pair touches or overlaps; the integrand is singular, use mc_oracle"
        )
    first, second = pair.spans()
    return _converge(first, second, spec)


def quad_oracle_tiles(t1: Tile, t2: Tile, spec: QuadratureSpec | None = None) -> OracleEstimate:
    """Same tensor quadrature, but in the tiles' own 3D coordinates."""
    spec = spec or QuadratureSpec.from_settings()
    return _converge(_tile_spans(t1), _tile_spans(t2), spec)


def _uniform(rng, span, size):
    lo, hi = span
    if lo == hi:
        return np.full(size, lo)
    return rng.uniform(lo, hi, size)


def mc_oracle(pair: CanonicalPair, samples: int, seed: int, block: int | None = None) -> OracleEstimate:
    """Monte Carlo mean of ``1/d`` over uniform point pairs, reported in ``I`` form.

    The error estimate is three standard errors of the mean, scaled the same way.
    """
    if samples < MC_MIN_SAMPLES:
        raise OracleError(f"Monte Carlo needs at least {MC_MIN_SAMPLES} samples, got {samples}")
    block = block or int(solver_setting("MONTE_CARLO")["block"])
    rng = np.random.Generator(np.random.PCG64(seed))
    first, second = pair.spans()

    count = 0
    mean = 0.0
    m2 = 0.0
    remaining = samples
    while remaining > 0:
        size = min(block, remaining)
        remaining -= size
        p1 = np.stack([_uniform(rng, span, size) for span in first], axis=-1)
        p2 = np.stack([_uniform(rng, span, size) for span in second], axis=-1)
        inv = 1.0 / np.linalg.norm(p1 - p2, axis=-1)

        # Chan et al. pairwise update of mean and sum of squared deviations.
        block_mean = float(inv.mean())
        block_m2 = float(((inv - block_mean) ** 2).sum())
        delta = block_mean - mean
        total = count + size
        mean += delta * size / total
        m2 += block_m2 + delta * delta * count * size / total
        count = total

    std_error = math.sqrt(m2 / (count - 1) / count)
    s1, s2 = pair.areas()
    factor = 0.5 * SQRT_PI * s1 * s2
    return OracleEstimate(mean * factor, MC_SIGMAS * std_error * factor, OracleMethod.MONTE_CARLO, samples=count)


def collocation_oracle(source: Tile, target_point, constants: PhysicalConstants | None = None,
                       tolerance: float = 1e-11) -> OracleEstimate:
    """Adaptive 2D quadrature of the center-collocation double integral.

    The rectangle is split at the target's projection so any singularity sits
    on a corner of each piece, where the adaptive rule copes with it.
    """
    constants = constants if constants is not None else PhysicalConstants.from_settings()
    normal = source.plane_axis
    u, v = in_plane_axes(normal)
    tu, tv = target_point[u], target_point[v]
    height2 = (target_point[normal] - source.plane_offset) ** 2

    def cuts(lo, hi, t):
        return [lo, t, hi] if lo < t < hi else [lo, hi]

    us = cuts(*source.u_interval, tu)
    vs = cuts(*source.v_interval, tv)
    value = 0.0
    error = 0.0
    for u0, u1 in zip(us, us[1:]):
        for v0, v1 in zip(vs, vs[1:]):
            part, part_error = integrate.dblquad(
                lambda y, x: 1.0 / math.sqrt((x - tu) ** 2 + (y - tv) ** 2 + height2),
                u0, u1, v0, v1,
                epsabs=0.0, epsrel=tolerance,
            )
            value += part
            error += part_error
    scale = constants.coulomb_constant / source.area
    return OracleEstimate(value * scale, error * scale, OracleMethod.ADAPTIVE_QUADRATURE)


@dataclass
class VerificationCase:
    case_id: str
    relation: str
    limits: list[float]
    y_c: float | None
    z_c: float
    analytic: float
    oracle: float
    error_bound: float
    passed: bool
    method: str
    note: str = ""

    @property
    def relative_error(self) -> float:
        return abs(self.analytic - self.oracle) / abs(self.oracle) if self.oracle else math.inf

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["relative_error"] = self.relative_error
        payload["pass"] = payload.pop("passed")
        return payload


@dataclass
class VerificationReport:
    seed: int
    rng_algorithm: str = RNG_ALGORITHM
    cases: list[VerificationCase] = field(default_factory=list)

    @property
    def failures(self) -> list[VerificationCase]:
        return [c for c in self.cases if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        by_relation: dict[str, dict] = {}
        for case in self.cases:
            entry = by_relation.setdefault(case.relation, {"cases": 0, "failures": 0, "max_relative_error": 0.0})
            entry["cases"] += 1
            entry["failures"] += 0 if case.passed else 1
            entry["max_relative_error"] = max(entry["max_relative_error"], case.relative_error)
        return {
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
            "cases": len(self.cases),
            "failures": len(self.failures),
            "passed": self.passed,
            "by_relation": by_relation,
        }

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "cases": [c.to_dict() for c in self.cases]}


def _random_rectangle(rng, size_range=(0.2, 2.0), origin_range=(-1.0, 1.0)):
    w, h = rng.uniform(*size_range, 2)
    x0, y0 = rng.uniform(*origin_range, 2)
    return (x0, x0 + w), (y0, y0 + h)


def _separated_parallel(rng) -> CanonicalPair:
    (a0, a1), (b0, b1) = _random_rectangle(rng)
    (c0, c1), (d0, d1) = _random_rectangle(rng, origin_range=(-2.0, 2.0))
    scale = max(a1 - a0, b1 - b0, c1 - c0, d1 - d0)
    z_c = rng.uniform(0.5, 2.0) * scale
    return CanonicalPair(Relation.PARALLEL_OFFSET, (a0, a1, b0, b1, c0, c1, d0, d1), z_c=z_c)


def _separated_perpendicular(rng) -> CanonicalPair:
    (a0, a1), (b0, b1) = _random_rectangle(rng)
    (c0, c1), (d0, d1) = _random_rectangle(rng, origin_range=(-2.0, 2.0))
    scale = max(a1 - a0, b1 - b0, c1 - c0, d1 - d0)
    gap = rng.uniform(0.5, 2.0) * scale
    side = 1.0 if rng.uniform() < 0.5 else -1.0
    if rng.uniform() < 0.5:
        # Second plane clear of rectangle 1 along y.
        y_c = b1 + gap if side > 0 else b0 - gap
        z_c = rng.uniform(d0 - 1.0, d1 + 1.0)
    else:
        # First plane clear of rectangle 2 along z.
        y_c = rng.uniform(b0 - 1.0, b1 + 1.0)
        z_c = d1 + gap if side > 0 else d0 - gap
    return CanonicalPair(Relation.PERPENDICULAR, (a0, a1, b0, b1, c0, c1, d0, d1), z_c=z_c, y_c=y_c)


def _touching(rng, index: int) -> CanonicalPair:
    (a0, a1), (b0, b1) = _random_rectangle(rng, size_range=(0.3, 1.5))
    kind = index % 4
    if kind == 0:
        return CanonicalPair(Relation.SELF, (a0, a1, b0, b1, a0, a1, b0, b1))
    if kind == 1:
        # Shares part of the right edge.
        w, h = rng.uniform(0.3, 1.5, 2)
        d0 = rng.uniform(b0 - 0.5 * h, b1 - 0.1)
        return CanonicalPair(Relation.COPLANAR, (a0, a1, b0, b1, a1, a1 + w, d0, d0 + h))
    if kind == 2:
        # Touches at the upper-right corner only.
        w, h = rng.uniform(0.3, 1.5, 2)
        return CanonicalPair(Relation.COPLANAR, (a0, a1, b0, b1, a1, a1 + w, b1, b1 + h))
    # Perpendicular rectangles sharing an edge along x, as on adjacent cube faces.
    depth = rng.uniform(0.3, 1.5)
    return CanonicalPair(
        Relation.PERPENDICULAR,
        (a0, a1, b0, b1, a0, a1, 0.0, depth),
        z_c=0.0,
        y_c=b0,
    )


def _quad_case(case_id, pair, spec, perturbation) -> VerificationCase:
    analytic = quadruple_I(pair) * (1.0 + perturbation)
    note = ""
    try:
        estimate = quad_oracle(pair, spec)
        oracle = estimate.value
    except QuadratureConvergenceError as exc:
        oracle = exc.best_estimate
        note = str(exc)
    analytic, oracle = float(analytic), float(oracle)
    bound = QUAD_PASS_TOLERANCE * abs(oracle)
    passed = bool(not note and abs(analytic - oracle) <= bound)
    return VerificationCase(
        case_id, pair.relation.value, *_pair_fields(pair),
        analytic, oracle, bound, passed, OracleMethod.TENSOR_QUADRATURE.value, note,
    )


def _mc_case(case_id, pair, samples, seed, perturbation) -> VerificationCase:
    analytic = float(quadruple_I(pair) * (1.0 + perturbation))
    estimate = mc_oracle(pair, samples, seed)
    oracle, bound = float(estimate.value), float(estimate.error_estimate)
    passed = bool(abs(analytic - oracle) <= bound)
    return VerificationCase(
        case_id, pair.relation.value, *_pair_fields(pair),
        analytic, oracle, bound, passed, OracleMethod.MONTE_CARLO.value,
    )


def _pair_fields(pair) -> tuple[list[float], float | None, float]:
    # Plain floats so reports serialize with the stdlib json encoder.
    y_c = None if pair.y_c is None else float(pair.y_c)
    return [float(x) for x in pair.limits], y_c, float(pair.z_c)


def verify_kernels(
    trial_count: int | None = None,
    seed: int = 0,
    *,
    touching_count: int | None = None,
    spec: QuadratureSpec | None = None,
    mc_samples: int | None = None,
    perturbation: float = 0.0,
) -> VerificationReport:
    """Compare every closed form against the appropriate oracle on random pairs.

    ``perturbation`` scales the analytic values by ``1 + perturbation`` so the
    harness itself can be shown to catch a wrong kernel.
    """
    trial_count = int(trial_count or solver_setting("VERIFY_TRIALS"))
    touching_count = int(touching_count if touching_count is not None else max(50, trial_count // 4))
    spec = spec or QuadratureSpec.from_settings()
    mc_samples = int(mc_samples or solver_setting("MONTE_CARLO")["samples"])
    rng = np.random.Generator(np.random.PCG64(seed))
    report = VerificationReport(seed=seed)

    for idx in range(trial_count):
        report.cases.append(_quad_case(f"parallel-{idx:04d}", _separated_parallel(rng), spec, perturbation))
    for idx in range(trial_count):
        report.cases.append(_quad_case(f"perpendicular-{idx:04d}", _separated_perpendicular(rng), spec, perturbation))
    for idx in range(touching_count):
        pair = _touching(rng, idx)
        case_seed = int(rng.integers(0, 2**63 - 1))
        report.cases.append(_mc_case(f"touching-{idx:04d}", pair, mc_samples, case_seed, perturbation))

    for case in report.failures:
        logger.warning(
            "Kernel check failed: %s (%s) analytic=%.15e oracle=%.15e bound=%.3e %s",
            case.case_id, case.relation, case.analytic, case.oracle, case.error_bound, case.note,
        )
    logger.info("Kernel verification: %d cases, %d failures (seed %d)", len(report.cases), len(report.failures), seed)
    return report


__all__ = [
    "OracleEstimate",
    "OracleMethod",
    "QuadratureSpec",
    "VerificationCase",
    "VerificationReport",
    "collocation_double_P",
    "collocation_oracle",
    "mc_oracle",
    "quad_oracle",
    "quad_oracle_tiles",
    "verify_kernels",
]
