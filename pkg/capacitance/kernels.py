"""Coupling coefficients between rectangular tiles.

Three tiers are available:

* ``point``  - ``1 / (4 pi eps0 d)`` between tile centers, with the
  collocation double integral on the diagonal;
* ``double`` - the double integral of one tile against the center of the
  other (center collocation);
* ``quad``   - the Galerkin quadruple integral, evaluated in closed form.

The closed forms are corner sums over the sixteen combinations of rectangle
limits. The functions below return ``I``, the quadruple integral of
``exp(-u^2 d^2)`` integrated over ``u`` as well, which is ``sqrt(pi)/2`` times
the quadruple integral of ``1/d``. Coupling coefficients follow from
``P = 2 I / (sqrt(pi) 4 pi eps0 S1 S2)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .conf import solver_setting
from .constants import SINGULAR_SKIP_RATIO, SQRT_PI, TIER_DOUBLE, TIER_POINT, TIER_QUAD
from .exceptions import KernelError
from .geometry import (
    COPLANAR_CODE,
    PARALLEL_CODE,
    PERPENDICULAR_CODE,
    SELF_CODE,
    CanonicalPair,
    Relation,
    Tile,
    TileArrays,
    canonicalize_block,
    canonicalize_pair,
    in_plane_axes,
)

logger = logging.getLogger(__name__)


class KernelTier(str, Enum):
    POINT_CHARGE = TIER_POINT
    CENTER_COLLOCATION = TIER_DOUBLE
    GALERKIN_QUADRUPLE = TIER_QUAD

    @classmethod
    def parse(cls, value) -> KernelTier:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise KernelError(f"unknown kernel tier {value!r}; expected point, double or quad") from None


DEFAULT_TIER = KernelTier.GALERKIN_QUADRUPLE


@dataclass(frozen=True)
class PhysicalConstants:
    epsilon_0: float

    def __post_init__(self):
        if not self.epsilon_0 > 0:
            raise KernelError(f"epsilon_0 must be positive, got {self.epsilon_0}")

    @property
    def coulomb_constant(self) -> float:
        return 1.0 / (4.0 * math.pi * self.epsilon_0)

    @classmethod
    def from_settings(cls) -> PhysicalConstants:
        return cls(epsilon_0=float(solver_setting("EPSILON_0")))


def _constants(constants: PhysicalConstants | None) -> PhysicalConstants:
    return constants if constants is not None else PhysicalConstants.from_settings()


def kernel_dtype():
    return np.longdouble if solver_setting("KERNEL_DTYPE") == "longdouble" else np.float64


def sign_factor(i: int, j: int, k: int, l: int) -> int:
    for value in (i, j, k, l):
        if value not in (0, 1):
            raise KernelError(f"corner indices must be 0 or 1, got {(i, j, k, l)}")
    return -1 if (i + j + k + l) % 2 else 1


_SIGNS = np.array(
    [[[[sign_factor(i, j, k, l) for l in (0, 1)] for k in (0, 1)] for j in (0, 1)] for i in (0, 1)],
    dtype=float,
)


def _asinh_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.arcsinh(num / den)


def _atan_ratio(num, den):
    # Single-argument arctangent; a vanishing denominator takes the +-pi/2 limit.
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(den == 0, 1, den)
        return np.where(den == 0, np.sign(num) * (np.pi / 2), np.arctan(num / safe))


def _skip(coefficient, values, tiny):
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(np.abs(coefficient) > tiny, coefficient * values, 0)


def _check_limits(limits):
    widths = limits[..., 1::2] - limits[..., 0::2]
    if not np.all(widths > 0):
        raise KernelError("degenerate rectangle: every side must have positive length")
    return widths.max(axis=-1)


def _sum_corners(terms, shape):
    signed = (terms * _SIGNS).reshape(shape + (16,))
    # Sorting makes the sum independent of which rectangle came first.
    signed = np.sort(signed, axis=-1)
    return signed.sum(axis=-1)


def parallel_corner_sum(limits, z_c, dtype=None):
    """Vectorized corner sum for parallel rectangles a distance ``z_c`` apart.

    ``limits`` has shape ``(..., 8)``; ``z_c`` broadcasts against ``(...)``.
    ``z_c == 0`` gives the coplanar limit.
    """
    dtype = dtype or kernel_dtype()
    limits = np.asarray(limits, dtype=dtype)
    scale = _check_limits(limits)
    shape = limits.shape[:-1]
    z = np.broadcast_to(np.abs(np.asarray(z_c, dtype=dtype)), shape)

    x = np.abs(limits[..., 0:2, None] - limits[..., None, 4:6])
    y = np.abs(limits[..., 2:4, None] - limits[..., None, 6:8])
    x = x[..., :, :, None, None]
    y = y[..., None, None, :, :]
    z = z[..., None, None, None, None]
    tiny = (SINGULAR_SKIP_RATIO * scale**3)[..., None, None, None, None]

    x2, y2, z2 = x * x, y * y, z * z
    r = np.sqrt(x2 + y2 + z2)

    terms = (-x2 - y2 + 2 * z2) * r / 12
    terms = terms + _skip(y * (x2 - z2), _asinh_ratio(y, np.sqrt(x2 + z2)), tiny) / 4
    terms = terms + _skip(x * (y2 - z2), _asinh_ratio(x, np.sqrt(y2 + z2)), tiny) / 4
    terms = terms - _skip(x * y * z, _atan_ratio(x * y, z * r), tiny) / 2
    return SQRT_PI * _sum_corners(terms, shape)


def perpendicular_corner_sum(limits, y_c, z_c, dtype=None):
    """Vectorized corner sum for perpendicular rectangles.

    Rectangle 1 lies in the plane ``z = z_c`` spanning ``[a0,a1] x [b0,b1]``
    in (x, y); rectangle 2 lies in the plane ``y = y_c`` spanning
    ``[c0,c1] x [d0,d1]`` in (x, z).
    """
    dtype = dtype or kernel_dtype()
    limits = np.asarray(limits, dtype=dtype)
    scale = _check_limits(limits)
    shape = limits.shape[:-1]
    y_c = np.broadcast_to(np.asarray(y_c, dtype=dtype), shape)
    z_c = np.broadcast_to(np.asarray(z_c, dtype=dtype), shape)

    # The closed form is even in x.
    x = np.abs(limits[..., 0:2, None] - limits[..., None, 4:6])[..., :, :, None, None]
    y = (limits[..., 2:4] - y_c[..., None])[..., None, None, :, None]
    z = (z_c[..., None] - limits[..., 6:8])[..., None, None, None, :]
    tiny = (SINGULAR_SKIP_RATIO * scale**3)[..., None, None, None, None]

    x2, y2, z2 = x * x, y * y, z * z
    r = np.sqrt(x2 + y2 + z2)

    terms = -(y * z) * r / 6
    terms = terms + _skip(z * (3 * x2 - z2), _asinh_ratio(y, np.sqrt(x2 + z2)), tiny) / 12
    terms = terms + _skip(y * (3 * x2 - y2), _asinh_ratio(z, np.sqrt(x2 + y2)), tiny) / 12
    terms = terms + _skip(x * y * z, _asinh_ratio(x, np.sqrt(y2 + z2)), tiny) / 2
    terms = terms - _skip(x * z2, _atan_ratio(x * y, z * r), tiny) / 4
    terms = terms - _skip(x * y2, _atan_ratio(x * z, y * r), tiny) / 4
    terms = terms - _skip(x2 * x, _atan_ratio(y * z, x * r), tiny) / 12
    return SQRT_PI * _sum_corners(terms, shape)


def self_corner_sum(w, h, dtype=None):
    dtype = dtype or kernel_dtype()
    w = np.asarray(w, dtype=dtype)
    h = np.asarray(h, dtype=dtype)
    if not (np.all(w > 0) and np.all(h > 0)):
        raise KernelError("degenerate rectangle: self coupling needs positive sides")
    w2, h2 = w * w, h * h
    return SQRT_PI * (
        (w2 * w + h2 * h) / 3
        - (w2 + h2) * np.sqrt(w2 + h2) / 3
        + h * w2 * np.arcsinh(h / w)
        + w * h2 * np.arcsinh(w / h)
    )


def _scalar(value) -> float:
    return float(np.asarray(value, dtype=float))


def parallel_quadruple_I(limits, z_c: float) -> float:
    if z_c == 0:
        raise KernelError("parallel_quadruple_I needs z_c != 0; use coplanar_quadruple_I")
    return _scalar(parallel_corner_sum(limits, z_c))


def coplanar_quadruple_I(limits) -> float:
    return _scalar(parallel_corner_sum(limits, 0.0))


def self_quadruple_I(w: float, h: float) -> float:
    return _scalar(self_corner_sum(w, h))


def perpendicular_quadruple_I(limits, y_c: float, z_c: float) -> float:
    return _scalar(perpendicular_corner_sum(limits, y_c, z_c))


def quadruple_I(pair: CanonicalPair) -> float:
    """Closed-form ``I`` for a canonical pair, dispatched on its relation."""
    if pair.relation is Relation.SELF:
        a0, a1, b0, b1 = pair.limits[:4]
        return self_quadruple_I(a1 - a0, b1 - b0)
    if pair.relation is Relation.COPLANAR:
        return coplanar_quadruple_I(pair.limits)
    if pair.relation is Relation.PARALLEL_OFFSET:
        return parallel_quadruple_I(pair.limits, pair.z_c)
    if pair.relation is Relation.PERPENDICULAR:
        return perpendicular_quadruple_I(pair.limits, pair.y_c, pair.z_c)
    raise KernelError(f"no closed form for relation {pair.relation.value}")


def point_charge_P(d: float, constants: PhysicalConstants | None = None) -> float:
    if not d > 0:
        raise KernelError("point-charge coupling needs a positive distance; self terms use the double integral")
    return _constants(constants).coulomb_constant / d


def _collocation_primitive(x, y, z, tiny):
    x2, y2, z2 = x * x, y * y, z * z
    r = np.sqrt(x2 + y2 + z2)
    value = _skip(x, _asinh_ratio(y, np.sqrt(x2 + z2)), tiny)
    value = value + _skip(y, _asinh_ratio(x, np.sqrt(y2 + z2)), tiny)
    value = value - _skip(z, _atan_ratio(x * y, z * r), tiny)
    return value


def collocation_corner_sum(u_lo, u_hi, v_lo, v_hi, target_u, target_v, height, dtype=np.float64):
    """Double integral of ``1/r`` over a rectangle seen from one point.

    Offsets are corner minus target in the rectangle's plane, ``height`` is
    the target's distance from that plane.
    """
    u_lo, u_hi, v_lo, v_hi = (np.asarray(a, dtype=dtype) for a in (u_lo, u_hi, v_lo, v_hi))
    if not (np.all(u_hi > u_lo) and np.all(v_hi > v_lo)):
        raise KernelError("degenerate rectangle: every side must have positive length")
    tu = np.asarray(target_u, dtype=dtype)
    tv = np.asarray(target_v, dtype=dtype)
    z = np.abs(np.asarray(height, dtype=dtype))
    tiny = SINGULAR_SKIP_RATIO * np.maximum(u_hi - u_lo, v_hi - v_lo)

    x0, x1 = u_lo - tu, u_hi - tu
    y0, y1 = v_lo - tv, v_hi - tv
    return (
        _collocation_primitive(x1, y1, z, tiny)
        - _collocation_primitive(x0, y1, z, tiny)
        - _collocation_primitive(x1, y0, z, tiny)
        + _collocation_primitive(x0, y0, z, tiny)
    )


def collocation_double_P(source: Tile, target_point, constants: PhysicalConstants | None = None) -> float:
    """Mean potential coefficient of ``source`` at a point (uniform unit charge)."""
    normal = source.plane_axis
    u, v = in_plane_axes(normal)
    value = collocation_corner_sum(
        source.u_interval[0], source.u_interval[1],
        source.v_interval[0], source.v_interval[1],
        target_point[u], target_point[v],
        target_point[normal] - source.plane_offset,
    )
    return _constants(constants).coulomb_constant * float(value) / source.area


def point_charge_block(arrays: TileArrays, i, j, constants: PhysicalConstants) -> np.ndarray:
    i = np.asarray(i, dtype=np.intp)
    j = np.asarray(j, dtype=np.intp)
    d = np.linalg.norm(arrays.center[i] - arrays.center[j], axis=-1)
    out = np.empty(i.shape, dtype=float)
    same = i == j
    with np.errstate(divide="ignore"):
        out[~same] = constants.coulomb_constant / d[~same]
    if np.any(~same & (d == 0)):
        raise KernelError("distinct tiles share a center; the point-charge tier cannot couple them")
    if np.any(same):
        out[same] = collocation_block(arrays, i[same], j[same], constants)
    return out


def collocation_block(arrays: TileArrays, i, j, constants: PhysicalConstants) -> np.ndarray:
    """``P[i, j]`` as tile ``i`` integrated against the center of tile ``j``."""
    i = np.asarray(i, dtype=np.intp)
    j = np.asarray(j, dtype=np.intp)
    k = arrays.axis[i]
    u = (k + 1) % 3
    v = (k + 2) % 3
    target = arrays.center[j]
    value = collocation_corner_sum(
        arrays.lo[i, u], arrays.hi[i, u],
        arrays.lo[i, v], arrays.hi[i, v],
        target[np.arange(len(j)), u], target[np.arange(len(j)), v],
        target[np.arange(len(j)), k] - arrays.offset[i],
    )
    return constants.coulomb_constant * np.asarray(value, dtype=float) / arrays.area[i]


def galerkin_I_block(arrays: TileArrays, i, j, dtype=None) -> np.ndarray:
    i = np.asarray(i, dtype=np.intp)
    j = np.asarray(j, dtype=np.intp)
    # Perpendicular pairs always put the lower normal axis first, which keeps
    # P[i, j] and P[j, i] bit-identical.
    swap = arrays.axis[i] > arrays.axis[j]
    first = np.where(swap, j, i)
    second = np.where(swap, i, j)
    block = canonicalize_block(arrays, arrays, first, second)

    out = np.empty(i.shape, dtype=float)
    rel = block.relation

    mask = rel == SELF_CODE
    if np.any(mask):
        lim = block.limits[mask]
        out[mask] = self_corner_sum(lim[:, 1] - lim[:, 0], lim[:, 3] - lim[:, 2], dtype=dtype)

    mask = (rel == COPLANAR_CODE) | (rel == PARALLEL_CODE)
    if np.any(mask):
        out[mask] = parallel_corner_sum(block.limits[mask], block.z_c[mask], dtype=dtype)

    mask = rel == PERPENDICULAR_CODE
    if np.any(mask):
        out[mask] = perpendicular_corner_sum(block.limits[mask], block.y_c[mask], block.z_c[mask], dtype=dtype)
    return out


def galerkin_block(arrays: TileArrays, i, j, constants: PhysicalConstants) -> np.ndarray:
    i = np.asarray(i, dtype=np.intp)
    j = np.asarray(j, dtype=np.intp)
    values = galerkin_I_block(arrays, i, j)
    return (2.0 / SQRT_PI) * constants.coulomb_constant * values / (arrays.area[i] * arrays.area[j])


BLOCK_EVALUATORS = {
    KernelTier.POINT_CHARGE: point_charge_block,
    KernelTier.CENTER_COLLOCATION: collocation_block,
    KernelTier.GALERKIN_QUADRUPLE: galerkin_block,
}


def coupling_P(t1: Tile, t2: Tile, tier=DEFAULT_TIER, constants: PhysicalConstants | None = None) -> float:
    tier = KernelTier.parse(tier)
    constants = _constants(constants)
    pair = canonicalize_pair(t1, t2)
    arrays = TileArrays.from_tiles([t1, t2])
    j = 0 if pair.relation is Relation.SELF else 1
    return float(BLOCK_EVALUATORS[tier](arrays, [0], [j], constants)[0])
