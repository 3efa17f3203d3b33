"""Panels, tiles, meshes and the canonical integration frames of tile pairs.

Only axis-aligned rectangles exist here, so any two tiles are either parallel
or perpendicular. For a plane with normal along axis ``k`` the in-plane axes
are taken in cyclic order ``(k + 1, k + 2)``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from .constants import AXES
from .exceptions import GeometryError

logger = logging.getLogger(__name__)


def axis_index(axis) -> int:
    if isinstance(axis, str):
        try:
            return AXES.index(axis.strip().lower())
        except ValueError:
            raise GeometryError(f"unknown axis {axis!r}; expected one of x, y, z") from None
    if isinstance(axis, (int, np.integer)) and not isinstance(axis, bool) and 0 <= int(axis) <= 2:
        return int(axis)
    raise GeometryError(f"unknown axis {axis!r}; expected one of x, y, z")


def in_plane_axes(normal: int) -> tuple[int, int]:
    return (normal + 1) % 3, (normal + 2) % 3


def _interval(values, label: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in values)
    except (TypeError, ValueError):
        raise GeometryError(f"{label} must be a pair of numbers, got {values!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise GeometryError(f"{label} must have strictly positive length, got [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class Panel:
    plane_axis: int
    plane_offset: float
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    n_u: int = 1
    n_v: int = 1
    conductor_id: int = 0
    voltage: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "plane_axis", axis_index(self.plane_axis))
        object.__setattr__(self, "plane_offset", float(self.plane_offset))
        object.__setattr__(self, "u_range", _interval(self.u_range, "u_range"))
        object.__setattr__(self, "v_range", _interval(self.v_range, "v_range"))
        for name in ("n_u", "n_v"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise GeometryError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, "voltage", float(self.voltage))

    @property
    def area(self) -> float:
        return (self.u_range[1] - self.u_range[0]) * (self.v_range[1] - self.v_range[0])

    def overlaps(self, other: Panel) -> bool:
        if self.plane_axis != other.plane_axis or self.plane_offset != other.plane_offset:
            return False
        du = min(self.u_range[1], other.u_range[1]) - max(self.u_range[0], other.u_range[0])
        dv = min(self.v_range[1], other.v_range[1]) - max(self.v_range[0], other.v_range[0])
        return du > 0 and dv > 0


@dataclass(frozen=True)
class Tile:
    plane_axis: int
    plane_offset: float
    u_interval: tuple[float, float]
    v_interval: tuple[float, float]
    conductor_id: int = 0

    @property
    def width(self) -> float:
        return self.u_interval[1] - self.u_interval[0]

    @property
    def height(self) -> float:
        return self.v_interval[1] - self.v_interval[0]

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float, float]:
        point = [0.0, 0.0, 0.0]
        u, v = in_plane_axes(self.plane_axis)
        point[self.plane_axis] = self.plane_offset
        point[u] = 0.5 * (self.u_interval[0] + self.u_interval[1])
        point[v] = 0.5 * (self.v_interval[0] + self.v_interval[1])
        return tuple(point)

    def interval(self, axis: int) -> tuple[float, float]:
        """Extent along a global axis; the normal axis collapses to the offset."""
        u, v = in_plane_axes(self.plane_axis)
        if axis == u:
            return self.u_interval
        if axis == v:
            return self.v_interval
        return self.plane_offset, self.plane_offset

    def box(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        spans = [self.interval(axis) for axis in range(3)]
        return tuple(s[0] for s in spans), tuple(s[1] for s in spans)

    def translated(self, shift) -> Tile:
        u, v = in_plane_axes(self.plane_axis)
        return Tile(
            plane_axis=self.plane_axis,
            plane_offset=self.plane_offset + shift[self.plane_axis],
            u_interval=(self.u_interval[0] + shift[u], self.u_interval[1] + shift[u]),
            v_interval=(self.v_interval[0] + shift[v], self.v_interval[1] + shift[v]),
            conductor_id=self.conductor_id,
        )

    def scaled(self, factor: float) -> Tile:
        return Tile(
            plane_axis=self.plane_axis,
            plane_offset=self.plane_offset * factor,
            u_interval=(self.u_interval[0] * factor, self.u_interval[1] * factor),
            v_interval=(self.v_interval[0] * factor, self.v_interval[1] * factor),
            conductor_id=self.conductor_id,
        )


def subdivide_panel(panel: Panel) -> list[Tile]:
    """Split a panel into ``n_u * n_v`` equal rectangles, row-major with u fastest."""
    u_edges = np.linspace(panel.u_range[0], panel.u_range[1], panel.n_u + 1)
    v_edges = np.linspace(panel.v_range[0], panel.v_range[1], panel.n_v + 1)
    tiles = []
    for jv in range(panel.n_v):
        for iu in range(panel.n_u):
            tiles.append(Tile(
                plane_axis=panel.plane_axis,
                plane_offset=panel.plane_offset,
                u_interval=(float(u_edges[iu]), float(u_edges[iu + 1])),
                v_interval=(float(v_edges[jv]), float(v_edges[jv + 1])),
                conductor_id=panel.conductor_id,
            ))
    return tiles


@dataclass(frozen=True)
class TileArrays:
    """Columnar view of a tile list used by the vectorized kernels."""

    axis: np.ndarray
    offset: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    area: np.ndarray
    center: np.ndarray

    @classmethod
    def from_tiles(cls, tiles) -> TileArrays:
        boxes = [t.box() for t in tiles]
        lo = np.array([b[0] for b in boxes], dtype=float).reshape(-1, 3)
        hi = np.array([b[1] for b in boxes], dtype=float).reshape(-1, 3)
        return cls(
            axis=np.array([t.plane_axis for t in tiles], dtype=np.intp),
            offset=np.array([t.plane_offset for t in tiles], dtype=float),
            lo=lo,
            hi=hi,
            area=np.array([t.area for t in tiles], dtype=float),
            center=0.5 * (lo + hi),
        )

    def __len__(self):
        return len(self.axis)


@dataclass(frozen=True)
class Mesh:
    tiles: tuple[Tile, ...]
    conductors: dict[int, float]
    panels: tuple[Panel, ...] = field(default=())

    def __post_init__(self):
        missing = {t.conductor_id for t in self.tiles} - set(self.conductors)
        if missing:
            raise GeometryError(f"tiles reference unmapped conductors {sorted(missing)}")

    def __len__(self):
        return len(self.tiles)

    @cached_property
    def arrays(self) -> TileArrays:
        return TileArrays.from_tiles(self.tiles)

    @cached_property
    def conductor_index(self) -> np.ndarray:
        return np.array([t.conductor_id for t in self.tiles], dtype=int)

    def tile_voltages(self) -> np.ndarray:
        return np.array([self.conductors[t.conductor_id] for t in self.tiles], dtype=float)

    def with_voltages(self, conductors: dict[int, float]) -> Mesh:
        return Mesh(tiles=self.tiles, conductors=dict(conductors), panels=self.panels)


def build_mesh(panels) -> Mesh:
    panels = tuple(panels)
    if not panels:
        raise GeometryError("geometry has no panels")

    conductors: dict[int, float] = {}
    for p in panels:
        known = conductors.setdefault(p.conductor_id, p.voltage)
        if known != p.voltage:
            raise GeometryError(
                f"conductor {p.conductor_id} has inconsistent voltages {known} and {p.voltage}"
            )

    for idx, p in enumerate(panels):
        for jdx in range(idx + 1, len(panels)):
            if p.overlaps(panels[jdx]):
                raise GeometryError(f"panels {idx} and {jdx} overlap on the same plane")

    tiles = []
    for p in panels:
        tiles.extend(subdivide_panel(p))

    logger.debug("Built mesh: %d panels, %d tiles, %d conductors", len(panels), len(tiles), len(conductors))
    return Mesh(tiles=tuple(tiles), conductors=conductors, panels=panels)


def _positive(value, label: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise GeometryError(f"{label} must be positive, got {value}")
    return value


def build_parallel_plate(width: float, depth: float, gap: float, n: int) -> Mesh:
    """Two plates in z-normal planes at 0 and ``gap``, held at +1 V and -1 V."""
    width = _positive(width, "width")
    depth = _positive(depth, "depth")
    gap = _positive(gap, "gap")
    return build_mesh([
        Panel(2, 0.0, (0.0, width), (0.0, depth), n, n, conductor_id=0, voltage=1.0),
        Panel(2, gap, (0.0, width), (0.0, depth), n, n, conductor_id=1, voltage=-1.0),
    ])


def build_cube(edge: float, n: int) -> Mesh:
    edge = _positive(edge, "edge")
    panels = []
    for axis in range(3):
        for offset in (0.0, edge):
            panels.append(Panel(axis, offset, (0.0, edge), (0.0, edge), n, n, conductor_id=0, voltage=1.0))
    return build_mesh(panels)


def build_square(edge: float = 1.0, n: int = 6, voltage: float = 1.0) -> Mesh:
    edge = _positive(edge, "edge")
    return build_mesh([Panel(2, 0.0, (0.0, edge), (0.0, edge), n, n, conductor_id=0, voltage=voltage)])


def load_geometry(document) -> Mesh:
    """Build a mesh from the geometry JSON document (already decoded)."""
    if not isinstance(document, dict) or not isinstance(document.get("panels"), list):
        raise GeometryError("geometry must be an object with a 'panels' array")

    panels = []
    for idx, raw in enumerate(document["panels"]):
        if not isinstance(raw, dict):
            raise GeometryError(f"panel {idx}: expected an object")
        try:
            conductor = raw["conductor"]
            if isinstance(conductor, bool) or not isinstance(conductor, int):
                raise GeometryError(f"conductor must be an integer, got {conductor!r}")
            panels.append(Panel(
                plane_axis=raw["normal"],
                plane_offset=float(raw["offset"]),
                u_range=raw["u"],
                v_range=raw["v"],
                n_u=raw.get("nu", 1),
                n_v=raw.get("nv", 1),
                conductor_id=conductor,
                voltage=float(raw["voltage"]),
            ))
        except KeyError as exc:
            raise GeometryError(f"panel {idx}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise GeometryError(f"panel {idx}: {exc}") from None
    return build_mesh(panels)


def load_geometry_file(path) -> Mesh:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise GeometryError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise GeometryError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    return load_geometry(document)


class Relation(str, Enum):
    SELF = "self"
    COPLANAR = "coplanar"
    PARALLEL_OFFSET = "parallel-offset"
    PERPENDICULAR = "perpendicular"
    # Reserved for non-axis-aligned geometry; never produced here.
    SKEW = "skew"


RELATION_CODES = (Relation.SELF, Relation.COPLANAR, Relation.PARALLEL_OFFSET, Relation.PERPENDICULAR)
SELF_CODE, COPLANAR_CODE, PARALLEL_CODE, PERPENDICULAR_CODE = range(4)


@dataclass(frozen=True)
class CanonicalPair:
    """Two rectangles in a shared integration frame.

    Parallel relations: rectangle 1 is ``[a0,a1] x [b0,b1]`` at height 0,
    rectangle 2 is ``[c0,c1] x [d0,d1]`` at height ``z_c``.
    Perpendicular: rectangle 1 spans ``x in [a0,a1], y in [b0,b1]`` in the
    plane ``z = z_c``; rectangle 2 spans ``x in [c0,c1], z in [d0,d1]`` in the
    plane ``y = y_c``.
    """

    relation: Relation
    limits: tuple[float, float, float, float, float, float, float, float]
    z_c: float = 0.0
    y_c: float | None = None

    def __post_init__(self):
        a0, a1, b0, b1, c0, c1, d0, d1 = self.limits
        if not (a0 < a1 and b0 < b1 and c0 < c1 and d0 < d1):
            raise GeometryError(f"degenerate integration limits {self.limits}")

    def areas(self) -> tuple[float, float]:
        a0, a1, b0, b1, c0, c1, d0, d1 = self.limits
        return (a1 - a0) * (b1 - b0), (c1 - c0) * (d1 - d0)

    def scale(self) -> float:
        a0, a1, b0, b1, c0, c1, d0, d1 = self.limits
        return max(a1 - a0, b1 - b0, c1 - c0, d1 - d0)

    def spans(self):
        """Per-axis extents of both rectangles in the frame (normal axis collapsed)."""
        a0, a1, b0, b1, c0, c1, d0, d1 = self.limits
        if self.relation is Relation.PERPENDICULAR:
            first = ((a0, a1), (b0, b1), (self.z_c, self.z_c))
            second = ((c0, c1), (self.y_c, self.y_c), (d0, d1))
        else:
            first = ((a0, a1), (b0, b1), (0.0, 0.0))
            second = ((c0, c1), (d0, d1), (self.z_c, self.z_c))
        return first, second

    def center_distance(self) -> float:
        first, second = self.spans()
        return math.sqrt(sum((0.5 * (p[0] + p[1]) - 0.5 * (q[0] + q[1])) ** 2 for p, q in zip(first, second)))

    def min_gap(self) -> float:
        first, second = self.spans()
        total = 0.0
        for p, q in zip(first, second):
            gap = max(0.0, q[0] - p[1], p[0] - q[1])
            total += gap * gap
        return math.sqrt(total)


@dataclass(frozen=True)
class CanonicalBlock:
    relation: np.ndarray
    limits: np.ndarray
    y_c: np.ndarray
    z_c: np.ndarray


def canonicalize_block(first: TileArrays, second: TileArrays, i, j) -> CanonicalBlock:
    """Vectorized canonical frames for tile pairs ``(first[i], second[j])``."""
    i = np.asarray(i, dtype=np.intp)
    j = np.asarray(j, dtype=np.intp)
    k1 = first.axis[i]
    k2 = second.axis[j]
    parallel = k1 == k2

    shared = np.where(parallel, (k1 + 1) % 3, 3 - k1 - k2)
    second_axis_1 = np.where(parallel, (k1 + 2) % 3, k2)
    second_axis_2 = np.where(parallel, (k1 + 2) % 3, k1)

    limits = np.stack([
        first.lo[i, shared], first.hi[i, shared],
        first.lo[i, second_axis_1], first.hi[i, second_axis_1],
        second.lo[j, shared], second.hi[j, shared],
        second.lo[j, second_axis_2], second.hi[j, second_axis_2],
    ], axis=-1)

    off1 = first.offset[i]
    off2 = second.offset[j]
    z_c = np.where(parallel, np.abs(off2 - off1), off1)
    y_c = np.where(parallel, 0.0, off2)

    identical = np.all(limits[:, 0:4] == limits[:, 4:8], axis=-1)
    relation = np.full(i.shape, PERPENDICULAR_CODE, dtype=np.int8)
    relation[parallel & (z_c > 0)] = PARALLEL_CODE
    relation[parallel & (z_c == 0) & ~identical] = COPLANAR_CODE
    relation[parallel & (z_c == 0) & identical] = SELF_CODE
    return CanonicalBlock(relation=relation, limits=limits, y_c=y_c, z_c=z_c)


def canonicalize_pair(t1: Tile, t2: Tile) -> CanonicalPair:
    arrays = TileArrays.from_tiles([t1, t2])
    block = canonicalize_block(arrays, arrays, [0], [1])
    relation = RELATION_CODES[int(block.relation[0])]
    limits = tuple(float(v) for v in block.limits[0])

    if relation is Relation.COPLANAR:
        a0, a1, b0, b1, c0, c1, d0, d1 = limits
        if min(a1, c1) - max(a0, c0) > 0 and min(b1, d1) - max(b0, d0) > 0:
            raise GeometryError("coplanar tiles overlap with positive area (invalid mesh)")

    y_c = float(block.y_c[0]) if relation is Relation.PERPENDICULAR else None
    return CanonicalPair(relation=relation, limits=limits, z_c=float(block.z_c[0]), y_c=y_c)
