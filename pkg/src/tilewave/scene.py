"""3D indoor geometry: rectangular surfaces, 1 m tile grids, ray queries.

Coordinate convention: origin on the floor at the upper-left corner of the
floorplan, x across the corridors (0 -> 10 m), y along the corridors
(0 -> 15 m), z up (0 -> 3 m). All lengths are meters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

Vec3 = np.ndarray  # shape (3,), float64

WORLD_UP = np.array([0.0, 0.0, 1.0])
TILE_SIDE = 1.0          # m, tiles are square-sized 1 x 1 m
STEER_ANGLES_DEG = (-30.0, -15.0, 0.0, 15.0, 30.0)
INTERSECT_EPS = 1e-6     # m, minimum accepted hit distance along a ray
EDGE_TOL = 1e-9          # m, slack for point-on-rectangle tests


class Material(Enum):
    TILED_WALL = "tiled_wall"
    CONCRETE = "concrete"


class InvalidAngleError(ValueError):
    """Requested steer angle is not in the supported 5-angle catalog."""


def vec(x, y, z) -> Vec3:
    return np.array([float(x), float(y), float(z)])


def unit(v) -> Vec3:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def angle_between(a, b) -> float:
    """Angle in radians between two vectors (not required to be unit)."""
    ua, ub = unit(a), unit(b)
    return float(np.arccos(np.clip(np.dot(ua, ub), -1.0, 1.0)))


def mirror_reflect(direction, normal) -> Vec3:
    """Raw mirror formula d - 2(d.n)n; no grazing checks, see raytrace.reflect_dir."""
    d = np.asarray(direction, dtype=float)
    n = np.asarray(normal, dtype=float)
    return d - 2.0 * float(np.dot(d, n)) * n


def rotate_about_axis(v, axis, angle_rad) -> Vec3:
    """Rodrigues rotation of v about a unit axis by angle_rad (right-handed)."""
    v = np.asarray(v, dtype=float)
    k = unit(axis)
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return v * c + np.cross(k, v) * s + k * float(np.dot(k, v)) * (1.0 - c)


@dataclass
class Surface:
    """Finite rectangle: origin + u*edge_u + v*edge_v, u,v in [0,1].

    edge_u and edge_v are orthogonal and their lengths are the surface
    extents. true_normal is unit and perpendicular to both edges; for walls
    it points into the room interior.
    """

    id: str
    origin: Vec3
    edge_u: Vec3
    edge_v: Vec3
    material: Material
    true_normal: Vec3

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.edge_u = np.asarray(self.edge_u, dtype=float)
        self.edge_v = np.asarray(self.edge_v, dtype=float)
        self.true_normal = np.asarray(self.true_normal, dtype=float)
        if abs(float(np.dot(self.edge_u, self.edge_v))) > 1e-9:
            raise ValueError(f"surface {self.id}: edge_u and edge_v not orthogonal")
        if abs(float(np.linalg.norm(self.true_normal)) - 1.0) > 1e-9:
            raise ValueError(f"surface {self.id}: true_normal not unit")
        for e in (self.edge_u, self.edge_v):
            if abs(float(np.dot(self.true_normal, e))) > 1e-9:
                raise ValueError(f"surface {self.id}: true_normal not perpendicular to edges")

    @property
    def len_u(self) -> float:
        return float(np.linalg.norm(self.edge_u))

    @property
    def len_v(self) -> float:
        return float(np.linalg.norm(self.edge_v))

    @property
    def u_hat(self) -> Vec3:
        return self.edge_u / self.len_u

    @property
    def v_hat(self) -> Vec3:
        return self.edge_v / self.len_v

    def local_uv(self, point) -> tuple[float, float]:
        rel = np.asarray(point, dtype=float) - self.origin
        return float(np.dot(rel, self.u_hat)), float(np.dot(rel, self.v_hat))


@dataclass
class Tile:
    """One 1 x 1 m programmable facet of a tiled wall.

    axis_v is the in-plane vertical rotation axis (azimuth rotations),
    axis_h the in-plane horizontal one (elevation rotations); (axis_h,
    axis_v, true_normal) is a right-handed orthonormal frame.
    """

    id: int
    parent_surface: str
    center: Vec3
    side: float          # m
    true_normal: Vec3
    axis_h: Vec3
    axis_v: Vec3


@dataclass
class Hit:
    point: Vec3
    distance: float      # m along the ray
    surface: str
    tile: int | None = None


def tile_axes(normal) -> tuple[Vec3, Vec3]:
    """In-plane (horizontal, vertical) rotation axes for a facet normal."""
    n = unit(normal)
    up = WORLD_UP - float(np.dot(WORLD_UP, n)) * n
    if np.linalg.norm(up) < 1e-9:
        # horizontal facet (floor/ceiling-like): pick x as the in-plane vertical
        axis_v = unit(np.array([1.0, 0.0, 0.0]) - float(n[0]) * n)
    else:
        axis_v = unit(up)
    axis_h = unit(np.cross(axis_v, n))
    return axis_h, axis_v


def virtual_normal(tile: Tile, azimuth_deg: float, elevation_deg: float) -> Vec3:
    """Rotated copy of the tile normal used for non-specular steering.

    The true normal is rotated by azimuth about the tile's in-plane vertical
    axis, then by elevation about its in-plane horizontal axis (both axes
    fixed, right-handed). Angles must come from the 5-angle catalog.
    """
    for a in (azimuth_deg, elevation_deg):
        if min(abs(a - c) for c in STEER_ANGLES_DEG) > 1e-9:
            raise InvalidAngleError(f"angle {a} not in catalog {STEER_ANGLES_DEG}")
    n = rotate_about_axis(tile.true_normal, tile.axis_v, math.radians(azimuth_deg))
    n = rotate_about_axis(n, tile.axis_h, math.radians(elevation_deg))
    return unit(n)


@dataclass
class SceneArrays:
    """Flat geometry tables consumed by the tracing kernel."""

    origins: np.ndarray      # (S, 3)
    u_hats: np.ndarray       # (S, 3)
    v_hats: np.ndarray       # (S, 3)
    normals: np.ndarray      # (S, 3)
    len_u: np.ndarray        # (S,)
    len_v: np.ndarray        # (S,)
    is_tiled: np.ndarray     # (S,) uint8
    tile_base: np.ndarray    # (S,) int32, -1 when untiled
    n_u: np.ndarray          # (S,) int32 tile columns
    n_v: np.ndarray          # (S,) int32 tile rows
    tile_side: float


class Scene:
    """Immutable collection of surfaces with tile grids on tiled walls.

    Tile ids are assigned in the order surfaces are listed (the canonical
    wall order of the builder), row-major per face: id = base + row * n_u
    + col, rows running along edge_v and columns along edge_u. Two builds
    from the same surface list produce identical ids, centers and normals.
    """

    def __init__(self, surfaces: list[Surface], tile_side: float = TILE_SIDE):
        self.surfaces = list(surfaces)
        self.tile_side = float(tile_side)
        self._by_id = {s.id: s for s in self.surfaces}
        if len(self._by_id) != len(self.surfaces):
            raise ValueError("duplicate surface ids")
        self.tiles: list[Tile] = []
        self._grid: dict[str, tuple[int, int, int]] = {}  # surface -> (base, n_u, n_v)
        base = 0
        for s in self.surfaces:
            if s.material is not Material.TILED_WALL:
                continue
            n_u = round(s.len_u / self.tile_side)
            n_v = round(s.len_v / self.tile_side)
            if abs(n_u * self.tile_side - s.len_u) > 1e-6 or abs(n_v * self.tile_side - s.len_v) > 1e-6:
                raise ValueError(f"surface {s.id}: extents are not whole tiles")
            axis_h, axis_v = tile_axes(s.true_normal)
            for row in range(n_v):
                for col in range(n_u):
                    center = (s.origin
                              + (col + 0.5) * self.tile_side * s.u_hat
                              + (row + 0.5) * self.tile_side * s.v_hat)
                    self.tiles.append(Tile(
                        id=base + row * n_u + col,
                        parent_surface=s.id,
                        center=center,
                        side=self.tile_side,
                        true_normal=s.true_normal.copy(),
                        axis_h=axis_h.copy(),
                        axis_v=axis_v.copy(),
                    ))
            self._grid[s.id] = (base, n_u, n_v)
            base += n_u * n_v
        self._arrays: SceneArrays | None = None

    @property
    def tile_count(self) -> int:
        return len(self.tiles)

    def surface(self, surface_id: str) -> Surface:
        return self._by_id[surface_id]

    def tile_at(self, surface_id: str, point) -> int:
        """Tile id under a point on a tiled surface (every point maps to one tile)."""
        s = self._by_id[surface_id]
        base, n_u, n_v = self._grid[surface_id]
        u, v = s.local_uv(point)
        col = min(max(int(u // self.tile_side), 0), n_u - 1)
        row = min(max(int(v // self.tile_side), 0), n_v - 1)
        return base + row * n_u + col

    def ray_intersect(self, origin, direction) -> Hit | None:
        """Nearest surface hit beyond INTERSECT_EPS, or None if the ray escapes."""
        o = np.asarray(origin, dtype=float)
        d = unit(direction)
        best: Hit | None = None
        for s in self.surfaces:
            denom = float(np.dot(d, s.true_normal))
            if abs(denom) < 1e-12:
                continue
            t = float(np.dot(s.origin - o, s.true_normal)) / denom
            if t <= INTERSECT_EPS or (best is not None and t >= best.distance):
                continue
            p = o + t * d
            u, v = s.local_uv(p)
            if -EDGE_TOL <= u <= s.len_u + EDGE_TOL and -EDGE_TOL <= v <= s.len_v + EDGE_TOL:
                tile = self.tile_at(s.id, p) if s.material is Material.TILED_WALL else None
                best = Hit(point=p, distance=t, surface=s.id, tile=tile)
        return best

    def arrays(self) -> SceneArrays:
        """Compile (and cache) the flat tables used by the tracing kernel."""
        if self._arrays is None:
            ns = len(self.surfaces)
            arr = SceneArrays(
                origins=np.zeros((ns, 3)), u_hats=np.zeros((ns, 3)), v_hats=np.zeros((ns, 3)),
                normals=np.zeros((ns, 3)), len_u=np.zeros(ns), len_v=np.zeros(ns),
                is_tiled=np.zeros(ns, np.uint8), tile_base=np.full(ns, -1, np.int32),
                n_u=np.zeros(ns, np.int32), n_v=np.zeros(ns, np.int32),
                tile_side=self.tile_side,
            )
            for i, s in enumerate(self.surfaces):
                arr.origins[i] = s.origin
                arr.u_hats[i] = s.u_hat
                arr.v_hats[i] = s.v_hat
                arr.normals[i] = s.true_normal
                arr.len_u[i] = s.len_u
                arr.len_v[i] = s.len_v
                if s.material is Material.TILED_WALL:
                    base, n_u, n_v = self._grid[s.id]
                    arr.is_tiled[i] = 1
                    arr.tile_base[i] = base
                    arr.n_u[i] = n_u
                    arr.n_v[i] = n_v
            self._arrays = arr
        return self._arrays

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "tile_side": self.tile_side,
            "surfaces": [
                {
                    "id": s.id,
                    "origin": s.origin.tolist(),
                    "edge_u": s.edge_u.tolist(),
                    "edge_v": s.edge_v.tolist(),
                    "material": s.material.value,
                    "normal": s.true_normal.tolist(),
                }
                for s in self.surfaces
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        if data.get("version") != 1:
            raise ValueError(f"unsupported scene schema version {data.get('version')!r}")
        surfaces = [
            Surface(
                id=d["id"],
                origin=np.array(d["origin"], dtype=float),
                edge_u=np.array(d["edge_u"], dtype=float),
                edge_v=np.array(d["edge_v"], dtype=float),
                material=Material(d["material"]),
                true_normal=np.array(d["normal"], dtype=float),
            )
            for d in data["surfaces"]
        ]
        return cls(surfaces, tile_side=data.get("tile_side", TILE_SIDE))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()))


# Reference floorplan dimensions (meters)
ROOM_HEIGHT = 3.0
CORRIDOR_LENGTH = 15.0
CORRIDOR_WIDTH = 4.5
MID_WALL_LENGTH = 12.0
MID_WALL_THICKNESS = 1.0    # two stacked 0.5 m walls modeled as one solid box
ROOM_WIDTH = 2 * CORRIDOR_WIDTH + MID_WALL_THICKNESS  # 10.0


def build_corridor_floorplan() -> Scene:
    """Two-corridor reference floorplan with 222 wall tiles.

    Interior box 10 m (x) by 15 m (y) by 3 m (z). A 1 m thick middle wall
    occupies x in [4.5, 5.5], y in [3, 15], leaving a 3 m opening at
    y in [0, 3]. All interior vertical wall faces carry 1 x 1 m tiles:
    perimeter 2*(15+10) m x 3 rows = 150 tiles plus the two 12 m middle
    faces x 3 rows = 72 tiles. The middle wall's exposed 1 x 3 m end cap at
    y=3 is plain concrete: that is the only face assignment consistent with
    the stated dimensions that totals exactly 222 tiles (the source
    material does not state it outright, so it is an inference). Floor and
    ceiling are concrete and untiled.

    Canonical face order (fixes tile ids): wall-y0, wall-x10, wall-y15,
    wall-x0, mid-x4.5, mid-x5.5; row-major per face with rows along z.
    """
    x0, x1 = 4.5, 4.5 + MID_WALL_THICKNESS
    w, l, h = ROOM_WIDTH, CORRIDOR_LENGTH, ROOM_HEIGHT
    gap = l - MID_WALL_LENGTH  # 3 m opening at y in [0, gap]
    surfaces = [
        Surface("wall-y0", vec(0, 0, 0), vec(w, 0, 0), vec(0, 0, h),
                Material.TILED_WALL, vec(0, 1, 0)),
        Surface("wall-x10", vec(w, 0, 0), vec(0, l, 0), vec(0, 0, h),
                Material.TILED_WALL, vec(-1, 0, 0)),
        Surface("wall-y15", vec(0, l, 0), vec(w, 0, 0), vec(0, 0, h),
                Material.TILED_WALL, vec(0, -1, 0)),
        Surface("wall-x0", vec(0, 0, 0), vec(0, l, 0), vec(0, 0, h),
                Material.TILED_WALL, vec(1, 0, 0)),
        Surface("mid-x4.5", vec(x0, gap, 0), vec(0, MID_WALL_LENGTH, 0), vec(0, 0, h),
                Material.TILED_WALL, vec(-1, 0, 0)),
        Surface("mid-x5.5", vec(x1, gap, 0), vec(0, MID_WALL_LENGTH, 0), vec(0, 0, h),
                Material.TILED_WALL, vec(1, 0, 0)),
        Surface("mid-cap-y3", vec(x0, gap, 0), vec(MID_WALL_THICKNESS, 0, 0), vec(0, 0, h),
                Material.CONCRETE, vec(0, -1, 0)),
        Surface("floor", vec(0, 0, 0), vec(w, 0, 0), vec(0, l, 0),
                Material.CONCRETE, vec(0, 0, 1)),
        Surface("ceiling", vec(0, 0, h), vec(w, 0, 0), vec(0, l, 0),
                Material.CONCRETE, vec(0, 0, -1)),
    ]
    return Scene(surfaces)
