"""EM-function catalog, switch-matrix patterns and lookup-table synthesis.

A tile's physical aperture is abstracted as an M x M binary-phase
reflectarray: each unit cell re-radiates the incident plane wave with an
added phase of 0 (switch state 0) or pi (state 1), and the far-field power
is the squared array factor including the incident-wave phase progression
across the cells. That is the desk-scale stand-in for a measured tile
pattern; the propagation engine never consumes switch matrices directly,
only quantized tile functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .ga import GAParams, ga_run
from .scene import (
    STEER_ANGLES_DEG,
    Tile,
    Vec3,
    angle_between,
    mirror_reflect,
    unit,
    virtual_normal,
)

N_TILE_FUNCTIONS = 26
ABSORB_INDEX = 25
PLAIN_INDEX = 12  # Steer{0, 0}


class FunctionKind(Enum):
    STEER = "STEER"
    ABSORB = "ABSORB"


class SearchMethod(Enum):
    EXHAUSTIVE = "exhaustive"
    GENETIC = "genetic"


@dataclass
class EMFunction:
    """One catalog entry: steer an incident direction of arrival somewhere,
    or absorb it. Directions are unit propagation vectors: incident_doa
    points toward the tile, out_dir away from it."""

    kind: FunctionKind
    incident_doa: Vec3
    out_dir: Vec3 | None = None
    wavelength: float = 0.00499654  # m

    def __post_init__(self):
        self.incident_doa = unit(self.incident_doa)
        if self.kind is FunctionKind.STEER:
            if self.out_dir is None:
                raise ValueError("STEER requires out_dir")
            self.out_dir = unit(self.out_dir)
        elif self.out_dir is not None:
            raise ValueError("ABSORB forbids out_dir")


@dataclass(frozen=True)
class TileFunction:
    """One of the 26 per-tile states: 25 steer angle pairs or absorb."""

    index: int

    def __post_init__(self):
        if not 0 <= self.index < N_TILE_FUNCTIONS:
            raise ValueError(f"tile function index {self.index} out of range")

    @classmethod
    def steer(cls, azimuth_deg: float, elevation_deg: float) -> "TileFunction":
        i_az = _angle_index(azimuth_deg)
        i_el = _angle_index(elevation_deg)
        return cls(i_az * 5 + i_el)

    @classmethod
    def absorb(cls) -> "TileFunction":
        return cls(ABSORB_INDEX)

    @property
    def is_absorb(self) -> bool:
        return self.index == ABSORB_INDEX

    @property
    def azimuth_deg(self) -> float | None:
        return None if self.is_absorb else STEER_ANGLES_DEG[self.index // 5]

    @property
    def elevation_deg(self) -> float | None:
        return None if self.is_absorb else STEER_ANGLES_DEG[self.index % 5]


def _angle_index(angle_deg: float) -> int:
    for i, a in enumerate(STEER_ANGLES_DEG):
        if abs(angle_deg - a) < 1e-9:
            return i
    raise ValueError(f"steer angle {angle_deg} not in catalog {STEER_ANGLES_DEG}")


@dataclass
class SwitchMatrix:
    """M x M grid of binary switch states."""

    states: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.uint8)
        if self.states.ndim != 2 or self.states.shape[0] != self.states.shape[1]:
            raise ValueError("switch matrix must be square")
        if not np.isin(self.states, (0, 1)).all():
            raise ValueError("switch states must be binary")

    @property
    def m(self) -> int:
        return self.states.shape[0]

    @classmethod
    def from_int(cls, code: int, m: int) -> "SwitchMatrix":
        """Decode a row-major bit string read as a binary number (MSB first)."""
        n = m * m
        bits = [(code >> (n - 1 - k)) & 1 for k in range(n)]
        return cls(np.array(bits, dtype=np.uint8).reshape(m, m))

    def to_int(self) -> int:
        code = 0
        for b in self.states.ravel():
            code = (code << 1) | int(b)
        return code

    def to_bits(self) -> str:
        return "".join(str(int(b)) for b in self.states.ravel())

    @classmethod
    def from_bits(cls, bits: str) -> "SwitchMatrix":
        m = math.isqrt(len(bits))
        if m * m != len(bits):
            raise ValueError("bit string length is not a perfect square")
        return cls(np.array([int(c) for c in bits], dtype=np.uint8).reshape(m, m))


@dataclass
class ReflectionPattern:
    """Relative reflected power sampled on an (azimuth, elevation) grid.

    Angles are grid-cell centers in degrees covering (-90, 90) in both
    axes; power[i, j] corresponds to (azimuth_deg[i], elevation_deg[j]).
    """

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    power: np.ndarray

    def max_power(self) -> float:
        return float(self.power.max())

    def peak_direction(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.power)), self.power.shape)
        return float(self.azimuth_deg[i]), float(self.elevation_deg[j])


def direction_from_angles(azimuth_deg, elevation_deg) -> np.ndarray:
    """Unit direction in the tile-local frame (x: horizontal, y: vertical,
    z: facet normal); azimuth/elevation of 0 is broadside (+z)."""
    az = np.radians(azimuth_deg)
    el = np.radians(elevation_deg)
    return np.stack(np.broadcast_arrays(
        np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)), axis=-1)


def _cell_positions(m: int, pitch: float) -> np.ndarray:
    idx = np.arange(m) - (m - 1) / 2.0
    gy, gx = np.meshgrid(idx, idx, indexing="ij")
    return np.stack([gx.ravel() * pitch, gy.ravel() * pitch, np.zeros(m * m)], axis=-1)


def _steering_phases(dirs: np.ndarray, incident: np.ndarray, cells: np.ndarray,
                     wavelength: float) -> np.ndarray:
    k = 2.0 * math.pi / wavelength
    return k * (dirs - incident[None, :]) @ cells.T  # (D, C)


def array_pattern(sigma: SwitchMatrix, incident, wavelength: float,
                  cell_pitch: float | None = None,
                  grid_step_deg: float = 1.0) -> ReflectionPattern:
    """Far-field power pattern of a binary-phase cell array.

    `incident` is the incoming propagation direction in the tile-local
    frame (z component < 0 for a wave hitting the facet). Default cell
    pitch is half a wavelength. Complementing sigma shifts every cell by
    pi, which leaves the power pattern unchanged.
    """
    incident = unit(incident)
    pitch = wavelength / 2.0 if cell_pitch is None else cell_pitch
    axis = np.arange(-90.0 + grid_step_deg / 2.0, 90.0, grid_step_deg)
    ga, ge = np.meshgrid(axis, axis, indexing="ij")
    dirs = direction_from_angles(ga.ravel(), ge.ravel())
    cells = _cell_positions(sigma.m, pitch)
    phases = _steering_phases(dirs, incident, cells, wavelength)
    w = 1.0 - 2.0 * sigma.states.ravel().astype(float)  # phase pi <-> factor -1
    af = np.cos(phases) @ w + 1j * (np.sin(phases) @ w)
    power = (af.real ** 2 + af.imag ** 2).reshape(len(axis), len(axis))
    return ReflectionPattern(azimuth_deg=axis, elevation_deg=axis, power=power)


def pattern_power_toward(sigma: SwitchMatrix, incident, out_dir,
                         wavelength: float, cell_pitch: float | None = None) -> float:
    """Reflected power of one configuration in a single outgoing direction."""
    incident = unit(incident)
    pitch = wavelength / 2.0 if cell_pitch is None else cell_pitch
    cells = _cell_positions(sigma.m, pitch)
    phases = _steering_phases(unit(out_dir)[None, :], incident, cells, wavelength)
    w = 1.0 - 2.0 * sigma.states.ravel().astype(float)
    af = complex(np.cos(phases[0]) @ w, np.sin(phases[0]) @ w)
    return abs(af) ** 2


def function_key(fn: EMFunction) -> str:
    def fmt(v):
        return ",".join(f"{x:.6g}" for x in v)

    out = fmt(fn.out_dir) if fn.kind is FunctionKind.STEER else "-"
    return f"{fn.kind.value}|{fmt(fn.incident_doa)}|{out}|{fn.wavelength:.9g}"


@dataclass
class LookupTable:
    """Map from a quantized function key to its best switch configuration."""

    entries: dict[str, SwitchMatrix] = field(default_factory=dict)

    def get(self, fn: EMFunction) -> SwitchMatrix:
        return self.entries[function_key(fn)]

    def to_text(self) -> str:
        lines = ["# tilewave lookup-table v1"]
        for key, sigma in self.entries.items():
            lines.append(f"{key} {sigma.to_bits()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LookupTable":
        entries = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, bits = line.rsplit(" ", 1)
            entries[key] = SwitchMatrix.from_bits(bits)
        return cls(entries)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "LookupTable":
        return cls.from_text(Path(path).read_text())


def _all_sign_columns(n_cells: int) -> np.ndarray:
    """(C, 2^C) matrix of +-1 cell factors for every configuration code,
    codes ordered by their row-major binary value (ties resolve lowest)."""
    codes = np.arange(1 << n_cells, dtype=np.uint32)
    shifts = (n_cells - 1 - np.arange(n_cells, dtype=np.uint32))[:, None]
    bits = (codes[None, :] >> shifts) & 1
    return 1.0 - 2.0 * bits.astype(float)


def populate_lookup(catalog: list[EMFunction], m: int,
                    search: SearchMethod = SearchMethod.EXHAUSTIVE,
                    *, cell_pitch: float | None = None,
                    grid_step_deg: float = 1.0,
                    seed: int = 0,
                    ga_params: GAParams | None = None) -> LookupTable:
    """Find the best switch configuration for every catalog function.

    ABSORB entries minimize the pattern's maximum over the angular grid;
    STEER entries maximize the power toward the requested outgoing
    direction (the absorb criterion has a written form, the steer fitness
    is the natural analog). Exhaustive search enumerates all 2^(m*m)
    configurations and requires m*m <= 16; the genetic search is seeded
    and deterministic. Ties resolve to the lowest configuration in
    row-major binary order.
    """
    n_cells = m * m
    table = LookupTable()
    for fn in catalog:
        pitch = (fn.wavelength / 2.0) if cell_pitch is None else cell_pitch
        incident = _as_local_incident(fn.incident_doa)
        if search is SearchMethod.EXHAUSTIVE:
            if n_cells > 16:
                raise ValueError("exhaustive search supported only for m*m <= 16")
            sigma = _exhaustive_best(fn, m, incident, pitch, grid_step_deg)
        else:
            sigma = _genetic_best(fn, m, incident, pitch, grid_step_deg, seed, ga_params)
        table.entries[function_key(fn)] = sigma
    return table


def _as_local_incident(doa: Vec3) -> Vec3:
    # pattern synthesis happens in the tile-local frame; an incoming wave
    # must travel toward the facet (negative z component)
    v = unit(doa)
    if v[2] > 0:
        v = -v
    return v


def _grid_dirs(grid_step_deg: float) -> np.ndarray:
    axis = np.arange(-90.0 + grid_step_deg / 2.0, 90.0, grid_step_deg)
    ga, ge = np.meshgrid(axis, axis, indexing="ij")
    return direction_from_angles(ga.ravel(), ge.ravel())


def _tie_break_lowest(vals: np.ndarray, minimize: bool) -> int:
    """Index of the best value; ties (within fp noise of blocked matrix
    products) resolve to the lowest configuration code, i.e. first index."""
    best = vals.min() if minimize else vals.max()
    tol = 1e-12 + 1e-9 * abs(best)
    ties = np.nonzero(vals <= best + tol if minimize else vals >= best - tol)[0]
    return int(ties[0])


def _exhaustive_best(fn, m, incident, pitch, grid_step_deg) -> SwitchMatrix:
    n_cells = m * m
    cells = _cell_positions(m, pitch)
    signs = _all_sign_columns(n_cells)  # (C, 2^C)
    if fn.kind is FunctionKind.ABSORB:
        phases = _steering_phases(_grid_dirs(grid_step_deg), incident, cells, fn.wavelength)
        cr, ci = np.cos(phases), np.sin(phases)
        n_codes = signs.shape[1]
        chunk = max(1, min(n_codes, (1 << 24) // max(phases.shape[0], 1)))
        vals = np.empty(n_codes)
        for lo in range(0, n_codes, chunk):
            w = signs[:, lo:lo + chunk]
            vals[lo:lo + w.shape[1]] = ((cr @ w) ** 2 + (ci @ w) ** 2).max(axis=0)
        return SwitchMatrix.from_int(_tie_break_lowest(vals, minimize=True), m)
    phases = _steering_phases(unit(fn.out_dir)[None, :], incident, cells, fn.wavelength)
    vals = (np.cos(phases[0]) @ signs) ** 2 + (np.sin(phases[0]) @ signs) ** 2
    return SwitchMatrix.from_int(_tie_break_lowest(vals, minimize=False), m)


def _genetic_best(fn, m, incident, pitch, grid_step_deg, seed, ga_params) -> SwitchMatrix:
    n_cells = m * m
    cells = _cell_positions(m, pitch)
    if fn.kind is FunctionKind.ABSORB:
        phases = _steering_phases(_grid_dirs(grid_step_deg), incident, cells, fn.wavelength)
    else:
        phases = _steering_phases(unit(fn.out_dir)[None, :], incident, cells, fn.wavelength)
    cr, ci = np.cos(phases), np.sin(phases)

    def fitness(genome: np.ndarray) -> float:
        w = 1.0 - 2.0 * genome.astype(float)
        p = (cr @ w) ** 2 + (ci @ w) ** 2
        if fn.kind is FunctionKind.ABSORB:
            return -float(p.max())
        return float(p[0])

    params = ga_params or GAParams(population_size=32, generations=60,
                                   mutation_rate=0.05, elite_count=2, seed=seed)
    best, _ = ga_run(fitness, params, gene_arity=2, genome_len=n_cells)
    return SwitchMatrix(best.astype(np.uint8).reshape(m, m))


def quantize_function(requested: EMFunction, tile: Tile) -> TileFunction:
    """Snap a continuous steer request onto the 26-state tile catalog.

    Picks the steer state whose virtual-normal mirror image of the incident
    direction is angularly closest to the requested outgoing direction;
    ties break toward the smaller total rotation, then the lower state
    index. ABSORB requests map to the absorb state.
    """
    if requested.kind is FunctionKind.ABSORB:
        return TileFunction.absorb()
    inc = unit(requested.incident_doa)
    out = unit(requested.out_dir)
    best = None
    for i_az, az in enumerate(STEER_ANGLES_DEG):
        for i_el, el in enumerate(STEER_ANGLES_DEG):
            n = virtual_normal(tile, az, el)
            err = angle_between(mirror_reflect(inc, n), out)
            key = (err, abs(az) + abs(el), i_az * 5 + i_el)
            if best is None or key < best[0]:
                best = (key, TileFunction.steer(az, el))
    return best[1]
