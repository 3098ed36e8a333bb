"""Shooting-and-bouncing-rays propagation over tile-configured walls.

Rays launch from the transmitter on a deterministic Fibonacci-sphere
direction set and bounce up to `max_bounces` times. A tiled-wall bounce
mirrors the ray about the tile's *virtual* normal for steer states (0 dB
loss) and about the true normal for absorb (35 dB); concrete uses the true
normal with a configurable material loss. A receiver captures a ray when
the ray passes inside its reception sphere, whose radius grows with the
unfolded travel distance; captures of the same geometric path (same bounce
sequence) are deduplicated, keeping the closest pass.

The hot loop is a numba kernel; results are independent of the thread
count because every ray is traced independently and the merge is a
deterministic sort.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numba import njit, prange

from .emfunc import ABSORB_INDEX, N_TILE_FUNCTIONS, PLAIN_INDEX
from .scene import Hit, Material, Scene, Vec3, mirror_reflect, unit, virtual_normal

C_LIGHT = 299792458.0          # m/s
ABSORB_LOSS_DB = 35.0          # per absorb bounce
DIPOLE_PEAK_GAIN = 1.64        # linear, half-wave dipole broadside
DIPOLE_AXIS = np.array([0.0, 0.0, 1.0])  # antennas are vertical dipoles
GRAZING_EPS = 1e-9


class GrazingIncidenceError(ValueError):
    """Incident direction lies (numerically) in the tile plane."""


def default_concrete_loss_db(frequency: float) -> float:
    """Per-bounce concrete reflection loss. Not sourced from measurements:
    13 dB above 10 GHz, 7 dB below, both configurable."""
    return 13.0 if frequency >= 10e9 else 7.0


@dataclass
class RadioParams:
    frequency: float                 # Hz
    tx_position: Vec3
    rx_positions: np.ndarray         # (R, 3)
    bandwidth: float = 25e6          # Hz
    tx_power_dbm: float = 100.0
    max_bounces: int = 3
    ray_count: int = 200_000
    rx_sphere_base_radius: float = 1.0   # scales the angular-spacing capture radius
    power_floor_dbm: float = -250.0
    concrete_loss_db: float | None = None

    def __post_init__(self):
        self.tx_position = np.asarray(self.tx_position, dtype=float)
        self.rx_positions = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        if self.ray_count < 1:
            raise ValueError("ray_count must be >= 1")
        if self.concrete_loss_db is None:
            self.concrete_loss_db = default_concrete_loss_db(self.frequency)


@dataclass
class EnvConfiguration:
    """Per-tile function indices; the genome of the environment optimizer."""

    states: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)
        if self.states.ndim != 1:
            raise ValueError("states must be a flat array")
        if self.states.size and (self.states.min() < 0 or self.states.max() >= N_TILE_FUNCTIONS):
            raise ValueError("tile function index out of range")

    @classmethod
    def plain(cls, tile_count: int) -> "EnvConfiguration":
        return cls(np.full(tile_count, PLAIN_INDEX, dtype=np.int64))


@dataclass
class PropagationPath:
    rx_index: int
    bounce_points: list[Hit]
    unfolded_length: float        # m
    delay: float                  # s
    bounce_loss_db: float
    attenuation: float            # linear amplitude relative to tx
    rx_power_dbm: float
    phase: float = 0.0            # bounce-induced phase (loss-only tiles: 0)
    launch_dir: Vec3 | None = None
    arrival_dir: Vec3 | None = None
    arrival_point: Vec3 | None = None
    miss_distance: float = 0.0    # m, perpendicular miss at capture
    below_floor: bool = False

    @property
    def bounce_count(self) -> int:
        return len(self.bounce_points)


def reflect_dir(incident, normal) -> Vec3:
    """Specular mirror of a unit incident direction about a unit normal."""
    d = np.asarray(incident, dtype=float)
    n = np.asarray(normal, dtype=float)
    if abs(float(np.dot(d, n))) < GRAZING_EPS:
        raise GrazingIncidenceError("incident direction grazes the surface plane")
    return unit(mirror_reflect(d, n))


def friis_loss_db(frequency: float, distance: float) -> float:
    """Free-space path loss 20*log10(4 pi d / lambda)."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    wavelength = C_LIGHT / frequency
    return 20.0 * math.log10(4.0 * math.pi * distance / wavelength)


def dipole_gain(angle_from_axis: float) -> float:
    """Half-wave dipole power gain at an angle from the dipole axis.

    1.64 * (cos(pi/2 * cos(theta)) / sin(theta))^2; the axial direction
    returns 0 (pattern null) rather than raising.
    """
    s = math.sin(angle_from_axis)
    if abs(s) < 1e-12:
        return 0.0
    return DIPOLE_PEAK_GAIN * (math.cos(0.5 * math.pi * math.cos(angle_from_axis)) / s) ** 2


def _dipole_gain_db(direction) -> float:
    g = dipole_gain(math.acos(max(-1.0, min(1.0, float(direction[2])))))
    return 10.0 * math.log10(g) if g > 0.0 else -math.inf


@lru_cache(maxsize=8)
def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic, nearly uniform unit directions (golden-angle lattice)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    dirs.setflags(write=False)
    return dirs


def tile_state_tables(scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    """Per-tile effective normals for all 26 states and per-state losses.

    Returns (normals, loss_db): normals[t, s] is the reflection normal of
    tile t in state s (virtual normal for steer states, true normal for
    absorb), loss_db[s] the per-bounce loss of state s.
    """
    cached = getattr(scene, "_tilewave_state_tables", None)
    if cached is not None:
        return cached
    from .emfunc import TileFunction  # local import keeps module load light

    normals = np.zeros((scene.tile_count, N_TILE_FUNCTIONS, 3))
    for tile in scene.tiles:
        for idx in range(N_TILE_FUNCTIONS):
            tf = TileFunction(idx)
            if tf.is_absorb:
                normals[tile.id, idx] = tile.true_normal
            else:
                normals[tile.id, idx] = virtual_normal(tile, tf.azimuth_deg, tf.elevation_deg)
    loss_db = np.zeros(N_TILE_FUNCTIONS)
    loss_db[ABSORB_INDEX] = ABSORB_LOSS_DB
    scene._tilewave_state_tables = (normals, loss_db)
    return normals, loss_db


@njit(cache=True)
def _trace_one(ray_idx, dirs, tx, s_orig, s_uhat, s_vhat, s_norm, s_lenu, s_lenv,
               s_tiled, s_base, s_nu, s_nv, tile_side, t_norm, t_loss, concrete_loss,
               rx, delta, max_b, record, start,
               rec_rx, rec_nb, rec_ray, rec_unf, rec_miss2, rec_loss,
               rec_adir, rec_cap, rec_surf, rec_tile, rec_pts, rec_segt):
    ox, oy, oz = tx[0], tx[1], tx[2]
    dx, dy, dz = dirs[ray_idx, 0], dirs[ray_idx, 1], dirs[ray_idx, 2]
    unfolded = 0.0
    loss = 0.0
    nb = 0
    h_surf = np.empty(max_b, np.int32)
    h_tile = np.empty(max_b, np.int32)
    h_pts = np.empty((max_b, 3))
    h_segt = np.empty(max_b)
    ncap = 0
    n_surf = s_orig.shape[0]
    n_rx = rx.shape[0]
    for seg in range(max_b + 1):
        best_t = 1e30
        best_s = -1
        best_u = 0.0
        best_v = 0.0
        for s in range(n_surf):
            nx, ny, nz = s_norm[s, 0], s_norm[s, 1], s_norm[s, 2]
            denom = dx * nx + dy * ny + dz * nz
            if -1e-12 < denom < 1e-12:
                continue
            t = ((s_orig[s, 0] - ox) * nx + (s_orig[s, 1] - oy) * ny
                 + (s_orig[s, 2] - oz) * nz) / denom
            if t <= 1e-6 or t >= best_t:
                continue
            hx = ox + t * dx - s_orig[s, 0]
            hy = oy + t * dy - s_orig[s, 1]
            hz = oz + t * dz - s_orig[s, 2]
            u = hx * s_uhat[s, 0] + hy * s_uhat[s, 1] + hz * s_uhat[s, 2]
            if u < -1e-9 or u > s_lenu[s] + 1e-9:
                continue
            v = hx * s_vhat[s, 0] + hy * s_vhat[s, 1] + hz * s_vhat[s, 2]
            if v < -1e-9 or v > s_lenv[s] + 1e-9:
                continue
            best_t = t
            best_s = s
            best_u = u
            best_v = v
        t_lim = best_t if best_s >= 0 else 1e30
        for r in range(n_rx):
            wx = rx[r, 0] - ox
            wy = rx[r, 1] - oy
            wz = rx[r, 2] - oz
            tca = wx * dx + wy * dy + wz * dz
            if tca <= 1e-9 or tca >= t_lim:
                continue
            cx = ox + tca * dx - rx[r, 0]
            cy = oy + tca * dy - rx[r, 1]
            cz = oz + tca * dz - rx[r, 2]
            miss2 = cx * cx + cy * cy + cz * cz
            unf = unfolded + tca
            radius = unf * delta
            if miss2 <= radius * radius:
                if record:
                    k = start + ncap
                    rec_rx[k] = r
                    rec_nb[k] = nb
                    rec_ray[k] = ray_idx
                    rec_unf[k] = unf
                    rec_miss2[k] = miss2
                    rec_loss[k] = loss
                    rec_adir[k, 0] = dx
                    rec_adir[k, 1] = dy
                    rec_adir[k, 2] = dz
                    rec_cap[k, 0] = ox + tca * dx
                    rec_cap[k, 1] = oy + tca * dy
                    rec_cap[k, 2] = oz + tca * dz
                    for b in range(nb):
                        rec_surf[k, b] = h_surf[b]
                        rec_tile[k, b] = h_tile[b]
                        rec_pts[k, b, 0] = h_pts[b, 0]
                        rec_pts[k, b, 1] = h_pts[b, 1]
                        rec_pts[k, b, 2] = h_pts[b, 2]
                        rec_segt[k, b] = h_segt[b]
                ncap += 1
        if best_s < 0 or seg == max_b:
            break
        hx = ox + best_t * dx
        hy = oy + best_t * dy
        hz = oz + best_t * dz
        ntx, nty, ntz = s_norm[best_s, 0], s_norm[best_s, 1], s_norm[best_s, 2]
        gid = -1
        if s_tiled[best_s] == 1:
            niu = s_nu[best_s]
            niv = s_nv[best_s]
            iu = int(best_u // tile_side)
            iv = int(best_v // tile_side)
            if iu < 0:
                iu = 0
            elif iu >= niu:
                iu = niu - 1
            if iv < 0:
                iv = 0
            elif iv >= niv:
                iv = niv - 1
            gid = s_base[best_s] + iv * niu + iu
            nex, ney, nez = t_norm[gid, 0], t_norm[gid, 1], t_norm[gid, 2]
            bounce_loss = t_loss[gid]
        else:
            nex, ney, nez = ntx, nty, ntz
            bounce_loss = concrete_loss
        dn = dx * nex + dy * ney + dz * nez
        if -1e-9 < dn < 1e-9:
            break  # grazing on the effective mirror plane
        r2x = dx - 2.0 * dn * nex
        r2y = dy - 2.0 * dn * ney
        r2z = dz - 2.0 * dn * nez
        rn = math.sqrt(r2x * r2x + r2y * r2y + r2z * r2z)
        if rn == 0.0:
            break
        r2x /= rn
        r2y /= rn
        r2z /= rn
        d_in = dx * ntx + dy * nty + dz * ntz
        d_out = r2x * ntx + r2y * nty + r2z * ntz
        if d_in * d_out > -1e-12:
            break  # steered into the wall (or degenerate): energy lost
        h_surf[nb] = best_s
        h_tile[nb] = gid
        h_pts[nb, 0] = hx
        h_pts[nb, 1] = hy
        h_pts[nb, 2] = hz
        h_segt[nb] = best_t
        unfolded += best_t
        loss += bounce_loss
        nb += 1
        ox, oy, oz = hx, hy, hz
        dx, dy, dz = r2x, r2y, r2z
    return ncap


@njit(cache=True, parallel=True)
def _count_kernel(dirs, tx, s_orig, s_uhat, s_vhat, s_norm, s_lenu, s_lenv,
                  s_tiled, s_base, s_nu, s_nv, tile_side, t_norm, t_loss,
                  concrete_loss, rx, delta, max_b, counts):
    d_i4 = np.empty(0, np.int32)
    d_f8 = np.empty(0, np.float64)
    d_v3 = np.empty((0, 3), np.float64)
    d_i4b = np.empty((0, max_b), np.int32)
    d_f8b = np.empty((0, max_b), np.float64)
    d_v3b = np.empty((0, max_b, 3), np.float64)
    for i in prange(dirs.shape[0]):
        counts[i] = _trace_one(i, dirs, tx, s_orig, s_uhat, s_vhat, s_norm,
                               s_lenu, s_lenv, s_tiled, s_base, s_nu, s_nv,
                               tile_side, t_norm, t_loss, concrete_loss, rx,
                               delta, max_b, False, 0,
                               d_i4, d_i4, d_i4, d_f8, d_f8, d_f8,
                               d_v3, d_v3, d_i4b, d_i4b, d_v3b, d_f8b)


@njit(cache=True, parallel=True)
def _record_kernel(ray_ids, offsets, dirs, tx, s_orig, s_uhat, s_vhat, s_norm,
                   s_lenu, s_lenv, s_tiled, s_base, s_nu, s_nv, tile_side,
                   t_norm, t_loss, concrete_loss, rx, delta, max_b,
                   rec_rx, rec_nb, rec_ray, rec_unf, rec_miss2, rec_loss,
                   rec_adir, rec_cap, rec_surf, rec_tile, rec_pts, rec_segt):
    for j in prange(ray_ids.shape[0]):
        i = ray_ids[j]
        _trace_one(i, dirs, tx, s_orig, s_uhat, s_vhat, s_norm, s_lenu, s_lenv,
                   s_tiled, s_base, s_nu, s_nv, tile_side, t_norm, t_loss,
                   concrete_loss, rx, delta, max_b, True, offsets[i],
                   rec_rx, rec_nb, rec_ray, rec_unf, rec_miss2, rec_loss,
                   rec_adir, rec_cap, rec_surf, rec_tile, rec_pts, rec_segt)


def launch_rays(scene: Scene, config: EnvConfiguration, params: RadioParams,
                seed: int = 0) -> dict[int, list[PropagationPath]]:
    """Trace the scene under a tile configuration; paths per receiver index.

    The direction set depends only on ray_count; the seed exists to pin
    tie-handling and does not perturb the launch directions. Receivers
    with no captured ray are absent from the returned map.
    """
    if len(config.states) != scene.tile_count:
        raise ValueError("configuration length != scene tile count")
    arr = scene.arrays()
    normals_all, loss_by_state = tile_state_tables(scene)
    if scene.tile_count:
        t_norm = normals_all[np.arange(scene.tile_count), config.states]
        t_loss = loss_by_state[config.states]
    else:
        t_norm = np.zeros((0, 3))
        t_loss = np.zeros(0)
    dirs = fibonacci_sphere(params.ray_count)
    rx = params.rx_positions
    delta = params.rx_sphere_base_radius * math.sqrt(4.0 * math.pi / params.ray_count)
    tx = params.tx_position
    max_b = params.max_bounces

    counts = np.zeros(params.ray_count, np.int32)
    _count_kernel(dirs, tx, arr.origins, arr.u_hats, arr.v_hats, arr.normals,
                  arr.len_u, arr.len_v, arr.is_tiled, arr.tile_base, arr.n_u,
                  arr.n_v, arr.tile_side, t_norm, t_loss,
                  float(params.concrete_loss_db), rx, delta, max_b, counts)
    total = int(counts.sum())
    if total == 0:
        return {}
    offsets = np.zeros(params.ray_count + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    ray_ids = np.nonzero(counts)[0].astype(np.int64)

    rec_rx = np.zeros(total, np.int32)
    rec_nb = np.zeros(total, np.int32)
    rec_ray = np.zeros(total, np.int32)
    rec_unf = np.zeros(total)
    rec_miss2 = np.zeros(total)
    rec_loss = np.zeros(total)
    rec_adir = np.zeros((total, 3))
    rec_cap = np.zeros((total, 3))
    rec_surf = np.zeros((total, max_b), np.int32)
    rec_tile = np.zeros((total, max_b), np.int32)
    rec_pts = np.zeros((total, max_b, 3))
    rec_segt = np.zeros((total, max_b))
    _record_kernel(ray_ids, offsets, dirs, tx, arr.origins, arr.u_hats,
                   arr.v_hats, arr.normals, arr.len_u, arr.len_v, arr.is_tiled,
                   arr.tile_base, arr.n_u, arr.n_v, arr.tile_side, t_norm,
                   t_loss, float(params.concrete_loss_db), rx, delta, max_b,
                   rec_rx, rec_nb, rec_ray, rec_unf, rec_miss2, rec_loss,
                   rec_adir, rec_cap, rec_surf, rec_tile, rec_pts, rec_segt)

    # deduplicate by (receiver, bounce sequence), keeping the closest pass
    entries = []
    for k in range(total):
        nb = int(rec_nb[k])
        key = tuple((int(rec_surf[k, b]), int(rec_tile[k, b])) for b in range(nb))
        entries.append((int(rec_rx[k]), key, float(rec_miss2[k]), int(rec_ray[k]), k))
    entries.sort()
    out: dict[int, list[PropagationPath]] = {}
    seen = None
    for r, key, miss2, ray, k in entries:
        if (r, key) == seen:
            continue
        seen = (r, key)
        out.setdefault(r, []).append(
            _build_path(scene, params, dirs, r, key, k, rec_unf, rec_loss,
                        rec_adir, rec_cap, rec_pts, rec_segt, rec_surf,
                        rec_tile, ray, miss2))
    for r in out:
        out[r].sort(key=lambda p: (p.delay, p.bounce_count))
    return out


def _build_path(scene, params, dirs, r, key, k, rec_unf, rec_loss, rec_adir,
                rec_cap, rec_pts, rec_segt, rec_surf, rec_tile, ray, miss2):
    nb = len(key)
    hits = []
    for b in range(nb):
        surf = scene.surfaces[int(rec_surf[k, b])]
        tile = int(rec_tile[k, b])
        hits.append(Hit(point=rec_pts[k, b].copy(), distance=float(rec_segt[k, b]),
                        surface=surf.id, tile=tile if tile >= 0 else None))
    unf = float(rec_unf[k])
    loss = float(rec_loss[k])
    g_tx = _dipole_gain_db(dirs[ray])
    g_rx = _dipole_gain_db(rec_adir[k])
    power = params.tx_power_dbm - friis_loss_db(params.frequency, unf) - loss + g_tx + g_rx
    below = power < params.power_floor_dbm
    if below:
        power = params.power_floor_dbm
    return PropagationPath(
        rx_index=r,
        bounce_points=hits,
        unfolded_length=unf,
        delay=unf / C_LIGHT,
        bounce_loss_db=loss,
        attenuation=10.0 ** ((power - params.tx_power_dbm) / 20.0),
        rx_power_dbm=power,
        phase=0.0,
        launch_dir=dirs[ray].copy(),
        arrival_dir=rec_adir[k].copy(),
        arrival_point=rec_cap[k].copy(),
        miss_distance=math.sqrt(miss2),
        below_floor=below,
    )


def paths_to_csv(paths_by_rx: dict[int, list[PropagationPath]], path,
                 header_lines: tuple[str, ...] = ()) -> None:
    """Dump captured paths as CSV for external inspection."""
    lines = [f"# {h}" for h in header_lines]
    lines.append("rx_index,bounces,length_m,delay_ns,power_dbm")
    for r in sorted(paths_by_rx):
        for p in paths_by_rx[r]:
            lines.append(f"{r},{p.bounce_count},{p.unfolded_length:.6f},"
                         f"{p.delay * 1e9:.6f},{p.rx_power_dbm:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
