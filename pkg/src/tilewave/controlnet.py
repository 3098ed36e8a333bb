"""Packet-level simulation of the tile gateway network and its command API.

Tiles form a wired grid of gateways; a configuration server injects
command packets at one or more entry-point tiles. Routing is
dimension-ordered (row first, then column) with a greedy detour around
failed gateways; the walk degenerates to a depth-first search with
backtracking, so a packet is delivered exactly when a live path exists.
Latency is counted in hops (one hop per tick). Each tile's internal
controller grid is simulated at coarse grain: controllers own switch
states and carry fault flags, but intra-tile packet relaying is not
modeled; a failed gateway makes its whole tile unreachable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .emfunc import EMFunction, FunctionKind, LookupTable, TileFunction, function_key, quantize_function
from .raytrace import EnvConfiguration
from .scene import Material, Scene, Tile, tile_axes, vec


class AddressingError(ValueError):
    """Command targets a tile id that is not in the network."""


class ParameterError(ValueError):
    """Command parameters do not match the action type."""


class DeliveryError(RuntimeError):
    """No live gateway path to the destination tile."""


class NodeState(Enum):
    IDLE = "idle"
    RELAYING = "relaying"
    FAILED = "failed"


class PacketKind(Enum):
    SET_CONFIG = "SetConfig"
    ACK = "Ack"
    ERROR = "Error"
    MONITOR_REQUEST = "MonitorRequest"
    MONITOR_DATA = "MonitorData"
    FAULT_NOTICE = "FaultNotice"


@dataclass
class ControllerNode:
    address: tuple[int, int]
    state: NodeState = NodeState.IDLE
    switch_state: int = 0


@dataclass
class TileGateway:
    tile_id: int
    grid_pos: tuple[int, int]        # (col, row)
    neighbors: list[int] = field(default_factory=list)
    is_entry_point: bool = False
    failed: bool = False


@dataclass
class CommandPacket:
    kind: PacketKind
    dest: int
    payload: object = None
    src: int | None = None
    hop_count: int = 0


@dataclass
class HopRecord:
    tick: int
    kind: PacketKind
    src: int
    dst: int


@dataclass
class DeliveryTrace:
    packet: CommandPacket
    hops: list[HopRecord]

    @property
    def hop_count(self) -> int:
        return len(self.hops)


@dataclass
class DeployOutcome:
    function: TileFunction
    ack: CommandPacket
    command_trace: DeliveryTrace
    ack_trace: DeliveryTrace

    @property
    def hop_count(self) -> int:
        return self.command_trace.hop_count + self.ack_trace.hop_count


@dataclass
class MonitorData:
    tile_id: int
    function: TileFunction
    failed_controllers: list[tuple[int, int]]
    failed_neighbor_tiles: list[int]


@dataclass
class BroadcastReport:
    delivered: int
    acked: int
    failed: list[int]
    hop_volume: int


class TileNetwork:
    def __init__(self, gateways: list[TileGateway], tiles: dict[int, Tile],
                 controller_grid: int = 4, lookup_table: LookupTable | None = None):
        self.gateways = {g.tile_id: g for g in gateways}
        if len(self.gateways) != len(gateways):
            raise ValueError("duplicate gateway tile ids")
        if not any(g.is_entry_point for g in gateways):
            raise ValueError("network needs at least one entry-point tile")
        self.tiles = tiles
        self.lookup_table = lookup_table
        self.functions: dict[int, TileFunction] = {
            t: TileFunction.steer(0.0, 0.0) for t in self.gateways}
        self.controllers: dict[int, list[list[ControllerNode]]] = {
            t: [[ControllerNode(address=(i, j)) for j in range(controller_grid)]
                for i in range(controller_grid)]
            for t in self.gateways}
        self.detour_budget = 4 * len(gateways)
        self.log: list[HopRecord] = []
        self._tick = 0

    # -- failures --------------------------------------------------------

    def fail_gateway(self, tile_id: int):
        self.gateways[tile_id].failed = True

    def fail_controller(self, tile_id: int, i: int, j: int):
        self.controllers[tile_id][i][j].state = NodeState.FAILED

    def entry_points(self) -> list[int]:
        return sorted(t for t, g in self.gateways.items()
                      if g.is_entry_point and not g.failed)

    # -- routing -----------------------------------------------------------

    def _manhattan(self, a: int, b: int) -> int:
        (ca, ra), (cb, rb) = self.gateways[a].grid_pos, self.gateways[b].grid_pos
        return abs(ca - cb) + abs(ra - rb)

    def _ordered_neighbors(self, at: int, dst: int) -> list[int]:
        c, r = self.gateways[at].grid_pos
        dc, dr = self.gateways[dst].grid_pos
        preferred: list[int] = []
        rest: list[int] = []
        row_step = (c, r + (1 if dr > r else -1)) if dr != r else None
        col_step = (c + (1 if dc > c else -1), r) if dc != c else None
        by_pos = {self.gateways[n].grid_pos: n for n in self.gateways[at].neighbors}
        for want in (row_step, col_step):
            if want is not None and want in by_pos:
                preferred.append(by_pos[want])
        for n in sorted(self.gateways[at].neighbors,
                        key=lambda n: (self._manhattan(n, dst), n)):
            if n not in preferred:
                rest.append(n)
        return preferred + rest

    def _walk(self, src: int, dst: int) -> list[int] | None:
        """Depth-first walk src -> dst over live gateways; the returned node
        sequence includes backtrack moves. None when no live path exists."""
        if self.gateways[src].failed or self.gateways[dst].failed:
            return None
        visited = {src}
        walk = [src]

        def dfs(node: int) -> bool:
            if node == dst:
                return True
            for nb in self._ordered_neighbors(node, dst):
                if nb in visited or self.gateways[nb].failed:
                    continue
                visited.add(nb)
                walk.append(nb)
                if dfs(nb):
                    return True
                walk.append(node)
            return False

        return walk if dfs(src) else None

    def route(self, packet: CommandPacket, src: int | None = None) -> DeliveryTrace:
        """Deliver a packet through the gateway grid; raises DeliveryError
        when source and destination are not connected by live gateways."""
        if packet.dest not in self.gateways:
            raise AddressingError(f"unknown tile id {packet.dest}")
        if src is None:
            src = packet.src if packet.src is not None else self._nearest_entry(packet.dest)
        packet.src = src
        if src not in self.gateways:
            raise AddressingError(f"unknown source tile id {src}")
        walk = self._walk(src, packet.dest)
        if walk is None:
            self.log.append(HopRecord(self._tick, PacketKind.FAULT_NOTICE, src, packet.dest))
            self._tick += 1
            raise DeliveryError(f"tile {packet.dest} unreachable from {src}")
        hops = []
        for a, b in zip(walk, walk[1:]):
            hops.append(HopRecord(self._tick, packet.kind, a, b))
            self._tick += 1
            packet.hop_count += 1
        if packet.hop_count > self._grid_diameter() + self.detour_budget:
            raise DeliveryError("hop budget exceeded")
        self.log.extend(hops)
        return DeliveryTrace(packet=packet, hops=hops)

    def _grid_diameter(self) -> int:
        cols = [g.grid_pos[0] for g in self.gateways.values()]
        rows = [g.grid_pos[1] for g in self.gateways.values()]
        return (max(cols) - min(cols)) + (max(rows) - min(rows))

    def _nearest_entry(self, dest: int) -> int:
        entries = self.entry_points()
        if not entries:
            raise DeliveryError("no live entry point")
        return min(entries, key=lambda e: (self._manhattan(e, dest), e))

    # -- commands ----------------------------------------------------------

    def deploy(self, tile_id: int, action_type: FunctionKind,
               parameters: dict) -> DeployOutcome:
        """Quantize and install an EM function on one tile, returning the Ack."""
        if tile_id not in self.gateways:
            raise AddressingError(f"unknown tile id {tile_id}")
        try:
            fn = EMFunction(kind=action_type,
                            incident_doa=parameters["incident_doa"],
                            out_dir=parameters.get("out_dir"),
                            wavelength=parameters.get("wavelength", 0.00499654))
        except (KeyError, ValueError) as exc:
            raise ParameterError(str(exc)) from exc
        function = quantize_function(fn, self.tiles[tile_id])
        packet = CommandPacket(kind=PacketKind.SET_CONFIG, dest=tile_id,
                               payload=function.index)
        trace = self.route(packet)
        self._apply(tile_id, function, fn)
        ack = CommandPacket(kind=PacketKind.ACK, dest=packet.src, src=tile_id,
                            payload=tile_id)
        ack_trace = self.route(ack, src=tile_id)
        return DeployOutcome(function=function, ack=ack,
                             command_trace=trace, ack_trace=ack_trace)

    def _apply(self, tile_id: int, function: TileFunction,
               fn: EMFunction | None = None):
        self.functions[tile_id] = function
        if self.lookup_table is not None and fn is not None:
            sigma = self.lookup_table.entries.get(function_key(fn))
            if sigma is not None:
                grid = self.controllers[tile_id]
                m = min(len(grid), sigma.m)
                for i in range(m):
                    for j in range(m):
                        grid[i][j].switch_state = int(sigma.states[i, j])

    def broadcast_config(self, config: EnvConfiguration) -> BroadcastReport:
        """Issue one SetConfig per tile from the nearest live entry point."""
        if len(config.states) != len(self.gateways):
            raise ValueError("configuration length != network tile count")
        delivered = acked = hop_volume = 0
        failed: list[int] = []
        for tile_id in sorted(self.gateways):
            state = int(config.states[tile_id])
            try:
                packet = CommandPacket(kind=PacketKind.SET_CONFIG, dest=tile_id,
                                       payload=state)
                trace = self.route(packet)
                self._apply(tile_id, TileFunction(state))
                delivered += 1
                hop_volume += trace.hop_count
                ack = CommandPacket(kind=PacketKind.ACK, dest=packet.src,
                                    src=tile_id, payload=tile_id)
                hop_volume += self.route(ack, src=tile_id).hop_count
                acked += 1
            except DeliveryError:
                failed.append(tile_id)
        return BroadcastReport(delivered=delivered, acked=acked, failed=failed,
                               hop_volume=hop_volume)

    def monitor(self, tile_id: int) -> MonitorData:
        """Read back a tile's active function and fault flags."""
        if tile_id not in self.gateways:
            raise AddressingError(f"unknown tile id {tile_id}")
        request = CommandPacket(kind=PacketKind.MONITOR_REQUEST, dest=tile_id)
        trace = self.route(request)
        failed_ctrl = [c.address for row in self.controllers[tile_id] for c in row
                       if c.state is NodeState.FAILED]
        failed_nbrs = [n for n in self.gateways[tile_id].neighbors
                       if self.gateways[n].failed]
        data = MonitorData(tile_id=tile_id, function=self.functions[tile_id],
                           failed_controllers=failed_ctrl,
                           failed_neighbor_tiles=failed_nbrs)
        reply = CommandPacket(kind=PacketKind.MONITOR_DATA, dest=trace.packet.src,
                              src=tile_id, payload=data)
        self.route(reply, src=tile_id)
        return data

    def as_env_configuration(self) -> EnvConfiguration:
        states = np.array([self.functions[t].index for t in sorted(self.gateways)],
                          dtype=np.int64)
        return EnvConfiguration(states)

    def export_log(self, path):
        lines = [f"tick={h.tick} kind={h.kind.value} src={h.src} dst={h.dst}"
                 for h in self.log]
        Path(path).write_text("\n".join(lines) + "\n")


def build_tile_network(scene: Scene, entry_tiles: tuple[int, ...] = (0,),
                       controller_grid: int = 4,
                       lookup_table: LookupTable | None = None) -> TileNetwork:
    """Gateway grid for a scene: tiled faces unroll left-to-right in the
    scene's canonical face order, so grid columns run along each face's
    edge_u and rows along edge_v."""
    gateways: dict[int, TileGateway] = {}
    positions: dict[tuple[int, int], int] = {}
    col_offset = 0
    for s in scene.surfaces:
        if s.material is not Material.TILED_WALL:
            continue
        base, n_u, n_v = scene._grid[s.id]
        for row in range(n_v):
            for col in range(n_u):
                tile_id = base + row * n_u + col
                pos = (col_offset + col, row)
                gateways[tile_id] = TileGateway(tile_id=tile_id, grid_pos=pos,
                                                is_entry_point=tile_id in entry_tiles)
                positions[pos] = tile_id
        col_offset += n_u
    _wire_neighbors(gateways, positions)
    tiles = {t.id: t for t in scene.tiles}
    return TileNetwork(list(gateways.values()), tiles,
                       controller_grid=controller_grid, lookup_table=lookup_table)


def build_grid_network(n_cols: int, n_rows: int,
                       entry_tiles: tuple[int, ...] = (0,),
                       controller_grid: int = 4) -> TileNetwork:
    """Synthetic rectangular gateway grid (tile id = row * n_cols + col)."""
    gateways: dict[int, TileGateway] = {}
    positions: dict[tuple[int, int], int] = {}
    tiles: dict[int, Tile] = {}
    normal = vec(0, 0, 1)
    axis_h, axis_v = tile_axes(normal)
    for row in range(n_rows):
        for col in range(n_cols):
            tile_id = row * n_cols + col
            gateways[tile_id] = TileGateway(tile_id=tile_id, grid_pos=(col, row),
                                            is_entry_point=tile_id in entry_tiles)
            positions[(col, row)] = tile_id
            tiles[tile_id] = Tile(id=tile_id, parent_surface="grid",
                                  center=vec(col + 0.5, row + 0.5, 0.0), side=1.0,
                                  true_normal=normal.copy(), axis_h=axis_h.copy(),
                                  axis_v=axis_v.copy())
    _wire_neighbors(gateways, positions)
    return TileNetwork(list(gateways.values()), tiles, controller_grid=controller_grid)


def _wire_neighbors(gateways: dict[int, TileGateway],
                    positions: dict[tuple[int, int], int]):
    for (c, r), tile_id in positions.items():
        for pos in ((c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)):
            if pos in positions:
                gateways[tile_id].neighbors.append(positions[pos])
        gateways[tile_id].neighbors.sort()
