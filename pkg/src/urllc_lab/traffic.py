"""Road-traffic generators.

Freeway: Underwood macroscopic speed-density law and vehicle placement on a
straight road segment. Urban: a Manhattan grid with right-hand traffic,
constant-speed vehicles that pick a turn at every intersection, and
pedestrians spread along the sidewalks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, GeometryError

VEHICLE_LENGTH = 6.5
LEFT, STRAIGHT, RIGHT, UTURN = 0, 1, 2, 3


# ------------------------------------------------------------------- freeway


@dataclass(frozen=True)
class UnderwoodModel:
    free_flow_speed: float = 80.0  # km/h
    max_density: float = 0.15  # vehicles per metre

    def __post_init__(self):
        if self.free_flow_speed <= 0 or self.max_density <= 0:
            raise DomainError("free-flow speed and maximum density must be positive")


@dataclass(frozen=True)
class FreewayLayout:
    road_length: float = 200.0
    bs_offset: float = 20.0
    density: float = 0.05
    max_density: float = 0.15

    def __post_init__(self):
        if self.road_length <= 0 or self.bs_offset <= 0:
            raise DomainError("road length and BS offset must be positive")
        if not 0 < self.density <= self.max_density * (1 + 1e-12):
            raise DomainError(
                f"density {self.density} must satisfy 0 < kappa <= max_density ({self.max_density})"
            )


def underwood_speed(model: UnderwoodModel, density):
    """Mean speed in km/h at the given density (vehicles/m)."""
    d = np.asarray(density, dtype=float)
    if np.any(d < 0):
        raise DomainError("density must be non-negative")
    out = model.free_flow_speed * np.exp(-d / model.max_density)
    return float(out) if out.ndim == 0 else out


def vehicle_count(layout: FreewayLayout) -> int:
    k = math.floor(layout.density * layout.road_length + 0.5)
    if k < 1:
        raise DomainError(f"density {layout.density} on {layout.road_length} m of road gives no vehicles")
    return k


def place_freeway_vehicles(layout: FreewayLayout, mode: str = "equispaced", seed: int | None = None):
    """Vehicle positions in metres along the road, sorted ascending.

    ``equispaced`` puts one vehicle at the midpoint of each of K equal
    cells; ``uniform`` draws K i.i.d. uniform positions from ``seed``.
    """
    k = vehicle_count(layout)
    if mode == "equispaced":
        return (np.arange(k) + 0.5) * (layout.road_length / k)
    if mode == "uniform":
        rng = np.random.default_rng(seed)
        return np.sort(rng.uniform(0.0, layout.road_length, size=k))
    raise DomainError(f"unknown placement mode {mode!r}")


# ------------------------------------------------------------------- urban


@dataclass(frozen=True)
class ManhattanGrid:
    """Geometry and driving rules of an urban Manhattan grid.

    ``block_width`` x ``block_height`` is the pitch between road
    centrelines. Each road carries ``lanes_per_direction`` lanes each way
    plus a sidewalk on both sides, so the building fills the rest of the
    block and must measure exactly ``block - road_width`` on each side.
    """

    block_width: float = 433.0
    block_height: float = 250.0
    building_width: float = 413.0
    building_height: float = 230.0
    sidewalk_width: float = 3.0
    lanes_per_direction: int = 2
    lane_width: float = 3.5
    blocks_x: int = 2
    blocks_y: int = 2
    vehicle_speed: float = 60.0  # km/h
    turn_probs: tuple = (0.25, 0.5, 0.25)  # left, straight, right

    def __post_init__(self):
        dims = (self.block_width, self.block_height, self.building_width, self.building_height,
                self.sidewalk_width, self.lane_width, self.vehicle_speed)
        if min(dims) <= 0 or self.lanes_per_direction < 1 or self.blocks_x < 1 or self.blocks_y < 1:
            raise GeometryError("grid dimensions, lane counts and speed must be positive")
        probs = tuple(float(p) for p in self.turn_probs)
        if len(probs) != 3 or min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
            raise GeometryError(f"turn probabilities must be three non-negative numbers summing to 1, got {self.turn_probs}")
        road = self.road_width
        for block, building, axis in ((self.block_width, self.building_width, "width"),
                                      (self.block_height, self.building_height, "height")):
            if abs(block - building - road) > 1e-9:
                raise GeometryError(
                    f"block {axis} {block} m must equal building {axis} {building} m plus road width {road} m"
                )

    @property
    def drivable_width(self) -> float:
        return 2 * self.lanes_per_direction * self.lane_width

    @property
    def road_width(self) -> float:
        return self.drivable_width + 2 * self.sidewalk_width


@dataclass
class GridTopology:
    grid: ManhattanGrid
    node_pos: np.ndarray  # (nodes, 2)
    seg_from: np.ndarray
    seg_to: np.ndarray
    seg_dir: np.ndarray  # (segs, 2) unit vectors
    seg_len: np.ndarray
    successors: list  # per segment: {turn: next segment}
    buildings: np.ndarray  # (n, 4) xmin, ymin, xmax, ymax
    sidewalks: list  # closed polylines, (5, 2) arrays

    @property
    def num_segments(self):
        return self.seg_from.shape[0]

    def lane_offset(self, lane):
        return (np.asarray(lane) + 0.5) * self.grid.lane_width

    def lane_polyline(self, seg, lane):
        rn = _right_normal(self.seg_dir[seg])
        off = self.lane_offset(lane) * rn
        return np.array([self.node_pos[self.seg_from[seg]] + off, self.node_pos[self.seg_to[seg]] + off])

    def lane_polylines(self):
        return [self.lane_polyline(e, l) for e in range(self.num_segments)
                for l in range(self.grid.lanes_per_direction)]

    def lane_graph(self):
        """Successor lists keyed by segment, U-turns only at dead ends."""
        graph = {}
        for e, succ in enumerate(self.successors):
            nxt = [f for t, f in succ.items() if t != UTURN]
            graph[e] = nxt if nxt else [succ[UTURN]]
        return graph

    @property
    def bounds(self):
        g = self.grid
        return (0.0, 0.0, g.blocks_x * g.block_width, g.blocks_y * g.block_height)


def _right_normal(d):
    d = np.asarray(d, dtype=float)
    return np.stack([d[..., 1], -d[..., 0]], axis=-1)


def build_manhattan_grid(grid: ManhattanGrid) -> GridTopology:
    nx, ny = grid.blocks_x + 1, grid.blocks_y + 1
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    node_pos = np.stack([ii.ravel() * grid.block_width, jj.ravel() * grid.block_height], axis=1).astype(float)

    def node(i, j):
        return i * ny + j

    seg_from, seg_to = [], []
    for i in range(nx):
        for j in range(ny):
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if 0 <= i + di < nx and 0 <= j + dj < ny:
                    seg_from.append(node(i, j))
                    seg_to.append(node(i + di, j + dj))
    seg_from = np.array(seg_from)
    seg_to = np.array(seg_to)
    delta = node_pos[seg_to] - node_pos[seg_from]
    seg_len = np.hypot(delta[:, 0], delta[:, 1])
    seg_dir = delta / seg_len[:, None]

    outgoing = {}
    for e, a in enumerate(seg_from):
        outgoing.setdefault(int(a), []).append(e)
    successors = []
    for e in range(len(seg_from)):
        d_in = seg_dir[e]
        succ = {}
        for f in outgoing[int(seg_to[e])]:
            d_out = seg_dir[f]
            dot = d_in @ d_out
            cross = d_in[0] * d_out[1] - d_in[1] * d_out[0]
            if dot > 0.5:
                succ[STRAIGHT] = f
            elif dot < -0.5:
                succ[UTURN] = f
            elif cross > 0:
                succ[LEFT] = f
            else:
                succ[RIGHT] = f
        successors.append(succ)

    half = grid.road_width / 2
    buildings, sidewalks = [], []
    for i in range(grid.blocks_x):
        for j in range(grid.blocks_y):
            x0, y0 = i * grid.block_width + half, j * grid.block_height + half
            x1, y1 = (i + 1) * grid.block_width - half, (j + 1) * grid.block_height - half
            buildings.append((x0, y0, x1, y1))
            m = grid.sidewalk_width / 2
            sidewalks.append(np.array([(x0 - m, y0 - m), (x1 + m, y0 - m), (x1 + m, y1 + m),
                                       (x0 - m, y1 + m), (x0 - m, y0 - m)]))
    return GridTopology(grid, node_pos, seg_from, seg_to, seg_dir, seg_len, successors,
                        np.array(buildings, dtype=float), sidewalks)


@dataclass
class MobilityState:
    """Vehicles on the lane graph: segment, lane, distance along segment, speed (m/s)."""

    seg: np.ndarray
    lane: np.ndarray
    s: np.ndarray
    speed: np.ndarray
    # decisions taken at intersections offering all three turns
    turn_counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))

    def __len__(self):
        return self.seg.shape[0]

    def positions(self, topo: GridTopology):
        d = topo.seg_dir[self.seg]
        off = topo.lane_offset(self.lane)[:, None] * _right_normal(d)
        return topo.node_pos[topo.seg_from[self.seg]] + self.s[:, None] * d + off

    def headings(self, topo: GridTopology):
        return topo.seg_dir[self.seg].copy()


def init_vehicles(topo: GridTopology, count: int, rng: np.random.Generator, speed_kmh: float | None = None):
    """Drop ``count`` vehicles uniformly over total lane length."""
    if count < 0:
        raise DomainError("vehicle count must be non-negative")
    grid = topo.grid
    weights = np.repeat(topo.seg_len, grid.lanes_per_direction)
    slot = rng.choice(weights.size, size=count, p=weights / weights.sum())
    seg = slot // grid.lanes_per_direction
    lane = slot % grid.lanes_per_direction
    s = rng.uniform(0.0, 1.0, size=count) * topo.seg_len[seg]
    v = (grid.vehicle_speed if speed_kmh is None else speed_kmh) / 3.6
    return MobilityState(seg.astype(np.int64), lane.astype(np.int64), s, np.full(count, v))


def _choose_turn(options, probs, u):
    avail = [t for t in (LEFT, STRAIGHT, RIGHT) if t in options and probs[t] > 0]
    if not avail:
        return UTURN
    total = sum(probs[t] for t in avail)
    acc = 0.0
    for t in avail:
        acc += probs[t] / total
        if u < acc:
            return t
    return avail[-1]


def step_mobility(state: MobilityState, topo: GridTopology, dt: float, rng: np.random.Generator) -> MobilityState:
    """Advance every vehicle by ``speed * dt`` along the lane graph.

    A vehicle reaching an intersection picks left/straight/right with the
    grid's turn probabilities, renormalised over the turns that exist
    there; where none exists it makes a U-turn. Lane index is kept.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    probs = topo.grid.turn_probs
    seg = state.seg.copy()
    s = state.s.copy()
    counts = state.turn_counts.copy()
    for k in range(seg.shape[0]):
        remaining = state.speed[k] * dt
        e = int(seg[k])
        pos = s[k]
        while pos + remaining >= topo.seg_len[e]:
            remaining -= topo.seg_len[e] - pos
            options = topo.successors[e]
            turn = _choose_turn(options, probs, rng.random())
            if LEFT in options and STRAIGHT in options and RIGHT in options:
                counts[turn] += 1
            e = options[turn]
            pos = 0.0
        seg[k] = e
        s[k] = pos + remaining
    return replace(state, seg=seg, s=s, turn_counts=counts)


def place_pedestrians(topo: GridTopology, count: int, rng: np.random.Generator):
    """Uniform positions along the sidewalk centrelines."""
    segments = []
    for loop in topo.sidewalks:
        segments.extend(zip(loop[:-1], loop[1:]))
    a = np.array([p for p, _ in segments])
    b = np.array([q for _, q in segments])
    lengths = np.hypot(*(b - a).T)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    u = rng.uniform(0.0, cum[-1], size=count)
    idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(lengths) - 1)
    frac = ((u - cum[idx]) / lengths[idx])[:, None]
    return a[idx] + frac * (b[idx] - a[idx])


def point_polyline_distance(points, polyline):
    """Distance from each point to a polyline given as (m, 2) vertices."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    a = polyline[:-1][None, :, :]
    b = polyline[1:][None, :, :]
    ab = b - a
    num = np.sum((p[:, None, :] - a) * ab, axis=2)
    den = np.broadcast_to(np.sum(ab * ab, axis=2), num.shape)
    # zero-length pieces (repeated or underflowing vertices) act as points
    t = np.clip(np.divide(num, den, out=np.zeros_like(num), where=den > 0), 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.min(np.linalg.norm(p[:, None, :] - proj, axis=2), axis=1)
