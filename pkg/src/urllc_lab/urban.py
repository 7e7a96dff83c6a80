"""Urban uplink spectrum sharing between pedestrian CUEs and VUE pairs.

Each CUE owns one resource block; each VUE pair may reuse one CUE's block.
The allocator maximises the smallest CUE SINR while every VUE still meets
the rate its latency/reliability target translates into.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import DomainError, GeometryError, InfeasibleError
from .queueing import (ArrivalProcess, LatencySampleSet, QosRequirement, min_rate_for_qos, simulate_fifo_queue,
                       static_min_rate)
from .traffic import (GridTopology, ManhattanGrid, build_manhattan_grid, init_vehicles, place_pedestrians,
                      step_mobility)
from .v2i import thermal_noise

MODES = ("effective_bandwidth", "static")
RATE_MARGIN = 1e-9


@dataclass(frozen=True)
class UrbanPropagation:
    los_exponent: float = 2.2
    nlos_exponent: float = 4.0
    nlos_penalty_db: float = 20.0
    ref_gain_db: float = -38.5  # free space at 1 m, 2 GHz
    min_distance: float = 1.0
    # links to the elevated BS clear the rooftops: 128.1 + 37.6 log10(d / km) dB
    bs_exponent: float = 3.76
    bs_ref_gain_db: float = -15.3

    def bs_gain(self, distance):
        d = np.maximum(np.asarray(distance, dtype=float), self.min_distance)
        return 10.0 ** ((self.bs_ref_gain_db - 10.0 * self.bs_exponent * np.log10(d)) / 10.0)

    def gain(self, distance, nlos):
        d = np.maximum(np.asarray(distance, dtype=float), self.min_distance)
        nlos = np.asarray(nlos, dtype=bool)
        exponent = np.where(nlos, self.nlos_exponent, self.los_exponent)
        db = self.ref_gain_db - 10.0 * exponent * np.log10(d) - np.where(nlos, self.nlos_penalty_db, 0.0)
        return 10.0 ** (db / 10.0)


def segment_hits_rectangle(p0, p1, rect) -> bool:
    """Whether segment p0-p1 touches the closed rectangle (xmin, ymin, xmax, ymax)."""
    t0, t1 = 0.0, 1.0
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    for p, q in ((-dx, p0[0] - rect[0]), (dx, rect[2] - p0[0]), (-dy, p0[1] - rect[1]), (dy, rect[3] - p0[1])):
        if p == 0.0:
            if q < 0.0:
                return False
            continue
        r = q / p
        if p < 0.0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return False
    return True


def is_nlos(p0, p1, buildings) -> bool:
    return any(segment_hits_rectangle(p0, p1, b) for b in buildings)


def _link_gains(tx, rx, buildings, prop):
    tx = np.atleast_2d(tx)
    rx = np.atleast_2d(rx)
    dist = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=2)
    nlos = np.array([[is_nlos(a, b, buildings) for b in rx] for a in tx], dtype=bool)
    return prop.gain(dist, nlos)


@dataclass
class UrbanScenario:
    topology: GridTopology
    bs_position: np.ndarray
    cue_positions: np.ndarray
    vue_tx: np.ndarray
    vue_rx: np.ndarray
    cue_bs_gain: np.ndarray  # (Nc,)
    vue_link_gain: np.ndarray  # (Nv,)
    cue_to_vue_gain: np.ndarray  # (Nc, Nv): CUE c into VUE receiver v
    vue_to_bs_gain: np.ndarray  # (Nv,)
    qos: list
    arrivals: list
    pair_distance_cap: float = 50.0
    rb_bandwidth: float = 180e3
    cue_power_max: float = 0.2
    vue_power_max: float = 0.2
    noise: float = field(default_factory=lambda: thermal_noise(180e3))

    def __post_init__(self):
        nc, nv = self.num_cues, self.num_vues
        if nv > nc:
            raise DomainError(f"{nv} VUE pairs cannot share {nc} resource blocks")
        if self.cue_to_vue_gain.shape != (nc, nv) or len(self.qos) != nv or len(self.arrivals) != nv:
            raise DomainError("per-link gains, QoS and arrivals must match the entity counts")
        gains = (self.cue_bs_gain, self.vue_link_gain, self.cue_to_vue_gain, self.vue_to_bs_gain)
        if any(np.any(g <= 0) for g in gains):
            raise DomainError("link gains must be positive")
        if nv and np.any(np.linalg.norm(self.vue_tx - self.vue_rx, axis=1) > self.pair_distance_cap + 1e-9):
            raise DomainError("VUE pair exceeds its distance cap")

    @property
    def num_cues(self):
        return self.cue_positions.shape[0]

    @property
    def num_rbs(self):
        return self.num_cues

    @property
    def num_vues(self):
        return self.vue_tx.shape[0]

    def subset(self, vues):
        """Scenario restricted to the listed VUE pairs."""
        vues = list(vues)
        return UrbanScenario(
            self.topology, self.bs_position, self.cue_positions, self.vue_tx[vues], self.vue_rx[vues],
            self.cue_bs_gain, self.vue_link_gain[vues], self.cue_to_vue_gain[:, vues], self.vue_to_bs_gain[vues],
            [self.qos[v] for v in vues], [self.arrivals[v] for v in vues], self.pair_distance_cap,
            self.rb_bandwidth, self.cue_power_max, self.vue_power_max, self.noise)


def build_urban_scenario(grid: ManhattanGrid, num_cues: int, num_vue_pairs: int, seed: int = 0, *,
                         qos: QosRequirement | None = None, packet_rate: float = 2.0, packet_bits: int = 2048,
                         pair_distance_cap: float = 50.0, min_pair_distance: float = 10.0,
                         warmup_steps: int = 10, warmup_dt: float = 1.0, rb_bandwidth: float = 180e3,
                         cue_power_max: float = 0.2, vue_power_max: float = 0.2, noise_figure_db: float = 9.0,
                         propagation: UrbanPropagation | None = None) -> UrbanScenario:
    """Drop CUEs on sidewalks and VUE pairs on lanes around a BS at the grid centre.

    VUE transmitters come from a mobility snapshot after ``warmup_steps``;
    each receiver sits on the same lane ``U(min_pair_distance,
    pair_distance_cap)`` metres ahead (or behind, near a segment end).
    """
    if num_cues < 1 or num_vue_pairs < 0:
        raise DomainError("need at least one CUE and a non-negative VUE count")
    if num_vue_pairs > num_cues:
        raise DomainError(f"{num_vue_pairs} VUE pairs cannot share {num_cues} resource blocks")
    if not 0 < min_pair_distance <= pair_distance_cap:
        raise DomainError("pair distances must satisfy 0 < min <= cap")
    prop = propagation or UrbanPropagation()
    qos = qos or QosRequirement()
    topo = build_manhattan_grid(grid)
    if pair_distance_cap > topo.seg_len.min():
        raise GeometryError(f"pair distance cap {pair_distance_cap} m exceeds the shortest road segment")
    ss = np.random.SeedSequence(seed)
    rng_cue, rng_veh, rng_pair = (np.random.default_rng(s) for s in ss.spawn(3))

    cues = place_pedestrians(topo, num_cues, rng_cue)
    state = init_vehicles(topo, num_vue_pairs, rng_veh)
    for _ in range(warmup_steps):
        state = step_mobility(state, topo, warmup_dt, rng_veh)
    tx = state.positions(topo)
    rx = np.empty_like(tx)
    for k in range(num_vue_pairs):
        e = state.seg[k]
        d = rng_pair.uniform(min_pair_distance, pair_distance_cap)
        s = state.s[k] + d if state.s[k] + d <= topo.seg_len[e] else state.s[k] - d
        if s < 0:
            raise GeometryError("cannot fit a VUE receiver on the transmitter's segment")
        rx[k] = tx[k] + (s - state.s[k]) * topo.seg_dir[e]

    bs = np.array([grid.blocks_x * grid.block_width / 2, grid.blocks_y * grid.block_height / 2])
    b = topo.buildings
    cue_bs = prop.bs_gain(np.linalg.norm(cues - bs, axis=1))
    vue_bs = prop.bs_gain(np.linalg.norm(tx - bs, axis=1))
    vue_link = np.array([_link_gains(tx[k], rx[k], b, prop)[0, 0] for k in range(num_vue_pairs)])
    cue_vue = _link_gains(cues, rx, b, prop) if num_vue_pairs else np.empty((num_cues, 0))
    arrivals = [ArrivalProcess(packet_rate, packet_bits) for _ in range(num_vue_pairs)]
    return UrbanScenario(topo, bs, cues, tx, rx, cue_bs, vue_link.reshape(-1), cue_vue, vue_bs,
                         [qos] * num_vue_pairs, arrivals, pair_distance_cap, rb_bandwidth, cue_power_max,
                         vue_power_max, thermal_noise(rb_bandwidth, noise_figure_db))


def vue_rate_requirement(arrivals: ArrivalProcess, qos: QosRequirement, mode: str = "effective_bandwidth") -> float:
    if mode == "effective_bandwidth":
        return min_rate_for_qos(arrivals, qos)
    if mode == "static":
        return static_min_rate(arrivals.packet_bits, qos.latency_bound)
    raise DomainError(f"unknown requirement mode {mode!r}")


def pair_power(cue_gain, vue_gain, cue_to_vue, vue_to_bs, min_sinr, cue_pmax, vue_pmax, noise):
    """Best powers for one CUE sharing its block with one VUE.

    The VUE runs at the least power meeting ``min_sinr``; that power grows
    with CUE power, and CUE SINR grows with CUE power along this boundary,
    so the CUE goes as high as its own cap or the VUE's cap allows.
    Returns ``(cue_power, vue_power, cue_sinr)`` or ``None`` if the VUE
    cannot meet ``min_sinr`` even with the CUE silent.
    """
    def vue_power(pc):
        return min_sinr * (noise + pc * cue_to_vue) / vue_gain

    if vue_power(0.0) > vue_pmax:
        return None
    pc = cue_pmax if min_sinr == 0 else min(cue_pmax, (vue_pmax * vue_gain / min_sinr - noise) / cue_to_vue)
    pv = min(vue_power(pc), vue_pmax)
    return pc, pv, pc * cue_gain / (noise + pv * vue_to_bs)


@dataclass
class SharingAssignment:
    mode: str
    vue_rb: np.ndarray  # rb index per VUE
    vue_power: np.ndarray
    cue_power: np.ndarray
    cue_sinr: np.ndarray
    vue_sinr: np.ndarray
    vue_rate: np.ndarray
    required_rate: np.ndarray

    def __post_init__(self):
        if len(set(self.vue_rb.tolist())) != self.vue_rb.size:
            raise DomainError("VUE to resource-block matching must be injective")

    @property
    def min_cue_sinr(self) -> float:
        return float(self.cue_sinr.min())


def sharing_utility(scenario: UrbanScenario, mode: str = "effective_bandwidth"):
    """CUE SINR for every (VUE, RB) pairing (-inf where infeasible), the
    solo CUE SINRs, the required VUE rates and the per-pair powers."""
    nv, nc = scenario.num_vues, scenario.num_cues
    req = np.array([vue_rate_requirement(a, q, mode) for a, q in zip(scenario.arrivals, scenario.qos)])
    with np.errstate(over="ignore"):  # an infinite SINR target is simply unreachable
        gamma0 = np.expm1(req / scenario.rb_bandwidth * math.log(2.0)) * (1.0 + RATE_MARGIN)
    util = np.full((nv, nc), -np.inf)
    powers = np.zeros((nv, nc, 2))
    for v in range(nv):
        for c in range(nc):
            sol = pair_power(scenario.cue_bs_gain[c], scenario.vue_link_gain[v], scenario.cue_to_vue_gain[c, v],
                             scenario.vue_to_bs_gain[v], gamma0[v], scenario.cue_power_max,
                             scenario.vue_power_max, scenario.noise)
            if sol is not None:
                powers[v, c] = sol[:2]
                util[v, c] = sol[2]
    solo = scenario.cue_power_max * scenario.cue_bs_gain / scenario.noise
    return util, solo, req, powers


def bottleneck_objective(util, solo, matching):
    """Smallest CUE SINR when VUE ``v`` shares block ``matching[v]``."""
    sinr = np.array(solo, dtype=float, copy=True)
    for v, c in enumerate(matching):
        sinr[c] = util[v, c]
    return float(sinr.min())


def _perfect_matching(mask):
    nv = mask.shape[0]
    if nv == 0:
        return True
    match = maximum_bipartite_matching(csr_matrix(mask.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))


def bottleneck_assignment(util, solo):
    """Injective VUE->RB matching maximising the minimum CUE SINR.

    Bisects over candidate thresholds with a maximum-matching feasibility
    test, then among optimal matchings keeps the one with the largest sum
    of log CUE SINRs. Requires ``util[v, c] <= solo[c]``. Raises
    InfeasibleError if the VUEs cannot all be placed.
    """
    nv, nc = util.shape
    if nv == 0:
        return np.empty(0, dtype=np.int64)
    finite = np.isfinite(util)
    # capping thresholds at min(solo) relies on sharing never raising a CUE's SINR
    if np.any(util[finite] > np.broadcast_to(solo, util.shape)[finite] * (1 + 1e-12)):
        raise DomainError("shared CUE SINR exceeds its solo SINR")
    if not _perfect_matching(finite):
        raise InfeasibleError("no resource-block matching satisfies every VUE rate requirement")
    cands = np.unique(np.concatenate([util[finite], solo]))
    cands = cands[cands <= solo.min()]

    def ok(t):
        return _perfect_matching(finite & (util >= t))

    lo, hi = 0, cands.size - 1  # ok(cands[0]) holds: it is the global minimum candidate
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(cands[mid]):
            lo = mid
        else:
            hi = mid - 1
    best = cands[lo]
    allowed = finite & (util >= best)
    # sharing block c swaps solo[c] for util[v, c] in the log-sum
    ratio = np.where(allowed, util, 1.0) / np.broadcast_to(solo, util.shape)
    cost = np.where(allowed, -np.log(ratio), 1e18)
    rows, cols = linear_sum_assignment(cost)
    matching = np.empty(nv, dtype=np.int64)
    matching[rows] = cols
    if not np.all(allowed[np.arange(nv), matching]):
        raise InfeasibleError("tie-break assignment left the feasible edge set")
    return matching


def brute_force_assignment(util, solo):
    """Exhaustive search over every injective matching (small instances only)."""
    nv, nc = util.shape
    best, best_m = -np.inf, None
    for perm in itertools.permutations(range(nc), nv):
        if not all(np.isfinite(util[v, c]) for v, c in enumerate(perm)):
            continue
        val = bottleneck_objective(util, solo, perm)
        if val > best:
            best, best_m = val, perm
    return best, best_m


def allocate_sharing(scenario: UrbanScenario, mode: str = "effective_bandwidth") -> SharingAssignment:
    if mode not in MODES:
        raise DomainError(f"unknown requirement mode {mode!r}")
    util, solo, req, powers = sharing_utility(scenario, mode)
    matching = bottleneck_assignment(util, solo)
    nv = scenario.num_vues
    cue_power = np.full(scenario.num_cues, scenario.cue_power_max)
    cue_sinr = solo.copy()
    vue_power = np.empty(nv)
    vue_sinr = np.empty(nv)
    for v, c in enumerate(matching):
        pc, pv = powers[v, c]
        cue_power[c] = pc
        vue_power[v] = pv
        cue_sinr[c] = util[v, c]
        vue_sinr[v] = pv * scenario.vue_link_gain[v] / (scenario.noise + pc * scenario.cue_to_vue_gain[c, v])
    rate = scenario.rb_bandwidth * np.log2(1.0 + vue_sinr)
    return SharingAssignment(mode, matching, vue_power, cue_power, cue_sinr, vue_sinr, rate, req)


@dataclass
class EpisodeReport:
    mode: str
    latencies: list  # LatencySampleSet per VUE
    violation: np.ndarray
    min_cue_sinr: float
    latency_bound: np.ndarray

    def histograms(self, bin_width=0.01, num_bins=None):
        return [s.histogram(bin_width, num_bins) for s in self.latencies]

    def pooled(self):
        return LatencySampleSet(np.concatenate([s.samples for s in self.latencies]))


def run_episode(scenario: UrbanScenario, assignment: SharingAssignment, packets: int = 10**5,
                seed: int = 0, backend=None) -> EpisodeReport:
    """Queue every VUE's packets at its allocated rate and collect latencies.

    VUE ``v`` draws arrivals from child ``v`` of ``SeedSequence(seed)``, so
    two assignments simulated with the same seed see identical traffic.
    """
    children = np.random.SeedSequence(seed).spawn(scenario.num_vues)
    sets, viol, bounds = [], [], []
    for v in range(scenario.num_vues):
        rate = float(assignment.vue_rate[v])
        s = simulate_fifo_queue(scenario.arrivals[v], rate, packets, np.random.default_rng(children[v]), backend)
        bound = scenario.qos[v].latency_bound
        sets.append(s)
        viol.append(s.violation(bound))
        bounds.append(bound)
    return EpisodeReport(assignment.mode, sets, np.array(viol), assignment.min_cue_sinr, np.array(bounds))
