"""Command-line driver: ``urllc-lab <experiment> --config PATH [--seed N] [--out DIR]``.

Seeds resolve as ``--seed`` > ``URLLC_LAB_SEED`` > config ``seed``; each
component then draws from :func:`urllc_lab.config.derive_seed`.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ExperimentConfig, derive_seed, parse_config, serialize
from .errors import ConfigError
from .numerics import FblQuery, fbl_rate, shannon_rate
from .outage import DiversityChannel, ResourceGridConfig, tradeoff_sweep
from .presets import list_presets
from .queueing import QosRequirement
from .traffic import FreewayLayout, ManhattanGrid, UnderwoodModel
from .urban import allocate_sharing, build_urban_scenario, run_episode
from .v2i import FreewayScenario, PathLoss, UserQos, epa_latencies, hardened_sinr, minmax_latency_allocation

log = logging.getLogger("urllc_lab")

SEED_ENV = "URLLC_LAB_SEED"


class InvariantViolation(RuntimeError):
    pass


def _check(cond, message):
    if not cond:
        raise InvariantViolation(message)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def read_csv(path: Path):
    """Rows as dicts with numeric cells converted to int/float."""
    def conv(s):
        for t in (int, float):
            try:
                return t(s)
            except ValueError:
                pass
        return s

    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: conv(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# ------------------------------------------------------------------ runners


def run_outage_sweep(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    grid = ResourceGridConfig.from_numerology(p["numerology"], p["bandwidth_hz"], p["packet_bits"])
    lats = np.geomspace(p["latency_min_ms"], p["latency_max_ms"], p["latency_points"]) * 1e-3
    mc_seed = derive_seed(cfg.seed, "outage-mc")
    rows, lrtd_rows = [], []
    for n_rx in p["n_rx"]:
        for snr_db in p["avg_snr_db"]:
            ch = DiversityChannel(n_rx, 10.0 ** (snr_db / 10.0), p["correlation"])
            curve = tradeoff_sweep(grid, ch, lats, p["trials"], mc_seed)
            _check(np.all(np.diff(curve.outages) <= 1e-15), f"outage not monotone in latency for n_rx={n_rx}")
            rows += [(lat * 1e3, n_rx, snr_db, o) for lat, o in curve.points]
            lrtd_rows.append((n_rx, snr_db, "" if curve.lrtd is None else curve.lrtd))
    return [write_csv(out / "outage_sweep.csv", ("latency_ms", "n_rx", "avg_snr_db", "outage"), rows),
            write_csv(out / "lrtd.csv", ("n_rx", "avg_snr_db", "lrtd"), lrtd_rows)]


def _freeway(cfg, kappa):
    p = cfg.params
    layout = FreewayLayout(p["road_length"], p["bs_offset"], kappa, p["max_density"])
    return FreewayScenario(
        layout=layout, model=UnderwoodModel(p["free_flow_speed_kmh"], p["max_density"]), antennas=p["antennas"],
        bandwidth=p["bandwidth_hz"], total_power=10.0 ** (p["total_power_dbw"] / 10.0),
        pathloss=PathLoss(p["pathloss_exponent"]), placement=p["placement"],
        seed=derive_seed(cfg.seed, f"placement/{kappa!r}"))


def run_fbl_surface(cfg: ExperimentConfig, out: Path):
    """Rate of the weakest user under EPA over a (latency, error) grid."""
    p = cfg.params
    sc = _freeway(cfg, p["kappa"])
    gains = sc.gains()
    k = gains.size
    sinr = hardened_sinr(p["precoder"], np.full(k, sc.total_power / k), gains, sc.antennas, sc.noise)
    snr = float(sinr.min())
    cap = float(shannon_rate(snr, sc.bandwidth))
    rows = []
    for eps in p["error_probs"]:
        for lat in np.geomspace(p["latency_min_ms"], p["latency_max_ms"], p["latency_points"]) * 1e-3:
            r = fbl_rate(FblQuery(snr, lat, sc.bandwidth, eps))
            if eps < 0.5:
                _check(r <= cap, "finite-blocklength rate above Shannon rate")
            rows.append((lat * 1e3, eps, r / 1e3, cap / 1e3))
    return [write_csv(out / "fbl_surface.csv", ("latency_ms", "error_prob", "fbl_rate_kbps", "shannon_rate_kbps"),
                      rows)]


def run_v2i_latency(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    qos = UserQos(p["rate_bps"], p["error_prob"])
    rows, power_rows = [], []
    for kappa in p["kappas"]:
        sc = _freeway(cfg, kappa)
        pos = sc.positions()
        k = pos.size
        for precoder in p["precoders"]:
            epa = epa_latencies(sc, qos, precoder)
            alloc, lstar = minmax_latency_allocation(sc, qos, precoder)
            _check(alloc.powers.sum() <= sc.total_power * (1 + 1e-9), "min-max allocation exceeds power budget")
            _check(lstar <= epa.max() + 1e-9, "min-max latency worse than equal power allocation")
            rows.append((kappa, "minmax", precoder, lstar * 1e3))
            rows.append((kappa, "epa", precoder, epa.max() * 1e3))
            sinr = hardened_sinr(precoder, alloc.powers, sc.gains(), sc.antennas, sc.noise)
            for u in range(k):
                power_rows.append((kappa, k, "minmax", precoder, u, pos[u], alloc.powers[u], lstar * 1e3))
                power_rows.append((kappa, k, "epa", precoder, u, pos[u], sc.total_power / k, epa[u] * 1e3))
            log.info("kappa=%g K=%d %s: minmax %.4g ms, EPA %.4g ms, min SINR %.3g", kappa, k, precoder,
                     lstar * 1e3, epa.max() * 1e3, sinr.min())
    return [
        write_csv(out / "v2i_latency.csv", ("kappa", "scheme", "precoder", "max_latency_ms"), rows),
        write_csv(out / "v2i_powers.csv",
                  ("kappa", "K", "scheme", "precoder", "user", "position_m", "power_w", "latency_ms"), power_rows),
    ]


def run_v2v_episode(cfg: ExperimentConfig, out: Path):
    p = cfg.params
    grid = ManhattanGrid(blocks_x=p["blocks_x"], blocks_y=p["blocks_y"], vehicle_speed=p["vehicle_speed_kmh"])
    qos = QosRequirement(p["latency_bound_ms"] * 1e-3, p["violation_prob"])
    sc = build_urban_scenario(
        grid, p["num_cues"], p["num_vue_pairs"], derive_seed(cfg.seed, "urban-scenario"), qos=qos,
        packet_rate=p["packet_rate"], packet_bits=p["packet_bits"], pair_distance_cap=p["pair_distance_cap"],
        cue_power_max=10.0 ** ((p["cue_power_dbm"] - 30) / 10), vue_power_max=10.0 ** ((p["vue_power_dbm"] - 30) / 10))
    traffic_seed = derive_seed(cfg.seed, "urban-traffic")
    hist_rows, summary_rows = [], []
    for mode in p["modes"]:
        a = allocate_sharing(sc, mode)
        _check(np.all(a.vue_rate >= a.required_rate), f"{mode}: VUE rate requirement violated")
        _check(np.all(a.vue_power <= sc.vue_power_max) and np.all(a.cue_power <= sc.cue_power_max),
               f"{mode}: power cap violated")
        rep = run_episode(sc, a, p["packets"], traffic_seed)
        if sc.num_vues:
            edges, probs = rep.pooled().histogram(0.01)
            hist_rows += [(lo * 1e3, hi * 1e3, pr, mode) for lo, hi, pr in zip(edges[:-1], edges[1:], probs)]
        min_db = 10.0 * np.log10(rep.min_cue_sinr)
        for v in range(sc.num_vues):
            summary_rows.append((v, rep.violation[v], a.vue_rb[v], a.vue_power[v], min_db, mode))
        log.info("%s: min CUE SINR %.2f dB, worst VUE violation %.4f", mode, min_db,
                 rep.violation.max() if sc.num_vues else 0.0)
    return [
        write_csv(out / "v2v_histogram.csv", ("bin_start_ms", "bin_end_ms", "probability", "scheme"), hist_rows),
        write_csv(out / "v2v_summary.csv", ("vue_id", "violation_prob", "rb", "power_w", "min_cue_sinr_db", "scheme"),
                  summary_rows),
    ]


RUNNERS = {
    "outage-sweep": run_outage_sweep,
    "fbl-surface": run_fbl_surface,
    "v2i-latency": run_v2i_latency,
    "v2v-episode": run_v2v_episode,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Run one experiment and return the CSV paths it wrote."""
    out = Path(out_dir if out_dir is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.experiment](cfg, out)


# ------------------------------------------------------------------ entry point


def _print_presets():
    def fmt(lo, hi, unit):
        if lo is None:
            return f"<= {hi:g}{unit}"
        if hi is None:
            return f"> {lo:g}{unit}"
        return f"{lo:g}-{hi:g}{unit}"

    for pr in list_presets():
        lat = fmt(None if pr.latency_min is None else pr.latency_min * 1e3,
                  None if pr.latency_max is None else pr.latency_max * 1e3, " ms")
        err = fmt(pr.error_min, pr.error_max, "")
        print(f"{pr.name:36s} {pr.pattern:8s} latency {pr.latency_class:10s} {lat:14s} "
              f"error {pr.reliability_class:10s} {err:14s} rate {pr.data_rate_class}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="urllc-lab", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS + ("presets",))
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--seed", type=int, help=f"overrides {SEED_ENV} and the config seed")
    parser.add_argument("--out", type=Path, help="output directory (default: config 'output')")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--dump-config", action="store_true", help="print the canonical config and exit")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.experiment == "presets":
        _print_presets()
        return 0
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text, args.experiment)
        seed = args.seed
        if seed is None and os.environ.get(SEED_ENV):
            try:
                seed = int(os.environ[SEED_ENV])
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer") from None
        if seed is not None:
            cfg = replace(cfg, seed=seed)
    except (OSError, ConfigError) as exc:
        print(f"urllc-lab: config error: {exc}", file=sys.stderr)
        return 2
    if args.dump_config:
        sys.stdout.write(serialize(cfg))
        return 0
    try:
        paths = run_experiment(cfg, args.out)
    except Exception as exc:  # every module error becomes a diagnostic and a nonzero exit
        print(f"urllc-lab: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
