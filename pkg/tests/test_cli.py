import math

import pytest

from urllc_lab.cli import main, read_csv
from urllc_lab.config import SCHEMAS, derive_seed, parse_config, serialize
from urllc_lab.errors import ConfigError, DomainError
from urllc_lab.presets import PRESETS, URBAN_V2V_QOS, URLLC_BASELINE, get_preset, list_presets

SMALL = {
    "outage-sweep": "latency_points = 5\nn_rx = 1, 2\navg_snr_db = 10\n",
    "fbl-surface": "latency_points = 4\nerror_probs = 1e-6\n",
    "v2i-latency": "kappas = 0.02, 0.05\n",
    "v2v-episode": "num_cues = 3\nnum_vue_pairs = 2\npackets = 2000\n",
}
HEADERS = {
    "outage_sweep.csv": ["latency_ms", "n_rx", "avg_snr_db", "outage"],
    "lrtd.csv": ["n_rx", "avg_snr_db", "lrtd"],
    "fbl_surface.csv": ["latency_ms", "error_prob", "fbl_rate_kbps", "shannon_rate_kbps"],
    "v2i_latency.csv": ["kappa", "scheme", "precoder", "max_latency_ms"],
    "v2i_powers.csv": ["kappa", "K", "scheme", "precoder", "user", "position_m", "power_w", "latency_ms"],
    "v2v_histogram.csv": ["bin_start_ms", "bin_end_ms", "probability", "scheme"],
    "v2v_summary.csv": ["vue_id", "violation_prob", "rb", "power_w", "min_cue_sinr_db", "scheme"],
}


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("experiment = v2i-latency\n")
        assert cfg.seed == 0 and cfg["antennas"] == 300 and cfg["kappas"][-1] == 0.15
        assert set(cfg.params) == set(SCHEMAS["v2i-latency"])

    def test_constraint_named_with_line(self):
        with pytest.raises(ConfigError, match="max_density") as exc:
            parse_config("experiment = v2i-latency\nkappas = 0.05, 0.2\n")
        assert exc.value.line == 2 and "line 2" in str(exc.value)

    @pytest.mark.parametrize("text,line,match", [
        ("experiment = outage-sweep\nbogus = 1\n", 2, "unknown key"),
        ("experiment = outage-sweep\n\ntrials = many\n", 3, "expected int"),
        ("experiment = outage-sweep\ntrials = 20000\ntrials = 30000\n", 3, "duplicate"),
        ("experiment = outage-sweep\nno equals sign\n", 2, "key = value"),
        ("experiment = fbl-surface\nprecoder = MMSE\n", 2, "not one of"),
        ("experiment = nope\n", 1, "unknown experiment"),
    ])
    def test_errors_carry_line_numbers(self, text, line, match):
        with pytest.raises(ConfigError, match=match) as exc:
            parse_config(text)
        assert exc.value.line == line

    def test_missing_experiment(self):
        with pytest.raises(ConfigError, match="experiment"):
            parse_config("seed = 3\n")

    def test_mismatched_experiment(self):
        with pytest.raises(ConfigError, match="requested"):
            parse_config("experiment = fbl-surface\n", "v2i-latency")

    def test_comments_and_whitespace(self):
        cfg = parse_config("# header\n  experiment = outage-sweep   # trailing\n\nn_rx = 1 ,3\n")
        assert cfg["n_rx"] == (1, 3)

    @pytest.mark.parametrize("name", sorted(SCHEMAS))
    def test_serialize_round_trip(self, name):
        cfg = parse_config(f"seed = 17\n{SMALL[name]}", name)
        text = serialize(cfg)
        again = parse_config(text)
        assert again == cfg and serialize(again) == text

    def test_float_round_trip_exact(self):
        cfg = parse_config("experiment = v2i-latency\nrate_bps = 0.1\nerror_prob = 1.2345678901234567e-07\n")
        assert parse_config(serialize(cfg))["error_prob"] == 1.2345678901234567e-07


class TestSeeds:
    def test_derive_seed_construction(self):
        import hashlib
        want = int.from_bytes(hashlib.sha256(b"42/outage-mc").digest()[:8], "little")
        assert derive_seed(42, "outage-mc") == want
        assert 0 <= derive_seed(0, "x") < 2 ** 64
        assert derive_seed(1, "a") != derive_seed(1, "b") != derive_seed(2, "b")


class TestPresets:
    def test_catalogue(self):
        assert len(list_presets()) == len(PRESETS) == 6
        safety = get_preset("driving-and-road-safety")
        assert (safety.latency_max, safety.error_max, safety.pattern) == (1e-3, 1e-5, "V2V/V2P")
        traffic = get_preset("traffic-efficiency")
        assert (traffic.latency_min, traffic.latency_max) == (1e-3, 5e-3)
        assert (traffic.error_min, traffic.error_max) == (1e-5, 1e-3)
        assert get_preset("social-entertainment").data_rate_class == "ultra-high"

    def test_medium_classes_start_where_low_ends(self):
        maas = get_preset("mobility-as-a-service")
        assert maas.latency_min == 5e-3 and maas.latency_max is None and maas.error_min == 1e-3

    def test_constants(self):
        assert URBAN_V2V_QOS.latency_bound == 0.1 and URBAN_V2V_QOS.violation_prob == 0.05
        assert URLLC_BASELINE == {"packet_bits": 256, "latency": 1e-3, "error_prob": 1e-5}

    def test_unknown(self):
        with pytest.raises(DomainError):
            get_preset("teleportation")


@pytest.fixture
def small_config(tmp_path):
    def make(name, extra=""):
        path = tmp_path / f"{name}.cfg"
        path.write_text(f"experiment = {name}\n{SMALL[name]}{extra}")
        return path
    return make


class TestCli:
    @pytest.mark.parametrize("name", sorted(SCHEMAS))
    def test_runs_and_writes_parseable_csv(self, name, small_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main([name, "--config", str(small_config(name)), "--out", str(out)]) == 0
        printed = capsys.readouterr().out.split()
        assert printed and all(p.startswith(str(out)) for p in printed)
        for path in sorted(out.iterdir()):
            assert path.read_text().splitlines()[0].split(",") == HEADERS[path.name]
            rows = read_csv(path)
            assert rows and all(list(r) == HEADERS[path.name] for r in rows)
            for r in rows:
                assert not any(isinstance(v, float) and math.isnan(v) for v in r.values())

    def test_config_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("experiment = v2i-latency\nkappas = 0.05, 0.2\n")
        assert main(["v2i-latency", "--config", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "max_density" in err

    def test_missing_file_exit_2(self, tmp_path, capsys):
        assert main(["fbl-surface", "--config", str(tmp_path / "absent.cfg")]) == 2

    def test_runtime_failure_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "v2v.cfg"
        bad.write_text("experiment = v2v-episode\nnum_cues = 2\nnum_vue_pairs = 2\npacket_rate = 1e5\npackets = 100\n")
        assert main(["v2v-episode", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
        assert "v2v-episode failed" in capsys.readouterr().err

    def test_bad_seed_env_exit_2(self, monkeypatch, capsys):
        monkeypatch.setenv("URLLC_LAB_SEED", "abc")
        assert main(["fbl-surface", "--dump-config"]) == 2

    def test_seed_precedence(self, monkeypatch, small_config, capsys):
        path = str(small_config("fbl-surface", "seed = 5\n"))
        main(["fbl-surface", "--config", path, "--dump-config"])
        assert "seed = 5" in capsys.readouterr().out
        monkeypatch.setenv("URLLC_LAB_SEED", "9")
        main(["fbl-surface", "--config", path, "--dump-config"])
        assert "seed = 9" in capsys.readouterr().out
        main(["fbl-surface", "--config", path, "--dump-config", "--seed", "11"])
        assert "seed = 11" in capsys.readouterr().out

    def test_dump_config_is_canonical(self, capsys):
        assert main(["outage-sweep", "--dump-config"]) == 0
        text = capsys.readouterr().out
        assert serialize(parse_config(text)) == text

    def test_presets_listing(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert all(name in out for name in PRESETS)

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["warp-drive"])
        assert exc.value.code == 2
