import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import numba_available
from urllc_lab.errors import DomainError
from urllc_lab.outage import (DiversityChannel, ResourceGridConfig, TradeoffCurve, lrtd_estimate,
                              outage_mrc_correlated_mc, outage_mrc_iid, outage_mrc_mc_many, snr_threshold,
                              tradeoff_sweep)

RHO_TH_1MS = 1.6799799776347124  # 2**(256/180) - 1

GRID = ResourceGridConfig()


class TestGrid:
    def test_threshold_at_one_ms(self):
        assert GRID.resource_elements(1e-3) == (15, 12)
        assert snr_threshold(GRID, 1e-3) == pytest.approx(2 ** (256 / 180) - 1, rel=1e-14)
        assert snr_threshold(GRID, 1e-3) == pytest.approx(RHO_TH_1MS, rel=1e-14)

    def test_threshold_vanishes(self):
        assert snr_threshold(GRID, 100.0) < 1e-4

    def test_ratio_invariance(self):
        big = ResourceGridConfig(packet_bits=512)
        for lat in (1e-3, 2e-3, 7e-3):
            assert snr_threshold(big, 2 * lat) == pytest.approx(snr_threshold(GRID, lat), rel=1e-14)

    def test_floors_make_steps(self):
        # 1.0 and 1.06 ms hold the same 15 symbols
        assert snr_threshold(GRID, 1.06e-3) == snr_threshold(GRID, 1e-3)

    def test_numerology(self):
        g = ResourceGridConfig.from_numerology(2, 1.44e6)
        assert g.subcarrier_spacing == 60e3 and g.resource_elements(1e-3) == (60, 24)

    def test_validation(self):
        with pytest.raises(DomainError):
            snr_threshold(GRID, 1e-5)
        with pytest.raises(DomainError):
            ResourceGridConfig(symbol_duration=1e-4)
        with pytest.raises(DomainError):
            ResourceGridConfig(bandwidth=1e3)


class TestAnalytic:
    def test_single_branch(self):
        ch = DiversityChannel(1, 10.0)
        assert outage_mrc_iid(ch, RHO_TH_1MS) == pytest.approx(-math.expm1(-RHO_TH_1MS / 10), rel=1e-13)
        assert outage_mrc_iid(ch, RHO_TH_1MS) == pytest.approx(0.1546, abs=1e-4)

    def test_two_branches(self):
        x = RHO_TH_1MS / 10
        p2 = outage_mrc_iid(DiversityChannel(2, 10.0), RHO_TH_1MS)
        assert p2 == pytest.approx(1 - math.exp(-x) * (1 + x), rel=1e-12)
        assert p2 < outage_mrc_iid(DiversityChannel(1, 10.0), RHO_TH_1MS)

    def test_zero_threshold(self):
        assert outage_mrc_iid(DiversityChannel(3, 10.0), 0.0) == 0.0

    def test_rejects_correlation(self):
        with pytest.raises(DomainError):
            outage_mrc_iid(DiversityChannel(2, 10.0, 0.3), 1.0)

    @given(st.integers(1, 8), st.floats(0.1, 1e4), st.floats(1e-3, 1e2))
    def test_strict_monotonicity(self, n, snr, th):
        p = outage_mrc_iid(DiversityChannel(n, snr), th)
        if 1e-300 < p < 1.0:
            assert outage_mrc_iid(DiversityChannel(n + 1, snr), th) < p
            assert outage_mrc_iid(DiversityChannel(n, snr * 1.5), th) < p

    def test_channel_validation(self):
        for args in ((0, 1.0), (1, 0.0), (2, 1.0, 1.0), (2, 1.0, -0.1)):
            with pytest.raises(DomainError):
                DiversityChannel(*args)


class TestMonteCarlo:
    def test_iid_agrees(self):
        ch = DiversityChannel(2, 10.0)
        p = outage_mrc_iid(ch, RHO_TH_1MS)
        est, se = outage_mrc_correlated_mc(ch, RHO_TH_1MS, 10**6, seed=3)
        assert abs(est - p) <= 3 * se
        assert se == pytest.approx(math.sqrt(est * (1 - est) / 1e6))

    def test_correlation_hurts(self):
        ch_c = DiversityChannel(4, 100.0, 0.5)
        ch_i = DiversityChannel(4, 100.0, 0.0)
        th = 40.0  # outage ~1e-3, resolvable at 1e6 trials
        cor, se_c = outage_mrc_correlated_mc(ch_c, th, 10**6, seed=4)
        iid, se_i = outage_mrc_correlated_mc(ch_i, th, 10**6, seed=4)
        assert cor > iid + 3 * math.hypot(se_c, se_i)
        assert iid == pytest.approx(outage_mrc_iid(ch_i, th), abs=3 * se_i + 1e-12)

    def test_full_correlation_collapses_diversity(self):
        # fully correlated branches add coherently: gain N * |h|^2
        ch = DiversityChannel(4, 10.0, 0.999999)
        th = 2.0
        est, se = outage_mrc_correlated_mc(ch, th, 10**6, seed=5)
        single = -math.expm1(-th / (4 * 10.0))
        assert abs(est - single) <= 3 * se + 1e-4
        assert est <= 1.0

    def test_seed_determinism_and_chunking(self):
        ch = DiversityChannel(3, 5.0, 0.4)
        a = outage_mrc_mc_many(ch, [0.5, 1.0, 2.0], 100_000, seed=9)
        b = outage_mrc_mc_many(ch, [0.5, 1.0, 2.0], 100_000, seed=9)
        np.testing.assert_array_equal(a[0], b[0])
        single = [outage_mrc_correlated_mc(ch, t, 100_000, seed=9)[0] for t in (0.5, 1.0, 2.0)]
        np.testing.assert_array_equal(a[0], single)

    @pytest.mark.skipif(not numba_available(), reason="numba backend unavailable")
    def test_backends_agree(self):
        ch = DiversityChannel(4, 10.0, 0.7)
        a = outage_mrc_mc_many(ch, [1.0, 5.0, 20.0], 70_000, seed=1, backend="numba")
        b = outage_mrc_mc_many(ch, [1.0, 5.0, 20.0], 70_000, seed=1, backend="numpy")
        np.testing.assert_array_equal(a[0], b[0])

    def test_minimum_trials(self):
        with pytest.raises(DomainError):
            outage_mrc_correlated_mc(DiversityChannel(2, 1.0, 0.5), 1.0, trials=100)


class TestLrtd:
    def test_synthetic_power_law(self):
        lat = np.geomspace(1e-3, 1e-1, 15)
        for d0 in (1.0, 2.0, 3.7):
            curve = TradeoffCurve(list(zip(lat, 1e-3 * (lat / lat[0]) ** -d0)))
            assert lrtd_estimate(curve) == pytest.approx(d0, abs=1e-6)

    @pytest.mark.parametrize("n", [1, 3])
    def test_diversity_order(self, n):
        curve = tradeoff_sweep(GRID, DiversityChannel(n, 100.0), np.geomspace(1e-3, 0.1, 21))
        assert curve.lrtd == pytest.approx(n, abs=0.3)

    def test_needs_tail(self):
        lat = np.geomspace(1e-3, 5e-3, 10)
        with pytest.raises(DomainError):
            lrtd_estimate(TradeoffCurve(list(zip(lat, 0.01 * lat[0] / lat))))
        with pytest.raises(DomainError):
            lrtd_estimate(TradeoffCurve([(1e-3, 0.5), (1e-2, 0.2)]))


class TestSweep:
    def test_single_point(self):
        ch = DiversityChannel(2, 10.0)
        c = tradeoff_sweep(GRID, ch, [1e-3])
        assert c.points == [(1e-3, outage_mrc_iid(ch, RHO_TH_1MS))]
        assert c.lrtd is None

    def test_correlated_above_iid(self):
        lat = np.geomspace(1e-3, 5e-3, 8)
        cor = tradeoff_sweep(GRID, DiversityChannel(2, 10.0, 0.5), lat, 10**6, seed=2).outages
        iid = tradeoff_sweep(GRID, DiversityChannel(2, 10.0), lat).outages
        assert np.all(cor >= iid) and np.all(np.diff(cor) <= 0)

    def test_curve_validation(self):
        with pytest.raises(DomainError):
            TradeoffCurve([(2e-3, 0.1), (1e-3, 0.2)])
        with pytest.raises(DomainError):
            TradeoffCurve([(1e-3, 1.2)])
