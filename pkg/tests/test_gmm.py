"""Tests for the closed-form Gaussian-mixture abstention oracle."""

import csv
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indecide import gmm
from indecide.numerics import normal_tail


class TestOperatingPoint:
    def test_gamma_zero_is_bayes(self):
        point = gmm.operating_point_at_t(gmm.GmmSpec(1.0), 0.0)
        assert point.gamma == 0.0
        assert point.risk == pytest.approx(normal_tail(1.0), abs=1e-15)

    def test_known_point(self):
        # delta=1, t=1: gamma = tail(0) - tail(2), risk = tail(2)/(1-gamma)
        point = gmm.operating_point_at_t(gmm.GmmSpec(1.0), 1.0)
        gamma = normal_tail(0.0) - normal_tail(2.0)
        assert point.gamma == pytest.approx(gamma, abs=1e-15)
        assert point.risk == pytest.approx(normal_tail(2.0) / (1.0 - gamma), rel=1e-14)

    def test_complement_consistent(self):
        for t in (0.0, 0.5, 2.0, 10.0):
            point = gmm.operating_point_at_t(gmm.GmmSpec(0.7), t)
            assert point.gamma + point.gamma_complement == pytest.approx(1.0, abs=1e-12)

    def test_negative_t_rejected(self):
        with pytest.raises(ValueError):
            gmm.operating_point_at_t(gmm.GmmSpec(1.0), -0.1)

    def test_spec_validation(self):
        for bad in (0.0, -1.0, math.inf, math.nan):
            with pytest.raises(ValueError):
                gmm.GmmSpec(bad)

    @settings(max_examples=60)
    @given(
        st.floats(min_value=0.1, max_value=4.0),
        st.floats(min_value=0.0, max_value=6.0),
        st.floats(min_value=1e-3, max_value=0.5),
    )
    def test_monotone_in_t(self, delta, t, h):
        spec = gmm.GmmSpec(delta)
        a = gmm.operating_point_at_t(spec, t)
        b = gmm.operating_point_at_t(spec, t + h)
        assert b.gamma >= a.gamma - 1e-14
        assert b.risk <= a.risk + 1e-14


class TestInversion:
    @pytest.mark.parametrize("delta", [0.3, 1.0, 2.5])
    @pytest.mark.parametrize("gamma", [0.0, 0.01, 0.3, 0.9, 0.999])
    def test_threshold_for_gamma_round_trip(self, delta, gamma):
        point = gmm.threshold_for_gamma(gmm.GmmSpec(delta), gamma)
        assert point.gamma == pytest.approx(gamma, abs=1e-10)

    def test_gamma_bounds(self):
        spec = gmm.GmmSpec(1.0)
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError):
                gmm.threshold_for_gamma(spec, bad)

    def test_target_risk_round_trip(self):
        spec = gmm.GmmSpec(1.0)
        point = gmm.gamma_for_target_risk(spec, 0.05)
        assert point.risk == pytest.approx(0.05, abs=1e-9)
        assert point.gamma > 0.0

    def test_target_risk_anchor_value(self):
        # frozen output of an independent high-precision solve at delta=1,
        # target risk 0.10
        point = gmm.gamma_for_target_risk(gmm.GmmSpec(1.0), 0.10)
        assert point.gamma == pytest.approx(0.19400315299709847, abs=1e-9)
        assert point.t == pytest.approx(0.40104917207509868, abs=1e-8)

    def test_target_above_bayes_needs_no_abstention(self):
        spec = gmm.GmmSpec(1.0)
        point = gmm.gamma_for_target_risk(spec, 0.5)
        assert point.gamma == 0.0
        assert point.t == 0.0

    def test_easy_separation_knee(self):
        # at delta just past the point where the Bayes risk equals the
        # target, no abstention is needed
        point = gmm.gamma_for_target_risk(gmm.GmmSpec(2.3264), 0.01)
        assert point.gamma == 0.0

    def test_zero_target_infeasible(self):
        with pytest.raises(gmm.InfeasibleTargetError):
            gmm.gamma_for_target_risk(gmm.GmmSpec(1.0), 0.0)

    @settings(max_examples=40)
    @given(
        st.floats(min_value=0.2, max_value=3.0),
        st.floats(min_value=0.001, max_value=0.98),
    )
    def test_risk_at_solved_gamma_matches(self, delta, gamma):
        spec = gmm.GmmSpec(delta)
        point = gmm.threshold_for_gamma(spec, gamma)
        check = gmm.operating_point_at_t(spec, point.t)
        assert check.risk == pytest.approx(point.risk, rel=1e-12, abs=1e-300)


class TestCriticalExponent:
    def test_known_values(self):
        assert gmm.m_star(0.75) == pytest.approx(0.25, abs=1e-15)
        assert gmm.m_star(0.25) == pytest.approx(0.5625, abs=1e-15)

    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, -0.3, 1.2])
    def test_m_star_domain(self, c):
        with pytest.raises(ValueError):
            gmm.m_star(c)

    def test_m_lower_below_m_star_for_upper_branch(self):
        # c > 1/2: the finite-sample curve sits above the asymptote, so the
        # published lower envelope uses the +eps branch
        val = gmm.m_lower(0.75, 1e-8)
        assert val > gmm.m_star(0.75)

    def test_m_lower_domain(self):
        with pytest.raises(ValueError):
            gmm.m_lower(0.75, 0.9)  # log(1/gamma_delta) <= 1

    def test_empirical_exponent_limits(self):
        # the observed exponent approaches the asymptotic curve as the
        # target shrinks
        for c in (0.25, 0.75):
            gaps = [
                abs(gmm.empirical_exponent(c, dt) - gmm.m_star(c))
                for dt in (1e-4, 1e-8, 1e-12)
            ]
            assert gaps[0] > gaps[-1]

    def test_empirical_exponent_domain(self):
        for c in (0.0, 0.5, 1.0):
            with pytest.raises(ValueError):
                gmm.empirical_exponent(c, 1e-6)

    def test_envelope_brackets_asymptote(self):
        for c in (0.1, 0.3, 0.6, 0.9):
            low, high = gmm.phase_envelope(c, 1e-10)
            assert low <= gmm.m_star(c) <= high

    def test_envelope_tightens(self):
        for c in (0.2, 0.8):
            w1 = -math.inf
            for dt in (1e-4, 1e-8, 1e-14):
                low, high = gmm.phase_envelope(c, dt)
                width = high - low
                assert width > 0
                if math.isfinite(w1):
                    assert width < w1
                w1 = width


class TestPhaseGrid:
    def _cfg(self, **kw):
        base = dict(
            delta_target=1e-7,
            c_grid=(0.1, 0.3, 0.48, 0.52, 0.7, 0.9),
            m_grid=(0.1, 0.5, 0.9),
        )
        base.update(kw)
        return gmm.PhaseGridConfig(**base)

    def test_row_major_order_and_count(self):
        cfg = self._cfg()
        cells = gmm.phase_grid(cfg)
        assert len(cells) == len(cfg.c_grid) * len(cfg.m_grid)
        assert [cell.c for cell in cells[:3]] == [0.1, 0.1, 0.1]
        assert [cell.m for cell in cells[:3]] == [0.1, 0.5, 0.9]

    def test_dead_band_unresolved(self):
        cells = gmm.phase_grid(self._cfg())
        for cell in cells:
            if abs(cell.c - 0.5) <= 0.05:
                assert not cell.resolved
                assert math.isnan(cell.risk_ratio_capped)
            else:
                assert cell.resolved

    def test_cap_respected(self):
        cells = gmm.phase_grid(self._cfg())
        for cell in cells:
            if cell.resolved:
                assert 0.5 <= cell.risk_ratio_capped <= 2.0

    def test_ratio_side_of_critical_curve(self):
        # deep below the critical exponent the target is met (ratio <= 1);
        # well above it the risk blows past the target
        cfg = self._cfg(delta_target=1e-10, c_grid=(0.8,), m_grid=(0.05, 0.9))
        lo_cell, hi_cell = gmm.phase_grid(cfg)
        assert gmm.m_star(0.8) == pytest.approx(0.36, abs=1e-12)
        assert lo_cell.risk_ratio_raw <= 1.0
        assert hi_cell.risk_ratio_raw > 1.0

    def test_csv_round_trip(self, tmp_path):
        cells = gmm.phase_grid(self._cfg())
        path = tmp_path / "grid.csv"
        gmm.phase_grid_to_csv(cells, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["c", "m", "gamma", "t", "risk_ratio_raw", "risk_ratio_capped"]
        assert len(rows) == 1 + len(cells)
        assert float(rows[1][0]) == cells[0].c

    def test_svg_written(self, tmp_path):
        cfg = self._cfg()
        cells = gmm.phase_grid(cfg)
        path = tmp_path / "grid.svg"
        gmm.phase_grid_to_svg(cells, cfg, path)
        text = path.read_text()
        assert text.startswith("<svg") or "<svg" in text

    def test_config_validation(self):
        with pytest.raises(ValueError):
            self._cfg(delta_target=1.5)
        with pytest.raises(ValueError):
            self._cfg(c_grid=())
        with pytest.raises(ValueError):
            self._cfg(m_grid=(0.5, 0.4))
        with pytest.raises(ValueError):
            self._cfg(cap=(2.0, 0.5))
