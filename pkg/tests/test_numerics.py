"""Tests for the scalar numerical kernels."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indecide.numerics import (
    BracketError,
    IterationLimitError,
    RootFindConfig,
    bisect_monotone,
    log_normal_tail,
    normal_quantile,
    normal_tail,
    normal_tail_vec,
    seeded_stream,
)


class TestNormalTail:
    def test_center(self):
        assert normal_tail(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_one_sigma(self):
        # 1 - Phi(1), high-precision reference value
        assert normal_tail(1.0) == pytest.approx(0.15865525393145705, abs=1e-15)

    def test_two_sigma(self):
        assert normal_tail(2.0) == pytest.approx(0.022750131948179195, abs=1e-16)

    def test_symmetry(self):
        for t in (0.3, 1.7, 5.0, 12.0):
            assert normal_tail(-t) == pytest.approx(1.0 - normal_tail(t), abs=1e-15)

    def test_deep_tail_sandwich(self):
        # envelope bounds: phi(t) (1/t - 1/t^3) <= tail(t) <= phi(t) / t
        for t in (2.0, 5.0, 10.0, 20.0, 35.0):
            phi = math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
            tail = normal_tail(t)
            assert phi * (1.0 / t - 1.0 / t**3) <= tail <= phi / t

    def test_vectorized_agrees_with_scalar(self):
        ts = np.linspace(-8.0, 8.0, 97)
        vec = normal_tail_vec(ts)
        for t, v in zip(ts, vec):
            assert v == pytest.approx(normal_tail(t), rel=1e-13, abs=1e-300)

    def test_log_tail_agrees_where_tail_is_normal_sized(self):
        for t in (0.0, 1.0, 3.0, 8.0):
            assert float(log_normal_tail(t)) == pytest.approx(
                math.log(normal_tail(t)), rel=1e-12
            )

    def test_log_tail_finite_far_out(self):
        val = float(log_normal_tail(100.0))
        assert math.isfinite(val)
        # leading order -t^2/2
        assert val == pytest.approx(-5000.0, rel=1e-2)

    @given(st.floats(min_value=-30.0, max_value=30.0))
    def test_monotone_decreasing(self, t):
        assert normal_tail(t + 1e-3) <= normal_tail(t)


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-14)

    def test_round_trip_centiles(self):
        for k in range(1, 100):
            p = k / 100.0
            assert normal_tail(normal_quantile(p)) == pytest.approx(p, abs=1e-14)

    def test_round_trip_deep(self):
        for p in (1e-3, 1e-8, 1e-15, 1e-100):
            assert normal_tail(normal_quantile(p)) == pytest.approx(p, rel=1e-10)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5, math.nan])
    def test_rejects_out_of_range(self, p):
        with pytest.raises(ValueError):
            normal_quantile(p)


class TestBisectMonotone:
    def test_increasing(self):
        cfg = RootFindConfig(bracket=(0.0, 10.0))
        x = bisect_monotone(lambda v: v * v, 9.0, cfg)
        assert x == pytest.approx(3.0, abs=1e-6)

    def test_decreasing(self):
        cfg = RootFindConfig(bracket=(0.1, 10.0))
        x = bisect_monotone(lambda v: 1.0 / v, 2.0, cfg)
        assert x == pytest.approx(0.5, abs=1e-9)

    def test_bracket_error(self):
        cfg = RootFindConfig(bracket=(0.0, 1.0))
        with pytest.raises(BracketError):
            bisect_monotone(lambda v: v, 5.0, cfg)

    def test_iteration_limit(self):
        cfg = RootFindConfig(bracket=(0.0, 1.0), abs_tol=1e-30, max_iter=3)
        with pytest.raises(IterationLimitError):
            bisect_monotone(lambda v: v, 0.123456789, cfg)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"bracket": (1.0, 0.0)},
            {"bracket": (0.0, math.inf)},
            {"bracket": (0.0, 1.0), "abs_tol": 0.0},
            {"bracket": (0.0, 1.0), "max_iter": 0},
        ],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            RootFindConfig(**kwargs)

    @settings(max_examples=30)
    @given(st.floats(min_value=-5.0, max_value=5.0))
    def test_solves_affine(self, target):
        cfg = RootFindConfig(bracket=(-10.0, 10.0))
        x = bisect_monotone(lambda v: 2.0 * v + 1.0, target, cfg)
        assert 2.0 * x + 1.0 == pytest.approx(target, abs=1e-9)


class TestSeededStream:
    def test_same_key_same_draws(self):
        a = seeded_stream(7, 3).random(100)
        b = seeded_stream(7, 3).random(100)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = seeded_stream(7, 0).random(100)
        b = seeded_stream(7, 1).random(100)
        assert not np.array_equal(a, b)

    def test_seeds_differ(self):
        a = seeded_stream(0, 5).random(100)
        b = seeded_stream(1, 5).random(100)
        assert not np.array_equal(a, b)

    def test_order_independent(self):
        # drawing from stream 2 before or after stream 9 changes nothing
        first = seeded_stream(42, 9).random(10)
        _ = seeded_stream(42, 2).random(1000)
        again = seeded_stream(42, 9).random(10)
        assert np.array_equal(first, again)
