import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hapsv2x.channel import (FadingSample, PathLossParams, RicianParams, path_loss_db,
                             sample_rayleigh_power, sample_small_scale, sample_v2h_small_scale,
                             v2h_gain, v2x_gain)


def fspl_oracle(d_m, f_hz):
    return 32.45 + 20 * math.log10(f_hz / 1e6) + 20 * math.log10(d_m / 1e3)


class TestPathLoss:
    def test_haps_distance_at_2ghz(self):
        # 32.45 + 20 log10(2000) + 20 log10(20)
        assert path_loss_db(20_000, PathLossParams(2e9)) == pytest.approx(124.49, abs=5e-3)

    def test_doubling_distance_adds_6db(self):
        p = PathLossParams(2e9)
        diff = path_loss_db(2000, p) - path_loss_db(1000, p)
        assert diff == pytest.approx(20 * math.log10(2), abs=1e-12)
        assert diff == pytest.approx(6.02, abs=5e-3)

    def test_extra_losses_add(self):
        p = PathLossParams(2e9, atmospheric_loss_db=1.0, scintillation_loss_db=0.5)
        assert path_loss_db(20_000, p) == pytest.approx(125.99, abs=5e-3)

    def test_shadowing_adds(self):
        p = PathLossParams(2e9)
        assert path_loss_db(500, p, 3.5) == pytest.approx(path_loss_db(500, p) + 3.5)

    @pytest.mark.parametrize("d", [0.0, -1.0, float("nan")])
    def test_non_positive_distance(self, d):
        with pytest.raises(ValueError):
            path_loss_db(d, PathLossParams())

    def test_array_input(self):
        p = PathLossParams(3.5e9, clutter_loss_db=2.0)
        d = np.array([10.0, 100.0, 1000.0])
        expected = [fspl_oracle(x, 3.5e9) + 2.0 for x in d]
        np.testing.assert_allclose(path_loss_db(d, p), expected, rtol=1e-12)

    def test_exponent_generalizes_slope(self):
        p = PathLossParams(2e9, path_loss_exponent=3.76)
        assert path_loss_db(1000, p) - path_loss_db(100, p) == pytest.approx(37.6)

    @pytest.mark.parametrize("kwargs", [
        dict(carrier_frequency_hz=0.0), dict(atmospheric_loss_db=-1.0),
        dict(clutter_loss_db=float("inf")), dict(shadowing_sigma_db=-0.1)])
    def test_invalid_params(self, kwargs):
        with pytest.raises(ValueError):
            PathLossParams(**kwargs)


class TestRicianParams:
    def test_default_complement(self):
        r = RicianParams(0.95)
        assert r.p_nlos == pytest.approx(0.05)

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            RicianParams(0.6, 0.6)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            RicianParams(1.2, -0.2)


class TestV2HGain:
    def test_pure_los_no_path_loss(self):
        assert v2h_gain(0.0, RicianParams(1.0, 0.0), 0.3 - 2j) == pytest.approx(1.0)

    def test_pure_los_20db(self):
        assert v2h_gain(20.0, RicianParams(1.0, 0.0), 5j) == pytest.approx(0.01)

    def test_half_los_half_nlos(self):
        g = v2h_gain(0.0, RicianParams(0.5, 0.5), 1 + 0j)
        assert g == pytest.approx(2.0)
        assert math.sqrt(g) == pytest.approx(1.41421, abs=1e-5)

    def test_phase_of_los_term(self):
        r = RicianParams(0.5, 0.5, los_phase_rad=math.pi)
        assert v2h_gain(0.0, r, 1 + 0j) == pytest.approx(0.0, abs=1e-24)

    @given(pl=st.floats(-50, 250), p=st.floats(0, 1), re=st.floats(-5, 5), im=st.floats(-5, 5),
           phase=st.floats(-4, 4))
    def test_matches_oracle_and_is_finite(self, pl, p, re, im, phase):
        r = RicianParams(p, 1 - p, phase)
        g = v2h_gain(pl, r, complex(re, im))
        amp = 10 ** (-pl / 20) * (math.sqrt(p) * cmath.exp(1j * phase)
                                  + math.sqrt(1 - p) * complex(re, im))
        assert math.isfinite(g) and g >= 0
        assert g == pytest.approx(abs(amp) ** 2, rel=1e-10, abs=1e-300)

    @given(pl=st.floats(0, 200), delta=st.floats(0.01, 50), p=st.floats(0, 1),
           re=st.floats(-3, 3), im=st.floats(-3, 3))
    def test_monotone_in_path_loss(self, pl, delta, p, re, im):
        r = RicianParams(p, 1 - p)
        h = complex(re, im)
        g0, g1 = v2h_gain(pl, r, h), v2h_gain(pl + delta, r, h)
        if g0 > 0:
            assert g1 < g0

    def test_deterministic_los_bitwise(self):
        r = RicianParams(1.0, 0.0, 0.3)
        assert v2h_gain(127.3, r, 0.1j) == v2h_gain(127.3, r, 0.1j)

    def test_nlos_only_unit_mean(self):
        rng = np.random.default_rng(7)
        h = sample_v2h_small_scale(rng, 100_000)
        g = v2h_gain(0.0, RicianParams(0.0, 1.0), h)
        assert abs(np.mean(g) - 1.0) < 0.03


class TestV2XGain:
    def test_identity(self):
        assert v2x_gain(FadingSample(1.0, 1.0)) == 1.0

    def test_deep_fade(self):
        assert v2x_gain(FadingSample(0.3, 0.0)) == 0.0

    def test_product(self):
        assert v2x_gain(FadingSample(0.01, 2.5)) == pytest.approx(0.025)

    def test_array_pair(self):
        np.testing.assert_allclose(v2x_gain(([1.0, 2.0], [3.0, 0.5])), [3.0, 1.0])

    def test_negative_component_rejected(self):
        with pytest.raises(ValueError):
            FadingSample(-1.0, 1.0)


class TestSampling:
    def test_rayleigh_power_unit_mean(self):
        x = sample_small_scale(np.random.default_rng(0), "v2i", 100_000)
        assert 0.97 <= x.mean() <= 1.03

    def test_v2h_real_part_variance(self):
        h = sample_small_scale(np.random.default_rng(0), "v2h", 100_000)
        assert 0.47 <= np.var(h.real) <= 0.53
        assert abs(np.mean(h)) < 0.01

    def test_seeded_determinism(self):
        a = sample_rayleigh_power(np.random.default_rng(42), 50)
        b = sample_rayleigh_power(np.random.default_rng(42), 50)
        np.testing.assert_array_equal(a, b)
        c = sample_v2h_small_scale(np.random.default_rng(42), 50)
        d = sample_v2h_small_scale(np.random.default_rng(42), 50)
        np.testing.assert_array_equal(c, d)

    def test_unknown_link(self):
        with pytest.raises(ValueError):
            sample_small_scale(np.random.default_rng(0), "v2x")

    @settings(max_examples=20)
    @given(seed=st.integers(0, 2**31))
    def test_samples_finite_non_negative(self, seed):
        x = sample_rayleigh_power(np.random.default_rng(seed), 1000)
        assert np.all(np.isfinite(x)) and np.all(x >= 0)
