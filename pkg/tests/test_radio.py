import math

import numpy as np
import pytest

from beamrl.errors import ConfigError
from beamrl.radio import (
    SPEED_OF_LIGHT,
    PathLossParams,
    array_response,
    dft_codebook,
    large_scale_gain,
    path_loss_db,
    sample_channel,
)

# Free-space anchor at d0 = 1 m, f_c = 28 GHz, c = 299792458 m/s:
# 20*log10(4*pi*1*28e9 / 299792458).  Frozen from an independent evaluation.
FSPL_1M_28GHZ_DB = 61.39094384872776


def default_params(**kw):
    return PathLossParams(**kw)


class TestPathLoss:
    def test_free_space_anchor_frozen_value(self):
        assert path_loss_db(1.0, default_params()) == pytest.approx(
            FSPL_1M_28GHZ_DB, rel=1e-13
        )

    def test_exponent_slope_beyond_anchor(self):
        # One decade of distance adds 10 * exponent dB.
        p = default_params()
        assert path_loss_db(10.0, p) - path_loss_db(1.0, p) == pytest.approx(
            10.0 * p.exponent, rel=1e-12
        )
        assert path_loss_db(2.0, p) == pytest.approx(
            FSPL_1M_28GHZ_DB + 10.0 * p.exponent * math.log10(2.0), rel=1e-13
        )

    def test_clamped_below_reference_distance(self):
        p = default_params()
        assert path_loss_db(0.01, p) == path_loss_db(p.ref_distance_m, p)

    def test_anchor_formula_tracks_carrier(self):
        # Doubling f_c adds 20*log10(2) dB at d0.
        lo = path_loss_db(1.0, default_params(carrier_freq_hz=14e9))
        hi = path_loss_db(1.0, default_params(carrier_freq_hz=28e9))
        assert hi - lo == pytest.approx(20.0 * math.log10(2.0), rel=1e-12)

    def test_invalid_distance_rejected(self):
        with pytest.raises(ConfigError):
            path_loss_db(0.0, default_params())
        with pytest.raises(ConfigError):
            path_loss_db(float("nan"), default_params())

    def test_linear_gain_matches_db(self):
        p = default_params()
        g = large_scale_gain((30.0, 40.0), (0.0, 0.0), p)  # distance 50
        assert g == pytest.approx(10.0 ** (-path_loss_db(50.0, p) / 10.0), rel=1e-12)

    def test_ue_on_top_of_array_treated_as_reference(self):
        p = default_params()
        g = large_scale_gain((0.0, 0.0), (0.0, 0.0), p)
        assert g == pytest.approx(10.0 ** (-FSPL_1M_28GHZ_DB / 10.0), rel=1e-12)

    def test_params_validation(self):
        for bad in (
            dict(carrier_freq_hz=0.0),
            dict(ref_distance_m=-1.0),
            dict(exponent=0.0),
            dict(num_paths=0),
        ):
            with pytest.raises(ConfigError):
                default_params(**bad).validate()


class TestSteeringAndCodebook:
    def test_array_response_unit_norm(self):
        for m in (1, 2, 4, 8):
            v = array_response(0.7, m)
            assert np.linalg.norm(v) == pytest.approx(1.0, rel=1e-12)

    def test_array_response_broadside(self):
        v = array_response(0.0, 4)
        np.testing.assert_allclose(v, np.full(4, 0.5 + 0.0j), rtol=1e-12)

    def test_codebook_rows_unit_norm(self):
        cb = dft_codebook(4, 4)
        np.testing.assert_allclose(
            np.linalg.norm(cb.entries, axis=1), np.ones(4), rtol=1e-12
        )

    def test_square_codebook_is_orthonormal(self):
        cb = dft_codebook(4, 4)
        gram = cb.entries @ cb.entries.conj().T
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)

    def test_codebook_shape_properties(self):
        cb = dft_codebook(4, 6)
        assert cb.num_beams == 6
        assert cb.num_antennas == 4

    def test_degenerate_dimensions_rejected(self):
        with pytest.raises(ConfigError):
            dft_codebook(0, 4)
        with pytest.raises(ConfigError):
            array_response(0.0, 0)


class TestChannelSampling:
    def test_same_seed_same_channel(self):
        p = default_params()
        a = sample_channel((50.0, 20.0), (0.0, 0.0), 4, p, np.random.default_rng(5))
        b = sample_channel((50.0, 20.0), (0.0, 0.0), 4, p, np.random.default_rng(5))
        np.testing.assert_array_equal(a.coefficients, b.coefficients)
        assert a.large_scale_gain == b.large_scale_gain

    def test_mean_power_is_antennas_times_gain(self):
        # E[||h||^2] = M * G; Monte Carlo within 2%.
        p = default_params()
        rng = np.random.default_rng(11)
        m_ant = 4
        acc = 0.0
        n = 4000
        for _ in range(n):
            h = sample_channel((60.0, 0.0), (0.0, 0.0), m_ant, p, rng)
            acc += float(np.vdot(h.coefficients, h.coefficients).real)
        gain = large_scale_gain((60.0, 0.0), (0.0, 0.0), p)
        assert acc / n == pytest.approx(m_ant * gain, rel=0.02)

    def test_single_path_points_at_user(self):
        # With one path the channel direction equals the LoS steering vector.
        p = default_params(num_paths=1)
        ue, bs = (35.0, 35.0), (0.0, 0.0)
        h = sample_channel(ue, bs, 4, p, np.random.default_rng(3)).coefficients
        los = array_response(math.atan2(35.0, 35.0), 4)
        cosine = abs(np.vdot(los, h)) / np.linalg.norm(h)
        assert cosine == pytest.approx(1.0, rel=1e-12)

    def test_gain_attached_to_sample(self):
        p = default_params()
        h = sample_channel((10.0, 0.0), (0.0, 0.0), 4, p, np.random.default_rng(0))
        assert h.large_scale_gain == pytest.approx(
            large_scale_gain((10.0, 0.0), (0.0, 0.0), p), rel=1e-12
        )
