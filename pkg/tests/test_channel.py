"""Transfer-matrix channel model: closed forms, invariants, impulse synthesis."""

import numpy as np
import pytest

from drillcomm.channel import (
    ChannelRealization,
    DrillStringSpec,
    channel_realization,
    discrete_impulse_response,
    element_matrix,
    element_matrix_zero_inverse,
    frequency_response,
    passband_intervals,
    scatter,
    string_matrix,
    wavenumber,
)
from conftest import (DENSITY, JOINT_AREA, JOINT_LEN, PIPE_AREA, PIPE_LEN,
                      WAVE_SPEED)


class TestWavenumber:
    def test_zero_frequency(self):
        assert wavenumber(0.0, 5130.0) == 0.0

    def test_direct_value(self):
        # 2*pi*1000/5130 evaluated independently
        assert wavenumber(1000.0, 5130.0) == pytest.approx(1.2247924575398803,
                                                           rel=1e-12)

    def test_unit_wavenumber_identity(self):
        c = 5130.0
        assert wavenumber(c / (2 * np.pi), c) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_bad_speed(self):
        with pytest.raises(ValueError):
            wavenumber(100.0, 0.0)
        with pytest.raises(ValueError):
            wavenumber(100.0, -1.0)

    def test_rejects_negative_frequency(self):
        with pytest.raises(ValueError):
            wavenumber(-5.0, 5130.0)


class TestElementMatrix:
    def test_at_zero(self):
        k, a, rho, c = 1.3, 0.02, 7870.0, 5130.0
        m = element_matrix(k, 0.0, a, rho, c)
        w = rho * a * c * c * k * k
        expected = np.array([[0.0, 1j * k], [w, 0.0]])
        np.testing.assert_allclose(m, expected, atol=1e-12)

    def test_quarter_wave(self):
        k, a, rho, c = 0.7, 0.005, 7870.0, 5130.0
        x = (np.pi / 2) / k
        m = element_matrix(k, x, a, rho, c)
        w = rho * a * c * c * k * k
        # rows scale with k and w respectively; zeros are zero at those scales
        assert m[0, 0] == pytest.approx(-k, rel=1e-12)
        assert abs(m[0, 1]) < 1e-12 * k
        assert abs(m[1, 0]) < 1e-12 * w
        assert m[1, 1] == pytest.approx(1j * w, rel=1e-12)

    def test_entries_match_independent_evaluation(self):
        # re-evaluate the four closed-form entries with plain math
        import math
        k, x, a, rho, c = 1.2248, 8.76, 52.276e-4, 7870.0, 5130.0
        m = element_matrix(k, x, a, rho, c)
        s, co = math.sin(k * x), math.cos(k * x)
        w = rho * a * c * c * k * k
        assert m[0, 0] == pytest.approx(-k * s, rel=1e-12)
        assert m[0, 1] == pytest.approx(1j * k * co, rel=1e-12)
        assert m[1, 0] == pytest.approx(w * co, rel=1e-12)
        assert m[1, 1] == pytest.approx(1j * w * s, rel=1e-12)

    def test_zero_inverse_is_inverse(self):
        k, a, rho, c = 0.91, 0.012, 7870.0, 5130.0
        prod = element_matrix(k, 0.0, a, rho, c) @ \
            element_matrix_zero_inverse(k, a, rho, c)
        np.testing.assert_allclose(prod, np.eye(2), atol=1e-12)

    def test_rejects_dc(self):
        with pytest.raises(ValueError):
            element_matrix(0.0, 1.0, 0.01, 7870.0, 5130.0)
        with pytest.raises(ValueError):
            element_matrix_zero_inverse(0.0, 0.01, 7870.0, 5130.0)


class TestStringMatrix:
    def test_vanishing_segment_gives_identity(self):
        a, rho, c, k = 0.01, 7870.0, 5130.0, 1.0
        spec = DrillStringSpec(segments=((1e-12, a),), wave_speed=c, density=rho)
        m = string_matrix(spec, k)
        # in impedance-scaled coordinates the factor is a rotation by k*d
        scale = rho * a * c * c * k
        assert m[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert m[1, 1] == pytest.approx(1.0, abs=1e-12)
        assert abs(m[0, 1]) * scale < 1e-9
        assert abs(m[1, 0]) / scale < 1e-9

    def test_uniform_composition(self):
        a = 0.008
        one = DrillStringSpec(segments=((9.0, a),), wave_speed=5130.0,
                              density=7870.0)
        two = DrillStringSpec(segments=((4.0, a), (5.0, a)), wave_speed=5130.0,
                              density=7870.0)
        k = wavenumber(733.0, 5130.0)
        np.testing.assert_allclose(string_matrix(one, k), string_matrix(two, k),
                                   rtol=1e-10)

    def test_reference_string_against_brute_force(self, drill_spec):
        # independent oracle: multiply the 19 factor pairs with numpy.linalg.inv
        k = wavenumber(1000.0, WAVE_SPEED)
        m_oracle = np.eye(2, dtype=complex)
        for d, a in drill_spec.segments:
            ad = element_matrix(k, d, a, DENSITY, WAVE_SPEED)
            a0 = element_matrix(k, 0.0, a, DENSITY, WAVE_SPEED)
            m_oracle = ad @ np.linalg.inv(a0) @ m_oracle
        np.testing.assert_allclose(string_matrix(drill_spec, k), m_oracle,
                                   rtol=1e-9)

    def test_factors_are_unimodular(self, drill_spec):
        for f in (311.0, 987.0, 1523.0):
            m = string_matrix(drill_spec, wavenumber(f, WAVE_SPEED))
            assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-8)


class TestScatter:
    def test_uniform_rod_is_reflectionless(self, uniform_rod):
        for f in np.linspace(5.0, 2000.0, 100):
            s = scatter(uniform_rod, f)
            assert abs(s.reflection) < 1e-9
            assert abs(abs(s.transmission) - 1.0) < 1e-9

    def test_uniform_rod_transmission_phase(self, uniform_rod):
        # a matched rod only delays: T = exp(-j k d)
        d = uniform_rod.segments[0][0]
        f = 700.0
        k = wavenumber(f, WAVE_SPEED)
        s = scatter(uniform_rod, f)
        assert s.transmission == pytest.approx(np.exp(-1j * k * d), rel=1e-9)

    def test_energy_conservation(self, drill_spec):
        for f in np.linspace(700.0, 1500.0, 160):
            s = scatter(drill_spec, f)
            total = abs(s.reflection) ** 2 + abs(s.transmission) ** 2
            assert total == pytest.approx(1.0, abs=1e-6)

    def test_passbands_beat_stopbands(self, drill_spec):
        grid = np.arange(700.0, 1501.0)
        t = np.abs(frequency_response(drill_spec, grid))
        band = ((grid >= 878) & (grid <= 1049)) | ((grid >= 1169) & (grid <= 1320))
        stop = (grid >= 1060) & (grid <= 1160)
        assert np.median(t[band]) > 10 * np.median(t[stop])

    def test_split_segment_leaves_scatter_unchanged(self):
        base = DrillStringSpec(
            segments=((PIPE_LEN, PIPE_AREA), (JOINT_LEN, JOINT_AREA),
                      (PIPE_LEN, PIPE_AREA)),
            wave_speed=WAVE_SPEED, density=DENSITY)
        split = DrillStringSpec(
            segments=((3.5, PIPE_AREA), (PIPE_LEN - 3.5, PIPE_AREA),
                      (JOINT_LEN, JOINT_AREA), (PIPE_LEN, PIPE_AREA)),
            wave_speed=WAVE_SPEED, density=DENSITY)
        for f in (433.1, 987.6, 1311.9):
            sa, sb = scatter(base, f), scatter(split, f)
            assert abs(sa.reflection - sb.reflection) < 1e-9
            assert abs(sa.transmission - sb.transmission) < 1e-9

    def test_rejects_dc(self, drill_spec):
        with pytest.raises(ValueError):
            scatter(drill_spec, 0.0)


class TestFrequencyResponse:
    def test_empty_grid(self, drill_spec):
        assert frequency_response(drill_spec, []).size == 0

    def test_dc_is_zero(self, drill_spec):
        resp = frequency_response(drill_spec, [0.0, 100.0])
        assert resp[0] == 0
        assert resp[1] != 0

    def test_matches_pointwise_scatter(self, drill_spec):
        grid = np.array([710.0, 960.0, 1210.0])
        resp = frequency_response(drill_spec, grid)
        for f, t in zip(grid, resp):
            assert t == pytest.approx(scatter(drill_spec, f).transmission,
                                      rel=1e-12)

    def test_comb_band_spacing(self, drill_spec):
        # passband centers of the comb repeat at c / (2 (d_p + d_j)) = 285 Hz
        grid = np.arange(700.0, 1601.0)
        mag = np.abs(frequency_response(drill_spec, grid))
        bands = passband_intervals(grid, mag, threshold=0.5, merge_gap_hz=25.0)
        inner = [b for b in bands if b[0] > grid[0] and b[1] < grid[-1]]
        centers = np.array([(lo + hi) / 2 for lo, hi in inner])
        assert len(centers) >= 3
        spacings = np.diff(centers)
        assert np.all(np.abs(spacings - 285.0) <= 15.0)

    def test_rejects_unsorted_grid(self, drill_spec):
        with pytest.raises(ValueError):
            frequency_response(drill_spec, [100.0, 50.0])


class TestImpulseResponse:
    def test_allpass_gives_unit_impulse(self):
        h = discrete_impulse_response(np.ones(64), 64.0, 64)
        expected = np.zeros(64)
        expected[0] = 1.0
        np.testing.assert_allclose(h, expected, atol=1e-12)

    def test_linear_phase_gives_delay(self):
        n, tau = 64, 7
        resp = np.exp(-2j * np.pi * np.arange(n) * tau / n)
        h = discrete_impulse_response(resp, 64.0, n)
        expected = np.zeros(n)
        expected[tau] = 1.0
        np.testing.assert_allclose(h, expected, atol=1e-12)

    def test_round_trip(self, drill_spec):
        real = channel_realization(drill_spec, 2048.0, 2048, 848.0)
        np.testing.assert_allclose(np.fft.fft(real.impulse), real.response,
                                   atol=1e-9)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            discrete_impulse_response(np.ones(100), 2048.0, 2048)

    def test_reference_string_rings_for_hundreds_of_ms(self, drill_spec):
        real = channel_realization(drill_spec, 2048.0, 2048, 848.0)
        energy = np.abs(real.impulse) ** 2
        total = energy.sum()
        # direct arrival after the 89.76 m travel time, ~17.5 ms; only
        # time-aliased leakage may appear before it
        travel_samples = int(2048 * 89.76 / WAVE_SPEED)
        assert energy[:travel_samples - 4].sum() < 1e-2 * total
        assert travel_samples - 3 <= int(np.argmax(energy)) <= travel_samples + 40
        # a measurable tail persists beyond 100 ms
        assert energy[205:].sum() > 5e-3 * total


class TestSpecValidation:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DrillStringSpec(segments=(), wave_speed=5130.0, density=7870.0)

    def test_rejects_nonpositive_fields(self):
        with pytest.raises(ValueError):
            DrillStringSpec(segments=((0.0, 0.01),), wave_speed=5130.0,
                            density=7870.0)
        with pytest.raises(ValueError):
            DrillStringSpec(segments=((1.0, -0.01),), wave_speed=5130.0,
                            density=7870.0)
        with pytest.raises(ValueError):
            DrillStringSpec(segments=((1.0, 0.01),), wave_speed=5130.0,
                            density=0.0)

    def test_alternating_structure(self, drill_spec):
        assert len(drill_spec.segments) == 19
        assert drill_spec.segments[0] == (PIPE_LEN, PIPE_AREA)
        assert drill_spec.segments[1] == (JOINT_LEN, JOINT_AREA)
        assert drill_spec.segments[-1] == (PIPE_LEN, PIPE_AREA)

    def test_realization_validates_grid(self):
        with pytest.raises(ValueError):
            ChannelRealization(freq_grid=np.array([0.0, 1.0, 3.0]),
                               response=np.zeros(3, complex),
                               impulse=np.zeros(3, complex),
                               sample_rate=3.0, carrier=1.0)
