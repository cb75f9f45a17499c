import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import zenokit as zk
from conftest import GAMMA_1D, G_D, QUBIT_FREQ, make_hotspot_spectrum
from zenokit.units import TWO_PI, mhz_to_angular


def lorentzian_pair_rate(coupling_sq, width, dephasing, detuning):
    """Closed-form convolution of a defect line with the dephasing filter.

    The convolution of two Lorentzians is a Lorentzian whose width is
    the sum of the two; verified against adaptive quadrature before
    being frozen here.
    """
    total = dephasing + width / 2.0
    return 2.0 * coupling_sq * total / (total**2 + detuning**2)


def convolution_window(width, dephasing, detuning, center):
    """Window/resolution tight enough for 1e-3 agreement.

    The analytic normalization assumes the spectrum continues flat
    outside the window, which inflates a lone-peak result by roughly
    (2/pi) * dephasing / half_width; the half-width below keeps that
    bias under ~3e-4 while the step resolves both the peak and filter.
    """
    half = max(50.0 * (dephasing + width), 2200.0 * dephasing, 3.0 * abs(detuning))
    step = min(dephasing if dephasing > 0 else width, width / 2.0) / 8.0
    resolution = int(math.ceil(2.0 * half / step)) + 1
    return (center - half, center + half), resolution


class TestNormalization:
    def test_symmetric_ten_widths(self):
        ctx = zk.MeasurementContext(freq=3.0, dephasing=0.5)
        norm = zk.window_normalization(ctx, (3.0 - 5.0, 3.0 + 5.0))
        assert norm == pytest.approx(2.0 / math.pi * math.atan(10.0), rel=1e-14)
        assert norm == pytest.approx(0.93655, abs=1e-5)

    def test_symmetric_one_width(self):
        ctx = zk.MeasurementContext(freq=0.0, dephasing=2.0)
        assert zk.window_normalization(ctx, (-2.0, 2.0)) == pytest.approx(0.5, rel=1e-14)

    def test_half_lorentzian(self):
        ctx = zk.MeasurementContext(freq=1.0, dephasing=0.3)
        assert zk.window_normalization(ctx, (1.0, math.inf)) == pytest.approx(0.5, rel=1e-14)

    def test_approaches_one_for_wide_window(self):
        ctx = zk.MeasurementContext(freq=0.0, dephasing=1.0)
        assert zk.window_normalization(ctx, (-1e9, 1e9)) == pytest.approx(1.0, abs=1e-8)

    def test_errors(self):
        with pytest.raises(zk.DomainError):
            zk.window_normalization(zk.MeasurementContext(0.0, 0.0), (-1.0, 1.0))
        with pytest.raises(zk.DomainError):
            zk.window_normalization(zk.MeasurementContext(0.0, 1.0), (1.0, -1.0))


class TestDecayRate:
    def test_flat_spectrum_returns_background(self):
        s = zk.ParametricSpectrum(background=0.037)
        ctx = zk.MeasurementContext(freq=10.0, dephasing=1.3)
        result = zk.decay_rate(s, ctx, window=(10.0 - 65.0, 10.0 + 65.0))
        assert result.rate == pytest.approx(0.037, rel=1e-8)

    def test_flat_tabulated_any_context(self):
        grid = np.linspace(-100.0, 100.0, 301)
        s = zk.TabulatedSpectrum(grid, np.full(301, 0.02))
        for freq, hw in ((0.0, 1.0), (-30.0, 5.0), (42.0, 0.2)):
            ctx = zk.MeasurementContext(freq=freq, dephasing=hw)
            assert zk.decay_rate(s, ctx, resolution=40001).rate == pytest.approx(
                0.02, rel=1e-8
            )

    def test_delta_limit_is_interpolated_spectrum(self):
        s = make_hotspot_spectrum()
        probe = QUBIT_FREQ + mhz_to_angular(1.234)
        for dephasing in (0.0, 1e-10):
            ctx = zk.MeasurementContext(freq=probe, dephasing=dephasing)
            result = zk.decay_rate(s, ctx)
            assert result.rate == s.rate_at(probe)
            assert result.norm == 1.0

    def test_delta_limit_strict_range(self):
        s = make_hotspot_spectrum(extrapolation="raise")
        outside = s.omega_max + 1.0
        with pytest.raises(zk.RangeError):
            zk.decay_rate(s, zk.MeasurementContext(freq=outside, dephasing=0.0))

    def test_single_peak_closed_form(self):
        # one spot check; the acceptance suite runs the full 16-point matrix
        width, dephasing, detuning = GAMMA_1D, GAMMA_1D, 5.0 * GAMMA_1D
        peak = zk.TlsPeak(center=QUBIT_FREQ - detuning, width=width, coupling_sq=G_D**2)
        s = zk.ParametricSpectrum(background=0.0, peaks=(peak,))
        ctx = zk.MeasurementContext(freq=QUBIT_FREQ, dephasing=dephasing)
        window, resolution = convolution_window(width, dephasing, detuning, QUBIT_FREQ)
        result = zk.decay_rate(s, ctx, window=window, resolution=resolution)
        expected = lorentzian_pair_rate(G_D**2, width, dephasing, detuning)
        assert result.rate == pytest.approx(expected, rel=1e-3)

    def test_grid_convergence_at_default_resolution(self):
        s = make_hotspot_spectrum()
        ctx = zk.MeasurementContext(freq=QUBIT_FREQ, dephasing=TWO_PI * 0.3)
        coarse = zk.decay_rate(s, ctx, resolution=4001).rate
        fine = zk.decay_rate(s, ctx, resolution=8001).rate
        assert abs(fine - coarse) / coarse < 1e-4

    def test_window_bounds_rate(self):
        s = make_hotspot_spectrum()
        lo, hi = s.omega_min, s.omega_max
        grid_min, grid_max = s.rates.min(), s.rates.max()
        for freq_off, dephasing in ((0.0, 0.5), (-20.0, 3.0), (10.0, 12.0)):
            ctx = zk.MeasurementContext(freq=QUBIT_FREQ + freq_off, dephasing=dephasing)
            rate = zk.decay_rate(s, ctx).rate
            assert grid_min * (1 - 1e-6) <= rate <= grid_max * (1 + 1e-6)

    def test_errors(self):
        s = zk.ParametricSpectrum(background=0.01)
        ctx = zk.MeasurementContext(freq=0.0, dephasing=1.0)
        with pytest.raises(zk.DomainError):
            zk.decay_rate(s, ctx, window=(1.0, -1.0))
        with pytest.raises(zk.DomainError):
            zk.decay_rate(s, ctx, window=(-1.0, 1.0), resolution=51)
        with pytest.raises(zk.DomainError):
            zk.MeasurementContext(freq=0.0, dephasing=-1.0)

    @settings(max_examples=40, deadline=None)
    @given(shift=st.floats(-1e3, 1e3), dephasing=st.floats(0.05, 5.0))
    def test_translation_covariance(self, shift, dephasing):
        grid = np.linspace(-40.0, 40.0, 801)
        rates = 0.01 + 0.1 / (1.0 + (grid - 7.0) ** 2)
        ctx = zk.MeasurementContext(freq=3.0, dephasing=dephasing)
        base = zk.decay_rate(zk.TabulatedSpectrum(grid, rates), ctx).rate
        moved = zk.decay_rate(
            zk.TabulatedSpectrum(grid + shift, rates),
            zk.MeasurementContext(freq=3.0 + shift, dephasing=dephasing),
        ).rate
        assert moved == pytest.approx(base, rel=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(
        scale_pow=st.integers(-6, 6),
        scale_odd=st.floats(0.1, 10.0),
        dephasing=st.floats(0.05, 5.0),
    )
    def test_rate_scaling(self, scale_pow, scale_odd, dephasing):
        grid = np.linspace(-40.0, 40.0, 801)
        rates = 0.01 + 0.1 / (1.0 + (grid - 7.0) ** 2)
        ctx = zk.MeasurementContext(freq=0.0, dephasing=dephasing)
        base = zk.decay_rate(zk.TabulatedSpectrum(grid, rates), ctx).rate
        # powers of two rescale bit-exactly; general factors to rounding
        two = 2.0**scale_pow
        exact = zk.decay_rate(zk.TabulatedSpectrum(grid, two * rates), ctx).rate
        assert exact == two * base
        general = zk.decay_rate(zk.TabulatedSpectrum(grid, scale_odd * rates), ctx).rate
        assert general == pytest.approx(scale_odd * base, rel=1e-12)


class TestSweep:
    def test_zero_amplitude_is_unmeasured_rate(self, device_calibration):
        s = make_hotspot_spectrum()
        results = zk.sweep(s, device_calibration, QUBIT_FREQ, [0.0])
        assert results[0].rate == s.rate_at(QUBIT_FREQ)
        assert results[0].context.nbar == 0.0

    def test_antizeno_rising_for_hotspot_under_shift(self):
        # hot spot below the qubit, calibration shifting downward:
        # the decay rate grows monotonically until the peak is crossed.
        # fine resolution so even the narrowest filter in the sweep is
        # resolved by the grid
        cal = zk.ReadoutCalibration(
            stark_quad=-mhz_to_angular(825.0),
            stark_quartic=-mhz_to_angular(5619.0),
            dephasing_quad=mhz_to_angular(429.0),
            chi=-mhz_to_angular(0.98),
        )
        s = make_hotspot_spectrum(offset_mhz=-3.0)
        amplitudes = np.linspace(0.0, 0.05, 21)
        results = zk.sweep(s, cal, QUBIT_FREQ, amplitudes, resolution=120001)
        rates = np.array([r.rate for r in results])
        shifts = np.array([r.context.freq - QUBIT_FREQ for r in results])
        before_peak = shifts >= -mhz_to_angular(3.0)
        assert np.all(np.diff(rates[before_peak]) >= 0)
        assert rates[before_peak][-1] > 2.0 * rates[0]

    def test_zeno_falling_when_centered_on_hotspot(self, device_calibration):
        # qubit parked on the hot spot: dephasing broadens it away into
        # the valley, so the rate decreases initially
        s = make_hotspot_spectrum(offset_mhz=0.0)
        amplitudes = np.linspace(0.0, 0.02, 11)
        results = zk.sweep(s, device_calibration, QUBIT_FREQ, amplitudes, resolution=120001)
        rates = np.array([r.rate for r in results])
        assert np.all(np.diff(rates) <= 0)

    def test_context_consistency(self, device_calibration):
        s = make_hotspot_spectrum()
        amplitudes = [0.0, 0.01, 0.02]
        results = zk.sweep(s, device_calibration, QUBIT_FREQ, amplitudes)
        for eps, r in zip(amplitudes, results):
            stark = device_calibration.stark_shift(eps)
            assert r.context.freq == QUBIT_FREQ + stark
            assert 2.0 * device_calibration.chi * r.context.nbar == pytest.approx(
                stark, rel=1e-12, abs=1e-300
            )

    def test_input_validation(self, device_calibration):
        s = make_hotspot_spectrum()
        with pytest.raises(zk.DomainError):
            zk.sweep(s, device_calibration, QUBIT_FREQ, [-0.01, 0.0])
        with pytest.raises(zk.DomainError):
            zk.sweep(s, device_calibration, QUBIT_FREQ, [0.02, 0.01])

    def test_residual_dephasing_floor(self, device_calibration):
        s = make_hotspot_spectrum()
        residual = TWO_PI * 0.05
        results = zk.sweep(
            s, device_calibration, QUBIT_FREQ, [0.0], residual_dephasing=residual
        )
        assert results[0].context.dephasing == residual
        assert results[0].norm < 1.0
