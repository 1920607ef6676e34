import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noiseradar.core import BatchGrid, CPIConfig, RadarParams
from noiseradar.processor import (Mode, SpectraKind, VelocityHypothesis, batch_spectra, correlate_direct,
                                  doppler_modulate, process_cpi, process_stream, range_doppler_map,
                                  resample_reference, stretch_phase, iter_batches)
from noiseradar.scene import PointTarget, Scene, synthesize_echo
from noiseradar.waveform import IQBuffer, WaveformSpec, generate_noise

RADAR = RadarParams(1.3e9, 31.25e6, 25e6)


def _config(p=16, m=1024, window="rectangular"):
    return CPIConfig(RADAR, BatchGrid(p, m, RADAR.sample_rate), window)


def _x(n, seed=1):
    return generate_noise(WaveformSpec(seed, n, RADAR))


def test_hypothesis_modes():
    for mode in Mode:
        assert VelocityHypothesis.for_mode(mode, 10).mode is mode
    assert VelocityHypothesis().is_identity
    assert VelocityHypothesis.for_mode("both", 0).is_identity
    assert VelocityHypothesis.for_mode("resample", 5).to_dict()["resample_enabled"]


def test_correlate_direct():
    x = np.arange(8) + 1j
    assert correlate_direct(x, x, 0)[0] == pytest.approx(np.vdot(x, x))
    with pytest.raises(ValueError):
        correlate_direct(x, x[:4], 1)
    with pytest.raises(ValueError):
        correlate_direct(x, x, 8)


def test_static_target_lands_on_its_bin():
    config = _config()
    x = _x(config.grid.total_samples)
    r0 = 37 * config.axes.range_bin_width
    y = synthesize_echo(x, Scene([PointTarget(r0)]), RADAR, 1024)
    (m,) = process_cpi(y, x, [VelocityHypothesis()], config)
    assert np.unravel_index(np.argmax(m.power), m.shape) == (0, 37)


def test_self_correlation_peak_value():
    config = _config(8, 256)
    x = _x(config.grid.total_samples)
    (m,) = process_cpi(x, x, [VelocityHypothesis()], config)
    energy = np.sum(np.abs(x.samples) ** 2)
    assert m.power[0, 0] == pytest.approx(energy**2, rel=1e-9)


def test_moving_target_doppler_bin():
    config = _config(64, 1024)
    v = 10 * config.axes.velocity_bin_width
    x = _x(config.grid.total_samples)
    y = synthesize_echo(x, Scene([PointTarget(300.0, v)]), RADAR, 1024)
    none, both = process_cpi(y, x, [VelocityHypothesis(), VelocityHypothesis.for_mode("both", v)], config)
    assert np.unravel_index(np.argmax(none.power), none.shape)[0] == 10
    assert np.unravel_index(np.argmax(both.power), both.shape)[0] == 0


def test_staged_api_matches_streaming():
    config = _config(8, 512, "hann")
    x = _x(config.grid.total_samples)
    y = synthesize_echo(x, Scene([PointTarget(200.0, 40.0)], noise_power=0.1), RADAR, 512)
    v = 40.0
    h = VelocityHypothesis.for_mode("both", v)
    xs = batch_spectra(doppler_modulate(x, v, RADAR), config.grid, config.window, "reference")
    xs = stretch_phase(xs, v, RADAR)
    ys = batch_spectra(y, config.grid, "rectangular", SpectraKind.RECEIVED)
    staged = range_doppler_map(ys, xs, h, config)
    (streamed,) = process_cpi(y, x, [h], config)
    assert np.allclose(staged.power, streamed.power, rtol=1e-9, atol=1e-9 * staged.power.max())
    with pytest.raises(ValueError):
        stretch_phase(ys, v, RADAR)


@settings(max_examples=20, deadline=None)
@given(st.integers(-40, 40), st.integers(-5, 5))
def test_doppler_and_stretch_commute_up_to_phase(k, shift):
    """With the Doppler shift on a DFT bin and a whole-sample stretch advance,
    modulating then shifting equals shifting then modulating times the
    constant exp(2 pi i k s / M) per batch, so the maps are identical."""
    m = 256
    config = _config(4, m)
    x = _x(config.grid.total_samples)
    v_d = k * RADAR.sample_rate / m * RADAR.wave_speed / (2 * RADAR.carrier_freq)
    v_s = shift * RADAR.wave_speed / (2 * RADAR.sample_rate * config.grid.batch_duration)
    a = stretch_phase(batch_spectra(doppler_modulate(x, v_d, RADAR), config.grid, "rectangular", "reference"),
                      v_s, RADAR).rows
    rows = stretch_phase(batch_spectra(x, config.grid, "rectangular", "reference"), v_s, RADAR).rows
    n = np.arange(config.grid.total_samples).reshape(4, m)
    b = np.fft.fft(np.fft.ifft(rows, axis=1) * np.exp(2j * np.pi * k * n / m), axis=1)
    phase = np.exp(-2j * np.pi * k * shift * np.arange(4) / m)[:, None]
    assert np.allclose(a * phase, b, rtol=0, atol=1e-12)


def test_resample_reference_matches_generator():
    spec = WaveformSpec(3, 1 << 14, RADAR)
    x = generate_noise(spec)
    v = 300.0
    r = resample_reference(x, v, RADAR).samples
    scale = 1 + 2 * v / RADAR.wave_speed
    # compare against a tiny direct band-limited interpolation at a few points
    n = np.array([100, 5000, 16000])
    t = n * scale
    k = np.arange(-3000, 3000)
    base = np.floor(t).astype(int)
    ref = [np.sum(x.segment(b - 3000, b + 3000) * np.sinc(tt - b - k)) for b, tt in zip(base, t)]
    assert np.allclose(r[n], ref, atol=5e-3)


def test_resample_and_both_agree_on_desk_like_scene():
    config = _config(256, 2048)
    x = _x(config.grid.total_samples)
    y = synthesize_echo(x, Scene([PointTarget(300.0, 300.0)]), RADAR, 2048)
    both, res = process_cpi(y, x, [VelocityHypothesis.for_mode("both", 300), VelocityHypothesis.for_mode("resample", 300)], config)
    assert abs(10 * np.log10(both.power.max() / res.power.max())) < 0.5


def test_threads_do_not_change_results():
    config = _config(16, 512)
    x = _x(config.grid.total_samples)
    y = synthesize_echo(x, Scene([PointTarget(100.0, 80.0)], noise_power=0.5), RADAR, 512)
    hs = [VelocityHypothesis.for_mode(m, 80.0) for m in Mode]
    one = process_cpi(y, x, hs, config, workers=1)
    four = process_cpi(y, x, hs, config, workers=4)
    assert all(np.array_equal(a.power, b.power) for a, b in zip(one, four))


def test_stream_errors():
    config = _config(4, 64)
    x = IQBuffer(np.ones(256, complex), RADAR.sample_rate)
    h = [VelocityHypothesis()]
    with pytest.raises(ValueError, match="ended after 3"):
        process_stream(iter([np.ones(64)] * 3), x, h, config)
    with pytest.raises(ValueError, match="longer"):
        process_stream(iter([np.ones(64)] * 5), x, h, config)
    with pytest.raises(ValueError, match="shape"):
        process_stream(iter([np.ones(32)] * 4), x, h, config)
    with pytest.raises(ValueError, match="CPI needs"):
        process_cpi(x.slice(0, 100), x, h, config)
    assert len(list(iter_batches(x, config.grid))) == 4
