import numpy as np
import pytest

from noiseradar.core import BatchGrid, CPIConfig, RadarParams
from noiseradar.metrics import (clutter_bin_for, clutter_free_search, gain_vs_integration_time, measure_sinr,
                                smear_footprint, smeared_target_average)
from noiseradar.processor import VelocityHypothesis, process_cpi
from noiseradar.scene import PointTarget, Scene, synthesize_echo
from noiseradar.waveform import WaveformSpec, generate_noise

RADAR = RadarParams(1.3e9, 31.25e6, 25e6)


def test_measure_sinr_basic():
    power = np.ones((16, 32))
    power[5, 7] = 1000.0
    r = measure_sinr(power, clutter_halfwidth=None)
    assert r.peak_location == (5, 7)
    assert r.sinr_db == pytest.approx(30.0)
    assert r.exclusion["floor_cells"] == 16 * 32 - 49


def test_clutter_band_excluded_and_wraps():
    power = np.ones((16, 32))
    power[0] = 50.0
    power[15] = 50.0
    power[8, 3] = 100.0
    r = measure_sinr(power, search_region=((4, 12), (0, 32)), clutter_halfwidth=1)
    assert r.peak_location == (8, 3)
    assert r.floor_power_db == pytest.approx(0.0)
    mask = clutter_free_search(CPIConfig(RADAR, BatchGrid(16, 32, RADAR.sample_rate)), 0, 1)
    r2 = measure_sinr(power, mask, clutter_halfwidth=1)
    assert r2.peak_location == (8, 3)


def test_ties_and_errors():
    power = np.ones((4, 4))
    assert measure_sinr(power, guard=0, clutter_halfwidth=None).peak_location == (0, 0)
    with pytest.raises(ValueError, match="empty"):
        measure_sinr(power, ((2, 2), (0, 4)))
    with pytest.raises(ValueError, match="floor"):
        measure_sinr(power, guard=3)
    with pytest.raises(ValueError):
        measure_sinr(np.ones(4))
    with pytest.raises(ValueError, match="mask shape"):
        measure_sinr(power, np.ones((2, 2), bool))


def test_clutter_bin_follows_doppler_compensation():
    config = CPIConfig(RADAR, BatchGrid(64, 256, RADAR.sample_rate))
    assert clutter_bin_for(VelocityHypothesis.for_mode("stretch", 300), config) == 0
    b = clutter_bin_for(VelocityHypothesis.for_mode("both", 300), config)
    assert b == config.axes.doppler_bin(-300)


def test_smear_footprint():
    config = CPIConfig(RADAR, BatchGrid(512, 4096, RADAR.sample_rate))
    truth = PointTarget(600.0, 300.0)
    rows, cols = smear_footprint(truth, VelocityHypothesis(), config)
    migration = 2 * 300 * config.integration_time * RADAR.sample_rate / RADAR.wave_speed
    assert len(cols) == round(migration)
    assert len(rows) == len(cols)
    rows_c, cols_c = smear_footprint(truth, VelocityHypothesis.for_mode("both", 300), config)
    assert len(cols_c) == 1 and rows_c[0] == 0


def test_smeared_average_and_gain_curve():
    config = CPIConfig(RADAR, BatchGrid(8, 1024, RADAR.sample_rate))
    n = 8 * 1024 * 8
    x = generate_noise(WaveformSpec(1, n, RADAR))
    y = synthesize_echo(x, Scene([PointTarget(200.0, 20.0)], noise_power=1.0), RADAR, 1024)
    h = VelocityHypothesis.for_mode("both", 20.0)
    curve = gain_vs_integration_time(y, x, config, h, 0.0, 3)
    assert curve.gains[0] == 0 and np.all(np.diff(curve.gains) > 2)
    assert len(curve.to_dict()["points"]) == 4
    (m,) = process_cpi(y.slice(0, 8192), x.slice(0, 8192), [h], config)
    assert smeared_target_average(m, PointTarget(200.0, 20.0)) == pytest.approx(
        10 * np.log10(m.power.max()), abs=3)
    with pytest.raises(ValueError, match="latest possible start"):
        gain_vs_integration_time(y, x, config, h, 0.001, 3)
