import numpy as np
import pytest

from noiseradar.core import BatchGrid, CPIConfig, RadarParams
from noiseradar.io import (FileReference, config_hash, iter_iq_batches, provenance, read_iq, read_iq_meta,
                           read_map, write_iq, write_map)
from noiseradar.processor import VelocityHypothesis, process_cpi
from noiseradar.waveform import IQBuffer, WaveformSpec, generate_noise, generate_range

RADAR = RadarParams(1.3e9, 31.25e6, 25e6)


def test_iq_round_trip(tmp_path):
    x = generate_noise(WaveformSpec(2, 5000, RADAR))
    write_iq(tmp_path / "x.bin", x, {"role": "reference"})
    meta = read_iq_meta(tmp_path / "x.bin")
    assert meta["seed"] == 2 and meta["length"] == 5000 and meta["role"] == "reference"
    back = read_iq(tmp_path / "x.bin")
    assert np.allclose(back.samples, x.samples, atol=1e-6)
    batches = list(iter_iq_batches(tmp_path / "x.bin", 1000, 500, 4))
    assert len(batches) == 4 and np.array_equal(batches[1], back.samples[1500:2500])
    with pytest.raises(ValueError, match="exceed"):
        list(iter_iq_batches(tmp_path / "x.bin", 1000, 500, 5))


def test_length_mismatch_and_missing_sidecar(tmp_path):
    write_iq(tmp_path / "x.bin", IQBuffer(np.ones(10), 1.0))
    (tmp_path / "x.bin").write_bytes(b"\0" * 8)
    with pytest.raises(ValueError, match="sidecar says 10"):
        read_iq(tmp_path / "x.bin")
    with pytest.raises(FileNotFoundError, match="sidecar"):
        read_iq(tmp_path / "none.bin")


def test_file_reference_regenerates_outside(tmp_path):
    spec = WaveformSpec(4, 4096, RADAR)
    x = generate_noise(spec)
    write_iq(tmp_path / "x.bin", x)
    ref = FileReference(tmp_path / "x.bin", RADAR).at(100)
    assert ref.start == 100
    seg = ref.segment(-64, 4160)
    expected = generate_range(spec, -64, 4160).astype(np.complex64)
    assert np.allclose(seg, expected, atol=1e-6)


def test_map_round_trip(tmp_path):
    config = CPIConfig(RADAR, BatchGrid(8, 64, RADAR.sample_rate))
    x = generate_noise(WaveformSpec(1, 512, RADAR))
    (m,) = process_cpi(x, x, [VelocityHypothesis()], config)
    write_map(tmp_path / "map", m, {"provenance": provenance({"a": 1})}, csv_shape=(4, 16))
    power, meta = read_map(tmp_path / "map")
    assert power.shape == (8, 64) and np.allclose(power, m.power, rtol=1e-6)
    assert meta["provenance"]["config_sha256"] == config_hash({"a": 1})
    lines = (tmp_path / "map.csv").read_text().splitlines()
    assert lines[0] == "doppler_bin,range_bin,velocity_mps,range_m,power_db" and len(lines) == 1 + 4 * 16
