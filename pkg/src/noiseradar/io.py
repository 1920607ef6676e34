"""Binary + JSON sidecar file formats for IQ buffers and range-Doppler maps.

IQ files: little-endian interleaved float32 (re, im) with ``<stem>.json``
beside ``<stem>.bin``. Map files: row-major P x M little-endian float32
linear power, a JSON sidecar, and a max-pooled CSV for plotting.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .core import RadarParams
from .waveform import IQBuffer, WaveformSpec, generate_range

_IQ_DTYPE = np.dtype("<f4")
_MAP_DTYPE = np.dtype("<f4")


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def provenance(config_obj) -> dict:
    return {"tool": "noiseradar", "version": __version__, "config_sha256": config_hash(config_obj)}


def write_iq(path: str | Path, buffer: IQBuffer, meta: dict | None = None) -> None:
    path = Path(path)
    inter = np.empty(2 * len(buffer), dtype=_IQ_DTYPE)
    inter[0::2] = buffer.samples.real
    inter[1::2] = buffer.samples.imag
    inter.tofile(path)
    sidecar = {"sample_rate_hz": buffer.sample_rate, "length": len(buffer)}
    if buffer.origin is not None:
        sidecar.update(seed=buffer.origin.seed, bandwidth_hz=buffer.origin.radar.bandwidth,
                       rms_level=buffer.origin.rms_level)
    sidecar.update(meta or {})
    dump_json(sidecar, sidecar_path(path))


def read_iq_meta(path: str | Path) -> dict:
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise FileNotFoundError(f"{meta_path}: sidecar missing")
    return json.loads(meta_path.read_text(encoding="utf-8"))


def _open_iq(path: str | Path) -> tuple[np.ndarray, dict]:
    meta = read_iq_meta(path)
    raw = np.memmap(path, dtype=_IQ_DTYPE, mode="r")
    if raw.size != 2 * meta["length"]:
        raise ValueError(f"{path}: holds {raw.size // 2} samples, sidecar says {meta['length']}")
    return raw, meta


def read_iq(path: str | Path) -> IQBuffer:
    raw, meta = _open_iq(path)
    samples = np.empty(meta["length"], dtype=np.complex128)
    samples.real = raw[0::2]
    samples.imag = raw[1::2]
    return IQBuffer(samples, float(meta["sample_rate_hz"]))


def iter_iq_batches(path: str | Path, batch_len: int, first: int, count: int):
    """Yield ``count`` consecutive batches starting at sample ``first``,
    reading one batch from disk at a time."""
    raw, meta = _open_iq(path)
    if first < 0 or first + batch_len * count > meta["length"]:
        raise ValueError(f"{path}: samples [{first}, {first + batch_len * count}) exceed length {meta['length']}")
    for p in range(count):
        lo = 2 * (first + p * batch_len)
        chunk = np.asarray(raw[lo:lo + 2 * batch_len], dtype=np.float64)
        yield chunk[0::2] + 1j * chunk[1::2]


class FileReference:
    """Reference source reading an IQ file one segment at a time.

    Indices outside the file are regenerated from the waveform seed recorded
    in the sidecar when available and are zero otherwise.
    """

    def __init__(self, path: str | Path, radar: RadarParams, start: int = 0):
        self.raw, self.meta = _open_iq(path)
        self.length = int(self.meta["length"])
        self.start = start
        self.origin = None
        if "seed" in self.meta:
            self.origin = WaveformSpec(int(self.meta["seed"]), max(self.length, 16), radar,
                                       float(self.meta.get("rms_level", 1.0)))

    def at(self, start: int) -> "FileReference":
        other = object.__new__(FileReference)
        other.__dict__.update(self.__dict__)
        other.start = start
        return other

    def segment(self, lo: int, hi: int) -> np.ndarray:
        out = np.zeros(hi - lo, dtype=np.complex128)
        a, b = max(lo, 0), min(hi, self.length)
        if a < b:
            chunk = np.asarray(self.raw[2 * a:2 * b], dtype=np.float64)
            out[a - lo:b - lo] = chunk[0::2] + 1j * chunk[1::2]
        if self.origin is not None:
            if lo < 0:
                out[:min(0, hi) - lo] = generate_range(self.origin, lo, min(0, hi)).astype(np.complex64)
            if hi > self.length:
                s = max(lo, self.length)
                out[s - lo:] = generate_range(self.origin, s, hi).astype(np.complex64)
        return out


def _pool_edges(size: int, target: int) -> np.ndarray:
    step = max(1, -(-size // target))
    return np.arange(0, size, step)


def write_map(stem: str | Path, rd_map, meta: dict | None = None, csv_shape: tuple[int, int] = (64, 256)) -> None:
    """Write ``stem``.bin / .json / .csv for a RangeDopplerMap."""
    stem = Path(stem)
    power = rd_map.power
    power.astype(_MAP_DTYPE).tofile(stem.with_suffix(".bin"))
    config = rd_map.config
    sidecar = {
        "shape": list(power.shape),
        "dtype": "float32-le",
        "layout": "row-major, rows = Doppler bins, columns = range bins",
        "hypothesis": rd_map.hypothesis.to_dict(),
        "axes": rd_map.axes.to_dict(),
        "config": {
            "carrier_freq_hz": config.radar.carrier_freq,
            "sample_rate_hz": config.radar.sample_rate,
            "bandwidth_hz": config.radar.bandwidth,
            "wave_speed_mps": config.radar.wave_speed,
            "batch_count": config.grid.batch_count,
            "batch_len": config.grid.batch_len,
            "window": config.window.value,
        },
    }
    sidecar.update(meta or {})
    dump_json(sidecar, stem.with_suffix(".json"))

    rows = _pool_edges(power.shape[0], csv_shape[0])
    cols = _pool_edges(power.shape[1], csv_shape[1])
    pooled = np.maximum.reduceat(np.maximum.reduceat(power, rows, axis=0), cols, axis=1)
    axes = rd_map.axes
    with open(stem.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doppler_bin", "range_bin", "velocity_mps", "range_m", "power_db"])
        for i, l in enumerate(rows):
            for j, m in enumerate(cols):
                value = pooled[i, j]
                db = 10.0 * np.log10(value) if value > 0 else -np.inf
                writer.writerow([int(l), int(m), f"{float(axes.velocity(l)):.6g}",
                                 f"{float(axes.range_m(m)):.6g}", f"{db:.2f}"])


def read_map(stem: str | Path) -> tuple[np.ndarray, dict]:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    power = np.fromfile(stem.with_suffix(".bin"), dtype=_MAP_DTYPE).reshape(meta["shape"])
    return power, meta
