"""Received-signal synthesis for moving point targets, clutter and noise."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import RadarParams
from .waveform import IQBuffer, white_noise_range

_FD_PAD = 1024
_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class PointTarget:
    """Point scatterer with a quadratic range history.

    Positive ``radial_velocity`` means closing, i.e. decreasing range.
    ``amplitude`` is the complex two-way gain applied to the delayed waveform.
    """

    initial_range: float
    radial_velocity: float = 0.0
    radial_acceleration: float = 0.0
    amplitude: complex = 1.0

    def range_at(self, t):
        return self.initial_range - self.radial_velocity * t - 0.5 * self.radial_acceleration * t**2

    def delay(self, t, wave_speed: float):
        return 2.0 * self.range_at(t) / wave_speed


@dataclass(frozen=True)
class Scene:
    targets: tuple[PointTarget, ...] = ()
    clutter: tuple[PointTarget, ...] = ()
    noise_power: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "clutter", tuple(self.clutter))
        if self.noise_power < 0:
            raise ValueError(f"noise_power must be >= 0, got {self.noise_power}")
        for c in self.clutter:
            if c.radial_velocity != 0 or c.radial_acceleration != 0:
                raise ValueError("clutter scatterers must be stationary")

    @property
    def scatterers(self) -> tuple[PointTarget, ...]:
        return self.targets + self.clutter


def _check_delays(target: PointTarget, index: int, t0: float, t1: float, radar: RadarParams,
                  cpi: float) -> None:
    times = [t0, t1]
    if target.radial_acceleration != 0:
        vertex = -target.radial_velocity / target.radial_acceleration
        if t0 < vertex < t1:
            times.append(vertex)
    delays = target.delay(np.array(times), radar.wave_speed)
    if np.min(delays) < 0 or np.max(delays) >= cpi:
        raise ValueError(
            f"scatterer {index} delay range [{np.min(delays):.6g}, {np.max(delays):.6g}] s "
            f"is outside [0, {cpi:.6g}) s"
        )


def _delayed_block(x: IQBuffer, start: int, stop: int, delay_samples: float) -> np.ndarray:
    """x at absolute sample times start..stop-1 minus a constant (fractional) delay."""
    k = int(np.floor(delay_samples))
    frac = delay_samples - k
    if frac < _INTEGER_TOL:
        frac = 0.0
    elif 1.0 - frac < _INTEGER_TOL:
        k, frac = k + 1, 0.0
    if frac == 0.0:
        return np.array(x.segment(start - k, stop - k), dtype=np.complex128)
    seg = x.segment(start - k - _FD_PAD, stop - k + _FD_PAD)
    freqs = np.fft.fftfreq(len(seg))
    shifted = np.fft.ifft(np.fft.fft(seg) * np.exp(-2j * np.pi * freqs * frac))
    return shifted[_FD_PAD:_FD_PAD + stop - start]


def target_echo(x: IQBuffer, target: PointTarget, radar: RadarParams, batch_len: int = 4096,
                index: int = 0) -> np.ndarray:
    """Noise-free echo of one scatterer over the span of ``x``.

    The envelope delay is frozen at the centre of each ``batch_len`` block and
    applied as a frequency-domain fractional delay; the carrier phase uses the
    exact delay of every sample.
    """
    fs = radar.sample_rate
    n_total = len(x)
    t0 = x.start / fs
    _check_delays(target, index, t0, (x.start + n_total - 1) / fs, radar, n_total / fs)
    out = np.empty(n_total, dtype=np.complex128)
    for lo in range(0, n_total, batch_len):
        hi = min(lo + batch_len, n_total)
        centre = (x.start + 0.5 * (lo + hi - 1)) / fs
        delay = target.delay(centre, radar.wave_speed) * fs
        out[lo:hi] = _delayed_block(x, x.start + lo, x.start + hi, delay)
    t = (x.start + np.arange(n_total)) / fs
    cycles = radar.carrier_freq * target.delay(t, radar.wave_speed)
    cycles -= np.floor(cycles)
    out *= target.amplitude * np.exp(-2j * np.pi * cycles)
    return out


def synthesize_echo(x: IQBuffer, scene: Scene, radar: RadarParams, batch_len: int = 4096) -> IQBuffer:
    """Received signal: sum of scatterer echoes (list order) plus thermal noise."""
    if len(x) == 0:
        raise ValueError("reference buffer is empty")
    y = np.zeros(len(x), dtype=np.complex128)
    for i, target in enumerate(scene.scatterers):
        y += target_echo(x, target, radar, batch_len, index=i)
    if scene.noise_power > 0:
        y += np.sqrt(scene.noise_power) * white_noise_range(scene.noise_seed, x.start,
                                                            x.start + len(x))
    return IQBuffer(y, x.sample_rate, start=x.start)


def add_noise_to_sinr(y_clean: IQBuffer, target_peak_power: float, desired_post_integration_sinr_db: float,
                      processing_gain_db: float, seed: int) -> IQBuffer:
    """Add white noise so that (peak power / noise variance) times the
    processing gain equals the requested SINR."""
    if not target_peak_power > 0:
        raise ValueError(f"target_peak_power must be positive, got {target_peak_power}")
    variance = target_peak_power * 10.0 ** ((processing_gain_db - desired_post_integration_sinr_db) / 10.0)
    noise = np.sqrt(variance) * white_noise_range(seed, y_clean.start, y_clean.start + len(y_clean))
    return IQBuffer(y_clean.samples + noise, y_clean.sample_rate, start=y_clean.start)


# Scene files

def _amplitude_from_json(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, dict) and set(value) == {"re", "im"}:
        return complex(float(value["re"]), float(value["im"]))
    if isinstance(value, list) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"{where}.amplitude: expected number, [re, im] or {{re, im}}, got {value!r}")


def _target_from_json(obj, where: str) -> PointTarget:
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: expected an object")
    if "range_m" not in obj:
        raise ValueError(f"{where}.range_m: missing")
    unknown = set(obj) - {"range_m", "velocity_mps", "acceleration_mps2", "amplitude"}
    if unknown:
        raise ValueError(f"{where}: unknown field(s) {sorted(unknown)}")
    try:
        return PointTarget(
            initial_range=float(obj["range_m"]),
            radial_velocity=float(obj.get("velocity_mps", 0.0)),
            radial_acceleration=float(obj.get("acceleration_mps2", 0.0)),
            amplitude=_amplitude_from_json(obj.get("amplitude", 1.0), where),
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None


def _target_to_json(t: PointTarget) -> dict:
    a = complex(t.amplitude)
    return {
        "range_m": t.initial_range,
        "velocity_mps": t.radial_velocity,
        "acceleration_mps2": t.radial_acceleration,
        "amplitude": [a.real, a.imag],
    }


def scene_from_dict(obj) -> Scene:
    if not isinstance(obj, dict):
        raise ValueError("scene: expected a JSON object")
    targets = [_target_from_json(t, f"targets[{i}]") for i, t in enumerate(obj.get("targets", []))]
    clutter = [_target_from_json(t, f"clutter[{i}]") for i, t in enumerate(obj.get("clutter", []))]
    return Scene(targets, clutter, float(obj.get("noise_power", 0.0)), int(obj.get("noise_seed", 0)))


def scene_to_dict(scene: Scene) -> dict:
    return {
        "targets": [_target_to_json(t) for t in scene.targets],
        "clutter": [_target_to_json(t) for t in scene.clutter],
        "noise_power": scene.noise_power,
        "noise_seed": scene.noise_seed,
    }


def load_scene(path: str | Path) -> Scene:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scene_from_dict(obj)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n", encoding="utf-8")
