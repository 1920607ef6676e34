"""Shared parameter types, windows and index/physical axis conversions."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class WindowKind(str, enum.Enum):
    RECTANGULAR = "rectangular"
    HANN = "hann"


@dataclass(frozen=True)
class RadarParams:
    """Physical constants of a noise radar.

    Attributes:
        carrier_freq: carrier frequency f_c [Hz]
        sample_rate: complex baseband sample rate f_s [Hz]
        bandwidth: transmitted noise bandwidth B [Hz]
        wave_speed: propagation speed c [m/s]
    """

    carrier_freq: float
    sample_rate: float
    bandwidth: float
    wave_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("carrier_freq", "sample_rate", "bandwidth", "wave_speed"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        if self.bandwidth > self.sample_rate:
            raise ValueError(
                f"bandwidth {self.bandwidth} Hz exceeds complex sample rate {self.sample_rate} Hz"
            )

    def doppler_shift(self, velocity: float) -> float:
        """Two-way Doppler frequency [Hz] of a radial velocity (positive = closing)."""
        return 2.0 * velocity * self.carrier_freq / self.wave_speed


@dataclass(frozen=True)
class BatchGrid:
    batch_count: int
    batch_len: int
    sample_rate: float

    def __post_init__(self):
        if int(self.batch_count) != self.batch_count or self.batch_count < 1:
            raise ValueError(f"batch_count must be a positive integer, got {self.batch_count!r}")
        if int(self.batch_len) != self.batch_len or self.batch_len < 1:
            raise ValueError(f"batch_len must be a positive integer, got {self.batch_len!r}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate!r}")

    @property
    def total_samples(self) -> int:
        return self.batch_count * self.batch_len

    @property
    def batch_duration(self) -> float:
        return self.batch_len / self.sample_rate


@dataclass(frozen=True)
class CPIConfig:
    radar: RadarParams
    grid: BatchGrid
    window: WindowKind = WindowKind.RECTANGULAR

    def __post_init__(self):
        if self.grid.sample_rate != self.radar.sample_rate:
            raise ValueError("grid and radar sample rates differ")
        object.__setattr__(self, "window", WindowKind(self.window))

    @property
    def integration_time(self) -> float:
        return self.grid.batch_count * self.grid.batch_len / self.grid.sample_rate

    def with_batch_count(self, batch_count: int) -> "CPIConfig":
        grid = BatchGrid(batch_count, self.grid.batch_len, self.grid.sample_rate)
        return CPIConfig(self.radar, grid, self.window)

    @property
    def axes(self) -> "RangeDopplerAxes":
        return RangeDopplerAxes.from_config(self)


def make_window(kind: WindowKind | str, length: int) -> np.ndarray:
    """Real window coefficients.

    Hann uses the symmetric form 0.5 * (1 - cos(2 pi m / (len - 1))).
    """
    kind = WindowKind(kind)
    if int(length) != length or length < 2:
        raise ValueError(f"window length must be an integer >= 2, got {length!r}")
    if kind is WindowKind.RECTANGULAR:
        return np.ones(length)
    m = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * m / (length - 1)))


def range_resolution(radar: RadarParams) -> float:
    return radar.wave_speed / (2.0 * radar.bandwidth)


@dataclass(frozen=True)
class RangeDopplerAxes:
    """Bin <-> physical conversions for a P x M range-Doppler map.

    Range bin m sits at m * c / (2 f_s). Doppler bin l uses FFT layout: bins
    below P/2 are non-negative (closing) velocities, the rest negative.
    """

    range_bins: int
    doppler_bins: int
    sample_rate: float
    batch_duration: float
    carrier_freq: float
    wave_speed: float = SPEED_OF_LIGHT

    @classmethod
    def from_config(cls, config: CPIConfig) -> "RangeDopplerAxes":
        return cls(
            range_bins=config.grid.batch_len,
            doppler_bins=config.grid.batch_count,
            sample_rate=config.radar.sample_rate,
            batch_duration=config.grid.batch_duration,
            carrier_freq=config.radar.carrier_freq,
            wave_speed=config.radar.wave_speed,
        )

    @property
    def range_bin_width(self) -> float:
        return self.wave_speed / (2.0 * self.sample_rate)

    @property
    def doppler_bin_width(self) -> float:
        """Doppler bin spacing in Hz."""
        return 1.0 / (self.doppler_bins * self.batch_duration)

    @property
    def velocity_bin_width(self) -> float:
        return self.doppler_bin_width * self.wave_speed / (2.0 * self.carrier_freq)

    def range_m(self, m):
        return np.asarray(m) * self.range_bin_width

    def range_bin(self, meters):
        return np.rint(np.asarray(meters) / self.range_bin_width).astype(int)

    def signed_doppler_index(self, l):
        l = np.asarray(l)
        return np.where(l < (self.doppler_bins + 1) // 2, l, l - self.doppler_bins)

    def doppler_hz(self, l):
        return self.signed_doppler_index(l) * self.doppler_bin_width

    def velocity(self, l):
        return self.doppler_hz(l) * self.wave_speed / (2.0 * self.carrier_freq)

    def doppler_bin(self, velocity):
        """Nearest Doppler bin of a velocity, aliased into [0, P)."""
        k = np.rint(np.asarray(velocity) / self.velocity_bin_width).astype(int)
        return np.mod(k, self.doppler_bins)

    def to_dict(self) -> dict:
        return {
            "range_bins": self.range_bins,
            "doppler_bins": self.doppler_bins,
            "range_bin_width_m": self.range_bin_width,
            "velocity_bin_width_mps": self.velocity_bin_width,
            "doppler_bin_width_hz": self.doppler_bin_width,
        }
