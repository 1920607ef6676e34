"""Analytic Doppler and range-migration (stretch) loss models and grid design."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import RadarParams, WindowKind, make_window, range_resolution

UNBOUNDED = math.inf
_BISECT_TOL = 1e-4  # m/s


class SpacingMode(str, enum.Enum):
    DOPPLER = "doppler"
    STRETCH = "stretch"


@dataclass(frozen=True)
class LossQuery:
    velocity_mismatch: float
    radar: RadarParams
    batch_duration: float
    integration_time: float
    window: WindowKind = WindowKind.RECTANGULAR

    def __post_init__(self):
        if not 0 < self.batch_duration <= self.integration_time:
            raise ValueError("need 0 < batch_duration <= integration_time")
        object.__setattr__(self, "window", WindowKind(self.window))

    def with_mismatch(self, dv: float) -> "LossQuery":
        return LossQuery(dv, self.radar, self.batch_duration, self.integration_time, self.window)

    @property
    def batch_len(self) -> int:
        return max(2, int(round(self.batch_duration * self.radar.sample_rate)))


@dataclass(frozen=True)
class GridSpec:
    """Symmetric velocity hypothesis grid: 0, +-spacing, +-2 spacing, ... within +-span."""

    spacing: float
    span: float

    def __post_init__(self):
        if not self.spacing > 0 or self.span < 0:
            raise ValueError("spacing must be positive and span non-negative")

    @property
    def hypothesis_count(self) -> int:
        return 2 * int(math.floor(self.span / self.spacing + 1e-9)) + 1

    def velocities(self) -> np.ndarray:
        k = (self.hypothesis_count - 1) // 2
        return np.arange(-k, k + 1) * self.spacing


def _db(linear: float) -> float:
    return 10.0 * math.log10(linear)


def doppler_loss_rect(q: LossQuery) -> float:
    """Rectangular-window Doppler loss |sin u / u|^-2 in dB, u = 2 pi f_c dv t_p / c."""
    u = 2.0 * math.pi * q.radar.carrier_freq * q.velocity_mismatch * q.batch_duration / q.radar.wave_speed
    if u == 0:
        return 0.0
    s = math.sin(u) / u
    if abs(s) < 1e-15:
        return UNBOUNDED
    return -_db(s * s)


def _geometric_sum(theta: float, length: int) -> complex:
    """sum_{m=0}^{length-1} exp(-i theta m) in closed form."""
    half = 0.5 * theta
    if abs(math.sin(half)) < 1e-300:
        return complex(length)
    ratio = math.sin(length * half) / math.sin(half)
    return ratio * complex(math.cos((length - 1) * half), -math.sin((length - 1) * half))


def window_transform(kind: WindowKind | str, length: int, freq: float) -> complex:
    """DTFT of the sampled window at normalized frequency ``freq`` (cycles/sample).

    Hann is expanded as 0.5 - 0.25 e^{+i phi m} - 0.25 e^{-i phi m},
    phi = 2 pi / (length - 1), so both windows reduce to geometric sums.
    """
    kind = WindowKind(kind)
    theta = 2.0 * math.pi * freq
    if kind is WindowKind.RECTANGULAR:
        return _geometric_sum(theta, length)
    phi = 2.0 * math.pi / (length - 1)
    return (0.5 * _geometric_sum(theta, length)
            - 0.25 * _geometric_sum(theta - phi, length)
            - 0.25 * _geometric_sum(theta + phi, length))


def doppler_loss_window(q: LossQuery) -> float:
    """|W(f_d) / W(0)|^-2 in dB for the sampled batch window, f_d = 2 f_c dv / c."""
    if q.velocity_mismatch == 0:
        return 0.0
    m = q.batch_len
    f_d = q.radar.doppler_shift(q.velocity_mismatch)
    ratio = abs(window_transform(q.window, m, f_d / q.radar.sample_rate)) / \
        abs(window_transform(q.window, m, 0.0))
    if ratio < 1e-15:
        return UNBOUNDED
    return -_db(ratio * ratio)


def stretch_loss_linear(q: LossQuery) -> float:
    r = q.radar
    return 4.0 * q.velocity_mismatch**2 * q.integration_time**2 * r.sample_rate * r.bandwidth / r.wave_speed**2


def stretch_loss(q: LossQuery) -> float:
    """Migration loss 4 dv^2 T^2 f_s B / c^2 in dB, clamped at 0 dB."""
    linear = stretch_loss_linear(q)
    if linear <= 1.0:
        return 0.0
    return _db(linear)


def first_null_mismatch(q: LossQuery) -> float:
    """Velocity mismatch of the first null of the window's transform."""
    base = q.radar.wave_speed / (2.0 * q.radar.carrier_freq * q.batch_duration)
    return base if q.window is WindowKind.RECTANGULAR else 2.0 * base


def required_spacing(max_loss_db: float, mode: SpacingMode | str, q: LossQuery) -> float:
    """Hypothesis spacing that keeps the worst-case loss at ``max_loss_db``.

    Stretch: the mismatch at which the migration loss reaches the threshold.
    Doppler: twice the mismatch at which the window loss reaches it, since
    the worst case on a grid sits halfway between hypotheses.
    """
    if not max_loss_db > 0:
        raise ValueError(f"max_loss_db must be positive, got {max_loss_db}")
    mode = SpacingMode(mode)
    if mode is SpacingMode.STRETCH:
        r = q.radar
        linear = 10.0 ** (max_loss_db / 10.0)
        return math.sqrt(linear * r.wave_speed**2 / (4.0 * q.integration_time**2 * r.sample_rate * r.bandwidth))

    lo, hi = 0.0, first_null_mismatch(q)
    # step back from an exact null so the loss stays finite at the bracket end
    if doppler_loss_window(q.with_mismatch(hi * (1 - 1e-9))) < max_loss_db:
        raise ValueError(
            f"{max_loss_db} dB is not reached inside the {q.window.value} window mainlobe"
        )
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if doppler_loss_window(q.with_mismatch(mid)) < max_loss_db:
            lo = mid
        else:
            hi = mid
    return 2.0 * 0.5 * (lo + hi)


def max_coherent_time(radar: RadarParams, velocity: float) -> float:
    """Time for a target to cross one range resolution cell, c / (2 B |v|)."""
    if velocity == 0:
        return UNBOUNDED
    return range_resolution(radar) / abs(velocity)


def window_processing_loss(kind: WindowKind | str, length: int = 65536) -> float:
    """Coherent-gain SNR penalty (sum w)^2 / (M sum w^2), as a positive dB loss."""
    w = make_window(kind, length)
    return -_db(np.sum(w) ** 2 / (length * np.sum(w**2)))


def hann_snr_penalty(length: int = 65536) -> float:
    return window_processing_loss(WindowKind.HANN, length)


def loss_curve(radar: RadarParams, batch_duration: float, integration_time: float, span: float,
               step: float) -> list[tuple[float, float, float, float]]:
    """Rows (mismatch, L_D rect, L_D Hann, L_S), all in dB, mismatch 0..span."""
    if span < 0 or not step > 0:
        raise ValueError("span must be >= 0 and step > 0")
    count = int(math.floor(span / step + 1e-9)) + 1
    rows = []
    for i in range(count):
        dv = round(i * step, 12)
        q = LossQuery(dv, radar, batch_duration, integration_time, WindowKind.RECTANGULAR)
        qh = LossQuery(dv, radar, batch_duration, integration_time, WindowKind.HANN)
        rows.append((dv, doppler_loss_rect(q), doppler_loss_window(qh), stretch_loss(q)))
    return rows
