"""SINR measurement on range-Doppler maps and integration-time gain curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CPIConfig
from .processor import RangeDopplerMap, VelocityHypothesis, process_cpi
from .scene import PointTarget
from .waveform import IQBuffer

DEFAULT_GUARD = 3
DEFAULT_CLUTTER_HALFWIDTH = 2


@dataclass(frozen=True)
class SinrReport:
    peak_power_db: float
    peak_location: tuple[int, int]
    floor_power_db: float
    sinr_db: float
    exclusion: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "peak_power_db": self.peak_power_db,
            "peak_location": {"doppler_bin": self.peak_location[0], "range_bin": self.peak_location[1]},
            "floor_power_db": self.floor_power_db,
            "sinr_db": self.sinr_db,
            "exclusion": self.exclusion,
        }


@dataclass(frozen=True)
class GainCurve:
    """SINR increase versus integration time, relative to the first point."""

    points: tuple[tuple[float, float], ...]
    sinr_db: tuple[float, ...] = ()

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.points])

    @property
    def gains(self) -> np.ndarray:
        return np.array([g for _, g in self.points])

    def to_dict(self) -> dict:
        return {
            "points": [{"integration_time_s": t, "sinr_increase_db": g} for t, g in self.points],
            "sinr_db": list(self.sinr_db),
        }


def _db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def _circular_band(center: int, radius: int, size: int) -> np.ndarray:
    idx = np.zeros(size, dtype=bool)
    if 2 * radius + 1 >= size:
        idx[:] = True
    else:
        idx[np.mod(np.arange(center - radius, center + radius + 1), size)] = True
    return idx


def measure_sinr(rd_map: RangeDopplerMap | np.ndarray, search_region=None, guard: int = DEFAULT_GUARD,
                 clutter_halfwidth: int | None = DEFAULT_CLUTTER_HALFWIDTH, clutter_bin: int = 0) -> SinrReport:
    """Peak-to-floor ratio of a power map.

    The peak is the strongest cell inside ``search_region``, which is either a
    pair of half-open ``(lo, hi)`` index ranges for Doppler rows and range
    columns or a boolean mask of the map's shape; None searches everything.
    Ties go to the lowest row-major index. The floor is the mean power of all
    cells outside the guard box around the peak and outside the clutter band
    of rows within ``clutter_halfwidth`` of ``clutter_bin`` (no band when
    None). Both boxes wrap around the map edges.
    """
    power = np.asarray(getattr(rd_map, "power", rd_map))
    if power.ndim != 2 or power.size == 0:
        raise ValueError("map must be a non-empty 2-D array")
    if guard < 0:
        raise ValueError(f"guard must be >= 0, got {guard}")
    n_dop, n_rng = power.shape
    if search_region is None:
        search = np.ones(power.shape, dtype=bool)
        region_desc = [[0, n_dop], [0, n_rng]]
    elif isinstance(search_region, np.ndarray) and search_region.dtype == bool:
        if search_region.shape != power.shape:
            raise ValueError(f"search mask shape {search_region.shape} != map shape {power.shape}")
        search = search_region
        region_desc = "mask"
    else:
        (d0, d1), (r0, r1) = search_region
        d0, d1, r0, r1 = max(d0, 0), min(d1, n_dop), max(r0, 0), min(r1, n_rng)
        search = np.zeros(power.shape, dtype=bool)
        if d1 > d0 and r1 > r0:
            search[d0:d1, r0:r1] = True
        region_desc = [[int(d0), int(d1)], [int(r0), int(r1)]]
    if not search.any():
        raise ValueError(f"search region {region_desc} is empty")
    flat = int(np.argmax(np.where(search, power, -np.inf)))
    peak = divmod(flat, n_rng)
    peak_power = float(power[peak])

    rows = _circular_band(peak[0], guard, n_dop)
    cols = _circular_band(peak[1], guard, n_rng)
    floor_mask = ~(rows[:, None] & cols[None, :])
    if clutter_halfwidth is not None:
        floor_mask &= ~_circular_band(clutter_bin, clutter_halfwidth, n_dop)[:, None]
    if not floor_mask.any():
        raise ValueError("no floor cells left outside the guard box and clutter band")
    floor_power = float(np.mean(power[floor_mask]))
    peak_db, floor_db = _db(peak_power), _db(floor_power)
    return SinrReport(
        peak_power_db=peak_db,
        peak_location=(int(peak[0]), int(peak[1])),
        floor_power_db=floor_db,
        sinr_db=peak_db - floor_db,
        exclusion={
            "guard": int(guard),
            "clutter_halfwidth": clutter_halfwidth,
            "clutter_bin": int(clutter_bin),
            "search_region": region_desc,
            "floor_cells": int(floor_mask.sum()),
        },
    )


def clutter_bin_for(hypothesis: VelocityHypothesis, config: CPIConfig) -> int:
    """Doppler bin where stationary clutter lands under a hypothesis."""
    if hypothesis.doppler_enabled:
        return int(config.axes.doppler_bin(-hypothesis.reference_velocity))
    return 0


def clutter_free_search(config: CPIConfig, clutter_bin: int, halfwidth: int) -> np.ndarray:
    mask = np.ones((config.grid.batch_count, config.grid.batch_len), dtype=bool)
    mask[_circular_band(clutter_bin, halfwidth, config.grid.batch_count)] = False
    return mask


def smear_footprint(truth: PointTarget, hypothesis: VelocityHypothesis, config: CPIConfig,
                    start_time: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Doppler rows and range columns a target smears over in a map.

    Range columns cover the apparent migration of the echo over the CPI (the
    true migration minus whatever the stretch compensation removes); the
    Doppler extent is the same number of bins, centred on the residual
    Doppler, since a target that dwells T/K in each cell spreads over K bins.
    """
    radar, grid = config.radar, config.grid
    fs, c = radar.sample_rate, radar.wave_speed
    t0, t1 = start_time, start_time + config.integration_time
    tracked = hypothesis.reference_velocity if (hypothesis.stretch_enabled or hypothesis.resample_enabled) else 0.0
    d0 = truth.delay(t0, c) * fs
    d1 = truth.delay(t1, c) * fs + 2.0 * tracked * (t1 - t0) * fs / c
    if truth.radial_acceleration:
        times = np.linspace(t0, t1, 65)
        apparent = truth.delay(times, c) * fs + 2.0 * tracked * (times - t0) * fs / c
        lo_d, hi_d = float(apparent.min()), float(apparent.max())
    else:
        lo_d, hi_d = min(d0, d1), max(d0, d1)
    count = max(1, int(round(hi_d - lo_d)))
    first = int(round(0.5 * (lo_d + hi_d) - 0.5 * (count - 1)))
    cols = np.arange(first, first + count)
    if cols[0] < 0 or cols[-1] >= grid.batch_len:
        raise ValueError(f"footprint columns {cols[0]}..{cols[-1]} fall outside the map")
    if count > grid.batch_count:
        raise ValueError(f"footprint needs {count} Doppler bins, map has {grid.batch_count}")
    axes = config.axes
    residual = truth.radial_velocity - (hypothesis.reference_velocity if hypothesis.doppler_enabled else 0.0)
    centre = int(axes.doppler_bin(residual))
    rows = np.mod(np.arange(count) - (count - 1) // 2 + centre, grid.batch_count)
    return rows, cols


def smeared_target_average(rd_map: RangeDopplerMap, truth: PointTarget, config: CPIConfig | None = None,
                           start_time: float = 0.0) -> float:
    """Mean power over the target's smear footprint, in dB."""
    config = config or rd_map.config
    rows, cols = smear_footprint(truth, rd_map.hypothesis, config, start_time)
    return _db(float(np.mean(rd_map.power[np.ix_(rows, cols)])))


def gain_vs_integration_time(y: IQBuffer, x: IQBuffer, base_config: CPIConfig, hypothesis: VelocityHypothesis,
                             start_time: float, doublings: int, *, guard: int = DEFAULT_GUARD,
                             clutter_halfwidth: int | None = None, search_region=None,
                             workers: int = 1) -> GainCurve:
    """SINR of nested CPIs of P0 * 2^k batches (k = 0..doublings) that all
    start at ``start_time``, as increases over the shortest CPI."""
    if doublings < 0:
        raise ValueError("doublings must be >= 0")
    fs = base_config.radar.sample_rate
    first = int(round(start_time * fs))
    m = base_config.grid.batch_len
    longest = base_config.grid.batch_count * 2**doublings * m
    available = min(len(y), len(x))
    if first < 0 or first + longest > available:
        limit = max(0.0, (available - longest) / fs)
        raise ValueError(
            f"a {longest / fs:.6g} s CPI starting at {start_time} s needs {first + longest} samples, "
            f"buffers hold {available}; latest possible start is {limit:.6g} s"
        )
    times, sinrs = [], []
    for k in range(doublings + 1):
        config = base_config.with_batch_count(base_config.grid.batch_count * 2**k)
        n = config.grid.total_samples
        (rd_map,) = process_cpi(y.slice(first, first + n), x.slice(first, first + n), [hypothesis], config,
                                workers)
        report = measure_sinr(rd_map, search_region, guard, clutter_halfwidth)
        times.append(config.integration_time)
        sinrs.append(report.sinr_db)
    points = tuple((t, s - sinrs[0]) for t, s in zip(times, sinrs))
    return GainCurve(points, tuple(sinrs))
