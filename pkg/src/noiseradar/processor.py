"""Batched range-Doppler correlation with Doppler and stretch compensation.

A CPI of N = P*M samples is cut into P batches of M samples. Each batch of
the reference is (optionally) Doppler modulated, windowed and transformed;
its spectrum is (optionally) given a linear phase that advances the reference
by a fraction of a sample per batch, which tracks a target's range migration
across batches. The per-batch circular cross-correlation goes into row p of a
P x M staging matrix, and a final FFT down each column gives the Doppler axis.

Sign convention: positive velocity means closing. A closing target's echo has
a decreasing delay and a positive Doppler shift, so the compensations advance
the reference in time and modulate it with +f_d.
"""

from __future__ import annotations

import enum
import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import CPIConfig, BatchGrid, RadarParams, RangeDopplerAxes, WindowKind, make_window
from .waveform import IQBuffer

_INTERP_HALF = 32
_INTERP_BETA = 10.0
_INTERP_CHUNK = 1 << 16
_INTERP_PHASES = 1024
_INTERP_BLOCK = 4096


class SpectraKind(str, enum.Enum):
    REFERENCE = "reference"
    RECEIVED = "received"


class Mode(str, enum.Enum):
    NONE = "none"
    DOPPLER = "doppler"
    STRETCH = "stretch"
    BOTH = "both"
    RESAMPLE = "resample"


@dataclass(frozen=True)
class VelocityHypothesis:
    """Reference velocity plus the compensations to apply for it.

    ``resample_enabled`` replaces the per-batch stretch phase by a true
    time-scaling of the reference over the whole CPI.
    """

    reference_velocity: float = 0.0
    doppler_enabled: bool = False
    stretch_enabled: bool = False
    resample_enabled: bool = False

    @classmethod
    def for_mode(cls, mode: Mode | str, velocity: float) -> "VelocityHypothesis":
        mode = Mode(mode)
        return cls(
            reference_velocity=float(velocity),
            doppler_enabled=mode in (Mode.DOPPLER, Mode.BOTH, Mode.RESAMPLE),
            stretch_enabled=mode in (Mode.STRETCH, Mode.BOTH),
            resample_enabled=mode is Mode.RESAMPLE,
        )

    @property
    def mode(self) -> Mode:
        if self.resample_enabled:
            return Mode.RESAMPLE
        return {
            (False, False): Mode.NONE,
            (True, False): Mode.DOPPLER,
            (False, True): Mode.STRETCH,
            (True, True): Mode.BOTH,
        }[(self.doppler_enabled, self.stretch_enabled)]

    @property
    def is_identity(self) -> bool:
        return not (self.doppler_enabled or self.stretch_enabled or self.resample_enabled) \
            or self.reference_velocity == 0.0

    def to_dict(self) -> dict:
        return {
            "reference_velocity_mps": self.reference_velocity,
            "doppler_enabled": self.doppler_enabled,
            "stretch_enabled": self.stretch_enabled,
            "resample_enabled": self.resample_enabled,
            "mode": self.mode.value,
        }


@dataclass(frozen=True, eq=False)
class BatchSpectra:
    rows: np.ndarray
    kind: SpectraKind


@dataclass(frozen=True, eq=False)
class RangeDopplerMap:
    """|R[l, m]|^2 with Doppler bins l on rows and range bins m on columns."""

    power: np.ndarray
    hypothesis: VelocityHypothesis
    axes: RangeDopplerAxes
    config: CPIConfig

    def __post_init__(self):
        grid = self.config.grid
        if self.power.shape != (grid.batch_count, grid.batch_len):
            raise ValueError(f"map shape {self.power.shape} does not match grid "
                             f"({grid.batch_count}, {grid.batch_len})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.power.shape


def correlate_direct(y: IQBuffer | np.ndarray, x: IQBuffer | np.ndarray, max_lag: int) -> np.ndarray:
    """Brute-force R[k] = sum_n y[n] conj(x[n-k]), k = 0..max_lag, with x zero
    outside its support. O(N * max_lag); meant as a test oracle."""
    ys = np.asarray(getattr(y, "samples", y), dtype=np.complex128)
    xs = np.asarray(getattr(x, "samples", x), dtype=np.complex128)
    if len(ys) != len(xs):
        raise ValueError(f"length mismatch: y has {len(ys)} samples, x has {len(xs)}")
    if not 0 <= max_lag < len(xs):
        raise ValueError(f"max_lag must be in [0, {len(xs)}), got {max_lag}")
    n = len(xs)
    out = np.empty(max_lag + 1, dtype=np.complex128)
    for k in range(max_lag + 1):
        out[k] = np.sum(ys[k:] * np.conj(xs[:n - k]))
    return out


def batch_spectra(signal: IQBuffer | np.ndarray, grid: BatchGrid, window: WindowKind | str,
                  kind: SpectraKind | str) -> BatchSpectra:
    """Row p is the DFT of the windowed batch p. Reference rows carry 1/M."""
    kind = SpectraKind(kind)
    samples = np.asarray(getattr(signal, "samples", signal))
    if len(samples) != grid.total_samples:
        raise ValueError(f"signal has {len(samples)} samples, grid needs {grid.total_samples}")
    batches = samples.reshape(grid.batch_count, grid.batch_len)
    w = make_window(window, grid.batch_len) if grid.batch_len >= 2 else np.ones(grid.batch_len)
    rows = np.fft.fft(batches * w, axis=1)
    if kind is SpectraKind.REFERENCE:
        rows /= grid.batch_len
    return BatchSpectra(rows, kind)


def doppler_modulate(x: IQBuffer, v_r: float, radar: RadarParams) -> IQBuffer:
    """Multiply by exp(+2 pi i f_r n / f_s), f_r = 2 v_r f_c / c, n counted from the buffer start."""
    if v_r == 0:
        return x
    n = np.arange(len(x))
    factor = _doppler_factor(radar.doppler_shift(v_r), n, radar.sample_rate)
    return IQBuffer(x.samples * factor, x.sample_rate, start=x.start)


def _doppler_factor(doppler_hz: float, n: np.ndarray, sample_rate: float) -> np.ndarray:
    return np.exp(2j * np.pi * (doppler_hz / sample_rate) * n)


def stretch_shift_per_batch(v_r: float, radar: RadarParams, batch_duration: float) -> float:
    """Reference advance a = 2 v_r f_s t_p / c, in samples per batch."""
    return 2.0 * v_r * radar.sample_rate * batch_duration / radar.wave_speed


def _stretch_factor(batch_len: int, shift_samples: float) -> np.ndarray:
    # signed frequencies so that a fractional shift is a band-limited delay
    return np.exp(2j * np.pi * np.fft.fftfreq(batch_len) * shift_samples)


def stretch_phase(spectra: BatchSpectra, v_r: float, radar: RadarParams) -> BatchSpectra:
    """Advance reference batch p by p * a samples through a linear phase."""
    if spectra.kind is not SpectraKind.REFERENCE:
        raise ValueError("stretch_phase applies to reference spectra only")
    n_batches, m = spectra.rows.shape
    a = stretch_shift_per_batch(v_r, radar, m / radar.sample_rate)
    rows = spectra.rows.copy()
    if v_r != 0:
        for p in range(n_batches):
            rows[p] *= _stretch_factor(m, p * a)
    return BatchSpectra(rows, spectra.kind)


def _correlate_row(y_row: np.ndarray, x_row: np.ndarray) -> np.ndarray:
    """Circular cross-correlation of one batch from its spectra, indexed by delay."""
    return np.fft.ifft(y_row * np.conj(x_row)) * len(y_row)


def correlate_batches(y_spec: BatchSpectra, x_spec: BatchSpectra) -> np.ndarray:
    """P x M per-batch correlations (the slow-time staging matrix)."""
    if y_spec.rows.shape != x_spec.rows.shape:
        raise ValueError(f"spectra shapes differ: {y_spec.rows.shape} vs {x_spec.rows.shape}")
    staging = np.empty(y_spec.rows.shape, dtype=np.complex128)
    for p in range(staging.shape[0]):
        staging[p] = _correlate_row(y_spec.rows[p], x_spec.rows[p])
    return staging


def _finish(staging: np.ndarray) -> np.ndarray:
    r = np.fft.fft(staging, axis=0)
    return r.real**2 + r.imag**2


def range_doppler_map(y_spec: BatchSpectra, x_spec: BatchSpectra, hypothesis: VelocityHypothesis,
                      config: CPIConfig) -> RangeDopplerMap:
    """Map from received and (already compensated) reference spectra."""
    grid = config.grid
    if y_spec.rows.shape != (grid.batch_count, grid.batch_len):
        raise ValueError(f"spectra shape {y_spec.rows.shape} does not match grid")
    power = _finish(correlate_batches(y_spec, x_spec))
    return RangeDopplerMap(power, hypothesis, config.axes, config)


def _kaiser_sinc(u: np.ndarray) -> np.ndarray:
    taper = np.i0(_INTERP_BETA * np.sqrt(np.clip(1.0 - (u / _INTERP_HALF) ** 2, 0.0, None)))
    return np.sinc(u) * taper / np.i0(_INTERP_BETA)


@functools.lru_cache(maxsize=1)
def _polyphase_table() -> np.ndarray:
    """Kernel taps for fractional offsets k / _INTERP_PHASES, k = 0.._INTERP_PHASES."""
    frac = np.arange(_INTERP_PHASES + 1)[:, None] / _INTERP_PHASES
    taps = np.arange(-_INTERP_HALF + 1, _INTERP_HALF + 1)[None, :]
    table = _kaiser_sinc(frac - taps)
    table.setflags(write=False)
    return table


def _interpolate(source, positions: np.ndarray) -> np.ndarray:
    """Band-limited value of ``source`` (anything with ``segment``) at
    fractional absolute sample positions.

    Kaiser-windowed sinc with 64 taps; kernels come from a polyphase table
    with linear interpolation between adjacent phases.
    """
    base = np.floor(positions).astype(np.int64)
    phase = (positions - base) * _INTERP_PHASES
    k = np.minimum(phase.astype(np.int64), _INTERP_PHASES - 1)
    w = (phase - k)[:, None]
    table = _polyphase_table()
    lo = int(base.min()) - _INTERP_HALF + 1
    hi = int(base.max()) + _INTERP_HALF + 1
    seg = np.asarray(source.segment(lo, hi), dtype=np.complex128)
    out = np.empty(len(positions), dtype=np.complex128)
    offsets = np.arange(2 * _INTERP_HALF)
    for a in range(0, len(positions), _INTERP_BLOCK):
        b = min(a + _INTERP_BLOCK, len(positions))
        kernel = table[k[a:b]] * (1.0 - w[a:b]) + table[k[a:b] + 1] * w[a:b]
        taps = seg[(base[a:b] - lo - _INTERP_HALF + 1)[:, None] + offsets]
        out[a:b] = np.einsum("ij,ij->i", taps, kernel)
    return out


def _stretched_positions(start: int, stop: int, origin: int, scale: float) -> np.ndarray:
    n = np.arange(start, stop, dtype=np.int64) - origin
    return origin + n + n * (scale - 1.0)


def resample_reference(x: IQBuffer, v_r: float, radar: RadarParams) -> IQBuffer:
    """Time-scale the reference to x(t * (1 + 2 v_r / c)), t measured from the
    buffer start, using windowed-sinc interpolation over the whole buffer."""
    if v_r == 0:
        return x
    scale = 1.0 + 2.0 * v_r / radar.wave_speed
    out = np.empty(len(x), dtype=np.complex128)
    for lo in range(0, len(x), _INTERP_CHUNK):
        hi = min(lo + _INTERP_CHUNK, len(x))
        pos = _stretched_positions(x.start + lo, x.start + hi, x.start, scale)
        out[lo:hi] = _interpolate(x, pos)
    return IQBuffer(out, x.sample_rate, start=x.start)


class _Reference:
    """Builds compensated reference spectra batch by batch for one hypothesis."""

    def __init__(self, source, hypothesis: VelocityHypothesis, config: CPIConfig, origin: int):
        self.source = source
        self.h = hypothesis
        self.config = config
        self.origin = origin
        radar, grid = config.radar, config.grid
        m = grid.batch_len
        self.window = None if config.window is WindowKind.RECTANGULAR else make_window(config.window, m)
        v = hypothesis.reference_velocity
        self.doppler_hz = radar.doppler_shift(v) if hypothesis.doppler_enabled else 0.0
        self.shift = stretch_shift_per_batch(v, radar, grid.batch_duration) \
            if hypothesis.stretch_enabled and not hypothesis.resample_enabled else 0.0
        self.scale = 1.0 + 2.0 * v / radar.wave_speed if hypothesis.resample_enabled else 1.0

    def spectrum(self, p: int) -> np.ndarray:
        m = self.config.grid.batch_len
        lo = self.origin + p * m
        if self.scale != 1.0:
            batch = _interpolate(self.source, _stretched_positions(lo, lo + m, self.origin, self.scale))
        else:
            batch = np.asarray(self.source.segment(lo, lo + m), dtype=np.complex128)
        if self.doppler_hz != 0.0:
            batch = batch * _doppler_factor(self.doppler_hz, np.arange(p * m, (p + 1) * m),
                                            self.config.radar.sample_rate)
        if self.window is not None:
            batch = batch * self.window
        spec = np.fft.fft(batch) / m
        if self.shift != 0.0:
            spec *= _stretch_factor(m, p * self.shift)
        return spec


def process_stream(batches: Iterable[np.ndarray], reference, hypotheses: Sequence[VelocityHypothesis],
                   config: CPIConfig, workers: int = 1) -> list[RangeDopplerMap]:
    """Streaming range-Doppler processing.

    ``batches`` yields the received signal one batch (M samples) at a time and
    is consumed in order; no batch is retained after its correlations are
    staged. ``reference`` is any object with ``start`` and ``segment(lo, hi)``
    (e.g. an IQBuffer, possibly generator-backed) and is read one batch at a
    time. Memory is one P x M complex accumulator per hypothesis plus O(M)
    scratch per worker.
    """
    grid = config.grid
    p_count, m = grid.batch_count, grid.batch_len
    hypotheses = list(hypotheses)
    refs = [_Reference(reference, h, config, reference.start) for h in hypotheses]
    acc = [np.empty((p_count, m), dtype=np.complex128) for _ in hypotheses]

    def stage(job):
        i, p, y_spec = job
        acc[i][p] = _correlate_row(y_spec, refs[i].spectrum(p))

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        count = 0
        for p, batch in enumerate(batches):
            if p >= p_count:
                raise ValueError(f"received stream is longer than {p_count} batches")
            batch = np.asarray(batch)
            if batch.shape != (m,):
                raise ValueError(f"batch {p} has shape {batch.shape}, expected ({m},)")
            y_spec = np.fft.fft(batch.astype(np.complex128, copy=False))
            del batch
            jobs = [(i, p, y_spec) for i in range(len(hypotheses))]
            if pool is None:
                for job in jobs:
                    stage(job)
            else:
                list(pool.map(stage, jobs))
            count += 1
        if count != p_count:
            raise ValueError(f"received stream ended after {count} of {p_count} batches")
        # accumulators are replaced by their power maps one at a time, so at
        # most one extra P x M transform buffer exists on top of them
        def finish(i):
            a = acc[i]
            a[:] = np.fft.fft(a, axis=0)
            power = a.real**2 + a.imag**2
            acc[i] = None
            return power

        powers = list(pool.map(finish, range(len(hypotheses)))) if pool else \
            [finish(i) for i in range(len(hypotheses))]
    finally:
        if pool is not None:
            pool.shutdown()
    axes = config.axes
    return [RangeDopplerMap(pw, h, axes, config) for pw, h in zip(powers, hypotheses)]


def iter_batches(y: IQBuffer | np.ndarray, grid: BatchGrid):
    samples = np.asarray(getattr(y, "samples", y))
    for p in range(grid.batch_count):
        yield samples[p * grid.batch_len:(p + 1) * grid.batch_len]


def process_cpi(y: IQBuffer, x: IQBuffer, hypotheses: Sequence[VelocityHypothesis], config: CPIConfig,
                workers: int = 1) -> list[RangeDopplerMap]:
    """One range-Doppler map per hypothesis for a full CPI held in memory."""
    n = config.grid.total_samples
    if len(y) != n or len(x) != n:
        raise ValueError(f"buffers have {len(y)} and {len(x)} samples, CPI needs {n}")
    return process_stream(iter_batches(y, config.grid), x, hypotheses, config, workers)
