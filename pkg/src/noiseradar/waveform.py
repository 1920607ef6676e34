"""Deterministic band-limited complex Gaussian noise waveform.

White noise is drawn from Philox4x64 streams, one stream per block of
``_BLOCK`` samples, keyed by the seed with the block index in the top
counter word. The white noise is then filtered by a fixed FIR whose response
is a raised-cosine mask of the band +-B/2. Every output block is computed
from its own window of white noise, so any sample range, including negative
indices, comes out bit-identical no matter how the range is requested.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import RadarParams

_BLOCK = 16384
_TAPS = 4096
_ROLLOFF = 0.02  # transition width as a fraction of the bandwidth
_KAISER_BETA = 8.0
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class WaveformSpec:
    seed: int
    length: int
    radar: RadarParams
    rms_level: float = 1.0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _U64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if int(self.length) != self.length or self.length < 16:
            raise ValueError(f"waveform length must be an integer >= 16, got {self.length!r}")
        if not self.rms_level > 0:
            raise ValueError(f"rms_level must be positive, got {self.rms_level!r}")


@dataclass(frozen=True, eq=False)
class IQBuffer:
    """Complex baseband samples.

    ``start`` is the absolute index of ``samples[0]``. When ``origin`` is set
    the buffer is a window onto a generated waveform, and samples outside it
    can be regenerated on demand with :meth:`segment`.
    """

    samples: np.ndarray
    sample_rate: float
    origin: WaveformSpec | None = None
    start: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError("IQBuffer samples must be one-dimensional")
        if not np.iscomplexobj(samples):
            samples = samples.astype(np.complex128)
        if not np.all(np.isfinite(samples)):
            raise ValueError("IQBuffer samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    def segment(self, start: int, stop: int) -> np.ndarray:
        """Samples at absolute indices [start, stop).

        Indices outside the buffer come from the generator when ``origin`` is
        known and are zero otherwise.
        """
        lo, hi = self.start, self.start + len(self.samples)
        if lo <= start and stop <= hi:
            return self.samples[start - lo:stop - lo]
        if self.origin is not None:
            return generate_range(self.origin, start, stop).astype(self.samples.dtype)
        out = np.zeros(stop - start, dtype=self.samples.dtype)
        a, b = max(start, lo), min(stop, hi)
        if a < b:
            out[a - start:b - start] = self.samples[a - lo:b - lo]
        return out

    def slice(self, start: int, stop: int) -> "IQBuffer":
        """Sub-buffer by local index, keeping the absolute position."""
        if not 0 <= start <= stop <= len(self):
            raise ValueError(f"slice [{start}, {stop}) outside buffer of length {len(self)}")
        return IQBuffer(self.samples[start:stop], self.sample_rate, self.origin, self.start + start)


def band_mask(freqs: np.ndarray, bandwidth: float) -> np.ndarray:
    """Raised-cosine amplitude mask, 1 inside +-B/2 and 0 outside, with a
    cosine transition of total width ``_ROLLOFF * B`` centred on the band edge."""
    half = 0.5 * bandwidth
    width = _ROLLOFF * bandwidth
    f = np.abs(freqs)
    x = np.clip((f - (half - 0.5 * width)) / width, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * x))


@functools.lru_cache(maxsize=16)
def band_filter(bandwidth: float, sample_rate: float) -> np.ndarray:
    """Unit-energy real FIR taps realizing :func:`band_mask`."""
    if bandwidth * (1.0 + 0.5 * _ROLLOFF) >= sample_rate:
        taps = np.zeros(_TAPS)
        taps[_TAPS // 2] = 1.0
        return taps
    freqs = np.fft.fftfreq(_TAPS, d=1.0 / sample_rate)
    impulse = np.fft.fftshift(np.fft.ifft(band_mask(freqs, bandwidth)).real)
    taps = impulse * np.kaiser(_TAPS, _KAISER_BETA)
    taps /= np.sqrt(np.sum(taps**2))
    taps.setflags(write=False)
    return taps


def _white_block(seed: int, block: int) -> np.ndarray:
    counter = np.array([0, 0, 0, block & _U64], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=seed, counter=counter))
    draws = gen.standard_normal(2 * _BLOCK)
    return (draws[0::2] + 1j * draws[1::2]) / np.sqrt(2.0)


def white_noise_range(seed: int, start: int, stop: int) -> np.ndarray:
    """Unit-variance circular complex white Gaussian noise at absolute indices [start, stop)."""
    if stop <= start:
        return np.zeros(0, dtype=np.complex128)
    first, last = start // _BLOCK, (stop - 1) // _BLOCK
    blocks = [_white_block(seed, b) for b in range(first, last + 1)]
    joined = np.concatenate(blocks)
    offset = start - first * _BLOCK
    return joined[offset:offset + stop - start]


def _filtered_block(spec: WaveformSpec, block: int) -> np.ndarray:
    taps = band_filter(spec.radar.bandwidth, spec.radar.sample_rate)
    lo = block * _BLOCK
    white = white_noise_range(spec.seed, lo - (_TAPS - 1), lo + _BLOCK)
    return spec.rms_level * signal.fftconvolve(white, taps, mode="valid")


def generate_range(spec: WaveformSpec, start: int, stop: int) -> np.ndarray:
    """Waveform samples at absolute indices [start, stop); may extend past
    either end of ``spec.length``."""
    if stop <= start:
        return np.zeros(0, dtype=np.complex128)
    first, last = start // _BLOCK, (stop - 1) // _BLOCK
    out = np.empty(stop - start, dtype=np.complex128)
    for b in range(first, last + 1):
        block = _filtered_block(spec, b)
        lo = b * _BLOCK
        a, z = max(start, lo), min(stop, lo + _BLOCK)
        out[a - start:z - start] = block[a - lo:z - lo]
    return out


def generate_noise(spec: WaveformSpec) -> IQBuffer:
    return IQBuffer(generate_range(spec, 0, spec.length), spec.radar.sample_rate, origin=spec)


def correlate_full(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelation R[k] = sum_n x[n] conj(x[n-k]) for k = 0..max_lag."""
    n = len(x)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.fft(x, nfft)
    return np.fft.ifft(spec * np.conj(spec))[:max_lag + 1]


def autocorrelation_peak_to_sidelobe(x: IQBuffer | np.ndarray, max_lag: int) -> float:
    """Ratio of the zero-lag autocorrelation power to the largest power at
    lags 1..max_lag, in dB. Returns ``inf`` when every sidelobe is zero."""
    samples = np.asarray(x.samples if isinstance(x, IQBuffer) else x)
    if samples.size == 0:
        raise ValueError("empty buffer")
    if not 0 < max_lag < samples.size / 2:
        raise ValueError(f"max_lag must be in (0, {samples.size / 2}), got {max_lag}")
    r = correlate_full(samples, max_lag)
    main = np.abs(r[0]) ** 2
    side = np.max(np.abs(r[1:]) ** 2)
    if side <= main * 1e-24:
        return float("inf")
    return float(10.0 * np.log10(main / side))
