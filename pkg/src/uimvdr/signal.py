"""Waveform containers and the STFT / ISTFT pair.

Shape conventions used across the package:

    Waveform.samples:        (C, L)    real, channels first
    ComplexSpectrogram.bins: (T, F, C) complex, frames first

DFT normalization is fixed once: the forward transform is unnormalized
(``numpy.fft.rfft``) and the inverse carries the ``1/fft_len`` factor
(``numpy.fft.irfft``).  :func:`spectral_energy` uses the same convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Waveform",
    "StftConfig",
    "ComplexSpectrogram",
    "window_function",
    "stft_forward",
    "istft_inverse",
    "spectral_energy",
    "frame_energy",
]

DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True)
class Waveform:
    """Multichannel time-domain signal, ``samples`` shaped (C, L)."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ValueError(f"samples must be (C, L), got shape {samples.shape}")
        if samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError("waveform must have at least one channel and one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def channel(self, index: int) -> "Waveform":
        return Waveform(self.samples[index : index + 1], self.sample_rate)


def window_function(name: str, length: int) -> np.ndarray:
    """Periodic analysis/synthesis taper of the given length."""
    n = np.arange(length)
    if name == "sqrt_hann":
        return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / length))
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if name in ("rect", "boxcar"):
        return np.ones(length)
    raise ValueError(f"unknown window {name!r}")


def _overlap_add_envelope(window: np.ndarray, hop: int, num_frames: int) -> np.ndarray:
    total = hop * (num_frames - 1) + window.size
    env = np.zeros(total)
    sq = window * window
    for t in range(num_frames):
        env[t * hop : t * hop + window.size] += sq
    return env


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters.  Defaults give 64 ms frames at 16 kHz, 50% overlap.

    ``pad_mode`` is ``"reflect"`` (half a window reflected at both ends,
    plus zeros so the last sample is covered) or ``"none"``.
    """

    window_len: int = 1024
    hop_len: int = 512
    fft_len: int = 1024
    window: str = "sqrt_hann"
    pad_mode: str = "reflect"

    def __post_init__(self):
        if not 0 < self.hop_len <= self.window_len <= self.fft_len:
            raise ValueError(
                "need 0 < hop_len <= window_len <= fft_len, got "
                f"{self.hop_len}, {self.window_len}, {self.fft_len}"
            )
        if self.pad_mode not in ("reflect", "none"):
            raise ValueError(f"unknown pad_mode {self.pad_mode!r}")
        win = window_function(self.window, self.window_len)
        if not self._is_cola(win):
            raise ValueError(
                f"window {self.window!r} with hop {self.hop_len} does not satisfy "
                "the constant-overlap-add condition for squared tapers"
            )

    def _is_cola(self, win: np.ndarray) -> bool:
        # Sum of squared tapers shifted by multiples of hop must be constant.
        sq = win * win
        period = np.zeros(self.hop_len)
        for start in range(0, self.window_len, self.hop_len):
            chunk = sq[start : start + self.hop_len]
            period[: chunk.size] += chunk
        return bool(np.ptp(period) <= 1e-10 * max(period.max(), 1e-300) and period.min() > 0)

    @classmethod
    def from_ms(cls, window_ms: float = 64.0, sample_rate: int = DEFAULT_SAMPLE_RATE, **kwargs) -> "StftConfig":
        """Config with a window of ``window_ms`` milliseconds and 50% overlap."""
        window_len = int(round(window_ms * sample_rate / 1000.0))
        window_len += window_len % 2
        return cls(window_len=window_len, hop_len=window_len // 2, fft_len=window_len, **kwargs)

    @property
    def num_bins(self) -> int:
        return self.fft_len // 2 + 1

    @property
    def pad_left(self) -> int:
        return self.window_len // 2 if self.pad_mode == "reflect" else 0

    def taper(self) -> np.ndarray:
        return window_function(self.window, self.window_len)

    def num_frames(self, num_samples: int) -> int:
        """Frame count for a signal of ``num_samples`` samples."""
        padded = self._padded_length(num_samples)
        return 1 + (padded - self.window_len) // self.hop_len

    def _padded_length(self, num_samples: int) -> int:
        if self.pad_mode == "none":
            return num_samples
        base = num_samples + 2 * self.pad_left
        extra = (-(base - self.window_len)) % self.hop_len
        return base + extra


@dataclass(frozen=True)
class ComplexSpectrogram:
    """One-sided STFT, ``bins`` shaped (T, F, C).

    ``num_samples`` is the length of the signal it came from, so the
    inverse can trim exactly.
    """

    bins: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = DEFAULT_SAMPLE_RATE
    num_samples: int | None = None

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        if bins.ndim == 2:
            bins = bins[:, :, np.newaxis]
        if bins.ndim != 3:
            raise ValueError(f"bins must be (T, F, C), got shape {bins.shape}")
        if bins.shape[1] != self.config.num_bins:
            raise ValueError(
                f"expected {self.config.num_bins} frequency bins for fft_len "
                f"{self.config.fft_len}, got {bins.shape[1]}"
            )
        if not np.all(np.isfinite(bins)):
            raise ValueError("spectrogram contains non-finite entries")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.bins.shape

    @property
    def num_frames(self) -> int:
        return self.bins.shape[0]

    @property
    def num_channels(self) -> int:
        return self.bins.shape[2]

    def with_bins(self, bins: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(bins, self.config, self.sample_rate, self.num_samples)

    def channel(self, index: int) -> "ComplexSpectrogram":
        return self.with_bins(self.bins[:, :, index : index + 1])


def _pad(samples: np.ndarray, cfg: StftConfig) -> np.ndarray:
    if cfg.pad_mode == "none":
        return samples
    p = cfg.pad_left
    padded = np.pad(samples, ((0, 0), (p, p)), mode="reflect")
    extra = cfg._padded_length(samples.shape[1]) - padded.shape[1]
    if extra:
        padded = np.pad(padded, ((0, 0), (0, extra)))
    return padded


def stft_forward(wave: Waveform, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    """Per-channel windowed one-sided DFT of every frame."""
    cfg = cfg or StftConfig()
    padded = _pad(wave.samples, cfg)
    if padded.shape[1] < cfg.window_len:
        raise ValueError(
            f"signal of {wave.num_samples} samples is shorter than one window "
            f"({cfg.window_len}) after padding"
        )
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.window_len, axis=-1)
    frames = frames[:, :: cfg.hop_len, :] * cfg.taper()
    spec = np.fft.rfft(frames, n=cfg.fft_len, axis=-1)  # (C, T, F)
    return ComplexSpectrogram(
        np.ascontiguousarray(spec.transpose(1, 2, 0)), cfg, wave.sample_rate, wave.num_samples
    )


def istft_inverse(
    spec: ComplexSpectrogram, cfg: StftConfig | None = None, out_len: int | None = None
) -> Waveform:
    """Weighted overlap-add synthesis, trimmed to ``out_len`` samples."""
    if cfg is not None and cfg != spec.config:
        raise ValueError(f"config mismatch: spectrogram built with {spec.config}, got {cfg}")
    cfg = spec.config
    if out_len is None:
        out_len = spec.num_samples
    num_frames = spec.num_frames
    frames = np.fft.irfft(spec.bins.transpose(2, 0, 1), n=cfg.fft_len, axis=-1)
    win = cfg.taper()
    frames = frames[:, :, : cfg.window_len] * win

    total = cfg.hop_len * (num_frames - 1) + cfg.window_len
    out = np.zeros((spec.num_channels, total))
    for t in range(num_frames):
        out[:, t * cfg.hop_len : t * cfg.hop_len + cfg.window_len] += frames[:, t]
    env = _overlap_add_envelope(win, cfg.hop_len, num_frames)
    nz = env > 1e-10 * env.max()
    out[:, nz] /= env[nz]
    out[:, ~nz] = 0.0

    start = cfg.pad_left
    if out_len is None:
        out_len = total - 2 * start
    if start + out_len > total:
        raise ValueError(f"out_len {out_len} exceeds reconstructible length {total - start}")
    return Waveform(out[:, start : start + out_len], spec.sample_rate)


def spectral_energy(spec: ComplexSpectrogram) -> float:
    """Time-domain energy of all windowed frames, computed from the bins.

    Undoes the one-sided folding: interior bins count twice, DC and (for
    even ``fft_len``) Nyquist once, all divided by ``fft_len``.
    """
    n = spec.config.fft_len
    weights = np.full(spec.config.num_bins, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    power = np.abs(spec.bins) ** 2
    return float(np.einsum("tfc,f->", power, weights) / n)


def frame_energy(wave: Waveform, cfg: StftConfig | None = None) -> float:
    """Energy of all windowed (padded) frames in the time domain."""
    cfg = cfg or StftConfig()
    padded = _pad(wave.samples, cfg)
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.window_len, axis=-1)
    frames = frames[:, :: cfg.hop_len, :] * cfg.taper()
    return float(np.sum(frames * frames))
