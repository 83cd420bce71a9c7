"""Seeded free-field scene synthesis for microphone arrays.

All randomness goes through ``numpy.random.default_rng(seed)`` (PCG64),
and every function documents its draw order so scenes can be replayed.
Coordinates are metres, angles degrees, delays seconds.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy import optimize, signal as sp_signal

from .metrics import si_sdr
from .signal import DEFAULT_SAMPLE_RATE, Waveform

__all__ = [
    "ArrayGeometry",
    "SourceSpec",
    "SceneSpec",
    "MomSpec",
    "MomResult",
    "BenchmarkScene",
    "SPEED_OF_SOUND",
    "PRESETS",
    "preset",
    "steering_delays",
    "render_source",
    "mix_scene",
    "build_mom",
    "convolve_rir",
    "synth_source",
    "make_benchmark_scene",
    "gcc_phat_tdoa",
]

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class ArrayGeometry:
    mic_positions: np.ndarray  # (M, 3)
    name: str = "custom"

    def __post_init__(self):
        pos = np.asarray(self.mic_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError(f"mic_positions must be (M, 3) with M >= 1, got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("mic positions must be finite")
        if pos.shape[0] > 1:
            dist = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
            if np.any(dist[np.triu_indices(pos.shape[0], 1)] == 0.0):
                raise ValueError("microphone positions must be pairwise distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "mic_positions", pos)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.mic_positions, other.mic_positions)

    __hash__ = None


def _respeaker(side: float = 0.0457) -> ArrayGeometry:
    h = side / 2.0
    pos = [(h, h, 0.0), (-h, h, 0.0), (-h, -h, 0.0), (h, -h, 0.0)]
    return ArrayGeometry(np.array(pos), "respeaker")


def _kinect(spacing: float = 0.04) -> ArrayGeometry:
    x = (np.arange(4) - 1.5) * spacing
    return ArrayGeometry(np.column_stack([x, np.zeros(4), np.zeros(4)]), "kinect")


def _sixteen_sounds(length: float = 0.47, width: float = 0.365, plane_gap: float = 0.035) -> ArrayGeometry:
    # Corners and edge midpoints of each rectangle, walked around the perimeter.
    hx, hy = length / 2.0, width / 2.0
    ring = [(hx, hy), (0.0, hy), (-hx, hy), (-hx, 0.0), (-hx, -hy), (0.0, -hy), (hx, -hy), (hx, 0.0)]
    pos = [(x, y, z) for z in (plane_gap / 2.0, -plane_gap / 2.0) for x, y in ring]
    return ArrayGeometry(np.array(pos), "16sounds")


PRESETS = {
    "respeaker": _respeaker,
    "kinect": _kinect,
    "16sounds": _sixteen_sounds,
}


def preset(name: str, **dims) -> ArrayGeometry:
    """Approximate array layouts; dimensions are keyword-overridable.

    respeaker: 4-mic square, ``side`` 4.57 cm.  kinect: 4-mic line,
    ``spacing`` 4 cm.  16sounds: two 47 x 36.5 cm rectangles 3.5 cm apart,
    8 mics each at the corners and edge midpoints.
    """
    try:
        factory = PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown array preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**dims)


def _direction(azimuth: float, elevation: float) -> np.ndarray:
    az, el = np.deg2rad(azimuth), np.deg2rad(elevation)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def steering_delays(
    geometry: ArrayGeometry, azimuth: float, elevation: float = 0.0, speed_of_sound: float = SPEED_OF_SOUND
) -> np.ndarray:
    """Plane-wave arrival delays per mic relative to the array centroid.

    ``d_c = -(p_c - centroid) . k / c`` where ``k`` points toward the
    source; mics nearer the source get negative delays.
    """
    rel = geometry.mic_positions - geometry.mic_positions.mean(axis=0)
    return -(rel @ _direction(azimuth, elevation)) / speed_of_sound


def render_source(wave: Waveform, delays, gain_db: float = 0.0, sample_rate: int | None = None) -> Waveform:
    """Delay a mono signal per channel by a frequency-domain phase shift.

    The signal is zero-padded by more than the largest delay on both sides
    so wrap-around lands in the discarded padding.
    """
    if wave.num_channels != 1:
        raise ValueError("render_source takes a mono waveform")
    delays = np.asarray(delays, dtype=np.float64).ravel()
    if not np.all(np.isfinite(delays)):
        raise ValueError("delays must be finite")
    fs = sample_rate or wave.sample_rate
    length = wave.num_samples
    pad = int(np.ceil(np.max(np.abs(delays)) * fs)) + 1 if delays.size else 1
    nfft = sp_fft.next_fast_len(length + 2 * pad, real=True)
    buf = np.zeros(nfft)
    buf[pad : pad + length] = wave.samples[0] * 10.0 ** (gain_db / 20.0)
    spec = np.fft.rfft(buf)
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    shifted = spec[np.newaxis] * np.exp(-2j * np.pi * freqs[np.newaxis] * delays[:, np.newaxis])
    out = np.fft.irfft(shifted, n=nfft, axis=-1)[:, pad : pad + length]
    return Waveform(out, fs)


@dataclass(frozen=True)
class SourceSpec:
    wave: Waveform
    azimuth: float
    elevation: float = 0.0
    gain_db: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.azimuth < 360.0:
            raise ValueError(f"azimuth must lie in [0, 360), got {self.azimuth}")
        if abs(self.gain_db) > 60.0:
            raise ValueError(f"|gain_db| must be <= 60, got {self.gain_db}")


@dataclass(frozen=True)
class SceneSpec:
    geometry: ArrayGeometry
    sources: tuple[SourceSpec, ...]
    sample_rate: int = DEFAULT_SAMPLE_RATE
    speed_of_sound: float = SPEED_OF_SOUND
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))


def mix_scene(spec: SceneSpec) -> tuple[Waveform, list[Waveform]]:
    """Render every source and sum them; returns (mixture, stems)."""
    if not spec.sources:
        raise ValueError("scene has no sources")
    lengths = {s.wave.num_samples for s in spec.sources}
    if len(lengths) != 1:
        raise ValueError(f"source lengths differ: {sorted(lengths)}")
    stems = []
    for src in spec.sources:
        if src.wave.sample_rate != spec.sample_rate:
            raise ValueError(
                f"source sample rate {src.wave.sample_rate} != scene rate {spec.sample_rate}"
            )
        delays = steering_delays(spec.geometry, src.azimuth, src.elevation, spec.speed_of_sound)
        stems.append(render_source(src.wave, delays, src.gain_db, spec.sample_rate))
    mix = np.zeros_like(stems[0].samples)
    for stem in stems:
        mix = mix + stem.samples
    return Waveform(mix, spec.sample_rate), stems


@dataclass(frozen=True)
class MomSpec:
    """Mixture-of-mixtures recipe.

    ``k`` mixtures are combined: the first drawn from ``target_mixtures``,
    the rest from ``interference_mixtures``.  ``k=None`` draws it
    uniformly from ``k_range``.
    """

    target_mixtures: Sequence[Waveform]
    interference_mixtures: Sequence[Waveform]
    k: int | None = None
    gain_range: tuple[float, float] = (-5.0, 5.0)
    seed: int = 0
    k_range: tuple[int, int] = (2, 4)

    def __post_init__(self):
        lo, hi = self.k_range
        if not 2 <= lo <= hi <= 4:
            raise ValueError(f"k_range must lie within [2, 4], got {self.k_range}")
        if self.k is not None and not lo <= self.k <= hi:
            raise ValueError(f"k must lie in {self.k_range}, got {self.k}")
        if self.gain_range[0] > self.gain_range[1]:
            raise ValueError(f"bad gain_range {self.gain_range}")


@dataclass(frozen=True)
class MomResult:
    mom: Waveform
    components: list[Waveform]  # gain-scaled, component 0 holds the target class
    gains_db: np.ndarray
    target_index: int
    interference_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def build_mom(spec: MomSpec) -> MomResult:
    """Draw and sum a mixture of mixtures.

    Draw order from ``default_rng(spec.seed)``: k (only if ``spec.k`` is
    None), target index, interference indices (without replacement when
    enough are available), then one uniform dB gain per mixture in
    mixture order.  Gains scale amplitudes by ``10^(g/20)``.
    """
    if not spec.target_mixtures or not spec.interference_mixtures:
        raise ValueError("MoM needs at least one target and one interference mixture")
    rng = np.random.default_rng(spec.seed)
    k = spec.k if spec.k is not None else int(rng.integers(spec.k_range[0], spec.k_range[1] + 1))
    target_index = int(rng.integers(len(spec.target_mixtures)))
    n_int = len(spec.interference_mixtures)
    interference = rng.choice(n_int, size=k - 1, replace=n_int < k - 1)
    gains = rng.uniform(spec.gain_range[0], spec.gain_range[1], size=k)

    chosen = [spec.target_mixtures[target_index]] + [spec.interference_mixtures[i] for i in interference]
    shapes = {w.samples.shape for w in chosen}
    rates = {w.sample_rate for w in chosen}
    if len(shapes) != 1 or len(rates) != 1:
        raise ValueError("all mixtures in a MoM must share shape and sample rate")
    fs = chosen[0].sample_rate
    components = [Waveform(w.samples * 10.0 ** (g / 20.0), fs) for w, g in zip(chosen, gains)]
    mom = np.zeros_like(components[0].samples)
    for comp in components:
        mom = mom + comp.samples
    return MomResult(Waveform(mom, fs), components, gains, target_index, np.asarray(interference))


def convolve_rir(wave: Waveform, rirs: Waveform) -> Waveform:
    """Full convolution of a mono signal with each RIR channel, cut to input length."""
    if wave.num_channels != 1:
        raise ValueError("convolve_rir takes a mono waveform")
    if rirs.num_samples < 1:
        raise ValueError("empty RIR")
    x = wave.samples[0]
    out = np.stack([sp_signal.convolve(x, h)[: wave.num_samples] for h in rirs.samples])
    return Waveform(out, wave.sample_rate)


def synth_source(seed: int, num_samples: int, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Speech-like test signal: gliding harmonic voice plus coloured noise,
    gated by a syllable-rate envelope, unit RMS.

    Draw order: f0, vibrato rate, vibrato phase, harmonic phases, noise,
    noise band centre, syllable segment lengths and on/off flags.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(num_samples) / sample_rate
    f0_base = rng.uniform(90.0, 260.0)
    vib_rate = rng.uniform(0.2, 1.5)
    vib_phase = rng.uniform(0, 2 * np.pi)
    f0 = f0_base * (1.0 + 0.12 * np.sin(2 * np.pi * vib_rate * t + vib_phase))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    n_harm = int(0.45 * sample_rate / (f0_base * 1.12))
    harm_phases = rng.uniform(0, 2 * np.pi, size=n_harm)
    voiced = np.zeros(num_samples)
    for h in range(1, n_harm + 1):
        voiced += np.sin(h * phase + harm_phases[h - 1]) / h

    noise = rng.standard_normal(num_samples)
    centre = rng.uniform(500.0, 0.35 * sample_rate)
    band = (max(centre / 1.6, 50.0), min(centre * 1.6, 0.49 * sample_rate))
    sos = sp_signal.butter(2, band, btype="bandpass", fs=sample_rate, output="sos")
    noise = sp_signal.sosfilt(sos, noise)
    noise /= np.std(noise) + 1e-12

    env = np.zeros(num_samples)
    pos = 0
    while pos < num_samples:
        seg = int(rng.uniform(0.08, 0.35) * sample_rate)
        if rng.uniform() < 0.7:
            env[pos : pos + seg] = 1.0
        pos += seg
    smooth = np.hanning(max(int(0.02 * sample_rate), 3))
    env = sp_signal.convolve(env, smooth / smooth.sum(), mode="same", method="direct")

    x = env * (voiced / (np.std(voiced) + 1e-12) + 0.3 * noise)
    rms = np.sqrt(np.mean(x * x))
    return Waveform(x / (rms if rms > 0 else 1.0), sample_rate)


@dataclass(frozen=True)
class BenchmarkScene:
    spec: SceneSpec
    mixture: Waveform
    stems: list[Waveform]
    source_seeds: tuple[int, ...]
    input_si_sdr: float  # at the reference mic

    @property
    def target_image(self) -> Waveform:
        return self.stems[0]


def make_benchmark_scene(
    seed: int,
    geometry: ArrayGeometry | None = None,
    duration: float = 5.0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    num_interferers: int | None = None,
    input_si_sdr_range: tuple[float, float] = (-5.0, 5.0),
    ref_mic: int = 0,
    speed_of_sound: float = SPEED_OF_SOUND,
) -> BenchmarkScene:
    """One target plus 1-3 interferers at distinct azimuths on a 45 degree grid.

    Draw order: interferer count (if not given), azimuth grid slots,
    per-source signal seeds, interferer gains in [-5, 5] dB, the target
    input SI-SDR.  The target gain is then solved so the reference-mic
    mixture has exactly that input SI-SDR.
    """
    geometry = geometry or preset("respeaker")
    rng = np.random.default_rng(seed)
    n_int = int(rng.integers(1, 4)) if num_interferers is None else int(num_interferers)
    if not 1 <= n_int <= 7:
        raise ValueError("need between 1 and 7 interferers on the 45 degree grid")
    slots = rng.choice(8, size=n_int + 1, replace=False)
    seeds = tuple(int(s) for s in rng.integers(0, 2**31 - 1, size=n_int + 1))
    int_gains = rng.uniform(-5.0, 5.0, size=n_int)
    wanted = float(rng.uniform(*input_si_sdr_range))

    num_samples = int(round(duration * sample_rate))
    waves = [synth_source(s, num_samples, sample_rate) for s in seeds]
    sources = [SourceSpec(waves[0], float(slots[0] * 45.0), 0.0, 0.0, "target")]
    sources += [
        SourceSpec(w, float(a * 45.0), 0.0, float(g), f"interferer{i}")
        for i, (w, a, g) in enumerate(zip(waves[1:], slots[1:], int_gains))
    ]
    spec = SceneSpec(geometry, tuple(sources), sample_rate, speed_of_sound, seed)
    _, stems = mix_scene(spec)
    tgt = stems[0].samples[ref_mic]
    interf = np.zeros_like(tgt)
    for stem in stems[1:]:
        interf = interf + stem.samples[ref_mic]

    def gap(gain_db):
        return si_sdr(10.0 ** (gain_db / 20.0) * tgt + interf, tgt) - wanted

    target_gain = float(optimize.brentq(gap, -59.0, 59.0, xtol=1e-12))
    sources[0] = replace(sources[0], gain_db=target_gain)
    spec = replace(spec, sources=tuple(sources))
    mixture, stems = mix_scene(spec)
    return BenchmarkScene(
        spec, mixture, stems, seeds, si_sdr(mixture.samples[ref_mic], stems[0].samples[ref_mic])
    )


def gcc_phat_tdoa(a: np.ndarray, b: np.ndarray, sample_rate: int, interp: int = 16, max_tau: float | None = None) -> float:
    """Delay of ``b`` relative to ``a`` in seconds by GCC-PHAT.

    Positive when ``b`` lags ``a``.  ``interp`` upsamples the correlation
    for sub-sample resolution.
    """
    n = a.size + b.size
    nfft = sp_fft.next_fast_len(n, real=True)
    cross = np.fft.rfft(b, nfft) * np.conj(np.fft.rfft(a, nfft))
    cross /= np.abs(cross) + 1e-15
    cc = np.fft.irfft(cross, n=interp * nfft)
    max_shift = interp * nfft // 2
    if max_tau is not None:
        max_shift = min(int(interp * sample_rate * max_tau), max_shift)
    cc = np.concatenate((cc[-max_shift:], cc[: max_shift + 1]))
    shift = int(np.argmax(np.abs(cc))) - max_shift
    return shift / float(interp * sample_rate)
