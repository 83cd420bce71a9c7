"""File formats: WAV, UMSK1 mask tensors, geometry descriptors, scene
manifests and metric reports.

UMSK1 layout (all little-endian)::

    offset  size  field
    0       5     magic b"UMSK1"
    5       2     version (u16), currently 1
    7       4     T frames (u32)
    11      4     F bins (u32)
    15      4     S layers (u32)
    19      4*S*T*F  float32 payload, layer-major, then t outer, f inner

Geometry descriptor: text lines ``name=<id>`` and one ``mic=<x> <y> <z>``
per microphone (metres).  ``#`` starts a comment.

Scene manifest: one record per line.  Scalar records are ``key=value``;
``mic`` lines carry coordinates and ``source`` lines carry space-separated
``key=value`` fields.  Floats are written with ``repr`` so a replay is
bit-identical.
"""
from __future__ import annotations

import logging
import os
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .metrics import MetricReport
from .scene import ArrayGeometry, SceneSpec, SourceSpec, synth_source
from .signal import Waveform

log = logging.getLogger(__name__)

__all__ = [
    "FileFormatError",
    "read_wav",
    "write_wav",
    "MaskFile",
    "read_mask_file",
    "write_mask_file",
    "read_geometry",
    "write_geometry",
    "SceneManifest",
    "write_manifest",
    "read_manifest",
    "append_report",
    "read_report",
]

PathLike = str | os.PathLike


class FileFormatError(ValueError):
    """Unsupported, malformed or truncated input file."""


# --------------------------------------------------------------------- WAV


def read_wav(path: PathLike) -> Waveform:
    """Read PCM16 or IEEE float32 WAV into float64 samples (C, L).

    PCM16 is scaled by 1/32768.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, struct.error, EOFError, wavfile.WavFileWarning) as exc:
        raise FileFormatError(f"{path}: malformed or truncated WAV ({exc})") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FileFormatError(f"{path}: unsupported sample format {data.dtype}; need PCM16 or float32")
    if samples.ndim == 1:
        samples = samples[:, np.newaxis]
    if samples.shape[0] == 0:
        raise FileFormatError(f"{path}: no samples")
    return Waveform(samples.T, rate)


def write_wav(path: PathLike, wave: Waveform, encoding: str = "float32") -> None:
    """Write ``wave`` as ``"float32"`` or ``"pcm16"``.

    PCM16: ``round(x * 32768)`` clamped to [-32768, 32767].
    """
    data = wave.samples.T
    if encoding == "float32":
        out = data.astype("<f4")
    elif encoding == "pcm16":
        out = np.clip(np.round(data * 32768.0), -32768, 32767).astype("<i2")
    else:
        raise ValueError(f"unsupported encoding {encoding!r}")
    if out.shape[1] == 1:
        out = out[:, 0]
    wavfile.write(path, wave.sample_rate, np.ascontiguousarray(out))


# ----------------------------------------------------------------- UMSK1

_MASK_MAGIC = b"UMSK1"
_MASK_HEADER = struct.Struct("<5sHIII")
MASK_VERSION = 1


@dataclass(frozen=True)
class MaskFile:
    layers: np.ndarray  # (S, T, F) float32 values in [0, 1]
    clamped: int = 0  # entries pulled into [0, 1] on read


def write_mask_file(path: PathLike, layers) -> None:
    """Write an (S, T, F) or (T, F) mask tensor."""
    arr = np.asarray(layers, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"mask tensor must be (S, T, F), got shape {arr.shape}")
    s, t, f = arr.shape
    with open(path, "wb") as fh:
        fh.write(_MASK_HEADER.pack(_MASK_MAGIC, MASK_VERSION, t, f, s))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_mask_file(path: PathLike) -> MaskFile:
    raw = Path(path).read_bytes()
    if len(raw) < _MASK_HEADER.size:
        raise FileFormatError(f"{path}: truncated mask header")
    magic, version, t, f, s = _MASK_HEADER.unpack_from(raw)
    if magic != _MASK_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if version != MASK_VERSION:
        raise FileFormatError(f"{path}: unsupported mask version {version}")
    expected = 4 * s * t * f
    payload = raw[_MASK_HEADER.size :]
    if len(payload) != expected:
        raise FileFormatError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    layers = np.frombuffer(payload, dtype="<f4").reshape(s, t, f).astype(np.float32)
    if np.isnan(layers).any():
        raise FileFormatError(f"{path}: mask contains NaN")
    out_of_range = int(np.count_nonzero((layers < 0) | (layers > 1)))
    if out_of_range:
        log.warning("%s: clamped %d mask values into [0, 1]", path, out_of_range)
        layers = np.clip(layers, 0.0, 1.0)
    return MaskFile(layers, out_of_range)


# -------------------------------------------------------------- geometry


def write_geometry(path: PathLike, geometry: ArrayGeometry) -> None:
    lines = ["# microphone positions in metres", f"name={geometry.name}"]
    lines += [f"mic={x!r} {y!r} {z!r}" for x, y, z in geometry.mic_positions.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_geometry_lines(lines, source: str) -> ArrayGeometry:
    name, mics = "custom", []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FileFormatError(f"{source}:{lineno}: expected key=value")
        key = key.strip()
        if key == "name":
            name = value.strip()
        elif key == "mic":
            coords = value.split()
            if len(coords) != 3:
                raise FileFormatError(f"{source}:{lineno}: mic needs 3 coordinates")
            mics.append([float(c) for c in coords])
        else:
            raise FileFormatError(f"{source}:{lineno}: unknown key {key!r}")
    if not mics:
        raise FileFormatError(f"{source}: no microphones")
    return ArrayGeometry(np.array(mics), name)


def read_geometry(path: PathLike) -> ArrayGeometry:
    return _parse_geometry_lines(Path(path).read_text().splitlines(), str(path))


# -------------------------------------------------------------- manifest

MANIFEST_FORMAT = "uimvdr-manifest/1"


@dataclass(frozen=True)
class SceneManifest:
    """Everything needed to re-render a simulated scene.

    ``signals`` holds one descriptor per source: ``synth:<seed>`` for a
    generated signal or ``file:<path>`` for a mono WAV.
    """

    spec: SceneSpec
    num_samples: int
    signals: tuple[str, ...]
    stem_files: tuple[str, ...] = ()
    mixture_file: str = "mixture.wav"
    encoding: str = "float32"
    extra: tuple[tuple[str, str], ...] = ()


def write_manifest(path: PathLike, manifest: SceneManifest) -> None:
    spec = manifest.spec
    lines = [
        f"format={MANIFEST_FORMAT}",
        f"seed={spec.seed}",
        f"sample_rate={spec.sample_rate}",
        f"num_samples={manifest.num_samples}",
        f"speed_of_sound={spec.speed_of_sound!r}",
        f"encoding={manifest.encoding}",
        f"mixture={manifest.mixture_file}",
        f"geometry={spec.geometry.name}",
    ]
    lines += [f"mic={x!r} {y!r} {z!r}" for x, y, z in spec.geometry.mic_positions.tolist()]
    stems = manifest.stem_files or tuple("-" for _ in spec.sources)
    for i, (src, sig, stem) in enumerate(zip(spec.sources, manifest.signals, stems)):
        label = src.label or "-"
        lines.append(
            f"source index={i} label={label} signal={sig} azimuth={src.azimuth!r} "
            f"elevation={src.elevation!r} gain_db={src.gain_db!r} stem={stem}"
        )
    lines += [f"{k}={v}" for k, v in manifest.extra]
    Path(path).write_text("\n".join(lines) + "\n")


def _load_signal(descriptor: str, num_samples: int, sample_rate: int, base: Path) -> Waveform:
    kind, _, arg = descriptor.partition(":")
    if kind == "synth":
        return synth_source(int(arg), num_samples, sample_rate)
    if kind == "file":
        path = Path(arg)
        wave = read_wav(path if path.is_absolute() else base / path)
        if wave.num_channels != 1:
            raise FileFormatError(f"{arg}: source signals must be mono")
        if wave.num_samples != num_samples:
            raise FileFormatError(f"{arg}: expected {num_samples} samples, got {wave.num_samples}")
        return wave
    raise FileFormatError(f"unknown signal descriptor {descriptor!r}")


def read_manifest(path: PathLike) -> SceneManifest:
    path = Path(path)
    try:
        return _parse_manifest(path)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"{path}: malformed manifest ({exc!r})") from exc


def _parse_manifest(path: Path) -> SceneManifest:
    scalars: dict[str, str] = {}
    mics, sources = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("source "):
            fields = dict(tok.split("=", 1) for tok in line.split()[1:])
            sources.append(fields)
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FileFormatError(f"{path}:{lineno}: expected key=value")
        if key == "mic":
            mics.append([float(c) for c in value.split()])
        else:
            scalars[key] = value
    if scalars.get("format") != MANIFEST_FORMAT:
        raise FileFormatError(f"{path}: not a {MANIFEST_FORMAT} manifest")
    if not mics or not sources:
        raise FileFormatError(f"{path}: manifest lists no microphones or no sources")

    sample_rate = int(scalars["sample_rate"])
    num_samples = int(scalars["num_samples"])
    geometry = ArrayGeometry(np.array(mics), scalars.get("geometry", "custom"))
    specs, signals, stems = [], [], []
    for fields in sorted(sources, key=lambda f: int(f["index"])):
        wave = _load_signal(fields["signal"], num_samples, sample_rate, path.parent)
        label = fields.get("label", "-")
        specs.append(
            SourceSpec(
                wave,
                float(fields["azimuth"]),
                float(fields["elevation"]),
                float(fields["gain_db"]),
                "" if label == "-" else label,
            )
        )
        signals.append(fields["signal"])
        stems.append(fields.get("stem", "-"))
    known = {"format", "seed", "sample_rate", "num_samples", "speed_of_sound", "encoding", "mixture", "geometry"}
    spec = SceneSpec(
        geometry,
        tuple(specs),
        sample_rate,
        float(scalars.get("speed_of_sound", "343.0")),
        int(scalars.get("seed", "0")),
    )
    return SceneManifest(
        spec,
        num_samples,
        tuple(signals),
        tuple(stems),
        scalars.get("mixture", "mixture.wav"),
        scalars.get("encoding", "float32"),
        tuple((k, v) for k, v in scalars.items() if k not in known),
    )


# ---------------------------------------------------------------- reports


def append_report(path: PathLike | None, report: MetricReport) -> str:
    """Append one record line to ``path`` (or just return it when None)."""
    line = report.to_record()
    if path is not None:
        with open(path, "a") as fh:
            fh.write(line + "\n")
    return line


def read_report(path: PathLike) -> list[MetricReport]:
    return [MetricReport.from_record(l) for l in Path(path).read_text().splitlines() if l.strip()]
