"""Command-line interface: ``uimvdr {simulate,enhance,eval,mixit,mom}``.

Failures print one machine-readable line to stderr,
``error=<kind> message="<text>"``, and exit non-zero (2 for usage, 1 for
everything else).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .beamforming import BeamformConfig, enhance, enhance_mask_only
from .fileio import (
    FileFormatError,
    SceneManifest,
    append_report,
    read_geometry,
    read_manifest,
    read_wav,
    write_manifest,
    write_wav,
)
from .masking import MaskProvider
from .metrics import MetricReport
from .mixit import (
    BRUTE_FORCE_LIMIT,
    LossConfig,
    brute_force_mixing_matrix,
    mixit_total_loss,
    reconstruction_error,
)
from .scene import MomSpec, SceneSpec, SourceSpec, build_mom, make_benchmark_scene, mix_scene, preset
from .signal import StftConfig, Waveform, stft_forward

log = logging.getLogger("uimvdr")


class UsageError(Exception):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error={kind} message={json.dumps(message)}", file=sys.stderr)
    return code


def _geometry(value: str):
    path = Path(value)
    if path.suffix or path.exists():
        return read_geometry(path)
    return preset(value)


def _ref_channel(wave: Waveform, ref_mic: int) -> np.ndarray:
    if wave.num_channels == 1:
        return wave.samples[0]
    if ref_mic >= wave.num_channels:
        raise UsageError(f"--ref-mic {ref_mic} out of range for {wave.num_channels} channels")
    return wave.samples[ref_mic]


def _write_scene(out_dir: Path, manifest: SceneManifest) -> tuple[Waveform, list[Waveform]]:
    mixture, stems = mix_scene(manifest.spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_wav(out_dir / manifest.mixture_file, mixture, manifest.encoding)
    for name, stem in zip(manifest.stem_files, stems):
        write_wav(out_dir / name, stem, manifest.encoding)
    write_manifest(out_dir / "manifest.txt", manifest)
    return mixture, stems


# ------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    out_dir = Path(args.out_dir)
    if args.manifest:
        manifest = read_manifest(args.manifest)
        stems = tuple(
            s if s != "-" else f"stem_{i:02d}.wav" for i, s in enumerate(manifest.stem_files)
        )
        manifest = SceneManifest(
            manifest.spec, manifest.num_samples, manifest.signals, stems,
            manifest.mixture_file, manifest.encoding, manifest.extra,
        )
        _write_scene(out_dir, manifest)
        print(f"replayed={args.manifest} out_dir={out_dir}")
        return 0

    geometry = _geometry(args.geometry)
    if args.source:
        waves, sources, signals = [], [], []
        for i, item in enumerate(args.source):
            parts = item.split("@")
            if len(parts) not in (2, 3):
                raise UsageError(f"--source expects PATH@AZIMUTH[@GAIN_DB], got {item!r}")
            wave = read_wav(parts[0])
            if wave.num_channels != 1:
                raise UsageError(f"{parts[0]}: source signals must be mono")
            gain = float(parts[2]) if len(parts) == 3 else 0.0
            label = "target" if i == 0 else f"interferer{i - 1}"
            waves.append(wave)
            sources.append(SourceSpec(wave, float(parts[1]) % 360.0, 0.0, gain, label))
            signals.append(f"file:{Path(parts[0]).resolve()}")
        if len({w.num_samples for w in waves}) != 1:
            raise UsageError("all --source files must have the same length")
        spec = SceneSpec(geometry, tuple(sources), waves[0].sample_rate, args.speed_of_sound, args.seed)
        num_samples = waves[0].num_samples
        extra = ()
    else:
        scene = make_benchmark_scene(
            args.seed,
            geometry,
            duration=args.duration,
            sample_rate=args.sample_rate,
            num_interferers=args.interferers,
            speed_of_sound=args.speed_of_sound,
        )
        spec = scene.spec
        num_samples = scene.mixture.num_samples
        signals = [f"synth:{s}" for s in scene.source_seeds]
        extra = (("input_si_sdr", repr(scene.input_si_sdr)),)
    stem_files = tuple(f"stem_{i:02d}.wav" for i in range(len(spec.sources)))
    manifest = SceneManifest(spec, num_samples, tuple(signals), stem_files, "mixture.wav", args.encoding, extra)
    _write_scene(out_dir, manifest)
    for i, src in enumerate(spec.sources):
        print(f"source index={i} label={src.label} azimuth={src.azimuth} gain_db={src.gain_db:.4f}")
    print(f"manifest={out_dir / 'manifest.txt'}")
    return 0


def _mask_provider(args, target: Waveform | None) -> MaskProvider:
    mode = args.mask
    if mode == "unit":
        return MaskProvider.unit()
    if mode.startswith("file:"):
        return MaskProvider.external(mode[len("file:"):])
    if mode in ("oracle-wiener", "oracle-binary"):
        if target is None:
            raise UsageError(f"--mask {mode} requires --target-stem")
        if mode == "oracle-wiener":
            return MaskProvider.oracle_wiener(target, args.wiener_exponent)
        return MaskProvider.oracle_binary(target, args.binary_threshold_db)
    raise UsageError(f"unknown --mask {mode!r}; use oracle-wiener, oracle-binary, unit or file:PATH")


def cmd_enhance(args) -> int:
    mixture = read_wav(args.input)
    target = read_wav(args.target_stem) if args.target_stem else None
    provider = _mask_provider(args, target)
    if not 0 <= args.ref_mic < mixture.num_channels:
        raise UsageError(f"--ref-mic {args.ref_mic} out of range for {mixture.num_channels} channels")
    stft_cfg = StftConfig.from_ms(args.window_ms, mixture.sample_rate)
    bf_cfg = BeamformConfig(
        ref_mic=args.ref_mic,
        diagonal_loading=args.diag_load,
        postmask_floor=args.postmask_floor,
        postmask_enabled=not args.no_postmask,
    )
    if args.single_channel:
        out = enhance_mask_only(mixture, provider, stft_cfg, args.ref_mic)
    else:
        out = enhance(mixture, provider, stft_cfg, bf_cfg)
    write_wav(args.output, out, args.encoding)
    log.info("wrote %s (%d samples)", args.output, out.num_samples)
    if target is not None:
        report = MetricReport.evaluate(
            out.samples[0],
            _ref_channel(target, args.ref_mic),
            mixture.samples[args.ref_mic],
            args.scene_id,
        )
        print(append_report(args.report, report))
    return 0


def cmd_eval(args) -> int:
    estimate = read_wav(args.estimate)
    reference = read_wav(args.reference)
    mixture = read_wav(args.mixture) if args.mixture else None
    est = _ref_channel(estimate, args.ref_mic)
    ref = _ref_channel(reference, args.ref_mic)
    mix = _ref_channel(mixture, args.ref_mic) if mixture is not None else None
    report = MetricReport.evaluate(est, ref, mix, args.scene_id)
    print(append_report(args.report, report))
    return 0


def _stack_rows(paths) -> tuple[np.ndarray, int]:
    rows, rates = [], set()
    for p in paths:
        w = read_wav(p)
        rows.extend(w.samples)
        rates.add(w.sample_rate)
    if len(rates) != 1:
        raise UsageError("all files must share one sample rate")
    if len({r.size for r in rows}) != 1:
        raise UsageError("all signals must have the same length")
    return np.array(rows), rates.pop()


def cmd_mixit(args) -> int:
    mixtures, fs = _stack_rows(args.mixtures)
    sources, fs_src = _stack_rows(args.sources)
    if fs != fs_src:
        raise UsageError("mixtures and sources have different sample rates")
    constraint = "weak_enhancement" if args.constraint == "weak" else "unconstrained"
    cfg = LossConfig(args.snr_max, args.gamma, args.beta)
    spectra = None
    if cfg.gamma > 0:
        spectra = stft_forward(Waveform(sources[0], fs), StftConfig.from_ms(args.window_ms, fs))
    loss, mixing = mixit_total_loss(mixtures, sources, spectra, constraint, cfg)
    print("assignment=" + json.dumps(mixing.tolist(), separators=(",", ":")))
    print(f"recon_error={reconstruction_error(mixtures, sources, mixing)!r}")
    if mixtures.shape[0] ** sources.shape[0] <= BRUTE_FORCE_LIMIT:
        best = brute_force_mixing_matrix(mixtures, sources, constraint)
        gap = reconstruction_error(mixtures, sources, mixing) - reconstruction_error(mixtures, sources, best)
        print("brute_force=" + json.dumps(best.tolist(), separators=(",", ":")) + f" gap={gap!r}")
    print(f"loss={loss!r}")
    return 0


def cmd_mom(args) -> int:
    targets = [read_wav(p) for p in args.targets]
    interference = [read_wav(p) for p in args.interference]
    spec = MomSpec(targets, interference, args.k, tuple(args.gain_range), args.seed)
    result = build_mom(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_wav(out_dir / "mom.wav", result.mom, args.encoding)
    lines = [
        "format=uimvdr-mom/1",
        f"seed={args.seed}",
        f"k={len(result.components)}",
        f"target={args.targets[result.target_index]}",
    ]
    for i, (comp, gain) in enumerate(zip(result.components, result.gains_db)):
        name = f"component_{i:02d}.wav"
        write_wav(out_dir / name, comp, args.encoding)
        src = args.targets[result.target_index] if i == 0 else args.interference[result.interference_indices[i - 1]]
        lines.append(f"component index={i} file={name} source={src} gain_db={float(gain)!r}")
    (out_dir / "mom_manifest.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[2:]))
    return 0


# -------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sample-rate", type=int, default=16000, help="Hz (default 16000)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="uimvdr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="render a seeded free-field scene")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--geometry", default="respeaker", help="preset name or descriptor file")
    p.add_argument("--duration", type=float, default=5.0, help="seconds (default 5)")
    p.add_argument("--interferers", type=int, default=None, help="default: drawn from 1-3")
    p.add_argument("--source", action="append", metavar="PATH@AZ[@GAIN]",
                   help="explicit mono source; the first is the target")
    p.add_argument("--manifest", help="replay a manifest instead of drawing a scene")
    p.add_argument("--speed-of-sound", type=float, default=343.0)
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enhance", parents=[common], help="mask + MVDR enhancement of a multichannel WAV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mask", default="oracle-wiener",
                   help="oracle-wiener | oracle-binary | unit | file:PATH")
    p.add_argument("--target-stem", help="target image WAV (needed by oracle masks and metrics)")
    p.add_argument("--ref-mic", type=int, default=0)
    p.add_argument("--no-postmask", action="store_true")
    p.add_argument("--postmask-floor", type=float, default=0.3)
    p.add_argument("--diag-load", type=float, default=1e-3)
    p.add_argument("--window-ms", type=float, default=64.0)
    p.add_argument("--single-channel", action="store_true", help="mask-only path, no beamforming")
    p.add_argument("--wiener-exponent", type=float, default=2.0)
    p.add_argument("--binary-threshold-db", type=float, default=0.0)
    p.add_argument("--report", help="append metric records to this file")
    p.add_argument("--scene-id", default="-")
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", parents=[common], help="SI-SDR / SI-SDRi of an estimate")
    p.add_argument("--estimate", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--mixture")
    p.add_argument("--ref-mic", type=int, default=0)
    p.add_argument("--scene-id", default="-")
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mixit", parents=[common], help="MixIT mixing matrix and loss")
    p.add_argument("--mixtures", nargs="+", required=True)
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--constraint", choices=["unconstrained", "weak"], default="unconstrained")
    p.add_argument("--snr-max", type=float, default=30.0)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--window-ms", type=float, default=64.0)
    p.set_defaults(func=cmd_mixit)

    p = sub.add_parser("mom", parents=[common], help="build a mixture of mixtures")
    p.add_argument("--targets", nargs="+", required=True, help="mixtures containing the target class")
    p.add_argument("--interference", nargs="+", required=True)
    p.add_argument("--k", type=int, default=None, help="mixture count (default: drawn from 2-4)")
    p.add_argument("--gain-range", type=float, nargs=2, default=[-5.0, 5.0], metavar=("LO", "HI"))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")
    p.set_defaults(func=cmd_mom)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except FileNotFoundError as exc:
        return _fail("file_not_found", str(exc), 1)
    except FileFormatError as exc:
        return _fail("file_format", str(exc), 1)
    except ValueError as exc:
        return _fail("invalid_value", str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
