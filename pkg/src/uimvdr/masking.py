"""Time-frequency masks and the providers that stand in for a mask network."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .signal import ComplexSpectrogram, StftConfig, Waveform, stft_forward

__all__ = [
    "Mask",
    "MaskProvider",
    "apply_mask",
    "oracle_wiener_mask",
    "oracle_binary_mask",
]


@dataclass(frozen=True)
class Mask:
    """Real-valued gain per (frame, bin), every entry in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"mask must be (T, F), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("mask contains non-finite values")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("mask values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def ones(cls, num_frames: int, num_bins: int) -> "Mask":
        return cls(np.ones((num_frames, num_bins)))


def _check_tf(a: tuple, b: tuple, what: str) -> None:
    if tuple(a[:2]) != tuple(b[:2]):
        raise ValueError(f"{what}: shape mismatch {tuple(a[:2])} vs {tuple(b[:2])}")


def _ref_bins(spec: ComplexSpectrogram | np.ndarray) -> np.ndarray:
    bins = spec.bins if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
    if bins.ndim == 3:
        if bins.shape[2] != 1:
            raise ValueError("oracle masks take a single (reference) channel")
        bins = bins[:, :, 0]
    return bins


def apply_mask(spec: ComplexSpectrogram, mask: Mask) -> ComplexSpectrogram:
    """Scale every channel of ``spec`` by the same real mask."""
    _check_tf(spec.shape, mask.shape, "apply_mask")
    return spec.with_bins(spec.bins * mask.values[:, :, np.newaxis])


def oracle_wiener_mask(target, mixture, exponent: float = 2.0) -> Mask:
    """``|X|^p / (|X|^p + |Y - X|^p)`` with 0/0 mapped to 0."""
    if not exponent > 0:
        raise ValueError(f"exponent must be positive, got {exponent}")
    x = _ref_bins(target)
    y = _ref_bins(mixture)
    _check_tf(x.shape, y.shape, "oracle_wiener_mask")
    num = np.abs(x) ** exponent
    den = num + np.abs(y - x) ** exponent
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return Mask(np.clip(m, 0.0, 1.0))


def oracle_binary_mask(target, mixture_minus_target, threshold_db: float = 0.0) -> Mask:
    """1 where the local target-to-noise ratio strictly exceeds ``threshold_db``."""
    if np.isnan(threshold_db) or threshold_db == np.inf:
        raise ValueError(f"threshold_db must be finite or -inf, got {threshold_db}")
    x = np.abs(_ref_bins(target))
    n = np.abs(_ref_bins(mixture_minus_target))
    _check_tf(x.shape, n.shape, "oracle_binary_mask")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_db = 20.0 * np.log10(x / n)
    m = (ratio_db > threshold_db) & (x > 0)
    m |= (n == 0) & (x > 0)
    return Mask(m.astype(np.float64))


@dataclass(frozen=True)
class MaskProvider:
    """Where the target mask comes from.

    ``oracle_*`` variants need the target's multichannel image (``target``);
    ``external`` reads layer 0 of a UMSK1 file or takes an in-memory
    (S, T, F) / (T, F) array.
    """

    kind: Literal["oracle_wiener", "oracle_binary", "external", "unit"] = "unit"
    exponent: float = 2.0
    threshold_db: float = 0.0
    path: str | os.PathLike | None = None
    array: np.ndarray | None = None
    target: Waveform | None = None

    def __post_init__(self):
        if self.kind not in ("oracle_wiener", "oracle_binary", "external", "unit"):
            raise ValueError(f"unknown mask provider {self.kind!r}")
        if not self.exponent > 0:
            raise ValueError("exponent must be positive")
        if np.isnan(self.threshold_db) or self.threshold_db == np.inf:
            raise ValueError("threshold_db must be finite or -inf")
        if self.kind.startswith("oracle") and self.target is None:
            raise ValueError(f"{self.kind} mask requires the target stem")
        if self.kind == "external" and self.path is None and self.array is None:
            raise ValueError("external mask requires a file path or an array")

    @classmethod
    def unit(cls) -> "MaskProvider":
        return cls("unit")

    @classmethod
    def oracle_wiener(cls, target: Waveform, exponent: float = 2.0) -> "MaskProvider":
        return cls("oracle_wiener", exponent=exponent, target=target)

    @classmethod
    def oracle_binary(cls, target: Waveform, threshold_db: float = 0.0) -> "MaskProvider":
        return cls("oracle_binary", threshold_db=threshold_db, target=target)

    @classmethod
    def external(cls, source) -> "MaskProvider":
        if isinstance(source, (str, os.PathLike)):
            return cls("external", path=source)
        return cls("external", array=np.asarray(source, dtype=np.float64))

    def mask_for(self, mixture_spec: ComplexSpectrogram, ref_mic: int = 0) -> Mask:
        """Target mask matching ``mixture_spec``'s (T, F) grid."""
        num_frames, num_bins, _ = mixture_spec.shape
        if self.kind == "unit":
            return Mask.ones(num_frames, num_bins)
        if self.kind == "external":
            if self.path is not None:
                from .fileio import read_mask_file

                layers = read_mask_file(self.path).layers
            else:
                layers = self.array
            layers = np.asarray(layers, dtype=np.float64)
            if layers.ndim == 3:
                layers = layers[0]
            mask = Mask(layers)
            _check_tf(mask.shape, mixture_spec.shape, "external mask")
            return mask

        target = self.target
        if target.num_samples != mixture_spec.num_samples:
            raise ValueError(
                f"target stem has {target.num_samples} samples, mixture has {mixture_spec.num_samples}"
            )
        cfg: StftConfig = mixture_spec.config
        x = stft_forward(target.channel(ref_mic if target.num_channels > 1 else 0), cfg)
        y = mixture_spec.channel(ref_mic)
        if self.kind == "oracle_wiener":
            return oracle_wiener_mask(x, y, self.exponent)
        return oracle_binary_mask(x, y.bins - x.bins, self.threshold_db)
