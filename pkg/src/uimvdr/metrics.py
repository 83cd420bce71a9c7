"""SI-SDR and SI-SDR improvement.

No mean removal is applied before projecting the estimate onto the
reference.  Results are clamped to +/-100 dB.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal import Waveform

__all__ = ["MetricReport", "si_sdr", "si_sdri", "SI_SDR_CLAMP_DB"]

SI_SDR_CLAMP_DB = 100.0


def _mono(x) -> np.ndarray:
    if isinstance(x, Waveform):
        if x.num_channels != 1:
            raise ValueError("SI-SDR takes mono signals")
        return x.samples[0]
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 1:
        raise ValueError(f"SI-SDR takes mono signals, got shape {arr.shape}")
    return arr


def si_sdr(estimate, reference) -> float:
    """Scale-invariant SDR of ``estimate`` against ``reference``, in dB."""
    est = _mono(estimate)
    ref = _mono(reference)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape[0]} vs {ref.shape[0]}")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference signal is all zeros")
    alpha = float(np.dot(est, ref)) / ref_energy
    target = alpha * ref
    residual = est - target
    signal_energy = float(np.dot(target, target))
    noise_energy = float(np.dot(residual, residual))
    if signal_energy == 0.0:
        return -SI_SDR_CLAMP_DB
    if noise_energy == 0.0:
        return SI_SDR_CLAMP_DB
    value = 10.0 * np.log10(signal_energy / noise_energy)
    return float(np.clip(value, -SI_SDR_CLAMP_DB, SI_SDR_CLAMP_DB))


def si_sdri(estimate, reference, mixture_ref_channel) -> float:
    """SI-SDR gain of ``estimate`` over the unprocessed reference channel."""
    return si_sdr(estimate, reference) - si_sdr(mixture_ref_channel, reference)


@dataclass(frozen=True)
class MetricReport:
    si_sdr: float
    si_sdri: float | None = None
    scene_id: str = "-"

    def to_record(self) -> str:
        """One ``key=value`` line."""
        parts = [f"scene_id={self.scene_id}", f"si_sdr={self.si_sdr:.6f}"]
        if self.si_sdri is not None:
            parts.append(f"si_sdri={self.si_sdri:.6f}")
        return " ".join(parts)

    @classmethod
    def from_record(cls, line: str) -> "MetricReport":
        fields = dict(tok.split("=", 1) for tok in line.split())
        sdri = fields.get("si_sdri")
        return cls(
            si_sdr=float(fields["si_sdr"]),
            si_sdri=None if sdri is None else float(sdri),
            scene_id=fields.get("scene_id", "-"),
        )

    @classmethod
    def evaluate(cls, estimate, reference, mixture_ref_channel=None, scene_id: str = "-") -> "MetricReport":
        sdr = si_sdr(estimate, reference)
        sdri = None
        if mixture_ref_channel is not None:
            sdri = sdr - si_sdr(mixture_ref_channel, reference)
        return cls(sdr, sdri, scene_id)
