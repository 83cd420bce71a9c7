"""Spatial covariance estimation, MVDR beamforming and the enhancement pipeline.

The MVDR weights use the SCM-ratio formulation

    w(f) = (Phi_nn + eps I)^-1 Phi_xx u / trace((Phi_nn + eps I)^-1 Phi_xx)

with ``u`` the one-hot reference-microphone vector, so no steering vector
is needed.  Output is ``w^H y`` per bin.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .masking import Mask, MaskProvider, apply_mask
from .signal import ComplexSpectrogram, StftConfig, Waveform, istft_inverse, stft_forward

log = logging.getLogger(__name__)

__all__ = [
    "Scm",
    "BeamformerWeights",
    "BeamformConfig",
    "scm_target",
    "scm_noise",
    "mvdr_weights",
    "mvdr_apply",
    "post_mask",
    "enhance",
    "enhance_mask_only",
]


@dataclass(frozen=True)
class Scm:
    """Per-bin C x C Hermitian PSD matrices, shape (F, C, C)."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.complex128)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise ValueError(f"SCM must be (F, C, C), got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def num_bins(self) -> int:
        return self.matrices.shape[0]

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[1]


@dataclass(frozen=True)
class BeamformerWeights:
    weights: np.ndarray  # (F, C)
    ref_mic: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128)
        if w.ndim != 2:
            raise ValueError(f"weights must be (F, C), got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("beamformer weights must be finite")
        if not 0 <= self.ref_mic < w.shape[1]:
            raise ValueError(f"ref_mic {self.ref_mic} out of range for {w.shape[1]} channels")
        object.__setattr__(self, "weights", w)

    @classmethod
    def passthrough(cls, num_bins: int, num_channels: int, ref_mic: int = 0) -> "BeamformerWeights":
        w = np.zeros((num_bins, num_channels), dtype=np.complex128)
        w[:, ref_mic] = 1.0
        return cls(w, ref_mic)


@dataclass(frozen=True)
class BeamformConfig:
    """``diagonal_loading`` is relative to trace(Phi_nn)/C."""

    ref_mic: int = 0
    diagonal_loading: float = 1e-3
    postmask_floor: float = 0.3
    postmask_enabled: bool = True

    def __post_init__(self):
        if self.ref_mic < 0:
            raise ValueError("ref_mic must be non-negative")
        if not self.diagonal_loading >= 0:
            raise ValueError("diagonal_loading must be >= 0")
        if not 0.0 <= self.postmask_floor <= 1.0:
            raise ValueError("postmask_floor must lie in [0, 1]")


def _bins(spec) -> np.ndarray:
    return spec.bins if isinstance(spec, ComplexSpectrogram) else np.asarray(spec, dtype=np.complex128)


def scm_target(xhat) -> Scm:
    """Average of x x^H over all frames, per frequency bin."""
    x = _bins(xhat)
    if x.ndim != 3 or x.shape[0] < 1:
        raise ValueError("scm_target needs a non-empty (T, F, C) spectrogram")
    return Scm(kernels.scm(x))


def scm_noise(mixture, xhat) -> Scm:
    """SCM of the residual ``mixture - xhat``."""
    y, x = _bins(mixture), _bins(xhat)
    if y.shape != x.shape:
        raise ValueError(f"scm_noise: shape mismatch {y.shape} vs {x.shape}")
    if y.shape[0] < 1:
        raise ValueError("scm_noise needs at least one frame")
    return Scm(kernels.scm(y - x))


def scm_pair(mixture, xhat) -> tuple[Scm, Scm]:
    """``(scm_target(xhat), scm_noise(mixture, xhat))`` in one pass."""
    y, x = _bins(mixture), _bins(xhat)
    if y.shape != x.shape:
        raise ValueError(f"scm_pair: shape mismatch {y.shape} vs {x.shape}")
    if y.shape[0] < 1:
        raise ValueError("scm_pair needs at least one frame")
    phi_xx, phi_nn = kernels.scm_pair(y, x)
    return Scm(phi_xx), Scm(phi_nn)


def mvdr_weights(phi_xx: Scm, phi_nn: Scm, cfg: BeamformConfig | None = None) -> BeamformerWeights:
    """Per-bin MVDR weights toward ``cfg.ref_mic``.

    Bins where the loaded noise SCM is not positive definite or the trace
    denominator falls below ``1e-12 * C`` get pass-through weights.
    """
    cfg = cfg or BeamformConfig()
    if phi_xx.matrices.shape != phi_nn.matrices.shape:
        raise ValueError(
            f"SCM dimension mismatch {phi_xx.matrices.shape} vs {phi_nn.matrices.shape}"
        )
    if not (np.all(np.isfinite(phi_xx.matrices)) and np.all(np.isfinite(phi_nn.matrices))):
        raise ValueError("SCMs contain non-finite entries")
    if cfg.ref_mic >= phi_nn.num_channels:
        raise ValueError(f"ref_mic {cfg.ref_mic} out of range for {phi_nn.num_channels} channels")
    w = kernels.mvdr_solve(phi_xx.matrices, phi_nn.matrices, cfg.ref_mic, cfg.diagonal_loading)
    return BeamformerWeights(w, cfg.ref_mic)


def mvdr_apply(weights: BeamformerWeights, mixture: ComplexSpectrogram) -> ComplexSpectrogram:
    """Beamformed single-channel spectrogram ``w(f)^H y(t, f)``."""
    _, num_bins, num_ch = mixture.shape
    if weights.weights.shape != (num_bins, num_ch):
        raise ValueError(
            f"weights shape {weights.weights.shape} does not match (F, C) = {(num_bins, num_ch)}"
        )
    out = np.einsum("fc,tfc->tf", weights.weights.conj(), mixture.bins)
    return mixture.with_bins(out[:, :, np.newaxis])


def post_mask(beamformed: ComplexSpectrogram, mask: Mask, floor: float = 0.3) -> ComplexSpectrogram:
    """Scale each bin by ``max(mask, floor)``."""
    if not 0.0 <= floor <= 1.0:
        raise ValueError(f"floor must lie in [0, 1], got {floor}")
    if beamformed.shape[:2] != mask.shape:
        raise ValueError(f"post_mask: shape mismatch {beamformed.shape[:2]} vs {mask.shape}")
    gain = np.maximum(mask.values, floor)
    return beamformed.with_bins(beamformed.bins * gain[:, :, np.newaxis])


def enhance_mask_only(
    mixture: Waveform,
    provider: MaskProvider,
    stft_cfg: StftConfig | None = None,
    ref_mic: int = 0,
) -> Waveform:
    """Masked reference channel, decoded (the no-beamforming baseline)."""
    spec = stft_forward(mixture, stft_cfg or StftConfig())
    mask = provider.mask_for(spec, ref_mic)
    return istft_inverse(apply_mask(spec.channel(ref_mic), mask), out_len=mixture.num_samples)


def enhance(
    mixture: Waveform,
    provider: MaskProvider,
    stft_cfg: StftConfig | None = None,
    bf_cfg: BeamformConfig | None = None,
) -> Waveform:
    """Mask, beamform and decode a multichannel mixture to a mono estimate.

    Steps: STFT, target mask from ``provider``, mask applied to every
    channel, SCMs of the masked estimate and its residual, MVDR toward
    the reference mic, optional floored post-mask, ISTFT.  A one-channel
    input takes the mask-only path.
    """
    stft_cfg = stft_cfg or StftConfig()
    bf_cfg = bf_cfg or BeamformConfig()
    if not 0 <= bf_cfg.ref_mic < mixture.num_channels:
        raise ValueError(
            f"ref_mic {bf_cfg.ref_mic} out of range for {mixture.num_channels} channels"
        )
    if mixture.num_channels == 1:
        return enhance_mask_only(mixture, provider, stft_cfg, 0)

    spec = stft_forward(mixture, stft_cfg)
    mask = provider.mask_for(spec, bf_cfg.ref_mic)
    xhat = apply_mask(spec, mask)
    phi_xx, phi_nn = scm_pair(spec, xhat)
    weights = mvdr_weights(phi_xx, phi_nn, bf_cfg)
    out = mvdr_apply(weights, spec)
    if bf_cfg.postmask_enabled:
        out = post_mask(out, mask, bf_cfg.postmask_floor)
    return istft_inverse(out, out_len=mixture.num_samples)
