"""Mask-based multichannel sound enhancement refined by MVDR beamforming.

Also provides MixIT mixing-matrix estimation and losses, SI-SDR metrics and
a seeded free-field microphone-array simulator.
"""
__version__ = "0.1.0"

from .beamforming import (
    BeamformConfig,
    BeamformerWeights,
    Scm,
    enhance,
    enhance_mask_only,
    mvdr_apply,
    mvdr_weights,
    post_mask,
    scm_noise,
    scm_target,
)
from .kernels import BACKEND
from .masking import Mask, MaskProvider, apply_mask, oracle_binary_mask, oracle_wiener_mask
from .metrics import MetricReport, si_sdr, si_sdri
from .mixit import (
    LossConfig,
    MixingMatrix,
    brute_force_mixing_matrix,
    energy_penalty,
    mixit_total_loss,
    snr_loss,
    solve_mixing_matrix,
)
from .signal import ComplexSpectrogram, StftConfig, Waveform, istft_inverse, stft_forward
