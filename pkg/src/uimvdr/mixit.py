"""Mixture invariant training math: mixing-matrix estimation and losses.

Everything here returns loss *values*; there is no autograd.

Mixtures are (N, L) arrays, separated sources (S, L).  A mixing matrix is
a binary (N, S) array with exactly one 1 per column: source ``s`` is
assigned to mixture ``argmax A[:, s]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .signal import ComplexSpectrogram, Waveform

__all__ = [
    "MixingMatrix",
    "LossConfig",
    "WEAK_ENHANCEMENT_ASSIGNMENTS",
    "BRUTE_FORCE_LIMIT",
    "reconstruction_error",
    "solve_mixing_matrix",
    "brute_force_mixing_matrix",
    "snr_loss",
    "energy_penalty",
    "mixit_total_loss",
]

Constraint = Literal["unconstrained", "weak_enhancement"]

BRUTE_FORCE_LIMIT = 4096

# Target must come out of output 0: mixture 0 is rebuilt from {0}, {0, 1}
# or {0, 2}; mixture 1 takes the remaining outputs.
WEAK_ENHANCEMENT_ASSIGNMENTS = (
    np.array([[1, 0, 0], [0, 1, 1]]),
    np.array([[1, 1, 0], [0, 0, 1]]),
    np.array([[1, 0, 1], [0, 1, 0]]),
)


@dataclass(frozen=True)
class MixingMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2:
            raise ValueError(f"mixing matrix must be 2-D, got shape {a.shape}")
        if not np.isin(a, (0, 1)).all() or not (a.sum(axis=0) == 1).all():
            raise ValueError("every column of a mixing matrix must be one-hot")
        a = a.astype(np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_assignment(cls, assignment, num_mixtures: int) -> "MixingMatrix":
        """Build from the mixture index of each source."""
        assignment = np.asarray(assignment, dtype=np.int64)
        a = np.zeros((num_mixtures, assignment.size), dtype=np.int64)
        a[assignment, np.arange(assignment.size)] = 1
        return cls(a)

    @property
    def assignment(self) -> np.ndarray:
        return np.argmax(self.entries, axis=0)

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixingMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(np.all(self.entries == other.entries))

    def __hash__(self):
        return hash(self.entries.tobytes())


@dataclass(frozen=True)
class LossConfig:
    """``snr_max`` in dB, energy weight ``gamma`` and exponent ``beta``."""

    snr_max: float = 30.0
    gamma: float = 0.01
    beta: float = 0.5

    def __post_init__(self):
        if not np.isfinite(self.snr_max):
            raise ValueError("snr_max must be finite")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    @property
    def tau(self) -> float:
        return 10.0 ** (-self.snr_max / 10.0)


def _as_2d(x, name: str) -> np.ndarray:
    if isinstance(x, Waveform):
        x = x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (count, samples), got shape {arr.shape}")
    return arr


def _check_inputs(mixtures, sources, constraint: str) -> tuple[np.ndarray, np.ndarray]:
    y = _as_2d(mixtures, "mixtures")
    x = _as_2d(sources, "sources")
    if y.shape[1] != x.shape[1]:
        raise ValueError(f"length mismatch: mixtures {y.shape[1]}, sources {x.shape[1]}")
    if x.shape[0] < y.shape[0]:
        raise ValueError(f"need at least as many sources ({x.shape[0]}) as mixtures ({y.shape[0]})")
    if constraint not in ("unconstrained", "weak_enhancement"):
        raise ValueError(f"unknown constraint {constraint!r}")
    if constraint == "weak_enhancement" and (y.shape[0], x.shape[0]) != (2, 3):
        raise ValueError("weak_enhancement requires N = 2 mixtures and S = 3 sources")
    return y, x


def reconstruction_error(mixtures, sources, mixing: MixingMatrix | np.ndarray) -> float:
    """Squared L2 error ``sum_n ||y_n - sum_s A[n, s] x_s||^2``."""
    y = _as_2d(mixtures, "mixtures")
    x = _as_2d(sources, "sources")
    a = mixing.entries if isinstance(mixing, MixingMatrix) else np.asarray(mixing)
    resid = y - a.astype(np.float64) @ x
    return float(np.sum(resid * resid))


def _pick_weak(y: np.ndarray, x: np.ndarray) -> MixingMatrix:
    errors = [reconstruction_error(y, x, a) for a in WEAK_ENHANCEMENT_ASSIGNMENTS]
    return MixingMatrix(WEAK_ENHANCEMENT_ASSIGNMENTS[int(np.argmin(errors))])


def solve_mixing_matrix(mixtures, sources, constraint: Constraint = "unconstrained") -> MixingMatrix:
    """Least-squares mixing matrix projected to one-hot columns.

    The real-valued minimizer of ``||y - A x||^2`` comes from the source
    Gram system ``A (x x^T) = y x^T`` (minimum-norm when singular); each
    column is then snapped to its largest entry, ties to the lowest
    mixture index.  ``weak_enhancement`` scores only the three allowed
    assignments.
    """
    y, x = _check_inputs(mixtures, sources, constraint)
    num_mix, num_src = y.shape[0], x.shape[0]
    if constraint == "weak_enhancement":
        return _pick_weak(y, x)
    if not np.any(x):
        return MixingMatrix.from_assignment(np.zeros(num_src, dtype=np.int64), num_mix)
    coeffs, *_ = np.linalg.lstsq(x.T, y.T, rcond=None)  # (S, N)
    return MixingMatrix.from_assignment(np.argmax(coeffs.T, axis=0), num_mix)


def brute_force_mixing_matrix(mixtures, sources, constraint: Constraint = "unconstrained") -> MixingMatrix:
    """Exhaustive search over all one-hot-column matrices (ties: first found)."""
    y, x = _check_inputs(mixtures, sources, constraint)
    num_mix, num_src = y.shape[0], x.shape[0]
    if num_mix**num_src > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"{num_mix}^{num_src} assignments exceed the enumeration limit {BRUTE_FORCE_LIMIT}"
        )
    allowed = None
    if constraint == "weak_enhancement":
        allowed = {a.tobytes() for a in WEAK_ENHANCEMENT_ASSIGNMENTS}
    best, best_err = None, np.inf
    for assignment in itertools.product(range(num_mix), repeat=num_src):
        cand = MixingMatrix.from_assignment(assignment, num_mix)
        if allowed is not None and cand.entries.tobytes() not in allowed:
            continue
        err = reconstruction_error(y, x, cand)
        if err < best_err:
            best, best_err = cand, err
    return best


def snr_loss(reference, estimate, threshold_anchor=None, cfg: LossConfig | None = None) -> float:
    """Negative thresholded SNR in dB.

    ``-10 log10(||x||^2 / (||x - xhat||^2 + tau ||anchor||^2))`` with
    ``tau = 10^(-snr_max/10)``.  ``threshold_anchor`` defaults to the
    reference; during MixIT it is the mixture being rebuilt.
    """
    cfg = cfg or LossConfig()
    ref = _as_2d(reference, "reference").ravel()
    est = _as_2d(estimate, "estimate").ravel()
    anchor = ref if threshold_anchor is None else _as_2d(threshold_anchor, "threshold_anchor").ravel()
    if ref.size == 0:
        raise ValueError("reference is empty")
    if ref.shape != est.shape or ref.shape != anchor.shape:
        raise ValueError("reference, estimate and anchor must have equal lengths")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ValueError("reference is all zeros")
    err = ref - est
    denom = float(np.dot(err, err)) + cfg.tau * float(np.dot(anchor, anchor))
    return float(-10.0 * np.log10(ref_energy / denom))


def energy_penalty(xhat_spec, cfg: LossConfig | None = None) -> float:
    """``gamma`` times the mean of ``|X|^beta`` over all (frame, bin) entries."""
    cfg = cfg or LossConfig()
    bins = xhat_spec.bins if isinstance(xhat_spec, ComplexSpectrogram) else np.asarray(xhat_spec)
    if bins.size == 0:
        raise ValueError("empty spectrogram")
    mag = np.abs(bins)
    if not np.all(np.isfinite(mag)):
        raise ValueError("spectrogram contains non-finite entries")
    return float(cfg.gamma * np.mean(mag**cfg.beta))


def mixit_total_loss(
    mixtures,
    sources,
    source_spectra=None,
    constraint: Constraint = "unconstrained",
    cfg: LossConfig | None = None,
) -> tuple[float, MixingMatrix]:
    """Total MixIT loss and the assignment that produced it.

    Each mixture is rebuilt from its assigned sources and scored with
    :func:`snr_loss` anchored on that mixture; the energy penalty of the
    first (target) output's spectrogram is added when ``gamma > 0``.
    ``source_spectra`` is that spectrogram, or a sequence whose first
    element is.
    """
    cfg = cfg or LossConfig()
    y, x = _check_inputs(mixtures, sources, constraint)
    mixing = solve_mixing_matrix(y, x, constraint)
    total = 0.0
    for n in range(y.shape[0]):
        members = np.flatnonzero(mixing.entries[n])
        recon = np.zeros(y.shape[1])
        for s in members:
            recon = recon + x[s]
        total += snr_loss(y[n], recon, y[n], cfg)
    if cfg.gamma > 0:
        if source_spectra is None:
            raise ValueError("energy penalty needs the target output's spectrogram")
        if isinstance(source_spectra, (list, tuple)):
            source_spectra = source_spectra[0]
        total += energy_penalty(source_spectra, cfg)
    return total, mixing
