"""Pure numpy implementations of the hot kernels (fallback backend).

Semantics must match ``_kernels.pyx`` exactly; see ``kernels.py``.
"""
import numpy as np


def scm(spec):
    """(1/T) sum_t x x^H per bin for a (T, F, C) array -> (F, C, C)."""
    spec = np.asarray(spec, dtype=np.complex128)
    phi = np.einsum("tfc,tfd->fcd", spec, spec.conj(), optimize=True) / spec.shape[0]
    # Exact Hermitian symmetry regardless of summation order.
    return 0.5 * (phi + phi.conj().transpose(0, 2, 1))


def scm_pair(mixture, xhat):
    """Target and residual-noise SCMs in one call."""
    mixture = np.asarray(mixture, dtype=np.complex128)
    xhat = np.asarray(xhat, dtype=np.complex128)
    return scm(xhat), scm(mixture - xhat)


def _cholesky_ok(mats):
    """Per-matrix flag: Cholesky factorization succeeds."""
    try:
        np.linalg.cholesky(mats)
        return np.ones(mats.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        pass
    ok = np.zeros(mats.shape[0], dtype=bool)
    for f in range(mats.shape[0]):
        try:
            np.linalg.cholesky(mats[f])
            ok[f] = True
        except np.linalg.LinAlgError:
            pass
    return ok


def mvdr_solve(phi_xx, phi_nn, ref, loading):
    """Trace-normalized MVDR weights (F, C) with pass-through fallback."""
    phi_xx = np.asarray(phi_xx, dtype=np.complex128)
    phi_nn = np.asarray(phi_nn, dtype=np.complex128)
    n_freq, n_ch, _ = phi_nn.shape
    eye = np.eye(n_ch)
    eps = loading * np.trace(phi_nn, axis1=1, axis2=2).real / n_ch
    loaded = phi_nn + eps[:, None, None] * eye

    ok = _cholesky_ok(loaded)
    weights = np.zeros((n_freq, n_ch), dtype=np.complex128)
    weights[:, ref] = 1.0
    if not ok.any():
        return weights
    z = np.linalg.solve(loaded[ok], phi_xx[ok])
    tr = np.trace(z, axis1=1, axis2=2)
    good = np.isfinite(tr) & (np.abs(tr) >= 1e-12 * n_ch)
    w = z[:, :, ref] / np.where(good, tr, 1.0)[:, None]
    good &= np.all(np.isfinite(w), axis=1)
    idx = np.flatnonzero(ok)[good]
    weights[idx] = w[good]
    return weights
