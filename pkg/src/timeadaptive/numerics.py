"""Dense linear-algebra helpers shared by the reservoir and gated models."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigs

__all__ = [
    "SingularSystemError",
    "make_rng",
    "spawn_seed",
    "spectral_radius",
    "scale_to_radius",
    "ridge_solve",
]

# below this size a dense eigensolve is cheaper than Arnoldi
_DENSE_CUTOFF = 64


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when an unregularized least-squares system has no unique solution."""


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Return a Philox (counter-based) generator for ``seed``.

    Philox produces the same stream on every platform for a given seed, and
    ``SeedSequence`` spawning gives independent child streams.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def spawn_seed(*keys: int) -> int:
    """Deterministically hash integer keys into a 64-bit seed."""
    # the key count goes first: SeedSequence ignores trailing zero words
    ss = np.random.SeedSequence([len(keys)] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def spectral_radius(m: np.ndarray, *, tol: float = 0.0, maxiter: int | None = None) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Uses implicitly restarted Arnoldi (ARPACK) for larger matrices and falls
    back to the dense Hessenberg-QR eigensolver when Arnoldi does not
    converge or the matrix is small.
    """
    m = _check_square(m)
    n = m.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if not np.any(m):
        return 0.0
    if n > _DENSE_CUTOFF:
        k = min(6, n - 2)
        try:
            vals = eigs(m, k=k, which="LM", tol=tol, maxiter=maxiter,
                        return_eigenvectors=False,
                        v0=np.ones(n) / np.sqrt(n))
            return float(np.max(np.abs(vals)))
        except ArpackNoConvergence:
            warnings.warn("Arnoldi did not converge; using dense eigensolver",
                          RuntimeWarning, stacklevel=2)
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def scale_to_radius(m: np.ndarray, target: float) -> np.ndarray:
    """Return ``m`` rescaled so that its spectral radius equals ``target``."""
    if not target > 0:
        raise ValueError(f"target radius must be positive, got {target}")
    m = _check_square(m)
    rho = spectral_radius(m)
    if rho == 0.0:
        raise ValueError("cannot rescale a matrix with zero spectral radius")
    return m * (target / rho)


def ridge_solve(states: np.ndarray, targets: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``min_W ||W S - T||^2 + lam ||W||^2``.

    Parameters
    ----------
    states : ndarray of shape (n_features, n_samples)
    targets : ndarray of shape (n_out, n_samples)
    lam : float
        Tikhonov regularization, ``>= 0``.

    Returns
    -------
    ndarray of shape (n_out, n_features)
    """
    S = np.atleast_2d(np.asarray(states, dtype=np.float64))
    T = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if S.shape[1] < 1:
        raise ValueError("ridge_solve needs at least one sample")
    if T.shape[1] != S.shape[1]:
        raise ValueError(f"sample count mismatch: states {S.shape}, targets {T.shape}")
    if lam < 0:
        raise ValueError("lam must be non-negative")

    gram = S @ S.T
    if lam:
        gram[np.diag_indices_from(gram)] += lam
    rhs = S @ T.T  # (n_features, n_out)

    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        W = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        W = None
    if W is None or not np.all(np.isfinite(W)):
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            try:
                lu = scipy.linalg.lu_factor(gram, check_finite=False)
                if np.any(np.diag(lu[0]) == 0):
                    raise SingularSystemError("Gram matrix is singular; use lam > 0")
                W = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            except scipy.linalg.LinAlgWarning as exc:
                raise SingularSystemError(f"Gram matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(W)):
        raise SingularSystemError("Gram matrix is singular; use lam > 0")
    if lam == 0:
        # Cholesky happily factors a numerically rank-deficient Gram matrix
        rcond = 1.0 / np.linalg.cond(gram)
        if rcond < np.finfo(np.float64).eps:
            raise SingularSystemError(f"Gram matrix is singular (rcond={rcond:.2e})")
    return W.T
