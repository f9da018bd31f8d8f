"""Dense Hermitian linear algebra.

Everything here works on plain complex ``numpy`` arrays. Hermitian and
unitary inputs are validated on entry; matrix functions are evaluated
through the eigendecomposition only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InvariantError

TOL_HERM = 1e-12
TOL_UNIT = 1e-10
CLUSTER_TOL = 1e-8


def as_hermitian(A, tol: float = TOL_HERM) -> np.ndarray:
    """Return ``A`` as a complex square array, rejecting non-Hermitian input.

    The returned matrix is exactly symmetrised, so downstream ``eigh`` calls
    see a Hermitian matrix bit for bit.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvariantError(f"expected a non-empty square matrix, got shape {A.shape}")
    dev = np.max(np.abs(A - A.conj().T))
    if dev > tol:
        raise InvariantError(f"matrix is not Hermitian (max |A - A^H| = {dev:.3e} > {tol:.1e})")
    return (A + A.conj().T) / 2


def as_unitary(U, tol: float = TOL_UNIT) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] == 0:
        raise InvariantError(f"expected a non-empty square matrix, got shape {U.shape}")
    dev = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if dev > tol:
        raise InvariantError(f"matrix is not unitary (max |U^H U - I| = {dev:.3e} > {tol:.1e})")
    return U


def dagger(A: np.ndarray) -> np.ndarray:
    return A.conj().T


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def anticommutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B + B @ A


def max_abs(A) -> float:
    """Entrywise max-abs norm, the yardstick for every matrix tolerance here."""
    return float(np.max(np.abs(A))) if np.size(A) else 0.0


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues of a Hermitian matrix with their eigenprojectors.

    ``values`` is strictly increasing, one entry per eigenvalue cluster.
    ``bases[a]`` is a ``dim x g_a`` matrix of orthonormal columns spanning
    the range of ``projectors[a]``.
    """

    values: np.ndarray
    projectors: tuple
    degeneracies: tuple
    bases: tuple

    @property
    def dim(self) -> int:
        return int(sum(self.degeneracies))

    def __len__(self) -> int:
        return len(self.values)

    def reconstruct(self) -> np.ndarray:
        return sum(v * P for v, P in zip(self.values, self.projectors))

    def is_nondegenerate(self) -> bool:
        return all(g == 1 for g in self.degeneracies)


def cluster_sorted(w: np.ndarray, tol: float) -> list[np.ndarray]:
    """Single-linkage grouping of an ascending array; returns index groups."""
    if len(w) == 0:
        return []
    breaks = np.nonzero(np.diff(w) > tol)[0] + 1
    return np.split(np.arange(len(w)), breaks)


def eigh(A, cluster_tol: float = CLUSTER_TOL) -> SpectralDecomposition:
    """Eigendecomposition with eigenvalues closer than ``cluster_tol`` merged.

    Merged clusters get the mean of their members as eigenvalue and the sum
    of the member projectors.
    """
    if cluster_tol < 0:
        raise ValueError("cluster_tol must be non-negative")
    A = as_hermitian(A)
    w, V = np.linalg.eigh(A)
    values, projectors, degs, bases = [], [], [], []
    for idx in cluster_sorted(w, cluster_tol):
        B = V[:, idx]
        values.append(float(np.mean(w[idx])))
        projectors.append(B @ B.conj().T)
        degs.append(len(idx))
        bases.append(B)
    return SpectralDecomposition(np.array(values), tuple(projectors), tuple(degs), tuple(bases))


def matfun(A, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a real scalar function to a Hermitian matrix, ``sum_a f(E_a) P_a``.

    ``f`` is called on the array of eigenvalues. Any eigenvalue where ``f``
    is not finite raises :class:`DomainError`.
    """
    A = as_hermitian(A)
    w, V = np.linalg.eigh(A)
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w), dtype=float)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        raise DomainError(f"function undefined at eigenvalue {w[bad][0]!r}")
    out = (V * fw) @ V.conj().T
    return (out + out.conj().T) / 2


def expm_h(A, scale: float = 1.0) -> np.ndarray:
    """``exp(scale * A)`` for Hermitian ``A``."""
    return matfun(A, lambda w: np.exp(scale * w))


def logm_pd(A) -> np.ndarray:
    """Matrix logarithm of a positive-definite matrix."""
    return matfun(A, lambda w: np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), np.nan))


def sqrtm_psd(A) -> np.ndarray:
    return matfun(A, lambda w: np.where(w >= 0, np.sqrt(np.abs(w)), np.nan))


def unitary_from_generator(h, x: float) -> np.ndarray:
    """``exp(-i x h)`` for Hermitian ``h``."""
    h = as_hermitian(h)
    w, V = np.linalg.eigh(h)
    return (V * np.exp(-1j * x * w)) @ V.conj().T


def operator_norm(A) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    A = as_hermitian(A)
    return float(np.max(np.abs(np.linalg.eigvalsh(A))))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_ginibre(dim: int, seed, rows: int | None = None) -> np.ndarray:
    """Matrix of i.i.d. standard complex Gaussians (E|z|^2 = 1)."""
    rng = _rng(seed)
    rows = dim if rows is None else rows
    return (rng.standard_normal((rows, dim)) + 1j * rng.standard_normal((rows, dim))) / np.sqrt(2)


def sample_gue(dim: int, seed) -> np.ndarray:
    """GUE sample ``(G + G^H)/2`` from a Ginibre matrix ``G``."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    G = sample_ginibre(dim, seed)
    return (G + G.conj().T) / 2


def sample_haar(dim: int, seed) -> np.ndarray:
    """Haar-random unitary: QR of a Ginibre matrix with the phases of diag(R) removed."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    Z = sample_ginibre(dim, seed)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))
