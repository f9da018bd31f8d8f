"""Harmonic oscillator with a Gaussian (symplectic) process.

The initial Hamiltonian is ``(q^2 + p^2)/2``. The process is fixed by a
symplectic matrix ``S`` and the final quadratic form ``Lambda``, so that the
Heisenberg work operator is ``Omega = z^T Xi z`` with
``Xi = S^T Lambda S - I/2`` and ``z = (q, p)``. The Jarzynski-type average
``<exp(-beta Omega)>`` has a closed form through Gaussian position kernels;
:func:`fock_oracle` recomputes it by brute force in a truncated Fock space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvariantError, NumericError, PrecisionError

TOL_SYMPLECTIC = 1e-12
TOL_SYM = 1e-12
MIN_ARG = 1e-12
FOCK_TAIL = 1e-10
FOCK_CONV = 1e-9

CSV_HEADER = ("beta_hbar", "closed_form", "fock_oracle", "classical_ratio", "deviation")


@dataclass(frozen=True)
class GaussianProcess:
    symplectic: np.ndarray
    lam: np.ndarray
    beta: float
    hbar: float

    def __post_init__(self):
        S = np.asarray(self.symplectic, dtype=float)
        L = np.asarray(self.lam, dtype=float)
        if S.shape != (2, 2) or L.shape != (2, 2):
            raise InvariantError("S and Lambda must be 2x2")
        if abs(np.linalg.det(S) - 1.0) >= TOL_SYMPLECTIC:
            raise InvariantError(f"det S = {np.linalg.det(S)!r}, not 1")
        if np.max(np.abs(L - L.T)) >= TOL_SYM:
            raise InvariantError("Lambda is not symmetric")
        if np.linalg.eigvalsh(L)[0] <= 0:
            raise InvariantError("Lambda is not positive definite")
        if not (self.beta > 0 and self.hbar > 0):
            raise InvariantError("beta and hbar must be positive")
        object.__setattr__(self, "symplectic", S)
        object.__setattr__(self, "lam", (L + L.T) / 2)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def beta_hbar(self) -> float:
        return self.beta * self.hbar


@dataclass(frozen=True)
class GaussianKernel:
    """Position kernel ``exp(-A q^2 - conj(A) q'^2 - 2 B q q' + C)``."""

    a_coef: complex
    b_coef: float
    c_coef: float


def xi_matrix(gp: GaussianProcess) -> np.ndarray:
    S = gp.symplectic
    X = S.T @ gp.lam @ S - 0.5 * np.eye(2)
    return (X + X.T) / 2


def symplectic_eigenvalue(Xi) -> float:
    """``sqrt(det Xi)`` for positive-definite ``Xi``."""
    Xi = np.asarray(Xi, dtype=float)
    if np.linalg.eigvalsh((Xi + Xi.T) / 2)[0] <= 0:
        raise DomainError("Xi is not positive definite; the work operator is not bounded below")
    return math.sqrt(np.linalg.det(Xi))


def z_work(beta_hbar: float, w: float) -> float:
    """``1 / (exp(beta hbar w) - exp(-beta hbar w))``."""
    arg = beta_hbar * w
    if not arg >= MIN_ARG:
        raise DomainError(f"beta*hbar*w = {arg!r} is below {MIN_ARG}")
    return 1.0 / (2.0 * math.sinh(arg))


def _coth(x: float) -> float:
    return 1.0 / math.tanh(x)


def correlation_matrices(gp: GaussianProcess):
    """Symmetrised covariance matrices of the normalised ``exp(-beta Omega)`` and of ``tau``."""
    Xi = xi_matrix(gp)
    w = symplectic_eigenvalue(Xi)
    hb, bh = gp.hbar, gp.beta_hbar
    xW = hb * w * _coth(bh * w) * np.linalg.inv(Xi)
    xH = hb * _coth(bh / 2) * np.eye(2)
    return (xW + xW.T) / 2, xH


def kernel_coeffs(x_mat, hbar: float) -> GaussianKernel:
    x = np.asarray(x_mat, dtype=float)
    xqq, xqp = x[0, 0], x[0, 1]
    if xqq <= 0:
        raise DomainError(f"x_qq = {xqq!r} must be positive")
    det_r = np.linalg.det(x) / hbar**2
    denom = 4 * xqq / hbar
    return GaussianKernel(
        a_coef=complex((1 + det_r) / denom, -xqp / (2 * xqq)),
        b_coef=float((1 - det_r) / denom),
        c_coef=float(-math.log(math.sqrt(math.pi * xqq / hbar))),
    )


def kernel_trace_product(kW: GaussianKernel, kH: GaussianKernel) -> float:
    """``tr(kW kH)`` for two Gaussian kernels, straight from the coefficients."""
    a = kW.a_coef.conjugate() + kH.a_coef
    arg = abs(a) ** 2 - (kW.b_coef + kH.b_coef) ** 2
    if not arg > 0:
        raise NumericError("kernel product is not normalisable", {"sqrt_argument": arg})
    return math.pi * math.exp(kW.c_coef + kH.c_coef) / math.sqrt(arg)


def _stable_trace_product(xW, xH, hbar: float) -> float:
    """Same value as :func:`kernel_trace_product`, with ``Re A +- B`` formed
    analytically so the small-``beta hbar`` cancellation never happens."""
    def parts(x):
        xqq = x[0, 0]
        return hbar / (2 * xqq), np.linalg.det(x) / (2 * hbar * xqq), -x[0, 1] / (2 * xqq)

    plus_w, minus_w, im_w = parts(xW)
    plus_h, minus_h, im_h = parts(xH)
    arg = (plus_w + plus_h) * (minus_w + minus_h) + (im_h - im_w) ** 2
    if not arg > 0:
        raise NumericError("kernel product is not normalisable", {"sqrt_argument": arg})
    c = -0.5 * math.log(math.pi * xW[0, 0] / hbar) - 0.5 * math.log(math.pi * xH[0, 0] / hbar)
    return math.pi * math.exp(c) / math.sqrt(arg)


def jarzynski_average_gaussian(gp: GaussianProcess) -> float:
    """Closed-form ``<exp(-beta Omega)>_tau`` for the oscillator process."""
    w = symplectic_eigenvalue(xi_matrix(gp))
    xW, xH = correlation_matrices(gp)
    return z_work(gp.beta_hbar, w) * _stable_trace_product(xW, xH, gp.hbar)


def classical_partition_ratio(gp: GaussianProcess) -> float:
    """Ratio of phase-space integrals of ``exp(-beta z^T Lambda z)`` and ``exp(-beta |z|^2/2)``."""
    return math.sqrt(np.linalg.det(0.5 * np.eye(2)) / np.linalg.det(gp.lam))


def quantum_partition_ratio(gp: GaussianProcess) -> float:
    """``Z'/Z`` for the quantum oscillators, ``sinh(bh/2) / sinh(bh sqrt(det Lambda))``."""
    bh = gp.beta_hbar
    return math.sinh(bh / 2) / math.sinh(bh * math.sqrt(np.linalg.det(gp.lam)))


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _fock_average(gp: GaussianProcess, cutoff: int):
    """Truncated-space average and the top-level shares of the thermal and traced weights."""
    hb, beta = gp.hbar, gp.beta
    a = _ladder(cutoff + 2)
    q = math.sqrt(hb / 2) * (a + a.T)
    p = 1j * math.sqrt(hb / 2) * (a.T - a)
    Xi = xi_matrix(gp)
    om = Xi[0, 0] * q @ q + Xi[1, 1] * p @ p + Xi[0, 1] * (q @ p + p @ q)
    om = om[:cutoff, :cutoff]
    om = (om + om.conj().T) / 2

    tw = np.exp(-gp.beta_hbar * np.arange(cutoff))
    tw /= tw.sum()
    w, V = np.linalg.eigh(om)
    kdiag = ((np.abs(V) ** 2) * np.exp(-beta * (w - w[0]))).sum(axis=1)
    integrand = tw * kdiag
    total = integrand.sum()
    tails = {"thermal": float(tw[-1]), "integrand": float(integrand[-1] / total)}
    return float(total * math.exp(-beta * w[0])), tails


def fock_oracle(gp: GaussianProcess, cutoff: int, tail_tol: float = FOCK_TAIL, conv_tol: float = FOCK_CONV) -> float:
    """Brute-force ``tr(exp(-beta H) exp(-beta Omega)) / tr(exp(-beta H))`` on ``cutoff`` Fock levels.

    ``Omega`` is assembled from ``q`` and ``p`` on two extra levels and then
    truncated, so its matrix elements inside the cutoff are exact. Raises
    :class:`PrecisionError` when the top level carries more than
    ``tail_tol`` of the thermal weight or of the traced integrand, or when
    dropping the top eighth of the levels moves the result by more than
    ``conv_tol`` (relative). The last guard catches squeezed work operators
    whose low-lying eigenvectors reach past the cutoff.
    """
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    value, tails = _fock_average(gp, cutoff)
    if max(tails.values()) > tail_tol:
        raise PrecisionError(f"Fock cutoff {cutoff} too small", {"cutoff": cutoff, **tails})
    smaller = cutoff - max(2, cutoff // 8)
    if smaller >= 2:
        ref, _ = _fock_average(gp, smaller)
        drift = abs(value - ref) / abs(value)
        if drift > conv_tol:
            raise PrecisionError(f"Fock cutoff {cutoff} not converged",
                                 {"cutoff": cutoff, "compared_with": smaller, "relative_drift": drift, **tails})
    return value


def required_cutoff(beta_hbar: float, tail_tol: float = FOCK_TAIL) -> int:
    """Smallest cutoff whose top thermal level is below ``tail_tol``."""
    return int(math.ceil(-math.log(tail_tol) / beta_hbar)) + 2


def limit_rows(S, lam, beta_hbars, hbar: float = 1.0, max_cutoff: int = 400):
    """Rows of the classical-limit scan, one per ``beta hbar``.

    The Fock cutoff starts at the thermal requirement and grows by a quarter until the
    oracle converges; the Fock column is NaN when that needs more than
    ``max_cutoff`` levels.
    """
    rows = []
    for bh in beta_hbars:
        gp = GaussianProcess(S, lam, bh / hbar, hbar)
        closed = jarzynski_average_gaussian(gp)
        classical = classical_partition_ratio(gp)
        oracle = math.nan
        cutoff = max(required_cutoff(bh), 40)
        while cutoff <= max_cutoff:
            try:
                oracle = fock_oracle(gp, cutoff)
                break
            except PrecisionError:
                cutoff = int(math.ceil(1.25 * cutoff))
        rows.append({"beta_hbar": float(bh), "closed_form": closed, "fock_oracle": oracle,
                     "classical_ratio": classical, "deviation": closed - classical})
    return rows


def write_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([repr(float(r[k])) for k in CSV_HEADER])
