"""States, Gibbs ensembles and unitary processes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linops
from .errors import DomainError, InvariantError
from .linops import as_hermitian, as_unitary, commutator, dagger

TOL_TRACE = 1e-10
TOL_POSITIVE = 1e-10


def as_density(rho, tol: float = TOL_TRACE) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite."""
    rho = as_hermitian(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise InvariantError(f"density matrix trace is {tr!r}, not 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -TOL_POSITIVE:
        raise InvariantError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def expval(rho: np.ndarray, A: np.ndarray) -> float:
    """``tr(rho A)`` for Hermitian ``A``."""
    return float(np.einsum("ij,ji->", rho, A).real)


def random_density(dim: int, seed, rank: int | None = None) -> np.ndarray:
    """Random mixed state ``G G^H / tr(G G^H)`` from a ``dim x rank`` Ginibre matrix."""
    G = linops.sample_ginibre(dim if rank is None else rank, seed, rows=dim)
    rho = G @ G.conj().T
    rho = rho / np.trace(rho).real
    return (rho + rho.conj().T) / 2


@dataclass(frozen=True)
class GibbsState:
    beta: float
    state: np.ndarray
    log_partition: float
    free_energy: float


def gibbs(H, beta: float) -> GibbsState:
    """Thermal state ``exp(-beta H)/Z`` computed with a ground-energy shift.

    At ``beta = 0`` the state is ``I/d`` and the free energy is the
    ``beta -> 0+`` limit, ``-inf`` for ``d > 1``.
    """
    if not math.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be finite and non-negative, got {beta!r}")
    H = as_hermitian(H)
    w, V = np.linalg.eigh(H)
    e0 = w[0]
    weights = np.exp(-beta * (w - e0))
    zs = weights.sum()
    log_z = -beta * e0 + math.log(zs)
    state = (V * (weights / zs)) @ V.conj().T
    state = (state + state.conj().T) / 2
    if beta > 0:
        with np.errstate(over="ignore"):
            free = -log_z / beta
    else:
        free = float(w.mean()) if len(w) == 1 else -math.inf
    return GibbsState(beta=float(beta), state=state, log_partition=float(log_z), free_energy=float(free))


def log_partition(H, beta: float) -> float:
    w = np.linalg.eigvalsh(as_hermitian(H))
    e0 = w[0]
    return float(-beta * e0 + math.log(np.exp(-beta * (w - e0)).sum()))


def delta_free_energy(H, Hp, beta: float) -> float:
    """``F_beta[H'] - F_beta[H]``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    return (log_partition(H, beta) - log_partition(Hp, beta)) / beta


@dataclass(frozen=True)
class Process:
    """Unitary process taking Hamiltonian ``h_initial`` to ``h_final`` via ``evolution``."""

    h_initial: np.ndarray
    h_final: np.ndarray
    evolution: np.ndarray

    def __post_init__(self):
        H = as_hermitian(self.h_initial)
        Hp = as_hermitian(self.h_final)
        U = as_unitary(self.evolution)
        if not (H.shape == Hp.shape == U.shape):
            raise InvariantError(f"dimension mismatch: H {H.shape}, H' {Hp.shape}, U {U.shape}")
        object.__setattr__(self, "h_initial", H)
        object.__setattr__(self, "h_final", Hp)
        object.__setattr__(self, "evolution", U)

    @property
    def dim(self) -> int:
        return self.h_initial.shape[0]

    @classmethod
    def trivial(cls, H) -> "Process":
        """The untouched system: ``H' = H``, ``U = I``."""
        H = as_hermitian(H)
        return cls(H, H, np.eye(H.shape[0], dtype=complex))

    def heisenberg_final(self) -> np.ndarray:
        """``U^H H' U``."""
        U = self.evolution
        G = dagger(U) @ self.h_final @ U
        return (G + dagger(G)) / 2


def how_operator(p: Process) -> np.ndarray:
    """Heisenberg operator of work, ``U^H H' U - H``."""
    return p.heisenberg_final() - p.h_initial


def average_work_unmeasured(p: Process, rho) -> float:
    """Final minus initial mean energy of the unmeasured evolution, ``tr(rho Omega)``."""
    rho = as_density(rho)
    if rho.shape != (p.dim, p.dim):
        raise InvariantError(f"state of shape {rho.shape} does not fit process of dim {p.dim}")
    return expval(rho, how_operator(p))


@dataclass(frozen=True)
class PiProcess:
    """Cyclic process with ``H' = H`` and ``U = exp(-i x h)``."""

    h_initial: np.ndarray
    generator: np.ndarray
    strength: float

    def __post_init__(self):
        H = as_hermitian(self.h_initial)
        h = as_hermitian(self.generator)
        if H.shape != h.shape:
            raise InvariantError(f"dimension mismatch: H {H.shape}, h {h.shape}")
        object.__setattr__(self, "h_initial", H)
        object.__setattr__(self, "generator", h)
        object.__setattr__(self, "strength", float(self.strength))

    def to_process(self) -> Process:
        return pi_to_process(self)


def pi_to_process(pp: PiProcess) -> Process:
    U = linops.unitary_from_generator(pp.generator, pp.strength)
    return Process(pp.h_initial, pp.h_initial, U)


def omega_commutator(pp_or_h, H=None) -> np.ndarray:
    """``omega = i[h, H]``; accepts a :class:`PiProcess` or ``(h, H)``."""
    if isinstance(pp_or_h, PiProcess):
        h, H = pp_or_h.generator, pp_or_h.h_initial
    else:
        h, H = as_hermitian(pp_or_h), as_hermitian(H)
    w = 1j * commutator(h, H)
    return (w + dagger(w)) / 2


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy ``tr rho (ln rho - ln sigma)`` with ``0 ln 0 = 0``."""
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    s_min = np.linalg.eigvalsh(sigma)[0]
    if s_min <= 0:
        raise DomainError(f"sigma is singular or indefinite (smallest eigenvalue {s_min:.3e})")
    r = np.linalg.eigvalsh(rho)
    r = r[r > 0]
    neg_entropy = float(np.sum(r * np.log(r)))
    return neg_entropy - expval(rho, linops.logm_pd(sigma))


def random_hamiltonian(dim: int, seed, norm: float | None = 1.0) -> np.ndarray:
    """GUE sample, rescaled to operator norm ``norm`` (``None`` keeps the raw scale)."""
    H = linops.sample_gue(dim, seed)
    if norm is not None:
        H = H * (norm / linops.operator_norm(H))
    return (H + dagger(H)) / 2


def random_process(dim: int, seed, norm: float | None = 1.0) -> Process:
    """Independent GUE ``H`` and ``H'`` with a Haar-random ``U``, all from one generator."""
    rng = linops._rng(seed)
    H = random_hamiltonian(dim, rng, norm)
    Hp = random_hamiltonian(dim, rng, norm)
    return Process(H, Hp, linops.sample_haar(dim, rng))
