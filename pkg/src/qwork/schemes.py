"""Work-measurement schemes as explicit POVMs with real outcomes.

A scheme is a list of positive semidefinite elements ``M_W`` summing to the
identity, each paired with a work value ``W``. Four constructions are
provided:

* :func:`tpm_scheme` -- two projective energy measurements.
* :func:`how_scheme` -- projective measurement of ``Omega = U^H H' U - H``.
* :func:`composite_scheme` -- backward TPM onto the dephased state followed by
  forward TPM; depends on the initial state.
* :func:`upsilon_scheme` -- projective measurement of the state-dependent
  operator built from the best-fit inverse temperature of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import linops
from .core import Process, as_density, how_operator
from .errors import InvariantError, NumericError, SchemeInvalidError
from .linops import CLUSTER_TOL, dagger

TOL_PSD = 1e-10
TOL_COMPLETE = 1e-9
TOL_PROB_CLIP = 1e-9
TOL_PROB_DRIFT = 1e-9
MERGE_REL = 1e-9


@dataclass(frozen=True)
class WorkScheme:
    """POVM elements (``n x d x d``) with one work outcome each.

    ``labels`` optionally indexes the elements, e.g. ``(a, k)`` for TPM and
    ``(a, b, c, k)`` for the composite scheme. ``info`` carries construction
    diagnostics and is ignored in comparisons.
    """

    elements: np.ndarray
    outcomes: np.ndarray
    labels: tuple | None = None
    name: str = ""
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        M = np.asarray(self.elements, dtype=complex)
        W = np.asarray(self.outcomes, dtype=float).reshape(-1)
        if M.ndim != 3 or M.shape[1] != M.shape[2]:
            raise InvariantError(f"elements must have shape (n, d, d), got {M.shape}")
        if M.shape[0] != W.shape[0] or M.shape[0] == 0:
            raise InvariantError(f"{M.shape[0]} elements but {W.shape[0]} outcomes")
        if not np.all(np.isfinite(W)):
            raise InvariantError("outcomes must be finite")
        if self.labels is not None and len(self.labels) != len(W):
            raise InvariantError("labels must match the number of elements")
        M = (M + np.conj(np.swapaxes(M, 1, 2))) / 2
        lo = np.linalg.eigvalsh(M)[:, 0].min()
        if lo < -TOL_PSD:
            raise InvariantError(f"POVM element has eigenvalue {lo:.3e} < 0")
        dev = linops.max_abs(M.sum(axis=0) - np.eye(M.shape[1]))
        if dev > TOL_COMPLETE:
            raise InvariantError(f"POVM elements do not sum to identity (deviation {dev:.3e})")
        object.__setattr__(self, "elements", M)
        object.__setattr__(self, "outcomes", W)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(tuple(int(i) for i in lab) for lab in self.labels))

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return len(self.outcomes)

    def operator_sum(self) -> np.ndarray:
        """``sum_W W M_W``; equals the first-moment observable of the scheme."""
        return np.einsum("n,nij->ij", self.outcomes, self.elements)


@dataclass(frozen=True)
class WorkDistribution:
    outcomes: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.outcomes, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if W.shape != p.shape:
            raise InvariantError("outcomes and probabilities differ in length")
        if len(W) > 1 and np.any(np.diff(W) <= 0):
            raise InvariantError("outcomes must be strictly ascending")
        object.__setattr__(self, "outcomes", W)
        object.__setattr__(self, "probabilities", p)

    def as_dict(self) -> dict:
        return {float(w): float(q) for w, q in zip(self.outcomes, self.probabilities)}

    def mass_near(self, value: float, tol: float) -> float:
        return float(self.probabilities[np.abs(self.outcomes - value) <= tol].sum())


def default_merge_tol(outcomes) -> float:
    """``1e-9`` times the spread of the outcomes (or their magnitude if they coincide)."""
    W = np.asarray(outcomes, dtype=float)
    if W.size == 0:
        return 0.0
    span = max(float(np.ptp(W)), float(np.max(np.abs(W))))
    return MERGE_REL * span


def distribution(s: WorkScheme, rho, merge_tol: float | None = None) -> WorkDistribution:
    """Outcome statistics ``p_W = tr(rho M_W)`` with near-equal outcomes merged.

    A merged outcome is the probability-weighted mean of its members, so the
    first moment is unchanged by merging.
    """
    rho = as_density(rho)
    if rho.shape[0] != s.dim:
        raise InvariantError(f"state of dim {rho.shape[0]} does not fit scheme of dim {s.dim}")
    p = np.einsum("ij,nji->n", rho, s.elements).real
    if p.min() < -TOL_PROB_CLIP:
        i = int(np.argmin(p))
        raise SchemeInvalidError(f"probability {p[i]:.3e} for outcome W={s.outcomes[i]!r}")
    p = np.clip(p, 0.0, None)
    drift = abs(p.sum() - 1.0)
    if drift > TOL_PROB_DRIFT:
        raise SchemeInvalidError(f"probabilities sum to {p.sum()!r}")
    p = p / p.sum()

    tol = default_merge_tol(s.outcomes) if merge_tol is None else merge_tol
    order = np.argsort(s.outcomes, kind="stable")
    W, p = s.outcomes[order], p[order]
    out_w, out_p = [], []
    for idx in linops.cluster_sorted(W, tol):
        mass = p[idx].sum()
        w = float(np.dot(W[idx], p[idx]) / mass) if mass > 0 else float(W[idx].mean())
        # clamp against rounding so clusters stay strictly ordered
        out_w.append(min(max(w, W[idx[0]]), W[idx[-1]]))
        out_p.append(float(mass))
    return WorkDistribution(np.array(out_w), np.array(out_p))


def mean(d: WorkDistribution) -> float:
    return float(np.dot(d.outcomes, d.probabilities))


def exp_average(d: WorkDistribution, beta: float) -> float:
    """``sum_W p_W exp(-beta W)``."""
    return float(np.dot(d.probabilities, np.exp(-beta * d.outcomes)))


# --------------------------------------------------------------------------
# state-independent schemes


def tpm_scheme(p: Process, cluster_tol: float = CLUSTER_TOL) -> WorkScheme:
    """Two-point measurement: ``M_ak = P_a U^H P'_k U P_a``, ``W_ak = E'_k - E_a``."""
    sd = linops.eigh(p.h_initial, cluster_tol)
    sd_f = linops.eigh(p.h_final, cluster_tol)
    U = p.evolution
    back = [dagger(U) @ Pk @ U for Pk in sd_f.projectors]
    elements, outcomes, labels = [], [], []
    for a, (Ea, Pa) in enumerate(zip(sd.values, sd.projectors)):
        for k, (Ek, Qk) in enumerate(zip(sd_f.values, back)):
            elements.append(Pa @ Qk @ Pa)
            outcomes.append(Ek - Ea)
            labels.append((a, k))
    return WorkScheme(np.array(elements), np.array(outcomes), tuple(labels), name="tpm")


def how_scheme(p: Process, cluster_tol: float = CLUSTER_TOL) -> WorkScheme:
    """Projective measurement of the Heisenberg operator of work."""
    sd = linops.eigh(how_operator(p), cluster_tol)
    return WorkScheme(np.array(sd.projectors), sd.values.copy(), name="how")


# --------------------------------------------------------------------------
# composite (backward + forward TPM) scheme


def _state_adapted_basis(sd: linops.SpectralDecomposition, rho: np.ndarray):
    """Eigenbasis of ``H`` that also diagonalises ``rho`` inside each level.

    Returns the ``d x d`` basis and the level index of every column.
    """
    cols, level = [], []
    for a, B in enumerate(sd.bases):
        if B.shape[1] > 1:
            w, v = np.linalg.eigh(dagger(B) @ rho @ B)
            B = B @ v[:, ::-1]
        cols.append(B)
        level.extend([a] * B.shape[1])
    return np.hstack(cols), np.array(level)


def _polar_unitary(M: np.ndarray) -> np.ndarray:
    W, _, Vh = np.linalg.svd(M)
    return W @ Vh


def dephasing_rotation(H, rho, cluster_tol: float = CLUSTER_TOL, rho_tol: float = 1e-12) -> np.ndarray:
    """Unitary ``R`` with ``R rho R^H`` diagonal in the eigenbasis of ``H``.

    The eigenvalues of ``rho`` are placed in the same order as the diagonal
    of ``rho``: the j-th largest eigenvalue goes where the j-th largest
    diagonal entry sits (ties by basis index). Inside a degenerate
    eigenspace of ``rho`` the eigenvectors are chosen closest to their
    target basis vectors, which makes ``R = I`` whenever ``[rho, H] = 0``.
    """
    rho = as_density(rho)
    sd = H if isinstance(H, linops.SpectralDecomposition) else linops.eigh(H, cluster_tol)
    V, _ = _state_adapted_basis(sd, rho)
    diag = np.real(np.einsum("ij,ik,kj->j", V.conj(), rho, V))
    slots = np.argsort(-diag, kind="stable")
    r, phi = np.linalg.eigh(rho)
    r, phi = r[::-1], phi[:, ::-1]
    targets = V[:, slots]
    for idx in linops.cluster_sorted(-r, rho_tol):
        Q = phi[:, idx]
        phi[:, idx] = Q @ _polar_unitary(dagger(Q) @ targets[:, idx])
    return targets @ dagger(phi)


def composite_scheme(p: Process, rho, cluster_tol: float = CLUSTER_TOL) -> WorkScheme:
    """State-dependent scheme: dephasing leg measured by backward TPM, then forward TPM.

    Stage I has ``M^I_ab = R^H P_b R P_a R^H P_b R`` with outcome ``E_b - E_a``;
    stage II has ``M^II_ck = R^H P_c R U^H P'_k U R^H P_c R`` with outcome
    ``E'_k - E_c``. The single-copy elements are ``p^II_ck M^I_ab`` with
    outcome ``(E_b - E_a) + (E'_k - E_c)``.
    """
    rho = as_density(rho)
    sd = linops.eigh(p.h_initial, cluster_tol)
    sd_f = linops.eigh(p.h_final, cluster_tol)
    R = dephasing_rotation(sd, rho)
    U = p.evolution
    E, Ef = sd.values, sd_f.values
    P = np.array(sd.projectors)
    Q = np.array([dagger(R) @ Pb @ R for Pb in sd.projectors])
    back = np.array([dagger(U) @ Pk @ U for Pk in sd_f.projectors])

    stage1 = np.einsum("bij,ajk,bkl->abil", Q, P, Q)
    stage2 = np.einsum("cij,kjl,clm->ckim", Q, back, Q)
    p2 = np.einsum("ij,ckji->ck", rho, stage2).real
    p2 = np.clip(p2, 0.0, None)

    A, K = len(E), len(Ef)
    elements, outcomes, labels = [], [], []
    for a in range(A):
        for b in range(A):
            for c in range(A):
                for k in range(K):
                    elements.append(p2[c, k] * stage1[a, b])
                    outcomes.append((E[b] - E[a]) + (Ef[k] - E[c]))
                    labels.append((a, b, c, k))
    info = {"rotation": R, "stage2_probabilities": p2}
    return WorkScheme(np.array(elements), np.array(outcomes), tuple(labels), name="composite", info=info)


# --------------------------------------------------------------------------
# state-dependent operator scheme


@dataclass(frozen=True)
class BetaSearch:
    """Search settings for the best-fit inverse temperature of a state."""

    lo: float = 1e-6
    hi: float = 1e3
    grid_points: int = 60
    tol: float = 1e-10
    floor: float = 1e-6


@dataclass(frozen=True)
class BetaFit:
    beta: float
    residual: float
    below_floor: bool
    grid_index: int


def thermal_distance(rho, H):
    """Return ``f(beta) = ||rho - tau_beta||`` (operator norm) for fixed ``rho`` and ``H``."""
    rho = as_density(rho)
    w, V = np.linalg.eigh(linops.as_hermitian(H))
    rho_h = dagger(V) @ rho @ V
    shifted = w - w[0]

    def f(beta: float) -> float:
        q = np.exp(-beta * shifted)
        q /= q.sum()
        return float(np.max(np.abs(np.linalg.eigvalsh(rho_h - np.diag(q)))))

    return f


def fit_beta(rho, H, cfg: BetaSearch = BetaSearch()) -> BetaFit:
    """``argmin_beta ||rho - tau_beta||`` over ``beta >= 0``.

    A log-spaced grid on ``[lo, hi]`` (plus ``beta = 0``) brackets the
    minimum, which golden-section search then refines. A minimum at
    ``beta = 0`` is reported as below the floor; one at ``hi`` cannot be
    bracketed and raises :class:`NumericError`.
    """
    f = thermal_distance(rho, H)
    grid = np.concatenate([[0.0], np.logspace(math.log10(cfg.lo), math.log10(cfg.hi), cfg.grid_points)])
    vals = np.array([f(b) for b in grid])
    i = int(np.argmin(vals))
    if i == 0:
        return BetaFit(0.0, float(vals[0]), True, 0)
    if i == len(grid) - 1:
        raise NumericError(
            "best-fit inverse temperature is not bracketed by the search interval",
            {"grid_max": float(grid[-1]), "residual_at_max": float(vals[-1]), "residual_min_interior": float(vals[1:-1].min())},
        )
    try:
        res = optimize.minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=cfg.tol)
    except ValueError as exc:
        raise NumericError(f"golden-section search failed: {exc}", {"bracket": grid[i - 1 : i + 2].tolist()}) from exc
    beta = float(res.x)
    return BetaFit(beta, float(res.fun), beta < cfg.floor, i)


def upsilon_operator(p: Process, beta: float) -> np.ndarray:
    """``-beta^-1 ln[e^{beta H/2} e^{-beta U^H H' U} e^{beta H/2}]``.

    Both exponents are shifted so that no factor exceeds one; the shifts are
    added back after the logarithm.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    H = p.h_initial
    G = p.heisenberg_final()
    h_top = float(np.linalg.eigvalsh(H)[-1])
    g_bottom = float(np.linalg.eigvalsh(G)[0])
    n = p.dim
    eh = linops.expm_h(H - h_top * np.eye(n), beta / 2)
    eg = linops.expm_h(G - g_bottom * np.eye(n), -beta)
    X = eh @ eg @ eh
    X = (X + dagger(X)) / 2
    log_x = linops.logm_pd(X)
    Y = -log_x / beta - (h_top - g_bottom) * np.eye(n)
    return (Y + dagger(Y)) / 2


def upsilon_scheme(p: Process, rho, beta_cfg: BetaSearch = BetaSearch(), cluster_tol: float = CLUSTER_TOL) -> WorkScheme:
    """Operator scheme of the state-dependent work operator.

    Below ``beta_cfg.floor`` the operator is replaced by its ``beta -> 0``
    limit, the Heisenberg operator of work.
    """
    fit = fit_beta(rho, p.h_initial, beta_cfg)
    info = {"beta_hat": fit.beta, "beta_residual": fit.residual, "below_floor": fit.below_floor}
    if fit.below_floor:
        op = how_operator(p)
    else:
        op = upsilon_operator(p, fit.beta)
    sd = linops.eigh(op, cluster_tol)
    return WorkScheme(np.array(sd.projectors), sd.values.copy(), name="upsilon", info=info)


SCHEME_NAMES = ("how", "composite", "tpm", "upsilon")


def build(name: str, p: Process, rho=None, **kwargs) -> WorkScheme:
    """Construct a scheme by name; state-dependent schemes need ``rho``."""
    if name == "tpm":
        return tpm_scheme(p, **kwargs)
    if name == "how":
        return how_scheme(p, **kwargs)
    if name == "composite":
        return composite_scheme(p, rho, **kwargs)
    if name == "upsilon":
        return upsilon_scheme(p, rho, **kwargs)
    raise ValueError(f"unknown scheme {name!r}")
