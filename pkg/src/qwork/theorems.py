"""Numerical experiments: Golden-Thompson gap, the small-strength expansions
of cyclic processes, the mean-work scaling clash, and the spectral and
entropic properties of the Upsilon operator on thermal states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linops, schemes
from .core import PiProcess, Process, delta_free_energy, expval, gibbs, how_operator, omega_commutator, relative_entropy
from .linops import CLUSTER_TOL, as_hermitian, commutator
from .schemes import WorkScheme

SchemeFactory = Callable[[Process, np.ndarray], WorkScheme]


def golden_thompson_gap(p: Process, beta: float, method: str = "trace") -> float:
    """``<exp(-beta Omega)>_tau - exp(-beta dF)``, never negative beyond rounding.

    ``method="trace"`` evaluates ``tr(tau exp(-beta Omega))`` as a matrix
    function; ``method="distribution"`` averages over the HOW outcome
    distribution instead. The two are independent routes to the same number.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    tau = gibbs(p.h_initial, beta).state
    if method == "trace":
        lhs = expval(tau, linops.expm_h(how_operator(p), -beta))
    elif method == "distribution":
        lhs = schemes.exp_average(schemes.distribution(schemes.how_scheme(p), tau), beta)
    else:
        raise ValueError(f"unknown method {method!r}")
    return lhs - math.exp(-beta * delta_free_energy(p.h_initial, p.h_final, beta))


def commutator_norm(p: Process) -> float:
    """Max-abs size of ``[U^H H' U, H]``; zero iff the HOW and TPM pictures commute."""
    return linops.max_abs(commutator(p.heisenberg_final(), p.h_initial))


# --------------------------------------------------------------------------
# cyclic-process expansions


@dataclass(frozen=True)
class Ineq2Terms:
    lhs: float
    rhs: float
    lhs_eig: float
    rhs_eig: float
    gap_eig: float

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.lhs_eig, self.rhs_eig))


def _thermal_eigenframe(H, h, beta):
    """Populations, energies and ``|h_kj|^2`` in the eigenbasis of ``H``."""
    w, V = np.linalg.eigh(as_hermitian(H))
    weights = np.exp(-beta * (w - w[0]))
    pops = weights / weights.sum()
    hk = V.conj().T @ as_hermitian(h) @ V
    return pops, w, np.abs(hk) ** 2


def ineq2_terms(H, h, beta: float) -> Ineq2Terms:
    """Second-order coefficients of the mean work and of its square.

    ``lhs = beta^2 <omega^2>_tau`` and ``rhs = beta <i[h, omega]>_tau`` with
    ``omega = i[h, H]``, each by direct trace and by an eigenbasis sum.
    ``gap_eig`` is ``lhs - rhs`` in the manifestly nonnegative form
    ``2 sum |h_kj|^2 (p_k + p_j) D (D/2 - tanh(D/2))``, ``D = beta (E_j - E_k)``.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    H, h = as_hermitian(H), as_hermitian(h)
    tau = gibbs(H, beta).state
    om = omega_commutator(h, H)
    second = 1j * commutator(h, om)
    lhs = beta**2 * expval(tau, om @ om)
    rhs = beta * expval(tau, (second + second.conj().T) / 2)

    pops, E, h2 = _thermal_eigenframe(H, h, beta)
    k, j = np.triu_indices(len(E), 1)
    D = beta * (E[j] - E[k])
    psum, pdiff, hh = pops[k] + pops[j], pops[k] - pops[j], h2[k, j]
    lhs_eig = float(np.sum(psum * D**2 * hh))
    rhs_eig = float(np.sum(2 * pdiff * D * hh))
    gap_eig = float(np.sum(2 * hh * psum * D * (D / 2 - np.tanh(D / 2))))
    return Ineq2Terms(float(lhs), float(rhs), lhs_eig, rhs_eig, gap_eig)


@dataclass(frozen=True)
class ScalingResult:
    xs: tuple
    values: tuple
    fitted_exponent: float
    fit_residual: float


@dataclass(frozen=True)
class ScalingAnalysis:
    status: str
    mean: ScalingResult | None = None
    tail_mass: ScalingResult | None = None
    unmeasured: ScalingResult | None = None
    tail_threshold: float = math.nan

    def __iter__(self):
        return iter((self.mean, self.tail_mass))


def fit_power_law(xs, values, n_smallest: int = 3) -> ScalingResult:
    """Least-squares slope of ``log|value|`` against ``log x`` on the smallest ``x``.

    Exact zeros make the exponent undefined; it is then reported as NaN.
    """
    xs = np.asarray(xs, dtype=float)
    vals = np.abs(np.asarray(values, dtype=float))
    order = np.argsort(xs)[:n_smallest]
    x, v = xs[order], vals[order]
    if np.any(v <= 0) or len(x) < 2:
        slope, resid = math.nan, math.nan
    else:
        A = np.vstack([np.log(x), np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
        slope = float(coef[0])
        resid = float(np.sqrt(np.mean((A @ coef - np.log(v)) ** 2)))
    return ScalingResult(tuple(float(t) for t in xs), tuple(float(t) for t in values), slope, resid)


def scaling_analysis(make: SchemeFactory, H, h, rho, xs, tail_threshold: float | None = None,
                     cluster_tol: float = CLUSTER_TOL) -> ScalingAnalysis:
    """How mean work and large-|W| probability shrink along ``U = exp(-i x h)``.

    The tail mass is the probability of ``|W|`` above ``tail_threshold``,
    by default half the smallest nonzero level spacing of ``H``. The
    unmeasured mean ``tr(rho Omega)`` is fitted alongside as reference.
    """
    H, h = as_hermitian(H), as_hermitian(h)
    rho = np.asarray(rho, dtype=complex)
    xs = sorted((float(x) for x in xs), reverse=True)
    if len(xs) < 2 or xs[-1] <= 0:
        raise ValueError("xs must hold at least two positive strengths")
    if abs(expval(rho, omega_commutator(h, H))) <= 1e-12:
        return ScalingAnalysis(status="degenerate")
    if tail_threshold is None:
        E = linops.eigh(H, cluster_tol).values
        tail_threshold = 0.5 * float(np.min(np.diff(E))) if len(E) > 1 else math.inf

    means, tails, unmeasured = [], [], []
    for x in xs:
        p = PiProcess(H, h, x).to_process()
        d = schemes.distribution(make(p, rho), rho)
        means.append(schemes.mean(d))
        tails.append(float(d.probabilities[np.abs(d.outcomes) > tail_threshold].sum()))
        unmeasured.append(expval(rho, how_operator(p)))
    return ScalingAnalysis(
        status="ok",
        mean=fit_power_law(xs, means),
        tail_mass=fit_power_law(xs, tails),
        unmeasured=fit_power_law(xs, unmeasured),
        tail_threshold=float(tail_threshold),
    )


# --------------------------------------------------------------------------
# Upsilon on thermal states


@dataclass(frozen=True)
class UpsilonExpansionReport:
    xs: tuple
    beta_upsilon: tuple
    beta_omega: tuple
    x_coef: float
    coef_upsilon: float
    coef_omega: float
    coef_upsilon_eig: float
    coef_omega_eig: float
    rel_err_upsilon: float
    rel_err_omega: float
    gap_positive: bool
    passed: bool


def _thermal_means(H, h, beta, x):
    p = PiProcess(H, h, x).to_process()
    tau = gibbs(H, beta).state
    ups = schemes.upsilon_operator(p, beta)
    return beta * expval(tau, ups), beta * expval(tau, how_operator(p))


def _rel_err(value, reference, floor=1e-14):
    if abs(reference) <= floor:
        return abs(value - reference)
    return abs(value - reference) / abs(reference)


def upsilon_expansion_check(H, h, beta: float, xs, x_coef: float = 1e-3, rel_tol: float = 0.05) -> UpsilonExpansionReport:
    """Second-order behaviour of ``beta<Upsilon_tau>_tau`` and ``beta<Omega>_tau``.

    The direct values at ``x_coef`` divided by ``x^2`` are compared with
    the eigenbasis coefficients
    ``sum |h_kj|^2 (p_k - p_j)^2 (p_k + p_j) / (2 p_k p_j)`` and
    ``sum |h_kj|^2 (p_k - p_j) beta (E_j - E_k)``. ``gap_positive`` asks
    ``<Upsilon> > <Omega>`` at every ``x`` in ``xs``.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    H, h = as_hermitian(H), as_hermitian(h)
    xs = tuple(float(x) for x in xs)
    pairs = [_thermal_means(H, h, beta, x) for x in xs]
    b_ups = tuple(u for u, _ in pairs)
    b_om = tuple(o for _, o in pairs)

    u0, o0 = _thermal_means(H, h, beta, x_coef)
    coef_u, coef_o = u0 / x_coef**2, o0 / x_coef**2
    pops, E, h2 = _thermal_eigenframe(H, h, beta)
    k, j = np.triu_indices(len(E), 1)
    pk, pj, hh = pops[k], pops[j], h2[k, j]
    eig_u = float(np.sum(hh * (pk - pj) ** 2 * (pk + pj) / (2 * pk * pj)))
    eig_o = float(np.sum(hh * (pk - pj) * beta * (E[j] - E[k])))
    err_u, err_o = _rel_err(coef_u, eig_u), _rel_err(coef_o, eig_o)
    gap_positive = all(u > o for u, o in pairs)
    passed = gap_positive and err_u <= rel_tol and err_o <= rel_tol
    return UpsilonExpansionReport(xs, b_ups, b_om, float(x_coef), coef_u, coef_o, eig_u, eig_o,
                                  err_u, err_o, gap_positive, passed)


@dataclass(frozen=True)
class MajorizationReport:
    spec_upsilon: tuple
    spec_omega: tuple
    partial_sum_gaps: tuple
    trace_gap: float
    min_partial_gap: float
    passed: bool


def majorization_check(p: Process, beta: float, tol: float = 1e-8) -> MajorizationReport:
    """Descending spectrum of ``Upsilon_tau`` majorizes that of ``Omega``.

    ``partial_sum_gaps[k-1]`` is the difference of the top-``k`` sums for
    ``k < d``; ``trace_gap`` is ``tr Upsilon - tr Omega``.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    su = np.sort(np.linalg.eigvalsh(schemes.upsilon_operator(p, beta)))[::-1]
    so = np.sort(np.linalg.eigvalsh(how_operator(p)))[::-1]
    gaps = (np.cumsum(su) - np.cumsum(so))[:-1]
    trace_gap = float(su.sum() - so.sum())
    min_gap = float(gaps.min()) if gaps.size else 0.0
    passed = min_gap >= -tol and abs(trace_gap) <= tol
    return MajorizationReport(tuple(su.tolist()), tuple(so.tolist()), tuple(gaps.tolist()), trace_gap, min_gap, passed)


@dataclass(frozen=True)
class RelativeEntropyReport:
    omega_mean: float
    upsilon_mean: float
    relative_entropy: float
    delta_free_energy: float
    bound_slack: float
    free_energy_slack: float
    identity_residual: float
    passed: bool = field(default=False)


def relative_entropy_bound_check(p: Process, beta: float, tol: float = 1e-9) -> RelativeEntropyReport:
    """``<Omega> - <Upsilon> <= S(tau || U^H tau' U)/beta`` and ``<Upsilon> >= dF`` on ``tau``.

    ``identity_residual`` checks ``dF = <Omega> - S/beta``, which ties the
    two inequalities together.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    tau = gibbs(p.h_initial, beta).state
    moved = gibbs(p.heisenberg_final(), beta).state
    om = expval(tau, how_operator(p))
    ups = expval(tau, schemes.upsilon_operator(p, beta))
    S = relative_entropy(tau, moved)
    dF = delta_free_energy(p.h_initial, p.h_final, beta)
    bound_slack = S / beta - (om - ups)
    fe_slack = ups - dF
    ident = abs(dF - (om - S / beta))
    passed = bound_slack >= -tol and fe_slack >= -tol
    return RelativeEntropyReport(om, ups, S, dF, bound_slack, fe_slack, ident, passed)
