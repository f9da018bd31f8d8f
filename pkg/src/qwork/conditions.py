"""Checkers for average energy conservation (A1), deterministic zero work for
untouched systems (A2), the Jarzynski equality (B), and the structural
characterisation of state-independent schemes that obey the Jarzynski
equality (the "JE class").

Every checker returns a :class:`ConditionReport` whose ``passed`` flag is
exactly ``residual <= tolerance``. Inputs that fall outside a checker's
precondition get ``status="skipped"`` and never pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import linops, schemes
from .core import Process, delta_free_energy, expval, gibbs, how_operator
from .linops import CLUSTER_TOL, dagger
from .schemes import WorkScheme

SchemeFactory = Callable[[Process, np.ndarray], WorkScheme]


class Condition(str, Enum):
    A1 = "A1"
    A2 = "A2"
    B = "B"
    JE_CLASS = "JEclass"
    JE_NONDEG = "JEclass-nondeg"
    THM2 = "Thm2"
    A1_THERMAL = "A1-thermal"


@dataclass
class ConditionReport:
    condition: Condition
    passed: bool
    residual: float
    tolerance: float
    context: dict = field(default_factory=dict)
    status: str = "checked"
    detail: str = ""
    components: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition.value,
            "passed": bool(self.passed),
            "residual": _finite_or_none(self.residual),
            "tolerance": float(self.tolerance),
            "context": self.context,
            "status": self.status,
            "detail": self.detail,
            "components": {k: _finite_or_none(v) for k, v in self.components.items()},
        }


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _report(condition, residual, tol, context=None, status="checked", detail="", components=None):
    residual = float(residual)
    passed = status == "checked" and residual <= tol
    return ConditionReport(condition, passed, residual, float(tol), dict(context or {}), status, detail, dict(components or {}))


def _skipped(condition, tol, context, detail):
    return ConditionReport(condition, False, math.nan, float(tol), dict(context or {}), "skipped", detail)


def factory(name: str, **kwargs) -> SchemeFactory:
    """Scheme factory ``(process, rho) -> WorkScheme`` for a named scheme."""
    return lambda p, rho: schemes.build(name, p, rho, **kwargs)


def thermal_scheme(name: str, p: Process, beta: float, **kwargs) -> WorkScheme:
    """Build a scheme for the thermal initial state at ``beta``."""
    return schemes.build(name, p, gibbs(p.h_initial, beta).state, **kwargs)


def check_a1(s: WorkScheme, p: Process, rho, tol: float = 1e-8, context=None) -> ConditionReport:
    """Mean measured work against ``tr(rho Omega)``."""
    measured = schemes.mean(schemes.distribution(s, rho))
    expected = expval(np.asarray(rho, dtype=complex), how_operator(p))
    return _report(Condition.A1, abs(measured - expected), tol, context,
                   components={"measured_mean": measured, "unmeasured_mean": expected})


def check_a2(make: SchemeFactory, H, rho, tol: float = 1e-8, merge_tol: float | None = None, context=None) -> ConditionReport:
    """Probability mass away from ``W = 0`` for the untouched system.

    "Zero" means ``|W|`` within the merge tolerance used to aggregate the
    distribution. By default that is the outcome-span tolerance floored at
    the same relative precision of the energy scale of ``H``, so that
    rounding-level outcomes count as zero.
    """
    p = Process.trivial(H)
    s = make(p, rho)
    if merge_tol is None:
        mt = max(schemes.default_merge_tol(s.outcomes), _energy_tol(np.linalg.eigvalsh(p.h_initial)))
    else:
        mt = merge_tol
    d = schemes.distribution(s, rho, mt)
    zero_mass = d.mass_near(0.0, mt)
    return _report(Condition.A2, max(0.0, 1.0 - zero_mass), tol, context, components={"zero_mass": zero_mass})


def check_b(s: WorkScheme, H, Hp, beta: float, tol: float = 1e-8, context=None) -> ConditionReport:
    """``|<exp(-beta W)>_tau - exp(-beta dF)|`` for a scheme built for ``tau_beta``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    tau = gibbs(H, beta).state
    lhs = schemes.exp_average(schemes.distribution(s, tau), beta)
    rhs = math.exp(-beta * delta_free_energy(H, Hp, beta))
    return _report(Condition.B, abs(lhs - rhs), tol, context, components={"lhs": lhs, "rhs": rhs})


# --------------------------------------------------------------------------
# JE-class structure


def _energy_tol(*values) -> float:
    vals = np.concatenate([np.ravel(v) for v in values])
    return schemes.MERGE_REL * max(float(np.ptp(vals)), float(np.max(np.abs(vals))), 1e-300)


def _level_overlaps(s: WorkScheme, projectors) -> np.ndarray:
    """``T[n, a] = tr(M_n P_a)``."""
    return np.einsum("nij,aji->na", s.elements, np.array(projectors)).real


def je_class_validate(s: WorkScheme, H, Hp, tol: float = 1e-9, cluster_tol: float = CLUSTER_TOL,
                      match_tol: float | None = None, context=None) -> ConditionReport:
    """Necessary and sufficient conditions for a state-independent scheme to obey the JE.

    (i) every outcome is some ``E'_k - E_a``; (ii) for every level ``k`` of
    ``H'``, the overlaps ``tr(M_W P_a)`` with ``W + E_a = E'_k`` sum to the
    degeneracy ``g'_k``; (iii) every overlap with ``W + E_a`` not a level of
    ``H'`` vanishes. The residual is the largest violation of the three.
    """
    sd = linops.eigh(H, cluster_tol)
    sdf = linops.eigh(Hp, cluster_tol)
    E, Ef = sd.values, sdf.values
    mt = _energy_tol(E, Ef) if match_tol is None else match_tol

    diffs = (Ef[None, :] - E[:, None]).ravel()
    dist = np.min(np.abs(s.outcomes[:, None] - diffs[None, :]), axis=1)
    inclusion = float(dist.max())
    worst = int(np.argmax(dist))

    T = _level_overlaps(s, sd.projectors)
    target = s.outcomes[:, None] + E[None, :]
    gap = np.abs(target[:, :, None] - Ef[None, None, :])
    k_of = np.where(gap.min(axis=2) <= mt, gap.argmin(axis=2), -1)
    sums = np.array([T[k_of == k].sum() for k in range(len(Ef))])
    completeness = float(np.max(np.abs(sums - np.array(sdf.degeneracies))))
    stray = T[k_of < 0]
    leakage = float(np.max(np.abs(stray))) if stray.size else 0.0

    included = dist[worst] <= mt
    residual = max(0.0 if included else inclusion, completeness, leakage)
    detail = "" if included else (f"outcome W={s.outcomes[worst]!r} is not an energy difference E'_k - E_a "
                                  f"(nearest at distance {inclusion:.3e})")
    components = {"outcome_inclusion": inclusion, "level_sums": completeness, "forbidden_overlap": leakage}
    return _report(Condition.JE_CLASS, residual, tol, context, detail=detail, components=components)


def differences_nondegenerate(H, Hp, cluster_tol: float = CLUSTER_TOL, match_tol: float | None = None) -> bool:
    """True when all ``E'_k - E_a`` are pairwise distinct."""
    E = linops.eigh(H, cluster_tol).values
    Ef = linops.eigh(Hp, cluster_tol).values
    mt = _energy_tol(E, Ef) if match_tol is None else match_tol
    d = np.sort((Ef[None, :] - E[:, None]).ravel())
    return bool(np.all(np.diff(d) > mt))


def _pair_labels(s: WorkScheme, E, Ef, mt):
    """``(a, k)`` for every element, from labels when present, else by matching outcomes.

    Returns ``(labels, None)`` or ``(None, offending_outcome)``.
    """
    diffs = Ef[None, :] - E[:, None]
    if s.labels is not None and all(len(l) == 2 for l in s.labels):
        labels = [tuple(l) for l in s.labels]
        for (a, k), w in zip(labels, s.outcomes):
            if abs(diffs[a, k] - w) > mt:
                return None, w
        return labels, None
    labels = []
    for w in s.outcomes:
        a, k = np.unravel_index(np.argmin(np.abs(diffs - w)), diffs.shape)
        if abs(diffs[a, k] - w) > mt:
            return None, w
        labels.append((int(a), int(k)))
    return labels, None


def nondegenerate_checks(s: WorkScheme, H, Hp, tol: float = 1e-9, cluster_tol: float = CLUSTER_TOL,
                         match_tol: float | None = None, context=None) -> ConditionReport:
    """Block structure ``M_ak = P_a M_ak P_a`` and level sums ``sum_a tr M_ak = tr P'_k``.

    Valid only when the energy differences are nondegenerate; otherwise the
    report is skipped.
    """
    sd = linops.eigh(H, cluster_tol)
    sdf = linops.eigh(Hp, cluster_tol)
    mt = _energy_tol(sd.values, sdf.values) if match_tol is None else match_tol
    if not differences_nondegenerate(H, Hp, cluster_tol, mt):
        return _skipped(Condition.JE_NONDEG, tol, context, "energy differences are degenerate")
    labels, bad = _pair_labels(s, sd.values, sdf.values, mt)
    if labels is None:
        return _report(Condition.JE_NONDEG, math.inf, tol, context, detail=f"outcome W={bad!r} matches no E'_k - E_a")

    block_dev, where = 0.0, None
    traces = np.zeros(len(sdf.values))
    for (a, k), M in zip(labels, s.elements):
        Pa = sd.projectors[a]
        dev = linops.max_abs(M - Pa @ M @ Pa)
        if dev > block_dev:
            block_dev, where = dev, (a, k)
        traces[k] += np.trace(M).real
    level_dev = float(np.max(np.abs(traces - np.array(sdf.degeneracies))))
    detail = f"largest block violation at (a, k) = {where}" if where is not None and block_dev > tol else ""
    comps = {"block_structure": block_dev, "level_traces": level_dev}
    ctx = dict(context or {})
    if where is not None:
        ctx["worst_label"] = list(where)
    return _report(Condition.JE_NONDEG, max(block_dev, level_dev), tol, ctx, detail=detail, components=comps)


def theorem2_trace_condition(s: WorkScheme, p: Process, tol: float = 1e-9, cluster_tol: float = CLUSTER_TOL,
                             match_tol: float | None = None, context=None) -> ConditionReport:
    """``tr M_ak = tr(P_a U^H P'_k U)`` for all ``a, k``; for nondegenerate ``H``
    also ``M_ak`` equal to the TPM element entrywise."""
    sd = linops.eigh(p.h_initial, cluster_tol)
    sdf = linops.eigh(p.h_final, cluster_tol)
    mt = _energy_tol(sd.values, sdf.values) if match_tol is None else match_tol
    if not differences_nondegenerate(p.h_initial, p.h_final, cluster_tol, mt):
        return _skipped(Condition.THM2, tol, context, "energy differences are degenerate")
    labels, bad = _pair_labels(s, sd.values, sdf.values, mt)
    if labels is None:
        return _report(Condition.THM2, math.inf, tol, context, detail=f"outcome W={bad!r} matches no E'_k - E_a")

    A, K, d = len(sd.values), len(sdf.values), p.dim
    summed = np.zeros((A, K, d, d), dtype=complex)
    for (a, k), M in zip(labels, s.elements):
        summed[a, k] += M
    U = p.evolution
    tpm = np.array([[Pa @ dagger(U) @ Pk @ U @ Pa for Pk in sdf.projectors] for Pa in sd.projectors])
    trace_dev = float(np.max(np.abs(np.einsum("akii->ak", summed).real - np.einsum("akii->ak", tpm).real)))
    comps = {"trace_condition": trace_dev}
    residual = trace_dev
    if sd.is_nondegenerate():
        elem_dev = linops.max_abs(summed - tpm)
        comps["elementwise"] = elem_dev
        residual = max(residual, elem_dev)
    return _report(Condition.THM2, residual, tol, context, components=comps)


def thermal_a1_condition(s: WorkScheme, p: Process, betas, tol: float = 1e-9, context=None) -> ConditionReport:
    """A1 restricted to thermal initial states, over several inverse temperatures."""
    devs = []
    for beta in betas:
        tau = gibbs(p.h_initial, beta).state
        devs.append(abs(schemes.mean(schemes.distribution(s, tau)) - expval(tau, how_operator(p))))
    return _report(Condition.A1_THERMAL, max(devs), tol, context,
                   components={f"beta={b:g}": v for b, v in zip(betas, devs)})


def block_scheme(p: Process, weights, cluster_tol: float = CLUSTER_TOL) -> WorkScheme:
    """State-independent scheme ``M_ak = c_ak P_a`` with outcomes ``E'_k - E_a``.

    Needs nondegenerate ``H``. Rows of ``weights`` must sum to one
    (completeness); columns summing to the degeneracies of ``H'`` make the
    scheme obey the JE. The TPM scheme is the case
    ``c_ak = tr(P_a U^H P'_k U)``.
    """
    sd = linops.eigh(p.h_initial, cluster_tol)
    sdf = linops.eigh(p.h_final, cluster_tol)
    if not sd.is_nondegenerate():
        raise ValueError("block schemes need a nondegenerate initial Hamiltonian")
    c = np.asarray(weights, dtype=float)
    if c.shape != (len(sd), len(sdf)):
        raise ValueError(f"weights must have shape {(len(sd), len(sdf))}, got {c.shape}")
    elements, outcomes, labels = [], [], []
    for a, Pa in enumerate(sd.projectors):
        for k, Ek in enumerate(sdf.values):
            elements.append(c[a, k] * Pa)
            outcomes.append(Ek - sd.values[a])
            labels.append((a, k))
    return WorkScheme(np.array(elements), np.array(outcomes), tuple(labels), name="block")


def tpm_weights(p: Process, cluster_tol: float = CLUSTER_TOL) -> np.ndarray:
    """``c_ak = tr(P_a U^H P'_k U)``."""
    sd = linops.eigh(p.h_initial, cluster_tol)
    sdf = linops.eigh(p.h_final, cluster_tol)
    U = p.evolution
    return np.array([[np.trace(Pa @ dagger(U) @ Pk @ U).real for Pk in sdf.projectors] for Pa in sd.projectors])
