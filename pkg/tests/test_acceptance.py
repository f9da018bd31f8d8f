"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -m acceptance -s`` to see the summary lines.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from qwork import cli, conditions, gaussian, linops, schemes, theorems
from qwork.core import Process, random_hamiltonian, random_process

pytestmark = pytest.mark.acceptance

H01 = np.diag([0.0, 1.0])
SY = np.array([[0, -1j], [1j, 0]])
COHERENT = np.array([[0.7, 0.3], [0.3, 0.3]])
XS = (1e-1, 1e-2, 1e-3, 1e-4)


def verdict(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def commuting_control(dim, seed):
    """Commuting process on the same energy scale as :func:`random_process`."""
    rng = np.random.default_rng(seed)
    H = random_hamiltonian(dim, rng)
    _, V = np.linalg.eigh(H)
    Hp = (V * rng.uniform(-1, 1, size=dim)) @ V.conj().T
    U = (V * np.exp(1j * rng.uniform(0, 2 * np.pi, dim))) @ V.conj().T
    return Process(H, Hp, U)


def test_criterion_1_table(tmp_path):
    start = time.perf_counter()
    code = cli.main(["table1", "--dims", "2", "3", "4", "--seeds", "1..20", "--beta", "1",
                     "--output", str(tmp_path)])
    elapsed = time.perf_counter() - start
    doc = json.loads((tmp_path / "table1.json").read_text())
    n = len(doc["instances"])
    ok = code == 0 and doc["summary"]["match"] and n >= 50 and elapsed < 10
    assert verdict(1, ok, f"{n} instances, match={doc['summary']['match']}, {elapsed:.1f}s")


def test_criterion_2_tpm_jarzynski():
    worst, count = 0.0, 0
    for i in range(150):
        p = random_process(2 + i % 5, 20_000 + i)
        s = schemes.tpm_scheme(p)
        for beta in (0.1, 1.0, 5.0):
            worst = max(worst, conditions.check_b(s, p.h_initial, p.h_final, beta).residual)
        count += 1
    assert verdict(2, worst < 1e-9, f"{count} instances, worst residual {worst:.2e}")


def test_criterion_3_golden_thompson():
    betas = (0.1, 1.0, 5.0)
    noise = max(abs(theorems.golden_thompson_gap(commuting_control(2 + i % 4, i), b))
                for i in range(40) for b in betas)
    floor = max(noise, np.finfo(float).eps)
    lowest, weakest, strict = math.inf, math.inf, 0
    for i in range(120):
        p = random_process(2 + i % 4, 30_000 + i)
        for b in betas:
            gap = theorems.golden_thompson_gap(p, b)
            lowest = min(lowest, gap)
            if theorems.commutator_norm(p) > 1e-6:
                weakest = min(weakest, gap / floor)
                strict += 1
    ok = lowest >= -1e-10 and weakest > 10 and strict > 0
    assert verdict(3, ok, f"min gap {lowest:.2e}, noise floor {floor:.1e}, "
                          f"weakest strict gap {weakest:.1e} floors over {strict} cases")


def test_criterion_4_structural_validator():
    worst_tpm, how_misses, n, noncommuting = 0.0, 0, 0, 0
    for i in range(60):
        p = random_process(2 + i % 3, 40_000 + i)
        H, Hp = p.h_initial, p.h_final
        tpm = schemes.tpm_scheme(p)
        rj = conditions.je_class_validate(tpm, H, Hp)
        rn = conditions.nondegenerate_checks(tpm, H, Hp)
        assert rn.status == "checked"
        worst_tpm = max(worst_tpm, rj.residual, rn.residual)
        n += 1
        if theorems.commutator_norm(p) > 1e-6:
            noncommuting += 1
            rh = conditions.je_class_validate(schemes.how_scheme(p), H, Hp)
            if not rh.components["outcome_inclusion"] > 1e-9:
                how_misses += 1
    how_failed = noncommuting - how_misses
    ok = worst_tpm < 1e-9 and how_misses == 0 and noncommuting > 0
    assert verdict(4, ok, f"TPM worst {worst_tpm:.2e} on {n}; HOW fails inclusion on {how_failed}/{noncommuting}")


def _perturbed_final(p, shifts):
    """Same eigenvectors and evolution, final levels moved by ``shifts`` (order kept)."""
    E, V = np.linalg.eigh(p.h_final)
    return Process(p.h_initial, (V * (E + shifts)) @ V.conj().T, p.evolution)


def _birkhoff(dim, rng):
    perms = [np.eye(dim)[list(q)] for q in itertools.permutations(range(dim))]
    w = rng.dirichlet(np.ones(len(perms)))
    return sum(wi * P for wi, P in zip(w, perms))


def _fixed_level_counterexample(p, scale):
    """Doubly stochastic weights that keep thermal A1 at the given final levels but are not TPM."""
    T = conditions.tpm_weights(p)
    Ef = np.linalg.eigvalsh(p.h_final)
    # direction orthogonal to (1,...,1) and to the final levels
    v = np.cross(np.ones(3), Ef)
    lam = np.array([1.0, -1.0, 0.0])
    D = np.outer(lam, v / np.max(np.abs(v)))
    t = scale * min(T.min(), (1 - T).min())
    return T + t * D


def test_criterion_5_tpm_uniqueness():
    betas = (0.5, 1.0, 2.0)
    rng = np.random.default_rng(5)
    accepted, rejected, worst = 0, 0, 0.0
    only_tpm = True
    for i in range(24):
        dim = 2 + i % 2
        p = random_process(dim, 50_000 + i)
        gaps = np.diff(np.linalg.eigvalsh(p.h_final))
        delta = 0.1 * gaps.min()
        perturbations = [np.zeros(dim)] + [delta * rng.uniform(-1, 1, dim) for _ in range(3)]
        T = conditions.tpm_weights(p)
        candidates = [T]
        for _ in range(4):
            B = _birkhoff(dim, rng)
            candidates.append(B)
            candidates.append((1 - 1e-3) * T + 1e-3 * B)
        if dim == 3:
            candidates.append(_fixed_level_counterexample(p, 0.5))
        reference = schemes.tpm_scheme(p)
        for c in candidates:
            passes = all(conditions.thermal_a1_condition(conditions.block_scheme(q, c), q, betas).passed
                         for q in (_perturbed_final(p, s) for s in perturbations))
            if passes:
                accepted += 1
                diff = linops.max_abs(conditions.block_scheme(p, c).elements - reference.elements)
                worst = max(worst, diff)
                only_tpm &= diff < 1e-8
            else:
                rejected += 1
    ok = only_tpm and accepted >= 24
    assert verdict(5, ok, f"{accepted} accepted schemes, worst distance to TPM {worst:.1e}; {rejected} rejected")


def test_criterion_6_commutator_inequality():
    rng = np.random.default_rng(6)
    worst, strict = 0.0, 0
    for i in range(300):
        dim = 2 + i % 5
        H = random_hamiltonian(dim, rng)
        h = random_hamiltonian(dim, rng)
        beta = (0.2, 1.0, 5.0)[i % 3]
        t = theorems.ineq2_terms(H, h, beta)
        worst = max(worst, abs(t.lhs - t.lhs_eig), abs(t.rhs - t.rhs_eig))
        strict += t.lhs > t.rhs
    assert verdict(6, worst < 1e-9 and strict == 300, f"route disagreement {worst:.1e}, strict {strict}/300")


def test_criterion_7_scaling_clash():
    tpm = theorems.scaling_analysis(conditions.factory("tpm"), H01, SY, COHERENT, XS)
    comp = theorems.scaling_analysis(conditions.factory("composite"), H01, SY, COHERENT, XS)
    how = theorems.scaling_analysis(conditions.factory("how"), H01, SY, COHERENT, XS)
    e_tpm = tpm.mean.fitted_exponent
    e_comp = comp.mean.fitted_exponent
    e_omega = tpm.unmeasured.fitted_exponent
    e_how = how.mean.fitted_exponent
    ok = e_tpm >= 1.9 and e_comp >= 1.9 and abs(e_omega - 1) <= 0.05 and abs(e_how - 1) <= 0.05
    assert verdict(7, ok, f"exponents tpm {e_tpm:.3f}, composite {e_comp:.3f}, "
                          f"tr(rho Omega) {e_omega:.3f}, how {e_how:.3f}")


def test_criterion_8_upsilon():
    maj_ok = re_ok = True
    worst_trace = worst_slack = 0.0
    for i in range(100):
        p = random_process(2 + i % 4, 80_000 + i)
        m = theorems.majorization_check(p, 1.0, tol=1e-8)
        r = theorems.relative_entropy_bound_check(p, 1.0, tol=1e-9)
        maj_ok &= m.passed and abs(m.trace_gap) <= 1e-8
        re_ok &= r.passed
        worst_trace = max(worst_trace, abs(m.trace_gap))
        worst_slack = min(worst_slack, r.bound_slack, r.free_energy_slack)
    rng = np.random.default_rng(8)
    exp_ok, worst_rel = True, 0.0
    for i in range(30):
        dim = 2 + i % 4
        H, h = random_hamiltonian(dim, rng), random_hamiltonian(dim, rng)
        e = theorems.upsilon_expansion_check(H, h, 1.0, [1e-2], rel_tol=0.05)
        exp_ok &= e.gap_positive and e.passed
        worst_rel = max(worst_rel, e.rel_err_upsilon, e.rel_err_omega)
    ok = maj_ok and re_ok and exp_ok
    assert verdict(8, ok, f"majorization {maj_ok} (trace {worst_trace:.1e}), bounds {re_ok} "
                          f"(min slack {worst_slack:.1e}), expansion {exp_ok} (rel err {worst_rel:.1e})")


def test_criterion_9_gaussian_limit():
    start = time.perf_counter()
    S, lam = np.array(cli.GAUSSIAN_S), np.array(cli.GAUSSIAN_LAMBDA)

    def gp(bh):
        return gaussian.GaussianProcess(S, lam, bh, 1.0)

    p = gp(0.5)
    fock_err = abs(gaussian.fock_oracle(p, 80) - gaussian.jarzynski_average_gaussian(p))
    target = 1 / (2 * math.sqrt(np.linalg.det(lam)))
    bhs = [1e-1, 1e-2, 1e-3]
    dev = [gaussian.jarzynski_average_gaussian(gp(b)) - target for b in bhs]
    slope = theorems.fit_power_law(bhs, dev).fitted_exponent
    limit_err = abs(gaussian.jarzynski_average_gaussian(gp(1e-4)) - gaussian.classical_partition_ratio(gp(1e-4)))
    elapsed = time.perf_counter() - start
    ok = fock_err < 1e-6 and abs(slope - 1) <= 0.1 and limit_err < 1e-3 and elapsed < 30
    assert verdict(9, ok, f"fock error {fock_err:.1e}, deviation slope {slope:.3f}, "
                          f"classical error {limit_err:.1e}, {elapsed:.1f}s")
