import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwork import linops, schemes
from qwork.core import Process, delta_free_energy, expval, gibbs, how_operator, random_density, random_process
from qwork.errors import InvariantError, NumericError, SchemeInvalidError
from qwork.schemes import WorkDistribution, WorkScheme

seeds = st.integers(0, 2**32 - 1)
HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
H01 = np.diag([0.0, 1.0])


def _support(d, floor=1e-14):
    return {w: q for w, q in d.as_dict().items() if q > floor}


def test_tpm_untouched_system():
    s = schemes.tpm_scheme(Process.trivial(H01))
    for (a, k), M in zip(s.labels, s.elements):
        if a != k:
            assert linops.max_abs(M) == 0
    d = schemes.distribution(s, random_density(2, 1))
    assert _support(d) == {0.0: pytest.approx(1.0, abs=1e-15)}


def test_tpm_hadamard_ground_state():
    s = schemes.tpm_scheme(Process(H01, H01, HADAMARD))
    d = schemes.distribution(s, np.diag([1.0, 0.0]))
    assert _support(d) == {0.0: pytest.approx(0.5), 1.0: pytest.approx(0.5)}


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(2, 6), seed=seeds)
def test_tpm_elements_commute_with_h(dim, seed):
    p = random_process(dim, seed)
    for M in schemes.tpm_scheme(p).elements:
        assert linops.max_abs(M @ p.h_initial - p.h_initial @ M) < 1e-10


def test_how_trivial_process():
    s = schemes.how_scheme(Process.trivial(H01))
    assert len(s) == 1
    assert s.outcomes[0] == 0
    assert np.allclose(s.elements[0], np.eye(2))


def test_how_hadamard_has_two_symmetric_outcomes():
    p = Process(H01, H01, HADAMARD)
    s = schemes.how_scheme(p)
    norm = linops.operator_norm(how_operator(p))
    assert np.allclose(s.outcomes, [-norm, norm])
    assert abs(norm - 1 / math.sqrt(2)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(2, 6), seed=seeds)
def test_how_mean_is_unmeasured_mean(dim, seed):
    p = random_process(dim, seed)
    rho = random_density(dim, seed + 1)
    d = schemes.distribution(schemes.how_scheme(p), rho)
    assert abs(schemes.mean(d) - expval(rho, how_operator(p))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(2, 8), seed=seeds)
def test_povm_completeness_all_schemes(dim, seed):
    p = random_process(dim, seed)
    rho = random_density(dim, seed + 1)
    for name in schemes.SCHEME_NAMES:
        s = schemes.build(name, p, rho)
        assert linops.max_abs(s.elements.sum(axis=0) - np.eye(dim)) < 1e-9
        assert len(s.outcomes) == len(s.elements)


def _diagonal_in_h(H, seed):
    w, V = np.linalg.eigh(H)
    pops = np.random.default_rng(seed).dirichlet(np.ones(len(w)))
    return (V * pops) @ V.conj().T


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(2, 5), seed=seeds)
def test_composite_matches_tpm_for_diagonal_state(dim, seed):
    p = random_process(dim, seed)
    rho = _diagonal_in_h(p.h_initial, seed)
    assert linops.max_abs(schemes.dephasing_rotation(p.h_initial, rho) - np.eye(dim)) < 1e-10
    dc = schemes.distribution(schemes.composite_scheme(p, rho), rho)
    dt = schemes.distribution(schemes.tpm_scheme(p), rho)
    for w in np.concatenate([dc.outcomes, dt.outcomes]):
        assert abs(dc.mass_near(w, 1e-9) - dt.mass_near(w, 1e-9)) < 1e-10


def test_composite_on_untouched_system_has_nonzero_work():
    rho = np.array([[0.7, 0.3], [0.3, 0.3]])
    d = schemes.distribution(schemes.composite_scheme(Process.trivial(H01), rho), rho)
    assert d.mass_near(0.0, 1e-12) < 1


@pytest.mark.parametrize("seed", range(10))
def test_composite_mean_is_unmeasured_mean(seed):
    p = random_process(2, seed)
    rho = random_density(2, seed + 100)
    d = schemes.distribution(schemes.composite_scheme(p, rho), rho)
    assert abs(schemes.mean(d) - expval(rho, how_operator(p))) < 1e-9


def test_rotation_diagonalises_state():
    rng = np.random.default_rng(3)
    H = linops.sample_gue(4, rng)
    rho = random_density(4, rng)
    R = schemes.dephasing_rotation(H, rho)
    assert linops.max_abs(R.conj().T @ R - np.eye(4)) < 1e-12
    rotated = R @ rho @ R.conj().T
    _, V = np.linalg.eigh(H)
    in_h = V.conj().T @ rotated @ V
    assert linops.max_abs(in_h - np.diag(np.diag(in_h))) < 1e-10
    # the rotated populations keep the ordering of rho's own diagonal
    order = np.argsort(-np.diag(V.conj().T @ rho @ V).real, kind="stable")
    assert np.all(np.diff(np.diag(in_h).real[order]) <= 1e-12)


def test_rotation_is_deterministic_for_degenerate_state():
    H = np.diag([0.0, 1.0, 2.0])
    rho = np.diag([0.4, 0.3, 0.3])
    rho[1, 2] = rho[2, 1] = 0.1
    R1 = schemes.dephasing_rotation(H, rho)
    R2 = schemes.dephasing_rotation(H, rho.copy())
    assert np.array_equal(R1, R2)


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(2, 5), seed=seeds)
def test_upsilon_equals_how_when_commuting(dim, seed):
    rng = np.random.default_rng(seed)
    H = linops.sample_gue(dim, rng)
    _, V = np.linalg.eigh(H)
    Hp = (V * rng.normal(size=dim)) @ V.conj().T
    p = Process(H, Hp, np.eye(dim))
    beta = schemes.fit_beta(random_density(dim, rng), H).beta
    if beta > 0:
        assert linops.max_abs(schemes.upsilon_operator(p, beta) - how_operator(p)) < 1e-9


def test_upsilon_trivial_process():
    rho = np.array([[0.7, 0.3], [0.3, 0.3]])
    s = schemes.upsilon_scheme(Process.trivial(H01), rho)
    assert np.all(np.abs(s.outcomes) < 1e-12)


@pytest.mark.parametrize("beta", [0.1, 0.7, 3.0])
def test_beta_fit_recovers_thermal_beta(beta):
    rng = np.random.default_rng(9)
    H = linops.sample_gue(3, rng)
    fit = schemes.fit_beta(gibbs(H, beta).state, H)
    assert abs(fit.beta - beta) < 1e-6
    assert fit.residual < 1e-9


def test_beta_fit_maximally_mixed_is_below_floor():
    fit = schemes.fit_beta(np.eye(2) / 2, H01)
    assert fit.below_floor and fit.beta == 0
    s = schemes.upsilon_scheme(Process(H01, H01, HADAMARD), np.eye(2) / 2)
    assert s.info["below_floor"]
    assert np.allclose(np.sort(s.outcomes), schemes.how_scheme(Process(H01, H01, HADAMARD)).outcomes)


def test_beta_fit_unbracketed_is_numeric_error():
    cfg = schemes.BetaSearch(hi=0.5)
    with pytest.raises(NumericError) as exc:
        schemes.fit_beta(gibbs(H01, 5.0).state, H01, cfg)
    assert exc.value.diagnostics["grid_max"] == 0.5


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(2, 5), seed=seeds, beta=st.floats(0.2, 3.0))
def test_upsilon_satisfies_jarzynski_on_own_thermal_state(dim, seed, beta):
    p = random_process(dim, seed)
    tau = gibbs(p.h_initial, beta).state
    s = schemes.upsilon_scheme(p, tau)
    bh = s.info["beta_hat"]
    lhs = schemes.exp_average(schemes.distribution(s, tau), bh)
    assert abs(lhs - math.exp(-bh * delta_free_energy(p.h_initial, p.h_final, bh))) < 1e-8


def test_distribution_maximally_mixed():
    p = random_process(3, 4)
    s = schemes.tpm_scheme(p)
    d = schemes.distribution(s, np.eye(3) / 3, merge_tol=0.0)
    traces = np.einsum("nii->n", s.elements).real / 3
    order = np.argsort(s.outcomes)
    assert np.allclose(d.probabilities, traces[order])


def test_distribution_merges_close_outcomes():
    s = WorkScheme(np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]), np.array([1.0, 1.0 + 1e-12]))
    d = schemes.distribution(s, np.eye(2) / 2, merge_tol=1e-9)
    assert len(d.outcomes) == 1
    assert d.probabilities[0] == 1.0


def test_distribution_rejects_negative_probability():
    bad = WorkScheme.__new__(WorkScheme)
    object.__setattr__(bad, "elements", np.array([np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])]))
    object.__setattr__(bad, "outcomes", np.array([0.0, 1.0]))
    object.__setattr__(bad, "labels", None)
    with pytest.raises(SchemeInvalidError):
        schemes.distribution(bad, np.diag([1.0, 0.0]))


def test_scheme_validation():
    with pytest.raises(InvariantError):
        WorkScheme(np.array([np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])]), np.array([0.0, 1.0]))
    with pytest.raises(InvariantError):
        WorkScheme(np.array([np.diag([1.0, 0.0])]), np.array([0.0]))


def test_averages():
    point = WorkDistribution(np.array([0.0]), np.array([1.0]))
    assert schemes.exp_average(point, 2.0) == 1 and schemes.mean(point) == 0
    sym = WorkDistribution(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
    assert abs(schemes.exp_average(sym, 1.0) - math.cosh(1)) < 1e-15
    assert schemes.mean(WorkDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.5]))) == 0.5


def test_build_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        schemes.build("nope", Process.trivial(H01))
