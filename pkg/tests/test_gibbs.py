"""Gibbs states, reduced density matrices, entropies, tilted moments."""

import math

import numpy as np
import pytest

import fockgibbs as fg
from fockgibbs import (apriori_bound_checks, binomial_number_moment,
                       build_basis, choose_cutoff, delta_kernel,
                       dirichlet_spectrum, entropy_trace, free_energy_functional,
                       free_gibbs_state, free_log_partition, free_rdm,
                       free_sector_law, gibbs_state, hamiltonian,
                       interaction_energy_trace, localize, mean_occupations,
                       occupation_marginal, reduced_density_matrix,
                       relative_entropy, scaled_number_moment, tilted_moment,
                       tilted_moment_limit, tilted_number_operator)
from fockgibbs.operators import dGamma_op

S2 = dirichlet_spectrum(2)


def random_state(basis, rng, diagonal=False):
    """Random full-rank density matrix, block-diagonal in particle number."""
    blocks = []
    for n in range(basis.N_max + 1):
        d = basis.sector_dim(n)
        if diagonal:
            blocks.append(rng.uniform(0.1, 1.0, size=d))
        else:
            A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            blocks.append(A @ A.conj().T + 0.05 * np.eye(d))
    return fg.QuantumState(basis, blocks)


# ---------------------------------------------------------------------------
# Free closed forms vs per-sector diagonalization
# ---------------------------------------------------------------------------

def test_free_state_closed_form_vs_diagonalization():
    basis = build_basis(2, 24)
    T = 0.8
    oracle = free_gibbs_state(basis, S2, T)  # product of geometric weights
    diag = gibbs_state(basis, dGamma_op(basis, S2), T)  # eigh route
    assert oracle.tail_mass < 1e-10
    assert abs(diag.log_partition - free_log_partition(S2, T)) <= 1e-8
    for n in range(basis.N_max + 1):
        np.testing.assert_allclose(diag.block_dense(n), oracle.block_dense(n),
                                   atol=1e-12)


def test_free_rdm_closed_form_vs_truncated_trace():
    basis = build_basis(2, 30)
    T = 0.7
    state = free_gibbs_state(basis, S2, T)
    for k in (1, 2):
        closed = free_rdm(S2, T, k)
        traced = reduced_density_matrix(state, k)
        assert np.max(np.abs(closed.matrix - traced.matrix)) <= 1e-10
        # diagonal entries are products of mean occupations
        nbar = mean_occupations(S2, T)
        for lab in closed.labels:
            idx = closed.label_index(lab)
            assert closed.matrix[idx, idx].real == pytest.approx(
                float(np.prod(nbar ** np.asarray(lab))), rel=1e-12)


def test_two_route_rdm_agreement_interacting():
    basis = build_basis(2, 14)
    H = hamiltonian(basis, S2, delta_kernel(2), 0.4)
    state = gibbs_state(basis, H, 1.5)
    for k in (1, 2):
        r_creation = reduced_density_matrix(state, k, route="creation")
        r_partial = reduced_density_matrix(state, k, route="partial_trace")
        assert r_creation.route == "creation"
        assert r_partial.route == "partial_trace"
        gap = np.max(np.abs(r_creation.matrix - r_partial.matrix))
        assert gap <= 1e-9


def test_rdm_trace_is_binomial_moment():
    basis = build_basis(2, 12)
    state = gibbs_state(basis, hamiltonian(basis, S2, delta_kernel(2), 0.3), 1.2)
    for k in (1, 2, 3):
        rdm = reduced_density_matrix(state, k)
        assert rdm.trace() == pytest.approx(binomial_number_moment(state, k),
                                            rel=1e-10)
        assert rdm.hermiticity_defect() <= 1e-12
        assert rdm.min_eigenvalue() >= -1e-12


def test_occupation_marginal_consistency():
    basis = build_basis(2, 12)
    state = gibbs_state(basis, hamiltonian(basis, S2, delta_kernel(2), 0.3), 1.2)
    rdm1 = reduced_density_matrix(state, 1)
    for mode in (0, 1):
        law = occupation_marginal(state, mode)
        assert law.sum() == pytest.approx(1.0, abs=1e-12)
        mean = float(np.dot(np.arange(law.size), law))
        assert mean == pytest.approx(rdm1.matrix[mode, mode].real, rel=1e-10)


# ---------------------------------------------------------------------------
# Cutoff certificates
# ---------------------------------------------------------------------------

def test_free_sector_law_is_a_probability_law():
    law = free_sector_law(S2, 2.0, 200)
    assert np.all(law >= 0)
    assert law.sum() == pytest.approx(1.0, abs=1e-9)


def test_choose_cutoff_certificate_is_tight():
    T, rtol = 2.0, 1e-6
    n_cut = choose_cutoff(S2, T, rtol=rtol)
    law = free_sector_law(S2, T, n_cut + 200)
    tail_at = 1.0 - law[: n_cut + 1].sum()
    tail_before = 1.0 - law[:n_cut].sum()
    assert tail_at <= rtol
    assert tail_before > rtol


# ---------------------------------------------------------------------------
# Entropies
# ---------------------------------------------------------------------------

def test_relative_entropy_zero_iff_equal():
    basis = build_basis(2, 8)
    rng = np.random.default_rng(11)
    a = random_state(basis, rng)
    b = random_state(basis, rng)
    assert relative_entropy(a, a) <= 1e-10
    assert relative_entropy(a, b) > 1e-4  # distinct random states


def test_relative_entropy_free_states_matches_direct_sum():
    """Oracle: both free states are diagonal in the occupation basis, so
    H(a,b) is a plain Kullback-Leibler sum over occupation vectors."""
    basis = build_basis(2, 26)
    a = free_gibbs_state(basis, S2, 0.9)
    b = free_gibbs_state(basis, S2, 0.6)
    pa, pb = a.diagonal(), b.diagonal()
    direct = float(np.sum(pa * (np.log(pa) - np.log(pb))))
    assert relative_entropy(a, b) == pytest.approx(direct, rel=1e-10)
    assert relative_entropy(a, b) >= 0.0


def test_relative_entropy_monotone_under_localization():
    rng = np.random.default_rng(5)
    worst = np.inf
    for trial in range(100):
        J = int(rng.integers(2, 4))
        basis = build_basis(J, int(rng.integers(2, 5)))
        a = random_state(basis, rng)
        b = random_state(basis, rng)
        keep = sorted(rng.choice(J, size=int(rng.integers(1, J)),
                                 replace=False).tolist())
        full = relative_entropy(a, b)
        local = relative_entropy(localize(a, keep), localize(b, keep))
        worst = min(worst, full - local)
    assert worst >= -1e-8


def test_gibbs_variational_principle():
    basis = build_basis(2, 8)
    T = 1.1
    H = hamiltonian(basis, S2, delta_kernel(2), 0.5)
    gibbs = gibbs_state(basis, H, T)
    f_min = free_energy_functional(H, gibbs, T)
    assert f_min == pytest.approx(-T * gibbs.log_partition, rel=1e-10)
    rng = np.random.default_rng(23)
    worst = np.inf
    for trial in range(100):
        other = random_state(basis, rng, diagonal=bool(trial % 2))
        worst = min(worst, free_energy_functional(H, other, T) - f_min)
    assert worst >= -1e-9


def test_entropy_trace_of_pure_and_mixed():
    basis = build_basis(1, 3)
    pure = [None] * 4
    pure[0] = np.array([[1.0 + 0.0j]])
    state = fg.QuantumState(basis, pure)
    assert entropy_trace(state) == pytest.approx(0.0, abs=1e-12)
    flat = [np.ones(1) / 4.0 for _ in range(4)]
    mixed = fg.QuantumState(basis, flat)
    assert entropy_trace(mixed) == pytest.approx(-math.log(4.0), rel=1e-12)


# ---------------------------------------------------------------------------
# Tilted moments: closed form, trace route, classical limit
# ---------------------------------------------------------------------------

def tilted_oracle(s, T, occ, k):
    """Independent simplex sum with explicit composition enumeration."""
    lam = s.as_array()
    denom = [T * (math.exp(l / T) - 1.0) for l in lam]

    def comps(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in comps(total - first, parts - 1):
                yield (first,) + rest

    out = 0.0
    for extra in comps(k, len(lam)):
        term = 1.0
        for nj, sj, dj in zip(occ, extra, denom):
            term *= math.factorial(nj + sj) / dj ** (nj + sj)
        out += term
    return out


@pytest.mark.parametrize("occ,k", [((1, 0), 1), ((0, 2), 1), ((1, 1), 2)])
def test_tilted_moment_closed_form(occ, k):
    T = 2.0
    assert tilted_moment(S2, T, occ, k) == pytest.approx(
        tilted_oracle(S2, T, occ, k), rel=1e-13)


def test_tilted_moment_trace_route():
    basis = build_basis(2, 70)
    T = 1.5
    state = free_gibbs_state(basis, S2, T)
    for occ, k in [((1, 0), 1), ((0, 1), 2)]:
        closed = tilted_moment(S2, T, occ, k)
        traced = float(state.expectation(
            tilted_number_operator(basis, occ, k, T)).real)
        assert abs(closed - traced) / closed <= 1e-10


def test_tilted_moment_limit_values():
    # with lambda = (1, 4): pattern (1,0), k=1 gives 2/1 + 1/(1*4) = 2.25
    assert tilted_moment_limit(S2, (1, 0), 1) == pytest.approx(2.25, rel=1e-14)
    # the closed form carries its own 1/T powers, so it tends to the limit
    assert tilted_moment(S2, 1e7, (1, 0), 1) == pytest.approx(2.25, rel=1e-5)


# ---------------------------------------------------------------------------
# A-priori inequality battery
# ---------------------------------------------------------------------------

def test_apriori_bounds_on_small_interacting_state():
    basis = build_basis(2, 40)
    kern = delta_kernel(2)
    T, lam = 2.0, 0.5
    state = gibbs_state(basis, hamiltonian(basis, S2, kern, lam), T)
    free = free_gibbs_state(basis, S2, T)
    rdm1 = reduced_density_matrix(state, 1)
    rdm2 = reduced_density_matrix(state, 2)
    w2 = interaction_energy_trace(kern, rdm2)
    checks = apriori_bound_checks(
        S2, kern, T, lam, log_ratio=state.log_partition - free.log_partition,
        rdm1=rdm1, w_gamma2=w2, state=state, free_state=free,
        number_powers=(1, 2, 3, 4))
    for name, chk in checks.items():
        assert chk.passed, f"{name}: {chk.describe()}"
    assert {"partition_ratio", "interaction_energy", "one_particle_dominated",
            "number_moment_4"} <= set(checks)


def test_scaled_number_moment_matches_sector_sum():
    basis = build_basis(2, 10)
    state = free_gibbs_state(basis, S2, 1.0)
    w = state.sector_weights()
    direct = sum(w[n] * (0.5 * n) ** 3 for n in range(len(w)))
    assert scaled_number_moment(state, 3, 0.5) == pytest.approx(direct,
                                                                rel=1e-12)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_state_and_rdm_json_round_trip_fields():
    basis = build_basis(2, 6)
    state = gibbs_state(basis, hamiltonian(basis, S2, delta_kernel(2), 0.2), 1.0)
    doc = state.to_json_dict()
    assert doc["basis"] == {"J": 2, "N_max": 6}
    assert len(doc["blocks"]) == 7
    assert doc["log_partition"] == pytest.approx(state.log_partition)

    rdm = reduced_density_matrix(state, 1)
    rdoc = rdm.to_json_dict()
    assert rdoc["k"] == 1 and rdoc["J"] == 2
    np.testing.assert_allclose(np.asarray(rdoc["matrix_re"]), rdm.matrix.real)


def test_gibbs_state_input_guards():
    basis = build_basis(2, 4)
    H = hamiltonian(basis, S2, None, 0.0)
    with pytest.raises(ValueError):
        gibbs_state(basis, H, 0.0)
    with pytest.raises(ValueError):
        gibbs_state(basis, H, -2.0)
