"""Coherent-state structure: eigenrelation, Weyl shifts, Husimi moments,
anti-Wick operators, and the Berezin-Lieb entropy comparison."""

import math

import numpy as np
import pytest

import fockgibbs as fg
from fockgibbs.coherent import (
    classical_relative_entropy_mc,
    classical_relative_entropy_radial,
    husimi_density,
    husimi_density_batch,
    husimi_identity_matrix,
    sym_identity_extension,
    symmetric_embedding,
    tensor_power_matrix,
)


def interacting_state(J=2, n_max=10, t=1.0, lam=0.4):
    basis = fg.build_basis(J, n_max)
    s = fg.dirichlet_spectrum(J)
    kern = fg.delta_kernel(J)
    ham = fg.hamiltonian(basis, s, kern, lam)
    return fg.gibbs_state(basis, ham, t)


def free_state(J=2, n_max=14, t=1.0):
    basis = fg.build_basis(J, n_max)
    return fg.free_gibbs_state(basis, fg.dirichlet_spectrum(J), t)


# ---------------------------------------------------------------------------
# Coherent vectors and the eigenrelation
# ---------------------------------------------------------------------------


def test_coherent_vector_poisson_sector_weights():
    basis = fg.build_basis(2, 20)
    u = np.array([0.6, 0.3j])
    vec = fg.coherent_vector(basis, u)
    x = float(np.vdot(u, u).real)
    for n in range(basis.N_max + 1):
        expected = math.exp(-x) * x ** n / math.factorial(n)
        assert vec.sector_weight(n) == pytest.approx(expected, abs=1e-14)
    # retained norm + recorded tail = 1
    total = float(np.vdot(vec.flat(), vec.flat()).real)
    assert total + vec.tail_norm == pytest.approx(1.0, abs=1e-12)
    assert vec.tail_norm < 1e-12


def test_coherent_vector_rejects_large_amplitude():
    basis = fg.build_basis(1, 6)
    with pytest.raises(ValueError):
        fg.coherent_vector(basis, [2.5])


def test_coherent_state_is_normalized_and_positive():
    basis = fg.build_basis(2, 16)
    state = fg.coherent_state(basis, [0.5, -0.2 + 0.4j])
    assert state.trace() == pytest.approx(1.0, abs=1e-12)
    for n in range(basis.N_max + 1):
        blk = state.block_dense(n)
        ev = np.linalg.eigvalsh(blk)
        assert ev.min() >= -1e-13


@pytest.mark.parametrize("J, n_max, u", [
    (1, 18, [0.8]),
    (2, 16, [0.5, -0.3 + 0.2j]),
    (3, 12, [0.3, 0.2j, -0.25]),
])
def test_annihilator_eigenrelation(J, n_max, u):
    basis = fg.build_basis(J, n_max)
    assert fg.eigenrelation_deviation(basis, u) <= 1e-10


def test_eigenrelation_with_explicit_direction():
    basis = fg.build_basis(2, 16)
    dev = fg.eigenrelation_deviation(basis, [0.4, 0.3], g=[1.0, -2.0j])
    assert dev <= 1e-10


# ---------------------------------------------------------------------------
# Reduced density matrices of coherent states
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_coherent_rdm_is_scaled_tensor_power(k):
    basis = fg.build_basis(2, 24)
    u = np.array([0.7, -0.4 + 0.2j])
    state = fg.coherent_state(basis, u, tail_tol=1e-10)
    got = fg.reduced_density_matrix(state, k).matrix
    want = tensor_power_matrix(2, k, u) / math.factorial(k)
    assert np.max(np.abs(got - want)) <= 1e-9


def test_tensor_power_trace():
    u = np.array([0.6, 0.2 - 0.5j])
    x = float(np.vdot(u, u).real)
    for k in (1, 2, 3):
        mat = tensor_power_matrix(2, k, u)
        assert np.trace(mat).real == pytest.approx(x ** k, rel=1e-12)


# ---------------------------------------------------------------------------
# Weyl displacement
# ---------------------------------------------------------------------------


def test_weyl_action_shifts_ladders():
    basis = fg.build_basis(1, 24)
    assert fg.weyl_action_check(basis, [0.5], [0.3 + 0.2j]) <= 1e-8


def test_weyl_action_two_modes():
    basis = fg.build_basis(2, 14)
    assert fg.weyl_action_check(basis, [0.3, -0.2j], [0.1, 0.4]) <= 1e-8


def test_weyl_action_guards_large_displacement():
    basis = fg.build_basis(1, 8)
    with pytest.raises(ValueError):
        fg.weyl_action_check(basis, [5.0], [0.1])


# ---------------------------------------------------------------------------
# Symmetric embeddings and the moment identity
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("J, k", [(2, 2), (2, 3), (3, 2)])
def test_symmetric_embedding_is_isometry(J, k):
    E = symmetric_embedding(J, k)
    assert np.max(np.abs(E.T @ E - np.eye(E.shape[1]))) <= 1e-13


def test_sym_identity_extension_edge_cases():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    A = A + A.conj().T
    # ell = 0 embeds the identity; ell = k returns A itself
    assert np.max(np.abs(sym_identity_extension(A, 2, 2, 0) - np.eye(3))) <= 1e-13
    got = sym_identity_extension(A, 2, 1, 1)
    assert np.max(np.abs(got - A)) <= 1e-13
    with pytest.raises(ValueError):
        sym_identity_extension(A, 2, 1, 2)


def test_husimi_identity_first_moment_closed_form():
    state = interacting_state()
    eps = 0.7
    rhs = fg.husimi_identity_rhs(state, eps, 1)
    g1 = fg.reduced_density_matrix(state, 1).matrix
    want = eps * (g1 + np.eye(2))
    assert np.max(np.abs(rhs.matrix - want)) <= 1e-12
    assert rhs.route == "husimi_identity"


def test_husimi_identity_matrix_prefactor():
    # k = 2 on one mode: value is 2 eps^2 (g2 + 2 g1 (x)_s 1 + 1)
    g1 = np.array([[0.4]])
    g2 = np.array([[0.1]])
    got = husimi_identity_matrix({1: g1, 2: g2}, J=1, eps=0.5, k=2)
    want = 2.0 * 0.25 * (0.1 + 2 * 0.4 + 1.0)
    assert got[0, 0] == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("k", [1, 2])
def test_husimi_moment_mc_matches_identity(k):
    state = free_state(J=2, n_max=14, t=1.0)
    eps = 0.5
    est = fg.husimi_moment_mc(state, eps, k, n_samples=40_000, seed=11)
    exact = fg.husimi_identity_rhs(state, eps, k).matrix
    assert est.max_sigma_gap(exact) <= 3.0
    assert "low_ess" not in est.flags


@pytest.mark.parametrize("k", [1, 2])
def test_husimi_moment_dominates_rdm(k):
    for state, eps in [(interacting_state(), 0.6), (free_state(), 1.0)]:
        assert fg.husimi_psd_gap(state, eps, k) >= -1e-8


# ---------------------------------------------------------------------------
# Husimi densities
# ---------------------------------------------------------------------------


def test_husimi_density_point_matches_batch():
    state = free_state(J=2, n_max=12, t=0.8)
    u = np.array([0.3 - 0.1j, 0.25j])
    single = husimi_density(state, 0.9, u)
    batch = husimi_density_batch(state, 0.9, u.reshape(1, -1))
    assert single == pytest.approx(float(batch[0]), rel=1e-12)
    assert single > 0.0


def test_husimi_density_vacuum_closed_form():
    basis = fg.build_basis(1, 25)
    blocks = [np.array([1.0])] + [None] * basis.N_max
    vac = fg.QuantumState(basis, blocks)
    eps = 0.7
    for r in (0.0, 0.4, 1.1):
        want = math.exp(-r * r / eps) / (eps * math.pi)
        assert husimi_density(vac, eps, [r]) == pytest.approx(want, rel=1e-12)


def test_husimi_normalization_mc():
    state = interacting_state(J=2, n_max=12, t=1.2, lam=0.3)
    est = fg.husimi_normalization_mc(state, 0.8, n_samples=30_000, seed=7)
    assert abs(est.value - 1.0) <= 3.0 * est.stderr
    assert est.stderr < 0.02


# ---------------------------------------------------------------------------
# Anti-Wick operators: dual exact routes and MC
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("J", [1, 2, 3])
def test_anti_wick_gaussian_vacuum_value(J):
    basis = fg.build_basis(J, 4)
    blocks = [np.ones(1) if n == 0 else None for n in range(5)]
    vac = fg.QuantumState(basis, blocks)
    assert fg.anti_wick_gaussian_exact(vac, 1.0, 1.0) == pytest.approx(
        0.5 ** J, rel=1e-14)


def test_anti_wick_gaussian_vs_radial_quadrature():
    # single mode: the radial quadrature must reproduce the sector sum
    state = free_state(J=1, n_max=30, t=1.3)
    eps, c = 0.8, 0.6
    exact = fg.anti_wick_gaussian_exact(state, eps, c)
    quad = fg.anti_wick_radial_exact(state, eps, lambda x: math.exp(-c * x), 0)
    assert quad == pytest.approx(exact, rel=1e-11)


def test_anti_wick_mc_matches_gaussian_exact():
    state = free_state(J=2, n_max=14, t=1.0)
    eps, c = 0.7, 0.8

    def b(U):
        return np.exp(-c * np.sum(np.abs(U) ** 2, axis=1))

    est = fg.anti_wick_expectation(state, eps, b, 1.0, n_samples=40_000, seed=13)
    exact = fg.anti_wick_gaussian_exact(state, eps, c)
    assert abs(est.value - exact) <= 3.0 * est.stderr


def test_anti_wick_mc_matches_clipped_radial():
    state = free_state(J=2, n_max=14, t=1.0)
    eps, clip = 0.9, 1.5

    def b(U):
        return np.minimum(np.abs(U[:, 0]) ** 2, clip)

    est = fg.anti_wick_expectation(state, eps, b, clip, n_samples=40_000, seed=17)
    exact = fg.anti_wick_radial_exact(state, eps, lambda x: min(x, clip), 0)
    assert abs(est.value - exact) <= 3.0 * est.stderr


def test_anti_wick_sup_bound_enforced():
    state = free_state(J=1, n_max=10, t=1.0)

    def b(U):
        return 2.0 * np.ones(U.shape[0])

    with pytest.raises(ValueError):
        fg.anti_wick_expectation(state, 1.0, b, 1.0, n_samples=1000, seed=1)


# ---------------------------------------------------------------------------
# Berezin-Lieb comparison
# ---------------------------------------------------------------------------


def diagonal_state(basis, seed):
    rng = np.random.default_rng(seed)
    blocks = [rng.random(len(basis.sector(n))) + 0.05
              for n in range(basis.N_max + 1)]
    return fg.QuantumState(basis, blocks)


def test_berezin_lieb_radial_margins():
    basis = fg.build_basis(1, 16)
    spec = fg.dirichlet_spectrum(1)
    states = [fg.free_gibbs_state(basis, spec, t) for t in (0.4, 0.8, 1.5)]
    states += [diagonal_state(basis, s) for s in range(4)]
    checked = 0
    for i, a in enumerate(states):
        for j, b in enumerate(states):
            if i == j:
                continue
            res = fg.berezin_lieb_check(a, b, eps=0.8, method="radial")
            assert res.margin >= -1e-4
            assert res.quantum >= -1e-12
            checked += 1
    assert checked >= 40


def test_berezin_lieb_radial_vs_mc():
    basis = fg.build_basis(1, 16)
    spec = fg.dirichlet_spectrum(1)
    a = fg.free_gibbs_state(basis, spec, 1.0)
    b = fg.free_gibbs_state(basis, spec, 0.5)
    radial = fg.berezin_lieb_check(a, b, eps=0.9, method="radial")
    mc = fg.berezin_lieb_check(a, b, eps=0.9, n_samples=40_000, seed=3,
                               method="mc")
    assert abs(mc.classical - radial.classical) <= 3.0 * mc.stderr
    assert mc.margin >= -3.0 * mc.stderr


def test_berezin_lieb_equal_states_zero_both_sides():
    basis = fg.build_basis(1, 14)
    a = fg.free_gibbs_state(basis, fg.dirichlet_spectrum(1), 0.9)
    res = fg.berezin_lieb_check(a, a, eps=0.7, method="radial")
    assert res.quantum == pytest.approx(0.0, abs=1e-12)
    assert res.classical == pytest.approx(0.0, abs=1e-10)


def test_classical_relative_entropy_support_sentinel():
    deep = fg.build_basis(1, 900)
    vac = fg.QuantumState(deep, [np.ones(1)] + [None] * 900)
    top = fg.QuantumState(deep, [None] * 900 + [np.ones(1)])
    est = classical_relative_entropy_mc(vac, top, eps=0.5, n_samples=2000,
                                        seed=2)
    assert est.value == math.inf
    assert "support_sentinel" in est.flags
    res = fg.berezin_lieb_check(vac, top, eps=0.5, n_samples=2000, seed=2)
    assert res.margin == math.inf
    assert "support_sentinel" in res.flags


def test_radial_divergence_positive_for_distinct_states():
    basis = fg.build_basis(1, 14)
    spec = fg.dirichlet_spectrum(1)
    a = fg.free_gibbs_state(basis, spec, 1.0)
    b = fg.free_gibbs_state(basis, spec, 0.45)
    val = classical_relative_entropy_radial(a, b, eps=0.8)
    assert val > 0.0


# ---------------------------------------------------------------------------
# Resolution of the identity and cylindrical consistency
# ---------------------------------------------------------------------------


def test_resolution_of_identity_mc():
    basis = fg.build_basis(2, 3)
    mat, err = fg.resolution_identity_mc(basis, n_samples=40_000, seed=5)
    gap = np.abs(mat - np.eye(basis.total_dim))
    sigma = np.max(gap / np.maximum(err, 1e-300))
    assert sigma <= 3.0


def test_cylindrical_moments_consistent():
    state = free_state(J=2, n_max=14, t=1.0)
    gaps = fg.cylindrical_moment_gap(state, 0.8, [0], n_samples=20_000, seed=9)
    assert np.all(gaps["first_gap"] <= 3.0 * gaps["first_sigma"] + 1e-12)
    assert np.all(gaps["second_gap"] <= 3.0 * gaps["second_sigma"] + 1e-12)
