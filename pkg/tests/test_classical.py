"""The Gaussian free field, quartic reweighting, and the classical
variational identity."""

import math

import numpy as np
import pytest

import fockgibbs as fg

SPECTRUM = fg.dirichlet_spectrum(2)  # eigenvalues (1, 4)


def manual_quartic_energy(kern, alpha):
    a = np.asarray(alpha, dtype=complex)
    return 0.5 * float(np.einsum("a,b,abcd,c,d->", a.conj(), a.conj(),
                                 kern.coeffs, a, a).real)


def test_sample_mu0_covariance():
    rng = fg.substream(41, 0)
    A = fg.sample_mu0(SPECTRUM, 200_000, rng)
    lam = SPECTRUM.as_array()
    sq = np.abs(A) ** 2
    mean = sq.mean(axis=0)
    err = sq.std(axis=0, ddof=1) / math.sqrt(A.shape[0])
    assert np.all(np.abs(mean - 1.0 / lam) <= 3.0 * err)
    # circularity and mode independence
    assert abs(np.mean(A[:, 0] ** 2)) <= 3.0 / math.sqrt(A.shape[0])
    cross = np.mean(A[:, 0].conj() * A[:, 1])
    assert abs(cross) <= 3.0 / math.sqrt(A.shape[0])


def test_quartic_energy_nonnegative_and_convention():
    kern = fg.delta_kernel(2)
    rng = fg.substream(5, 0)
    A = fg.sample_mu0(SPECTRUM, 64, rng)
    vals = fg.f_nl_batch(kern, A)
    assert np.all(vals >= 0.0)
    assert np.allclose(fg.f_nl_batch(kern, A, half=False), 2.0 * vals,
                       rtol=1e-12)
    for row in A[:5]:
        assert fg.f_nl(kern, row) == pytest.approx(
            manual_quartic_energy(kern, row), rel=1e-10)


def test_relative_partition_basic_properties():
    kern = fg.delta_kernel(2)
    est_a = fg.relative_partition_mc(SPECTRUM, kern, 150_000, seed=101)
    est_b = fg.relative_partition_mc(SPECTRUM, kern, 150_000, seed=202)
    for est in (est_a, est_b):
        assert 0.0 < est.value <= 1.0
        assert est.stderr > 0.0
    joint = math.hypot(est_a.stderr, est_b.stderr)
    assert abs(est_a.value - est_b.value) <= 3.0 * joint


def test_relative_partition_trivial_without_kernel():
    est = fg.relative_partition_mc(SPECTRUM, None, 10_000, seed=3)
    assert est.value == 1.0
    assert est.stderr == 0.0


def test_relative_partition_reproducible():
    kern = fg.delta_kernel(2)
    a = fg.relative_partition_mc(SPECTRUM, kern, 50_000, seed=7)
    b = fg.relative_partition_mc(SPECTRUM, kern, 50_000, seed=7)
    assert a.value == b.value and a.stderr == b.stderr


@pytest.mark.parametrize("k", [1, 2])
def test_free_dm_closed_form_vs_sampling(k):
    est = fg.gamma_k_mc(SPECTRUM, None, k, 200_000, seed=23)
    target = fg.classical_free_dm(SPECTRUM, k)
    assert est.max_sigma_gap(target.matrix) <= 3.0
    # closed form itself: diagonal k! prod lambda^-kappa
    diag = np.diag(target.matrix).real
    for lab, d in zip(target.labels, diag):
        want = math.factorial(k) * np.prod(SPECTRUM.as_array() ** -np.asarray(lab))
        assert d == pytest.approx(want, rel=1e-14)
    assert target.route == "classical_closed_form"


def test_interacting_dm_shrinks_under_repulsion():
    kern = fg.delta_kernel(2)
    est = fg.gamma_k_mc(SPECTRUM, kern, 1, 150_000, seed=31)
    free = np.diag(fg.classical_free_dm(SPECTRUM, 1).matrix).real
    got = np.diag(est.matrix).real
    err = np.diagonal(est.stderr)
    assert np.all(got + 3.0 * err < free)
    assert "low_ess" not in est.flags


def test_gamma_k_mc_flags_low_ess():
    kern = fg.delta_kernel(1)
    spec1 = fg.dirichlet_spectrum(1)
    est = fg.gamma_k_mc(spec1, kern, 1, 20_000, seed=2, coupling=50_000.0)
    assert "low_ess" in est.flags


def test_classical_expectation_validates_shape():
    with pytest.raises(ValueError):
        fg.classical_expectation_mc(SPECTRUM, None, lambda A: np.ones(3), 5000,
                                    seed=1)


def test_classical_expectation_free_number():
    # E_mu0 |alpha_0|^2 = 1/lambda_0
    est = fg.classical_expectation_mc(
        SPECTRUM, None, lambda A: np.abs(A[:, 0]) ** 2, 150_000, seed=13)
    assert abs(est.value - 1.0) <= 3.0 * est.stderr


def test_variational_identity_residual_within_noise():
    kern = fg.delta_kernel(2)
    bd = fg.classical_variational_identity(SPECTRUM, kern, 150_000, seed=11)
    assert bd.within_noise(3.0)
    assert bd.residual_sigma > 0.0
    assert bd.relative_entropy >= -3.0 * bd.entropy_stderr
    assert bd.interaction_mean > 0.0
    assert bd.neg_log_zr > 0.0


def test_variational_identity_scaled_coupling():
    kern = fg.delta_kernel(2)
    bd = fg.classical_variational_identity(SPECTRUM, kern, 100_000, seed=19,
                                           coupling=0.25)
    assert bd.within_noise(3.0)


def test_competitors_never_beat_the_minimum():
    kern = fg.delta_kernel(2)
    zr = fg.relative_partition_mc(SPECTRUM, kern, 300_000, seed=37)
    floor = -math.log(zr.value)
    floor_err = zr.stderr / zr.value
    comps = fg.default_competitors(SPECTRUM)
    assert len(comps) >= 5
    for i, comp in enumerate(comps):
        obj = fg.competitor_objective(SPECTRUM, kern, comp, 60_000, seed=43 + i)
        joint = math.hypot(obj.stderr, floor_err)
        assert obj.value - floor >= -3.0 * joint, f"competitor {i}"


def test_competitor_closed_form_entropy():
    comp = fg.GaussianCompetitor(variances=(1.0, 0.25), shifts=(0j, 0j))
    # matches mu0 exactly for eigenvalues (1, 4)
    assert comp.kl_to_mu0(SPECTRUM) == pytest.approx(0.0, abs=1e-14)
    shifted = fg.GaussianCompetitor(variances=(1.0, 0.25),
                                    shifts=(0.5 + 0j, 0j))
    assert shifted.kl_to_mu0(SPECTRUM) == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(ValueError):
        fg.GaussianCompetitor(variances=(1.0, -1.0),
                              shifts=(0j, 0j)).kl_to_mu0(SPECTRUM)
    with pytest.raises(ValueError):
        fg.GaussianCompetitor(variances=(1.0,), shifts=(0j,)).kl_to_mu0(SPECTRUM)


def test_tilted_moment_classical_vs_limit():
    limit = fg.tilted_moment_limit(SPECTRUM, (1, 0), 1)
    assert limit == pytest.approx(2.25, rel=1e-12)
    est = fg.classical_tilted_moment_mc(SPECTRUM, (1, 0), 1, 300_000, seed=29)
    assert abs(est.value - limit) <= 3.0 * est.stderr
    # pure second moment of the heavy mode
    est2 = fg.classical_tilted_moment_mc(SPECTRUM, (0, 1), 0, 100_000, seed=53)
    assert abs(est2.value - 0.25) <= 3.0 * est2.stderr


def test_tilted_moment_validates_pattern():
    with pytest.raises(ValueError):
        fg.classical_tilted_moment_mc(SPECTRUM, (1,), 1, 100, seed=0)
    with pytest.raises(ValueError):
        fg.classical_tilted_moment_mc(SPECTRUM, (1, -1), 1, 100, seed=0)


@pytest.mark.parametrize("power", [1, 2, 3, 4])
def test_gaussian_moments_match_factorial_law(power):
    means, errs = fg.gaussian_moment_mc(SPECTRUM, power, 300_000, seed=61)
    want = math.factorial(power) / SPECTRUM.as_array() ** power
    assert np.all(np.abs(means - want) <= 3.0 * errs)
