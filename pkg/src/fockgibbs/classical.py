"""The Gaussian free field, its quartic reweighting, and classical moments.

The free measure mu0 puts independent circular complex Gaussians with
variance 1/lambda_j on the mode coefficients.  The interacting measure
reweights mu0 by exp(-coupling * F_NL) and normalizes by the relative
partition function z_r; every integral against it is estimated here by
self-normalized importance sampling from mu0, which is safe because the
weights live in (0, 1] for a positive-semidefinite kernel.

The quartic energy carries the one-half convention

    F_NL(u) = (1/2) <u (x) u, w  u (x) u>,

with ``half=False`` available to drop the 1/2 where an alternative
normalization needs to be reproduced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gibbs import ReducedDensityMatrix, rdm_labels
from .mc import (MCEstimate, MomentEstimate, RatioAccumulator,
                 StreamingMoments, complex_gaussian, substream)
from .operators import TwoBodyKernel, kernel_symmetric_matrix, pair_basis
from .spectra import OneBodySpectrum

__all__ = [
    "sample_mu0",
    "f_nl",
    "f_nl_batch",
    "relative_partition_mc",
    "classical_free_dm",
    "gamma_k_mc",
    "classical_expectation_mc",
    "classical_tilted_moment_mc",
    "gaussian_moment_mc",
    "VariationalBreakdown",
    "classical_variational_identity",
    "GaussianCompetitor",
    "competitor_objective",
    "default_competitors",
]

_CHUNK = 4096


def sample_mu0(s: OneBodySpectrum, n_samples: int,
               rng: np.random.Generator) -> np.ndarray:
    """Draw fields from the free Gaussian measure, one row per sample.

    Mode j is a circular complex Gaussian with E|alpha_j|^2 = 1/lambda_j.
    """
    return complex_gaussian(rng, 1.0 / s.as_array(), n_samples)


def _pair_coordinates(kernel: TwoBodyKernel, A: np.ndarray) -> np.ndarray:
    """Coordinates of alpha (x) alpha on the orthonormal symmetric pairs."""
    pairs = pair_basis(kernel.J)
    P = np.empty((A.shape[0], len(pairs)), dtype=complex)
    for i, (a, b) in enumerate(pairs):
        if a == b:
            P[:, i] = A[:, a] * A[:, b]
        else:
            P[:, i] = math.sqrt(2.0) * A[:, a] * A[:, b]
    return P


def f_nl_batch(kernel: TwoBodyKernel, A: np.ndarray, half: bool = True,
               _S: np.ndarray | None = None) -> np.ndarray:
    """Quartic interaction energy of each field row in A (shape (B, J))."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[1] != kernel.J:
        raise ValueError("fields must have shape (B, J) matching the kernel")
    S = kernel_symmetric_matrix(kernel) if _S is None else _S
    P = _pair_coordinates(kernel, A)
    vals = np.einsum("bi,ij,bj->b", P.conj(), S, P).real
    return 0.5 * vals if half else vals


def f_nl(kernel: TwoBodyKernel, alpha, half: bool = True) -> float:
    """Quartic interaction energy of a single field; >= 0 for a PSD kernel."""
    return float(f_nl_batch(kernel, np.asarray(alpha, dtype=complex)[None, :],
                            half=half)[0])


def _weight_stream(s, kernel, n_samples, seed, coupling, half):
    """Yield (fields, exp(-coupling*F_NL)) chunks in a fixed order."""
    rng = substream(seed, 0)
    S = kernel_symmetric_matrix(kernel) if kernel is not None else None
    remaining = n_samples
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        A = sample_mu0(s, b, rng)
        if kernel is None or coupling == 0.0:
            w = np.ones(b)
        else:
            w = np.exp(-coupling * f_nl_batch(kernel, A, half=half, _S=S))
        yield A, w


def relative_partition_mc(s: OneBodySpectrum, kernel: TwoBodyKernel,
                          n_samples: int, seed: int, coupling: float = 1.0,
                          half: bool = True) -> MCEstimate:
    """z_r = E_mu0[exp(-coupling * F_NL)], a plain Monte Carlo mean in (0, 1]."""
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    acc = StreamingMoments()
    for _, w in _weight_stream(s, kernel, n_samples, seed, coupling, half):
        acc.update(w)
    return MCEstimate(value=float(acc.mean), stderr=float(acc.stderr()),
                      n_samples=n_samples, seed=seed)


def classical_free_dm(s: OneBodySpectrum, k: int) -> ReducedDensityMatrix:
    """k-th density matrix of mu0: diagonal k! * prod_j lambda_j^(-kappa_j).

    This is k! (h^{-1})^{(x)k} compressed to the orthonormal symmetric basis.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    lam = s.as_array()
    labels = rdm_labels(s.mode_count, k)
    diag = np.array([math.factorial(k) * np.prod(lam ** -np.asarray(lab))
                     for lab in labels])
    return ReducedDensityMatrix(k=k, J=s.mode_count, labels=labels,
                                matrix=np.diag(diag.astype(complex)),
                                route="classical_closed_form")


def _tensor_coords(A: np.ndarray, labels, k: int) -> np.ndarray:
    """c_kappa(alpha) = sqrt(k!/kappa!) prod_j alpha_j^kappa_j per row."""
    m = len(labels)
    C = np.empty((A.shape[0], m), dtype=complex)
    sqrt_kfact = math.sqrt(math.factorial(k))
    for i, lab in enumerate(labels):
        norm = sqrt_kfact / math.exp(
            0.5 * sum(math.lgamma(o + 1.0) for o in lab))
        C[:, i] = norm * np.prod(A ** np.asarray(lab), axis=1)
    return C


def gamma_k_mc(s: OneBodySpectrum, kernel: TwoBodyKernel | None, k: int,
               n_samples: int, seed: int, coupling: float = 1.0,
               half: bool = True, ess_floor: float = 0.1) -> MomentEstimate:
    """Self-normalized estimate of the interacting k-th density matrix.

    gamma^(k)[kappa, kappa'] = E_mu[c_kappa conj(c_kappa')] with weights
    exp(-coupling*F_NL); entries come with delta-method standard errors and
    the estimate is flagged when the effective sample size sinks below
    ``ess_floor * n_samples``.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    labels = rdm_labels(s.mode_count, k)
    m = len(labels)
    n = 0
    sw = 0.0
    sww = 0.0
    sz = np.zeros((m, m), dtype=complex)
    szz = np.zeros((m, m))
    szw = np.zeros((m, m), dtype=complex)
    for A, w in _weight_stream(s, kernel, n_samples, seed, coupling, half):
        C = _tensor_coords(A, labels, k)
        Z = w[:, None, None] * (C[:, :, None] * C.conj()[:, None, :])
        n += A.shape[0]
        sw += float(w.sum())
        sww += float(np.sum(w ** 2))
        sz += Z.sum(axis=0)
        szz += np.sum(np.abs(Z) ** 2, axis=0)
        szw += np.einsum("bij,b->ij", Z, w)
    mean_w = sw / n
    mean_z = sz / n
    ratio = mean_z / mean_w
    bessel = n / max(n - 1, 1)
    var_z = np.maximum(0.0, szz / n - np.abs(mean_z) ** 2) * bessel
    var_w = max(0.0, sww / n - mean_w ** 2) * bessel
    cov_zw = (szw / n - mean_z * mean_w) * bessel
    var_ratio = (var_z - 2.0 * (np.conj(ratio) * cov_zw).real
                 + np.abs(ratio) ** 2 * var_w) / mean_w ** 2
    stderr = np.sqrt(np.maximum(0.0, var_ratio) / n)
    ess = sw ** 2 / sww if sww > 0 else 0.0
    flags = ("low_ess",) if ess < ess_floor * n_samples else ()
    return MomentEstimate(labels=labels, matrix=ratio, stderr=stderr,
                          n_samples=n_samples, seed=seed, ess=ess, flags=flags)


def classical_expectation_mc(s: OneBodySpectrum, kernel: TwoBodyKernel | None,
                             func, n_samples: int, seed: int,
                             coupling: float = 1.0, half: bool = True,
                             ess_floor: float = 0.1) -> MCEstimate:
    """E_mu[func] for a vectorized observable func((B, J) fields) -> (B,)."""
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    acc = RatioAccumulator()
    for A, w in _weight_stream(s, kernel, n_samples, seed, coupling, half):
        vals = np.asarray(func(A), dtype=float)
        if vals.shape != (A.shape[0],):
            raise ValueError("observable must map (B, J) fields to (B,) values")
        acc.update(w * vals, w)
    flags = ("low_ess",) if acc.ess < ess_floor * n_samples else ()
    return MCEstimate(value=float(acc.ratio.real), stderr=acc.stderr(),
                      n_samples=n_samples, seed=seed, flags=flags)


def classical_tilted_moment_mc(s: OneBodySpectrum, occ_pattern, k: int,
                               n_samples: int, seed: int) -> MCEstimate:
    """E_mu0[prod_j |alpha_j|^(2 n_j) * |alpha|^(2k)], plain Monte Carlo.

    The classical twin of the free tilted moment; its exact value is
    :func:`fockgibbs.gibbs.tilted_moment_limit`.
    """
    occ = np.asarray(occ_pattern, dtype=int)
    if occ.shape != (s.mode_count,) or np.any(occ < 0) or k < 0:
        raise ValueError("occupation pattern/k must be nonnegative and match J")
    rng = substream(seed, 0)
    acc = StreamingMoments()
    remaining = n_samples
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        A = sample_mu0(s, b, rng)
        sq = np.abs(A) ** 2
        vals = np.prod(sq ** occ, axis=1) * np.sum(sq, axis=1) ** k
        acc.update(vals)
    return MCEstimate(value=float(acc.mean), stderr=float(acc.stderr()),
                      n_samples=n_samples, seed=seed)


def gaussian_moment_mc(s: OneBodySpectrum, power: int, n_samples: int,
                       seed: int):
    """Per-mode estimates of E|alpha_j|^(2*power); exact value power!/lambda^power.

    Returns (means, stderrs), each of shape (J,).
    """
    if power < 0:
        raise ValueError("power must be nonnegative")
    rng = substream(seed, 0)
    acc = StreamingMoments(shape=(s.mode_count,))
    remaining = n_samples
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        A = sample_mu0(s, b, rng)
        acc.update(np.abs(A) ** (2 * power))
    return np.asarray(acc.mean), acc.stderr()


# ---------------------------------------------------------------------------
# The Gibbs variational identity on the classical side
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariationalBreakdown:
    """The three terms of H(mu, mu0) + int F_NL dmu + log z_r = 0.

    Each term is estimated from its own sample stream, so the residual is
    genuine Monte Carlo noise with the quoted standard error.
    """

    relative_entropy: float
    entropy_stderr: float
    interaction_mean: float
    interaction_stderr: float
    neg_log_zr: float
    zr_stderr: float
    residual: float
    residual_sigma: float
    n_samples: int
    seed: int

    def within_noise(self, n_sigma: float = 3.0) -> bool:
        return abs(self.residual) <= n_sigma * self.residual_sigma


def _entropy_term(s, kernel, n_samples, seed, coupling, half):
    """H(mu, mu0) = -E_mu[F] - log z_r from one stream, with joint stderr."""
    n = 0
    s_w = s_wf = s_ww = s_wfwf = s_wfw = 0.0
    for _, w in _weight_stream(s, kernel, n_samples, seed, coupling, half):
        logw = np.log(w)
        wf = -w * logw  # w * coupling*F_NL
        n += w.size
        s_w += float(w.sum())
        s_wf += float(wf.sum())
        s_ww += float(np.sum(w * w))
        s_wfwf += float(np.sum(wf * wf))
        s_wfw += float(np.sum(wf * w))
    m_w = s_w / n
    m_wf = s_wf / n
    value = -m_wf / m_w - math.log(m_w)
    bessel = n / max(n - 1, 1)
    var_w = max(0.0, s_ww / n - m_w ** 2) * bessel
    var_wf = max(0.0, s_wfwf / n - m_wf ** 2) * bessel
    cov = (s_wfw / n - m_wf * m_w) * bessel
    g_wf = -1.0 / m_w
    g_w = m_wf / m_w ** 2 - 1.0 / m_w
    var_val = (g_wf ** 2 * var_wf + 2.0 * g_wf * g_w * cov + g_w ** 2 * var_w)
    return value, math.sqrt(max(0.0, var_val) / n)


def classical_variational_identity(s: OneBodySpectrum, kernel: TwoBodyKernel,
                                   n_samples: int, seed: int,
                                   coupling: float = 1.0,
                                   half: bool = True) -> VariationalBreakdown:
    """Estimate H(mu, mu0), int F_NL dmu and -log z_r on disjoint substreams.

    The interacting measure minimizes H(., mu0) + int F_NL d(.), with minimum
    -log z_r; for mu itself the three terms cancel exactly, so the returned
    residual must vanish within its propagated standard error.  For
    ``coupling`` other than one the interaction term is the coupling-scaled
    mean, keeping the identity exact.
    """
    h_val, h_err = _entropy_term(s, kernel, n_samples, seed, coupling, half)

    f_acc = RatioAccumulator()
    for _, w in _weight_stream(s, kernel, n_samples, seed + 1, coupling, half):
        f_acc.update(-w * np.log(w), w)
    f_val, f_err = float(f_acc.ratio.real), f_acc.stderr()

    z_acc = StreamingMoments()
    for _, w in _weight_stream(s, kernel, n_samples, seed + 2, coupling, half):
        z_acc.update(w)
    zr = float(z_acc.mean)
    neg_log_zr = -math.log(zr)
    zr_err = float(z_acc.stderr()) / zr

    residual = h_val + f_val - neg_log_zr
    sigma = math.sqrt(h_err ** 2 + f_err ** 2 + zr_err ** 2)
    return VariationalBreakdown(
        relative_entropy=h_val, entropy_stderr=h_err,
        interaction_mean=f_val, interaction_stderr=f_err,
        neg_log_zr=neg_log_zr, zr_stderr=zr_err,
        residual=residual, residual_sigma=sigma,
        n_samples=n_samples, seed=seed)


# ---------------------------------------------------------------------------
# Closed-form competitor measures for the minimality check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianCompetitor:
    """Product complex Gaussian nu with per-mode variances and mean shifts."""

    variances: tuple
    shifts: tuple

    def kl_to_mu0(self, s: OneBodySpectrum) -> float:
        """Closed-form H(nu, mu0) = sum_j lam*v - 1 - log(lam*v) + lam*|c|^2."""
        lam = s.as_array()
        v = np.asarray(self.variances, dtype=float)
        c = np.asarray(self.shifts, dtype=complex)
        if v.shape != lam.shape or c.shape != lam.shape:
            raise ValueError("competitor shape must match the mode count")
        if np.any(v <= 0):
            raise ValueError("competitor variances must be positive")
        t = lam * v
        return float(np.sum(t - 1.0 - np.log(t) + lam * np.abs(c) ** 2))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        base = complex_gaussian(rng, np.asarray(self.variances, dtype=float), n)
        return base + np.asarray(self.shifts, dtype=complex)


def competitor_objective(s: OneBodySpectrum, kernel: TwoBodyKernel,
                         comp: GaussianCompetitor, n_samples: int, seed: int,
                         coupling: float = 1.0, half: bool = True) -> MCEstimate:
    """H(nu, mu0) + E_nu[coupling * F_NL]; always >= -log z_r.

    The entropy term is closed-form; only the interaction mean is sampled.
    """
    kl = comp.kl_to_mu0(s)
    rng = substream(seed, 0)
    S = kernel_symmetric_matrix(kernel)
    acc = StreamingMoments()
    remaining = n_samples
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        A = comp.sample(b, rng)
        acc.update(coupling * f_nl_batch(kernel, A, half=half, _S=S))
    return MCEstimate(value=kl + float(acc.mean), stderr=float(acc.stderr()),
                      n_samples=n_samples, seed=seed)


def default_competitors(s: OneBodySpectrum) -> list:
    """A spread of closed-form measures distinct from the interacting one."""
    lam = s.as_array()
    J = lam.size
    zero = tuple(0.0 + 0.0j for _ in range(J))
    comps = [
        GaussianCompetitor(variances=tuple(1.0 / lam), shifts=zero),
        GaussianCompetitor(variances=tuple(0.5 / lam), shifts=zero),
        GaussianCompetitor(variances=tuple(2.0 / lam), shifts=zero),
        GaussianCompetitor(variances=tuple(1.0 / (lam + 1.0)), shifts=zero),
        GaussianCompetitor(variances=tuple(1.0 / lam),
                           shifts=tuple([0.5 + 0.0j] + [0.0 + 0.0j] * (J - 1))),
        GaussianCompetitor(variances=tuple(np.full(J, 1.0 / np.max(lam))),
                           shifts=zero),
    ]
    return comps
