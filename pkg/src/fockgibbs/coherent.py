"""Coherent states, Husimi measures, anti-Wick quantization, Berezin-Lieb.

Scale conventions
-----------------
The lower symbol of a number-conserving state at scale eps is

    mu(u) = (eps*pi)^(-d) <xi(u/sqrt(eps)), Gamma xi(u/sqrt(eps))>,

a probability density on C^d (d = mode count of the state's basis) whose
total mass is exactly one on the truncated space.  All Monte Carlo routines
here sample a circular complex Gaussian proposal with per-mode variance
max(eps*(Gamma^(1)_jj + 1), eps) — the k = 1 moment identity makes the
importance weights O(1) for Gibbs-like states.

Chunked evaluation: samples are processed in fixed-size batches and merged
in order, so every estimate is reproducible bit-for-bit from (seed, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special

from .basis import FockBasis
from .gibbs import (QuantumState, ReducedDensityMatrix, localize,
                    occupation_marginal, rdm_labels, reduced_density_matrix,
                    relative_entropy)
from .mc import (MCEstimate, MomentEstimate, StreamingMoments,
                 complex_gaussian, substream)
from .operators import mode_annihilator, mode_creator
from .spectra import OneBodySpectrum

__all__ = [
    "CoherentVector",
    "coherent_vector",
    "coherent_state",
    "eigenrelation_deviation",
    "tensor_power_matrix",
    "weyl_action_check",
    "symmetric_embedding",
    "sym_identity_extension",
    "husimi_identity_matrix",
    "husimi_identity_rhs",
    "husimi_psd_gap",
    "husimi_density",
    "husimi_density_batch",
    "husimi_proposal_variances",
    "free_husimi_variances",
    "husimi_normalization_mc",
    "MomentEstimate",
    "husimi_moment_mc",
    "anti_wick_expectation",
    "anti_wick_gaussian_exact",
    "anti_wick_radial_exact",
    "BerezinLiebResult",
    "berezin_lieb_check",
    "resolution_identity_mc",
    "cylindrical_moment_gap",
]

_CHUNK = 4096


def _poisson_tail(x: float, n: int) -> float:
    """P(Poisson(x) > n), evaluated by the regularized incomplete gamma."""
    if x == 0.0:
        return 0.0
    return float(scipy.special.gammainc(n + 1, x))


def _occ_sqrt_fact(occ) -> float:
    return math.exp(0.5 * sum(math.lgamma(int(o) + 1.0) for o in occ))


def _power_tables(V: np.ndarray, n_top: int):
    """Per-mode tables pw[b, m] = V[b, j]^m / sqrt(m!), m = 0..n_top."""
    B, J = V.shape
    tables = []
    for j in range(J):
        pw = np.empty((B, n_top + 1), dtype=complex)
        pw[:, 0] = 1.0
        col = V[:, j]
        for m in range(1, n_top + 1):
            pw[:, m] = pw[:, m - 1] * col / math.sqrt(m)
        tables.append(pw)
    return tables


def _sector_coeffs(basis: FockBasis, tables, n: int) -> np.ndarray:
    """Batch coherent coefficients on sector n (without the e^{-|v|^2/2})."""
    occs = basis.sector(n)
    out = tables[0][:, occs[:, 0]]
    for j in range(1, basis.J):
        out = out * tables[j][:, occs[:, j]]
    return out


# ---------------------------------------------------------------------------
# Coherent vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoherentVector:
    """Truncated coherent state xi(u) with per-sector coefficient arrays.

    ``sectors[n]`` holds the coefficients on the orthonormal occupation basis
    of sector n; ``tail_norm`` is the Poisson mass lost to truncation.
    """

    u: np.ndarray
    basis: FockBasis = field(repr=False)
    sectors: tuple = field(repr=False)
    tail_norm: float

    def flat(self) -> np.ndarray:
        return np.concatenate(self.sectors)

    def sector_weight(self, n: int) -> float:
        return float(np.sum(np.abs(self.sectors[n]) ** 2))


def coherent_vector(basis: FockBasis, u, tail_tol: float = 1e-8) -> CoherentVector:
    """Coherent state with amplitude u on the truncated basis.

    Sector-n coefficients are e^{-|u|^2/2} u^{kappa} / sqrt(kappa!); the
    sector weights follow the Poisson law with parameter |u|^2.  Raises when
    the cutoff would drop more than ``tail_tol`` of the norm (amplitude too
    large for the cutoff).
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    if u.shape != (basis.J,):
        raise ValueError("amplitude length must equal the mode count")
    x = float(np.vdot(u, u).real)
    tail = _poisson_tail(x, basis.N_max)
    if tail > tail_tol:
        raise ValueError(
            f"amplitude |u|^2 = {x:.3g} keeps Poisson tail {tail:.2e} beyond "
            f"N_max = {basis.N_max} (> {tail_tol:.1e})")
    tables = _power_tables(u.reshape(1, -1), basis.N_max)
    pref = math.exp(-0.5 * x)
    sectors = tuple(pref * _sector_coeffs(basis, tables, n)[0]
                    for n in range(basis.N_max + 1))
    retained = sum(float(np.sum(np.abs(s) ** 2)) for s in sectors)
    return CoherentVector(u=u, basis=basis, sectors=sectors,
                          tail_norm=max(0.0, 1.0 - retained))


def coherent_state(basis: FockBasis, u, tail_tol: float = 1e-8) -> QuantumState:
    """Number-diagonal compression of the pure state |xi(u)><xi(u)|.

    Off-diagonal sector blocks of the projector are dropped; every
    number-conserving observable (including all reduced density matrices)
    has the same value on the compression, which is what this package
    consumes.  The result is renormalized over the retained sectors.
    """
    vec = coherent_vector(basis, u, tail_tol=tail_tol)
    blocks = [np.outer(s, s.conj()) for s in vec.sectors]
    return QuantumState(basis, blocks, normalize=True)


def eigenrelation_deviation(basis: FockBasis, u, g=None) -> float:
    """Max deviation of a(g) xi(u) from <g,u> xi(u) on sectors below the top.

    With g = None every coordinate annihilator is tested.  The top sector is
    excluded because annihilation maps it downward out of nothing above it.
    """
    vec = coherent_vector(basis, u)
    psi = vec.flat()
    cut = basis.sector_offset(basis.N_max)
    vectors = ([np.eye(basis.J, dtype=complex)[j] for j in range(basis.J)]
               if g is None else [np.asarray(g, dtype=complex)])
    worst = 0.0
    for gv in vectors:
        op = mode_annihilator(basis, gv)
        out = np.zeros_like(psi)
        for (m, n), blk in op.blocks.items():
            r0 = basis.sector_offset(m)
            c0 = basis.sector_offset(n)
            out[r0:r0 + blk.shape[0]] += blk @ psi[c0:c0 + blk.shape[1]]
        target = complex(np.vdot(gv, vec.u)) * psi
        worst = max(worst, float(np.max(np.abs((out - target)[:cut]))))
    return worst


def tensor_power_matrix(J: int, k: int, u) -> np.ndarray:
    """|u^{x k}><u^{x k}| on the orthonormal symmetric k-particle basis.

    Entry [kappa, kappa'] = c_kappa conj(c_kappa') with
    c_kappa = sqrt(k!/kappa!) prod_j u_j^{kappa_j}.
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    if u.shape != (J,):
        raise ValueError("amplitude length must equal J")
    labels = rdm_labels(J, k)
    c = np.empty(len(labels), dtype=complex)
    sqrt_kfact = math.sqrt(math.factorial(k))
    for i, lab in enumerate(labels):
        c[i] = sqrt_kfact / _occ_sqrt_fact(lab) * np.prod(u ** np.asarray(lab))
    return np.outer(c, c.conj())


def weyl_action_check(basis: FockBasis, f, g) -> float:
    """Deviation of the Weyl-conjugated ladder operators from their shifts.

    Exponentiates W(f) = exp(adag(f) - a(f)) densely on the truncated space
    and measures both W* adag(g) W - adag(g) - <f,g> and
    W* a(g) W - a(g) - <g,f> on the lower half of the sectors, where the
    cutoff leakage of the exponential is negligible.  Guarded to
    |f| <= sqrt(N_max)/4.
    """
    f = np.asarray(f, dtype=complex).reshape(-1)
    g = np.asarray(g, dtype=complex).reshape(-1)
    if f.shape != (basis.J,) or g.shape != (basis.J,):
        raise ValueError("coefficient vectors must have length J")
    norm_f = math.sqrt(float(np.vdot(f, f).real))
    if norm_f > math.sqrt(basis.N_max) / 4.0:
        raise ValueError("|f| too large for a trustworthy truncated exponential")
    adag_f = mode_creator(basis, f).full_matrix()
    gen = adag_f - adag_f.conj().T
    W = scipy.linalg.expm(gen)
    adag_g = mode_creator(basis, g).full_matrix()
    a_g = adag_g.conj().T
    shift = complex(np.vdot(f, g))
    eye = np.eye(basis.total_dim)
    d1 = W.conj().T @ adag_g @ W - adag_g - shift * eye
    d2 = W.conj().T @ a_g @ W - a_g - np.conj(shift) * eye
    cut = basis.sector_offset(basis.N_max // 2 + 1) if basis.N_max >= 1 \
        else basis.total_dim
    return float(max(np.max(np.abs(d1[:cut, :cut])),
                     np.max(np.abs(d2[:cut, :cut]))))


# ---------------------------------------------------------------------------
# The symmetrized identity extension A -> A (x)_s 1
# ---------------------------------------------------------------------------

def symmetric_embedding(J: int, k: int) -> np.ndarray:
    """Isometry from the symmetric k-particle space into the k-fold product.

    Columns follow the occupation labels; the column for kappa places
    sqrt(kappa!/k!) on every distinct arrangement of its mode multiset.
    """
    labels = rdm_labels(J, k)
    pos = {lab: i for i, lab in enumerate(labels)}
    sqrt_kfact = math.sqrt(math.factorial(k))
    E = np.zeros((J ** k, len(labels)))
    for flat, tup in enumerate(np.ndindex(*([J] * k))):
        counts = [0] * J
        for t in tup:
            counts[t] += 1
        lab = tuple(counts)
        E[flat, pos[lab]] = _occ_sqrt_fact(lab) / sqrt_kfact
    return E


def sym_identity_extension(A: np.ndarray, J: int, k: int, ell: int) -> np.ndarray:
    """Compression of A (x) 1^{(k-ell)} back to the symmetric k-space.

    A lives on the orthonormal symmetric ell-particle basis.  Because the
    embedded vectors are permutation symmetric, letting A act on the first
    ell slots realizes the symmetrized extension exactly (the combinatorial
    normalization of the slot average cancels).
    """
    if not 0 <= ell <= k:
        raise ValueError("need 0 <= ell <= k")
    E_k = symmetric_embedding(J, k)
    if ell == 0:
        return E_k.T @ E_k  # identity on the symmetric space
    E_l = symmetric_embedding(J, ell)
    A_prod = E_l @ A @ E_l.T
    big = np.kron(A_prod, np.eye(J ** (k - ell)))
    return E_k.T @ big @ E_k


def husimi_identity_matrix(rdms: dict, J: int, eps: float, k: int) -> np.ndarray:
    """k! eps^k sum_l C(k,l) Gamma^(l) (x)_s 1 from precomputed matrices.

    ``rdms[l]`` is the l-particle matrix for 1 <= l <= k; the l = 0 term is
    the identity.
    """
    m = len(rdm_labels(J, k))
    acc = np.zeros((m, m), dtype=complex)
    for ell in range(k + 1):
        if ell == 0:
            term = np.eye(m, dtype=complex)
        else:
            term = sym_identity_extension(np.asarray(rdms[ell], dtype=complex),
                                          J, k, ell)
        acc += math.comb(k, ell) * term
    return math.factorial(k) * eps ** k * acc


def husimi_identity_rhs(state: QuantumState, eps: float, k: int) -> ReducedDensityMatrix:
    """Exact value of the k-th Husimi moment via the density-matrix identity."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    rdms = {ell: reduced_density_matrix(state, ell).matrix for ell in range(1, k + 1)}
    mat = husimi_identity_matrix(rdms, state.basis.J, eps, k)
    return ReducedDensityMatrix(k=k, J=state.basis.J,
                                labels=rdm_labels(state.basis.J, k),
                                matrix=mat, route="husimi_identity")


def husimi_psd_gap(state: QuantumState, eps: float, k: int) -> float:
    """Smallest eigenvalue of (k-th Husimi moment) - k! eps^k Gamma^(k).

    Nonnegative in exact arithmetic: the completed moment dominates the bare
    k-particle matrix.
    """
    rhs = husimi_identity_rhs(state, eps, k).matrix
    gk = reduced_density_matrix(state, k).matrix
    diff = rhs - math.factorial(k) * eps ** k * gk
    return float(np.min(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))))


# ---------------------------------------------------------------------------
# Husimi densities and Monte Carlo over them
# ---------------------------------------------------------------------------

def husimi_density_batch(state: QuantumState, eps: float,
                         U: np.ndarray) -> np.ndarray:
    """Husimi density values at the rows of U (shape (B, J)).

    Evaluates (eps*pi)^(-J) e^{-|v|^2} sum_n <v-coeffs, Gamma_n v-coeffs>
    with v = u/sqrt(eps) through per-sector batched products.  Amplitudes
    whose Poisson weight leaks past the cutoff are simply evaluated on the
    retained sectors (the bias is the tail mass, exponentially small under
    any matched proposal).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    basis = state.basis
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[1] != basis.J:
        raise ValueError("U must have shape (B, J)")
    out = np.empty(U.shape[0])
    pref_dim = (eps * math.pi) ** (-basis.J)
    for start in range(0, U.shape[0], _CHUNK):
        V = U[start:start + _CHUNK] / math.sqrt(eps)
        tables = _power_tables(V, basis.N_max)
        acc = np.zeros(V.shape[0])
        for n in range(basis.N_max + 1):
            blk = state.blocks[n]
            if blk is None:
                continue
            C = _sector_coeffs(basis, tables, n)
            if blk.ndim == 1:
                acc += (np.abs(C) ** 2) @ blk
            else:
                rows = C.conj() @ blk
                acc += np.einsum("bi,bi->b", rows, C).real
        gauss = np.exp(-np.sum(np.abs(V) ** 2, axis=1))
        out[start:start + V.shape[0]] = pref_dim * gauss * np.clip(acc, 0.0, None)
    return out


def husimi_density(state: QuantumState, eps: float, u, modes=None) -> float:
    """Husimi density of the state at one point (localizing first if asked).

    Raises when |u/sqrt(eps)| violates the coherent-amplitude guard of the
    state's cutoff.
    """
    if modes is not None and sorted(modes) != list(range(state.basis.J)):
        state = localize(state, modes)
    u = np.asarray(u, dtype=complex).reshape(1, -1)
    x = float(np.sum(np.abs(u) ** 2)) / eps
    tail = _poisson_tail(x, state.basis.N_max)
    if tail > 1e-8:
        raise ValueError(
            f"|u/sqrt(eps)|^2 = {x:.3g} exceeds the coherent guard for "
            f"N_max = {state.basis.N_max}")
    return float(husimi_density_batch(state, eps, u)[0])


def husimi_proposal_variances(state: QuantumState, eps: float,
                              rdm1: ReducedDensityMatrix | None = None) -> np.ndarray:
    """Per-mode proposal variances max(eps*(Gamma^(1)_jj + 1), eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive; zero-variance proposal")
    if rdm1 is None:
        rdm1 = reduced_density_matrix(state, 1)
    occ = np.diag(rdm1.matrix).real
    return np.maximum(eps * (occ + 1.0), eps)


def free_husimi_variances(s: OneBodySpectrum, T: float, eps: float) -> np.ndarray:
    """Closed-form Husimi variances of the free Gibbs state: eps*(nbar+1).

    The free-state Husimi measure is a product of circular Gaussians, which
    makes it an exact oracle for the samplers here.
    """
    nbar = 1.0 / np.expm1(s.as_array() / T)
    return eps * (nbar + 1.0)


def _husimi_is_stream(state, eps, n_samples, seed, proposal_var):
    """Yield (U, weights) chunks for importance sampling of the Husimi law."""
    rng = substream(seed, 0)
    pv = np.asarray(proposal_var, dtype=float)
    log_norm = np.sum(np.log(math.pi * pv))
    remaining = n_samples
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        U = complex_gaussian(rng, pv, b)
        dens = husimi_density_batch(state, eps, U)
        log_q = -np.sum(np.abs(U) ** 2 / pv, axis=1) - log_norm
        w = dens * np.exp(-log_q)
        yield U, w


def husimi_normalization_mc(state: QuantumState, eps: float, n_samples: int,
                            seed: int) -> MCEstimate:
    """MC check that the Husimi density integrates to one."""
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    pv = husimi_proposal_variances(state, eps)
    acc = StreamingMoments()
    for _, w in _husimi_is_stream(state, eps, n_samples, seed, pv):
        acc.update(w)
    return MCEstimate(value=float(acc.mean), stderr=float(acc.stderr()),
                      n_samples=n_samples, seed=seed)


def husimi_moment_mc(state: QuantumState, eps: float, k: int, n_samples: int,
                     seed: int, ess_floor: float = 0.1) -> MomentEstimate:
    """MC estimate of the k-th Husimi moment matrix over the symmetric basis.

    Importance-samples the Husimi measure and averages
    w(u) * c_kappa(u) conj(c_kappa'(u)) with c the tensor-power coordinates;
    the exact answer is :func:`husimi_identity_rhs`.  Flags the estimate when
    the effective sample size drops below ``ess_floor * n_samples``.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    basis = state.basis
    labels = rdm_labels(basis.J, k)
    m = len(labels)
    lab_arr = np.array(labels)
    coeff_norm = np.array([math.sqrt(math.factorial(k)) / _occ_sqrt_fact(lab)
                           for lab in labels])
    pv = husimi_proposal_variances(state, eps)
    acc = StreamingMoments(shape=(m, m), dtype=complex)
    sw = 0.0
    sww = 0.0
    for U, w in _husimi_is_stream(state, eps, n_samples, seed, pv):
        C = np.empty((U.shape[0], m), dtype=complex)
        for i in range(m):
            C[:, i] = coeff_norm[i] * np.prod(U ** lab_arr[i], axis=1)
        Z = w[:, None, None] * (C[:, :, None] * C.conj()[:, None, :])
        acc.update(Z)
        sw += float(w.sum())
        sww += float(np.sum(w ** 2))
    ess = sw ** 2 / sww if sww > 0 else 0.0
    flags = ("low_ess",) if ess < ess_floor * n_samples else ()
    return MomentEstimate(labels=labels, matrix=acc.mean, stderr=acc.stderr(),
                          n_samples=n_samples, seed=seed, ess=ess, flags=flags)


def anti_wick_expectation(state: QuantumState, eps: float, b, sup_bound: float,
                          n_samples: int, seed: int,
                          ess_floor: float = 0.1) -> MCEstimate:
    """tr[B_eps Gamma] = integral of b against the Husimi measure, by MC.

    ``b`` must be vectorized: it receives an array of shape (B, J) of complex
    sample points and returns (B,) real values bounded by ``sup_bound``.
    """
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    if sup_bound <= 0:
        raise ValueError("sup_bound must be positive")
    pv = husimi_proposal_variances(state, eps)
    acc = StreamingMoments()
    sw = 0.0
    sww = 0.0
    for U, w in _husimi_is_stream(state, eps, n_samples, seed, pv):
        vals = np.asarray(b(U), dtype=float)
        if vals.shape != (U.shape[0],):
            raise ValueError("test function must map (B, J) samples to (B,) values")
        if np.max(np.abs(vals)) > sup_bound * (1.0 + 1e-12):
            raise ValueError("test function exceeded its declared sup bound")
        acc.update(w * vals)
        sw += float(w.sum())
        sww += float(np.sum(w ** 2))
    ess = sw ** 2 / sww if sww > 0 else 0.0
    flags = ("low_ess",) if ess < ess_floor * n_samples else ()
    return MCEstimate(value=float(acc.mean), stderr=float(acc.stderr()),
                      n_samples=n_samples, seed=seed, flags=flags)


def anti_wick_gaussian_exact(state: QuantumState, eps: float, c: float) -> float:
    """Exact tr[B_eps Gamma] for the Gaussian symbol b(u) = exp(-c|u|^2).

    The anti-Wick operator of a radial Gaussian is diagonal in the number
    basis with value (1+eps*c)^(-J-n) on sector n, so the trace is a sector
    sum.  Vacuum check: b = e^{-|u|^2}, eps = 1 gives 2^{-J}.
    """
    if c <= 0 or eps <= 0:
        raise ValueError("need positive eps and Gaussian width")
    base = 1.0 + eps * c
    w = state.sector_weights()
    n = np.arange(w.size)
    return float(base ** (-state.basis.J) * np.sum(w * base ** (-n.astype(float))))


def anti_wick_radial_exact(state: QuantumState, eps: float, g, mode: int) -> float:
    """Exact tr[B_eps Gamma] for a symbol g(|u_mode|^2) of one mode.

    Conditioned on occupation m of the chosen mode, the Husimi law of
    |u_mode|^2/eps is Gamma(m+1, 1), so the trace reduces to quadratures
    against the occupation marginal:

        sum_m P(n_mode = m) * integral_0^inf g(eps*t) t^m e^{-t} / m! dt.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    marg = occupation_marginal(state, mode)
    total = 0.0
    for m, p in enumerate(marg):
        if p <= 0.0:
            continue
        lg = math.lgamma(m + 1.0)

        def integrand(t, _m=m, _lg=lg):
            if t <= 0.0:
                return 0.0
            return g(eps * t) * math.exp(_m * math.log(t) - t - _lg)

        upper = m + 40.0 * math.sqrt(m + 1.0) + 40.0
        val, _ = scipy.integrate.quad(integrand, 0.0, upper, limit=200)
        total += p * val
    return float(total)


# ---------------------------------------------------------------------------
# Berezin-Lieb comparison of relative entropies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BerezinLiebResult:
    """Quantum vs classical relative entropy with the comparison margin."""

    quantum: float
    classical: float
    margin: float
    stderr: float
    n_samples: int
    seed: int
    method: str
    flags: tuple = ()


def _radial_density_profile(state: QuantumState) -> np.ndarray:
    if state.basis.J != 1:
        raise ValueError("radial profiles require a single mode")
    return state.diagonal()


def classical_relative_entropy_radial(state_a: QuantumState,
                                      state_b: QuantumState,
                                      eps: float) -> float:
    """KL divergence of two single-mode Husimi measures by 1D quadrature.

    For J = 1 the Husimi density depends only on x = |u|^2/eps through
    P(x) = e^{-x} sum_n gamma_n x^n / n!, a probability density in x; the
    divergence is integral P_a log(P_a/P_b) dx.  Requires diagonal states.
    """
    ga = _radial_density_profile(state_a)
    gb = _radial_density_profile(state_b)
    del eps  # scale cancels in the divergence

    log_fact = np.array([math.lgamma(n + 1.0) for n in range(ga.size)])

    def dens(gamma, x):
        if x <= 0.0:
            return float(gamma[0])
        logs = -x + np.arange(gamma.size) * math.log(x) - log_fact
        return float(np.sum(gamma * np.exp(logs)))

    def integrand(x):
        pa = dens(ga, x)
        if pa <= 0.0:
            return 0.0
        pb = dens(gb, x)
        if pb <= 0.0:
            return math.inf
        return pa * math.log(pa / pb)

    upper = ga.size + 40.0 * math.sqrt(ga.size) + 40.0
    val, _ = scipy.integrate.quad(integrand, 0.0, upper, limit=400)
    return float(val)


def classical_relative_entropy_mc(state_a: QuantumState, state_b: QuantumState,
                                  eps: float, n_samples: int,
                                  seed: int) -> MCEstimate:
    """E_{mu_a}[log(rho_a/rho_b)] by importance sampling from mu_a's proposal.

    Returns +inf (with a flag) when a sample lands where rho_b underflows to
    zero but rho_a does not — the support sentinel.
    """
    if state_a.basis.J != state_b.basis.J:
        raise ValueError("states must share a mode count")
    pv = husimi_proposal_variances(state_a, eps)
    rng = substream(seed, 0)
    log_norm = np.sum(np.log(math.pi * pv))
    acc = StreamingMoments()
    remaining = n_samples
    sentinel = False
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        U = complex_gaussian(rng, pv, b)
        rho_a = husimi_density_batch(state_a, eps, U)
        rho_b = husimi_density_batch(state_b, eps, U)
        log_q = -np.sum(np.abs(U) ** 2 / pv, axis=1) - log_norm
        w = rho_a * np.exp(-log_q)
        live = rho_a > 0.0
        if np.any(rho_b[live] <= 0.0):
            sentinel = True
            break
        vals = np.zeros(b)
        vals[live] = w[live] * (np.log(rho_a[live]) - np.log(rho_b[live]))
        acc.update(vals)
    if sentinel:
        return MCEstimate(value=math.inf, stderr=0.0, n_samples=n_samples,
                          seed=seed, flags=("support_sentinel",))
    return MCEstimate(value=float(acc.mean), stderr=float(acc.stderr()),
                      n_samples=n_samples, seed=seed)


def berezin_lieb_check(state_a: QuantumState, state_b: QuantumState, eps: float,
                       n_samples: int = 100_000, seed: int = 0,
                       method: str = "mc") -> BerezinLiebResult:
    """Quantum relative entropy dominates the Husimi-measure divergence.

    Computes H(Gamma, Gamma') and the classical divergence of the two Husimi
    measures at scale eps (``method`` 'mc' or, for single-mode diagonal
    states, 'radial' quadrature) and reports margin = quantum - classical,
    which is nonnegative up to estimator noise.  A positive-infinite
    classical side (support sentinel) makes the comparison vacuous and is
    flagged.
    """
    if state_a.basis is not state_b.basis:
        raise ValueError("states live on different bases")
    quantum = relative_entropy(state_a, state_b)
    if method == "radial":
        classical = classical_relative_entropy_radial(state_a, state_b, eps)
        est_err = 0.0
        flags: tuple = ()
        n_used = 0
    elif method == "mc":
        est = classical_relative_entropy_mc(state_a, state_b, eps, n_samples, seed)
        classical = est.value if math.isfinite(est.value) else math.inf
        est_err = est.stderr
        flags = est.flags
        n_used = n_samples
    else:
        raise ValueError(f"unknown method {method!r}")
    if math.isinf(classical):
        margin = math.inf
    else:
        margin = quantum - classical
    return BerezinLiebResult(quantum=quantum, classical=classical, margin=margin,
                             stderr=est_err, n_samples=n_used, seed=seed,
                             method=method, flags=flags)


# ---------------------------------------------------------------------------
# Resolution of the identity and cylindrical consistency
# ---------------------------------------------------------------------------

def resolution_identity_mc(basis: FockBasis, n_samples: int, seed: int,
                           proposal_variance: float = 1.0):
    """MC reconstruction of pi^{-J} integral |xi(u)><xi(u)| du = identity.

    Returns (matrix, stderr) on the full truncated space.  The proposal is an
    isotropic complex Gaussian; variance 1 keeps the importance weights
    polynomially bounded for small cutoffs.
    """
    if n_samples <= 0:
        raise ValueError("need a positive sample budget")
    dim = basis.total_dim
    pv = np.full(basis.J, proposal_variance)
    rng = substream(seed, 0)
    log_norm = np.sum(np.log(math.pi * pv))
    acc = StreamingMoments(shape=(dim, dim), dtype=complex)
    remaining = n_samples
    while remaining > 0:
        b = min(_CHUNK, remaining)
        remaining -= b
        U = complex_gaussian(rng, pv, b)
        tables = _power_tables(U, basis.N_max)
        psi = np.concatenate(
            [_sector_coeffs(basis, tables, n) for n in range(basis.N_max + 1)],
            axis=1)
        x = np.sum(np.abs(U) ** 2, axis=1)
        log_q = -np.sum(np.abs(U) ** 2 / pv, axis=1) - log_norm
        # |xi><xi| carries e^{-|u|^2}; fold weight and prefactor into psi
        scale = np.exp(0.5 * (-x - log_q - basis.J * math.log(math.pi)))
        psi = psi * scale[:, None]
        acc.update(psi[:, :, None] * psi.conj()[:, None, :])
    return acc.mean, acc.stderr()


def cylindrical_moment_gap(state: QuantumState, eps: float, sub_modes,
                           n_samples: int, seed: int) -> dict:
    """First/second moments of a Husimi measure vs its cylindrical projection.

    Estimates E[u_j] and E[conj(u_i) u_j] over the full-space Husimi measure
    restricted to the coordinates in ``sub_modes``, and independently over
    the Husimi measure of the localized state; returns entrywise gaps and
    joint standard errors (projection consistency makes all gaps noise).
    """
    sub_modes = sorted({int(m) for m in sub_modes})
    idx = np.asarray(sub_modes)
    d = len(sub_modes)

    def measure_moments(st, coords, stream):
        pv = husimi_proposal_variances(st, eps)
        first = StreamingMoments(shape=(d,), dtype=complex)
        second = StreamingMoments(shape=(d, d), dtype=complex)
        for U, w in _husimi_is_stream(st, eps, n_samples, stream, pv):
            Us = U[:, coords]
            first.update(w[:, None] * Us)
            second.update(w[:, None, None] * (Us.conj()[:, :, None] * Us[:, None, :]))
        return first, second

    f_full, s_full = measure_moments(state, idx, seed)
    sub_state = localize(state, sub_modes)
    f_sub, s_sub = measure_moments(sub_state, np.arange(d), seed + 1)

    return {
        "first_gap": np.abs(f_full.mean - f_sub.mean),
        "first_sigma": np.sqrt(f_full.stderr() ** 2 + f_sub.stderr() ** 2),
        "second_gap": np.abs(s_full.mean - s_sub.mean),
        "second_sigma": np.sqrt(s_full.stderr() ** 2 + s_sub.stderr() ** 2),
    }
