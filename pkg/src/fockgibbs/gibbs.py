"""Gibbs states, reduced density matrices, and entropy functionals.

All states handled here commute with the total number operator, so a state is
stored as one block per particle-number sector.  Blocks are kept either dense
or, when the state is diagonal in the occupation basis (every non-interacting
Gibbs state is), as a plain vector of diagonal entries.

Numerical policy
----------------
* Partition functions are evaluated through per-sector eigendecompositions
  with a global max-shift; no series expansions are used anywhere.
* The truncation-quality certificate of a state is the probability mass of
  its top sector.  Campaign drivers pick the cutoff from the closed-form
  sector law of the matching non-interacting state, which stochastically
  dominates the interacting one for repulsive couplings.
* Two independent routes to the k-particle reduced density matrix are kept:
  a normally ordered ladder-trace route and an occupation-space partial-trace
  route.  They are deliberately separate code paths so each can audit the
  other; do not "simplify" one into the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import (DEFAULT_STATE_CEILING, FockBasis, _compositions_desc,
                    build_basis, sector_dimension)
from .operators import (FockOperator, TwoBodyKernel, annihilation_op,
                        identity_op, kernel_symmetric_matrix, pair_basis,
                        pair_h_inv_trace)
from .spectra import OneBodySpectrum

__all__ = [
    "QuantumState",
    "ReducedDensityMatrix",
    "gibbs_state",
    "free_log_partition",
    "free_gibbs_state",
    "free_sector_law",
    "free_rdm",
    "mean_occupations",
    "choose_cutoff",
    "reduced_density_matrix",
    "binomial_number_moment",
    "scaled_number_moment",
    "interaction_energy_trace",
    "relative_entropy",
    "entropy_trace",
    "free_energy_functional",
    "localize",
    "tilted_moment",
    "tilted_moment_limit",
    "tilted_number_operator",
    "BoundCheck",
    "apriori_bound_checks",
]


def _occ_lgfact(occ) -> float:
    """log of the factorial product over one occupation vector."""
    return float(sum(math.lgamma(int(o) + 1.0) for o in occ))


class QuantumState:
    """Number-conserving density matrix stored sector by sector.

    ``blocks[n]`` is either a 2-D complex array (dense sector block), a 1-D
    real array (diagonal sector block), or None (zero).  The total trace is
    normalized to one at construction.
    """

    def __init__(self, basis: FockBasis, blocks, log_partition: float | None = None,
                 normalize: bool = True):
        if len(blocks) != basis.N_max + 1:
            raise ValueError("need one block entry per sector")
        self.basis = basis
        self.blocks = list(blocks)
        self.log_partition = log_partition
        weights = np.zeros(basis.N_max + 1)
        for n, blk in enumerate(self.blocks):
            if blk is None:
                continue
            if blk.ndim == 1:
                if blk.shape[0] != basis.sector_dim(n):
                    raise ValueError(f"sector {n} diagonal has wrong length")
                weights[n] = float(np.sum(blk.real))
            else:
                if blk.shape != (basis.sector_dim(n),) * 2:
                    raise ValueError(f"sector {n} block has wrong shape")
                weights[n] = float(np.trace(blk).real)
        total = float(weights.sum())
        if normalize:
            if not total > 0:
                raise ValueError("state has nonpositive trace")
            if abs(total - 1.0) > 1e-12:
                self.blocks = [None if b is None else b / total for b in self.blocks]
                weights = weights / total
        self._weights = weights

    # -- access -----------------------------------------------------------
    def sector_weights(self) -> np.ndarray:
        """Probability mass per particle-number sector."""
        return self._weights.copy()

    @property
    def tail_mass(self) -> float:
        """Mass of the top sector: the truncation-quality certificate."""
        return float(self._weights[self.basis.N_max])

    def trace(self) -> float:
        return float(self._weights.sum())

    def block_dense(self, n: int) -> np.ndarray:
        blk = self.blocks[n]
        d = self.basis.sector_dim(n)
        if blk is None:
            return np.zeros((d, d), dtype=complex)
        if blk.ndim == 1:
            return np.diag(blk.astype(complex))
        return blk

    def is_diagonal(self) -> bool:
        return all(b is None or b.ndim == 1 for b in self.blocks)

    def diagonal(self) -> np.ndarray:
        """Concatenated diagonal over all sectors in flat-index order."""
        parts = []
        for n, blk in enumerate(self.blocks):
            if blk is None:
                parts.append(np.zeros(self.basis.sector_dim(n)))
            elif blk.ndim == 1:
                parts.append(blk.real)
            else:
                parts.append(np.diag(blk).real)
        return np.concatenate(parts)

    # -- functionals -------------------------------------------------------
    def expectation(self, op: FockOperator) -> complex:
        """tr[op * state] for a sector-preserving operator."""
        if op.basis is not self.basis:
            raise ValueError("operator and state bases differ")
        if not op.is_number_diagonal():
            raise ValueError("expectation requires a number-conserving operator")
        acc = 0.0 + 0.0j
        for n, blk in enumerate(self.blocks):
            if blk is None:
                continue
            a = op.block(n, n)
            if a is None:
                continue
            if blk.ndim == 1:
                acc += complex(np.dot(a.diagonal(), blk))
            else:
                coo = a.tocoo()
                acc += complex(np.sum(coo.data * blk[coo.col, coo.row]))
        return acc

    def hermiticity_defect(self) -> float:
        worst = 0.0
        for blk in self.blocks:
            if blk is not None and blk.ndim == 2:
                worst = max(worst, float(np.max(np.abs(blk - blk.conj().T))))
        return worst

    def to_json_dict(self) -> dict:
        """Serializable form: basis descriptor plus dense sector blocks."""
        blocks = []
        for n in range(self.basis.N_max + 1):
            blk = self.blocks[n]
            if blk is None:
                blocks.append(None)
            elif blk.ndim == 1:
                blocks.append({"diagonal": blk.real.tolist()})
            else:
                blocks.append({"re": blk.real.tolist(), "im": blk.imag.tolist()})
        return {
            "basis": {"J": self.basis.J, "N_max": self.basis.N_max},
            "blocks": blocks,
            "log_partition": self.log_partition,
            "tail_mass": self.tail_mass,
        }


def gibbs_state(basis: FockBasis, H: FockOperator, T: float,
                hermit_tol: float = 1e-9) -> QuantumState:
    """Gibbs state exp(-H/T)/Z by per-sector eigendecomposition.

    The log-partition function is evaluated with a global energy shift so the
    largest Boltzmann weight is exactly one; ``state.log_partition`` stores
    log Z of the truncated space.  Raises for nonpositive temperature, for a
    Hamiltonian with off-diagonal number blocks, and for Hermiticity defects
    beyond ``hermit_tol``.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    if H.basis is not basis:
        raise ValueError("Hamiltonian basis does not match")
    if not H.is_number_diagonal():
        raise ValueError("Hamiltonian must commute with the number operator")
    defect = H.hermiticity_defect()
    if defect > hermit_tol:
        raise ValueError(f"Hamiltonian Hermiticity defect {defect:.3e} > {hermit_tol:.1e}")

    eigs = []
    vecs = []
    for n in range(basis.N_max + 1):
        Hn = H.sector_matrix(n)
        Hn = 0.5 * (Hn + Hn.conj().T)
        vals, U = np.linalg.eigh(Hn)
        eigs.append(vals)
        vecs.append(U)

    e_min = min(float(v[0]) for v in eigs)
    z_shift = 0.0
    blocks = []
    for n in range(basis.N_max + 1):
        w = np.exp(-(eigs[n] - e_min) / T)
        z_shift += float(w.sum())
        blocks.append((vecs[n] * w) @ vecs[n].conj().T)
    log_z = math.log(z_shift) - e_min / T
    blocks = [b / z_shift for b in blocks]
    return QuantumState(basis, blocks, log_partition=log_z, normalize=False)


# ---------------------------------------------------------------------------
# Non-interacting closed forms
# ---------------------------------------------------------------------------

def free_log_partition(s: OneBodySpectrum, T: float) -> float:
    """log Z of the non-interacting Gibbs state on the full (untruncated)
    Fock space: -sum_j log(1 - exp(-lambda_j / T))."""
    if not T > 0:
        raise ValueError("temperature must be positive")
    lam = s.as_array()
    return float(-np.sum(np.log1p(-np.exp(-lam / T))))


def mean_occupations(s: OneBodySpectrum, T: float) -> np.ndarray:
    """Expected occupation per mode, 1/(exp(lambda_j/T) - 1)."""
    lam = s.as_array()
    return 1.0 / np.expm1(lam / T)


def free_gibbs_state(basis: FockBasis, s: OneBodySpectrum, T: float) -> QuantumState:
    """Gibbs state of dGamma(h) on the truncated basis, in diagonal storage.

    Built directly from the product of geometric weights, so it doubles as an
    independent oracle for :func:`gibbs_state` applied to the free
    Hamiltonian.  ``log_partition`` is the truncated log Z.
    """
    if s.mode_count != basis.J:
        raise ValueError("spectrum mode count does not match basis")
    if not T > 0:
        raise ValueError("temperature must be positive")
    lam = s.as_array()
    blocks = []
    z = 0.0
    for n in range(basis.N_max + 1):
        ener = basis.sector(n).astype(float) @ lam
        w = np.exp(-ener / T)
        z += float(w.sum())
        blocks.append(w)
    blocks = [b / z for b in blocks]
    return QuantumState(basis, blocks, log_partition=math.log(z), normalize=False)


def free_sector_law(s: OneBodySpectrum, T: float, horizon: int) -> np.ndarray:
    """P(N = n), n = 0..horizon, for the untruncated non-interacting state.

    The total-number law is the convolution of one geometric distribution per
    mode with ratio exp(-lambda_j/T); 1 - law.sum() is the exact tail mass
    beyond the horizon.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    q = np.exp(-s.as_array() / T)
    law = np.ones(1)
    for qj in q:
        pj = (1.0 - qj) * qj ** np.arange(horizon + 1)
        law = np.convolve(law, pj)[:horizon + 1]
    out = np.zeros(horizon + 1)
    out[:law.size] = law
    return out


def choose_cutoff(s: OneBodySpectrum, T: float, rtol: float = 1e-10,
                  state_ceiling: int = DEFAULT_STATE_CEILING) -> int:
    """Smallest cutoff whose free-state tail mass is at most ``rtol``.

    The free sector law dominates the repulsive interacting one, so a cutoff
    certified here is safe for the interacting Gibbs state at the same
    temperature.  Raises if the certified cutoff would exceed the state
    ceiling for this mode count.
    """
    if not 0 < rtol < 1:
        raise ValueError("rtol must lie in (0, 1)")
    horizon = 64
    while True:
        law = free_sector_law(s, T, horizon)
        # tails[n] = exact mass strictly beyond sector n (suffix sums avoid
        # the cancellation of 1 - cumsum at the 1e-10 scale)
        residual = max(0.0, 1.0 - float(law.sum()))
        suffix = np.cumsum(law[::-1])[::-1]
        tails = residual + np.concatenate([suffix[1:], [0.0]])
        hits = np.nonzero(tails <= rtol)[0]
        if hits.size:
            n_cut = int(hits[0])
            break
        if horizon > 4_000_000:
            raise ValueError("no admissible cutoff below the enumeration horizon")
        horizon *= 2
    total = 0
    for n in range(n_cut + 1):
        total += sector_dimension(s.mode_count, n)
        if total > state_ceiling:
            raise ValueError(
                f"certified cutoff {n_cut} needs more than {state_ceiling} states")
    return n_cut


# ---------------------------------------------------------------------------
# Reduced density matrices
# ---------------------------------------------------------------------------

@dataclass
class ReducedDensityMatrix:
    """k-particle reduced density matrix on the orthonormal symmetric basis.

    ``labels`` lists the occupation multi-indices (total k over J modes) in
    the same descending-lexicographic order the Fock basis uses, and
    ``matrix[i, j]`` is the element between labels[i] and labels[j].
    """

    k: int
    J: int
    labels: tuple
    matrix: np.ndarray = field(repr=False)
    route: str = "unspecified"

    def __post_init__(self):
        m = len(self.labels)
        if self.matrix.shape != (m, m):
            raise ValueError("matrix shape does not match label count")

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))))

    def label_index(self, occ) -> int:
        return self.labels.index(tuple(int(o) for o in occ))

    def schatten_distance(self, other: "ReducedDensityMatrix", p: float = 1.0) -> float:
        """Schatten-p norm of the difference (p = inf gives the operator norm)."""
        if (self.k, self.J) != (other.k, other.J) or self.labels != other.labels:
            raise ValueError("reduced matrices are not comparable")
        sv = np.linalg.svd(self.matrix - other.matrix, compute_uv=False)
        if math.isinf(p):
            return float(sv[0]) if sv.size else 0.0
        if p < 1:
            raise ValueError("Schatten index must satisfy p >= 1")
        return float(np.sum(sv ** p) ** (1.0 / p))

    def restrict(self, modes) -> "ReducedDensityMatrix":
        """Compression to labels supported on the given modes (in order)."""
        modes = list(modes)
        keep = []
        new_labels = []
        for i, lab in enumerate(self.labels):
            if all(lab[j] == 0 for j in range(self.J) if j not in modes):
                keep.append(i)
                new_labels.append(tuple(lab[j] for j in modes))
        sub = self.matrix[np.ix_(keep, keep)]
        return ReducedDensityMatrix(k=self.k, J=len(modes), labels=tuple(new_labels),
                                    matrix=sub, route=self.route)

    def to_json_dict(self) -> dict:
        """Serializable form: labels plus the dense matrix, route recorded."""
        return {
            "k": self.k,
            "J": self.J,
            "labels": [list(lab) for lab in self.labels],
            "matrix_re": self.matrix.real.tolist(),
            "matrix_im": self.matrix.imag.tolist(),
            "route": self.route,
        }


def rdm_labels(J: int, k: int) -> tuple:
    """Occupation labels of the k-particle space, descending lexicographic."""
    return tuple(tuple(c) for c in _compositions_desc(k, J))


def free_rdm(s: OneBodySpectrum, T: float, k: int) -> ReducedDensityMatrix:
    """Closed-form k-particle matrix of the untruncated free state.

    Diagonal in the occupation labels with entry prod_j nbar_j^kappa_j where
    nbar_j = 1/(exp(lambda_j/T) - 1).
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    nbar = mean_occupations(s, T)
    labels = rdm_labels(s.mode_count, k)
    diag = [float(np.prod(nbar ** np.asarray(lab))) for lab in labels]
    return ReducedDensityMatrix(k=k, J=s.mode_count, labels=labels,
                                matrix=np.diag(diag).astype(complex),
                                route="closed_form")


def _rdm_creation(state: QuantumState, k: int) -> ReducedDensityMatrix:
    """Ladder-trace route: entry[kappa, kappa'] =
    tr[prod adag^kappa'_i prod a^kappa_i state] / sqrt(kappa! kappa'!)."""
    basis = state.basis
    labels = rdm_labels(basis.J, k)
    m = len(labels)
    a_ops = [annihilation_op(basis, i) for i in range(basis.J)]

    # lowering blocks (n-k, n) of prod_i a_i^kappa_i for each label
    lower = []
    for lab in labels:
        op = None
        for i, reps in enumerate(lab):
            for _ in range(reps):
                op = a_ops[i] if op is None else a_ops[i] @ op
        lower.append(op)

    norm = np.array([math.exp(-0.5 * _occ_lgfact(lab)) for lab in labels])
    out = np.zeros((m, m), dtype=complex)
    for n in range(k, basis.N_max + 1):
        if state.blocks[n] is None:
            continue
        gamma_n = state.block_dense(n)
        prods = []
        for i in range(m):
            Bi = lower[i].block(n - k, n)
            prods.append(None if Bi is None else Bi @ gamma_n)
        for j in range(m):
            Bj = lower[j].block(n - k, n)
            if Bj is None:
                continue
            coo = Bj.tocoo()
            for i in range(m):
                if prods[i] is None:
                    continue
                # tr[Bj^dag (Bi gamma_n)] accumulated entrywise
                out[i, j] += np.sum(np.conj(coo.data) * prods[i][coo.row, coo.col])
    out *= np.outer(norm, norm)
    return ReducedDensityMatrix(k=k, J=basis.J, labels=labels, matrix=out,
                                route="creation")


def _rdm_partial_trace(state: QuantumState, k: int) -> ReducedDensityMatrix:
    """Occupation-space route: entry[kappa, kappa'] =
    sum_rho G[kappa+rho, kappa'+rho] sqrt((kappa+rho)!(kappa'+rho)!) /
    (rho! sqrt(kappa! kappa'!)) with G the full sector matrix elements."""
    basis = state.basis
    labels = rdm_labels(basis.J, k)
    m = len(labels)
    lab_arr = [np.asarray(lab, dtype=np.int64) for lab in labels]
    lg_lab = [_occ_lgfact(lab) for lab in labels]
    out = np.zeros((m, m), dtype=complex)
    for rest in range(basis.N_max - k + 1):
        rho_occs = basis.sector(rest)
        n = rest + k
        blk = state.blocks[n]
        if blk is None:
            continue
        diag_only = blk.ndim == 1
        dense = None if diag_only else blk
        for r in range(rho_occs.shape[0]):
            rho = rho_occs[r]
            lg_rho = _occ_lgfact(rho)
            idx = [basis.index(rho + lab_arr[i])[1] for i in range(m)]
            lg_full = [_occ_lgfact(rho + lab_arr[i]) for i in range(m)]
            for i in range(m):
                for j in range(m):
                    if diag_only and idx[i] != idx[j]:
                        continue
                    g = blk[idx[i]] if diag_only else dense[idx[i], idx[j]]
                    if g == 0:
                        continue
                    factor = math.exp(0.5 * (lg_full[i] + lg_full[j])
                                      - lg_rho - 0.5 * (lg_lab[i] + lg_lab[j]))
                    out[i, j] += g * factor
    return ReducedDensityMatrix(k=k, J=basis.J, labels=labels, matrix=out,
                                route="partial_trace")


def reduced_density_matrix(state: QuantumState, k: int,
                           route: str = "creation") -> ReducedDensityMatrix:
    """k-particle reduced density matrix of a number-conserving state.

    ``route`` selects one of two independent constructions ("creation" is the
    default ladder-trace evaluation; "partial_trace" resums occupation-space
    matrix elements).  Both satisfy tr = E[binom(N, k)].
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k > state.basis.N_max:
        raise ValueError("k exceeds the basis cutoff")
    if route == "creation":
        return _rdm_creation(state, k)
    if route == "partial_trace":
        return _rdm_partial_trace(state, k)
    raise ValueError(f"unknown route {route!r}")


def binomial_number_moment(state: QuantumState, k: int) -> float:
    """E[binom(N, k)] from the sector weights; equals tr of the k-RDM."""
    w = state.sector_weights()
    return float(sum(w[n] * math.comb(n, k) for n in range(len(w))))


def scaled_number_moment(state: QuantumState, k: int, scale: float) -> float:
    """E[(scale * N)^k] from the sector weights."""
    w = state.sector_weights()
    return float(sum(w[n] * (scale * n) ** k for n in range(len(w))))


def occupation_marginal(state: QuantumState, mode: int) -> np.ndarray:
    """Law of the occupation of one mode: P(n_mode = m) for m = 0..N_max."""
    basis = state.basis
    if not 0 <= mode < basis.J:
        raise ValueError("mode index out of range")
    marg = np.zeros(basis.N_max + 1)
    for n, blk in enumerate(state.blocks):
        if blk is None:
            continue
        diag = blk if blk.ndim == 1 else np.diag(blk).real
        np.add.at(marg, basis.sector(n)[:, mode], diag)
    return np.clip(marg, 0.0, None)


def interaction_energy_trace(kernel: TwoBodyKernel,
                             rdm2: ReducedDensityMatrix) -> float:
    """tr[w Gamma^(2)] on the symmetric pair space.

    Aligns the ordered-pair labels of the kernel's symmetric matrix with the
    occupation labels of the 2-particle reduced matrix.
    """
    if rdm2.k != 2 or rdm2.J != kernel.J:
        raise ValueError("need a 2-particle matrix matching the kernel modes")
    S = kernel_symmetric_matrix(kernel)
    pairs = pair_basis(kernel.J)
    perm = []
    for a, b in pairs:
        occ = [0] * kernel.J
        occ[a] += 1
        occ[b] += 1
        perm.append(rdm2.label_index(occ))
    G = rdm2.matrix[np.ix_(perm, perm)]
    return float(np.trace(S @ G).real)


# ---------------------------------------------------------------------------
# Entropies and the variational functional
# ---------------------------------------------------------------------------

def _sector_eig(blk):
    """Eigenvalues and vectors of a stored block (diagonal fast path)."""
    if blk.ndim == 1:
        return blk.real.astype(float), None
    vals, vecs = np.linalg.eigh(0.5 * (blk + blk.conj().T))
    return vals, vecs


def entropy_trace(state: QuantumState) -> float:
    """tr[state * log state] (nonpositive; zero eigenvalues contribute 0)."""
    acc = 0.0
    for blk in state.blocks:
        if blk is None:
            continue
        vals, _ = _sector_eig(blk)
        pos = vals[vals > 0.0]
        acc += float(np.sum(pos * np.log(pos)))
    return acc


def relative_entropy(state_a: QuantumState, state_b: QuantumState,
                     support_tol: float = 1e-12) -> float:
    """Quantum relative entropy tr[a (log a - log b)], sector by sector.

    Returns ``math.inf`` when more than ``support_tol`` of state_a's mass
    sits on the numerical null space of state_b (eigenvalues that underflow
    to zero).  Both states must live on the same basis.
    """
    if state_a.basis is not state_b.basis:
        raise ValueError("states live on different bases")
    term_a = entropy_trace(state_a)
    cross = 0.0
    escaped = 0.0
    for n in range(state_a.basis.N_max + 1):
        blk_a = state_a.blocks[n]
        if blk_a is None:
            continue
        blk_b = state_b.blocks[n]
        if blk_b is None:
            escaped += float(np.sum(blk_a.real)) if blk_a.ndim == 1 \
                else float(np.trace(blk_a).real)
            continue
        vals_b, vecs_b = _sector_eig(blk_b)
        if vecs_b is None:
            diag_a = blk_a.real if blk_a.ndim == 1 else np.diag(blk_a).real
        else:
            tmp = vecs_b.conj().T @ state_a.block_dense(n)
            diag_a = np.einsum("ij,ji->i", tmp, vecs_b).real
        diag_a = np.clip(diag_a, 0.0, None)
        null = vals_b <= 0.0
        escaped += float(np.sum(diag_a[null]))
        live = ~null
        cross += float(np.sum(diag_a[live] * np.log(vals_b[live])))
    if escaped > support_tol:
        return math.inf
    return term_a - cross


def free_energy_functional(H: FockOperator, state: QuantumState, T: float) -> float:
    """Gibbs variational functional tr[H state] + T tr[state log state].

    Minimized by the Gibbs state of H at temperature T, where it equals
    -T log Z; every other state gives a strictly larger value.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    energy = state.expectation(H).real
    return float(energy + T * entropy_trace(state))


# ---------------------------------------------------------------------------
# Localization (partial trace over a subset of modes)
# ---------------------------------------------------------------------------

def localize(state: QuantumState, modes) -> QuantumState:
    """Partial trace onto the given modes, exact in occupation coordinates.

    Returns a state on a fresh basis over ``len(modes)`` modes with the same
    cutoff.  Because the ambient state commutes with the total number
    operator, the result does too, and its k-particle matrices are the
    compressions of the ambient ones to the kept modes.
    """
    modes = sorted({int(m) for m in modes})
    J = state.basis.J
    if not modes or modes[0] < 0 or modes[-1] >= J:
        raise ValueError("modes must form a nonempty subset of range(J)")
    if len(modes) == J:
        return state
    comp = [j for j in range(J) if j not in modes]
    sub_basis = build_basis(len(modes), state.basis.N_max)
    diag_in = state.is_diagonal()
    acc: list = [None] * (sub_basis.N_max + 1)
    for n in range(state.basis.N_max + 1):
        blk = state.blocks[n]
        if blk is None:
            continue
        occs = state.basis.sector(n)
        tau = occs[:, comp]
        sub = occs[:, modes]
        groups: dict = {}
        for pos in range(occs.shape[0]):
            groups.setdefault(tau[pos].tobytes(), []).append(pos)
        for members in groups.values():
            n_sub = int(sub[members[0]].sum())
            d_sub = sub_basis.sector_dim(n_sub)
            tgt = [sub_basis.index(sub[p])[1] for p in members]
            if blk.ndim == 1:
                if acc[n_sub] is None:
                    acc[n_sub] = np.zeros(d_sub)
                for p, t in zip(members, tgt):
                    acc[n_sub][t] += blk[p].real
            else:
                if acc[n_sub] is None:
                    acc[n_sub] = np.zeros((d_sub, d_sub), dtype=complex)
                idx = np.asarray(members)
                acc[n_sub][np.ix_(tgt, tgt)] += blk[np.ix_(idx, idx)]
    if not diag_in:
        acc = [None if a is None else (np.diag(a.astype(complex)) if a.ndim == 1 else a)
               for a in acc]
    return QuantumState(sub_basis, acc, log_partition=None, normalize=True)


# ---------------------------------------------------------------------------
# Tilted occupation moments
# ---------------------------------------------------------------------------

def _check_pattern(s: OneBodySpectrum, occ_pattern, k: int):
    occ = tuple(int(o) for o in occ_pattern)
    if len(occ) != s.mode_count:
        raise ValueError("pattern length must equal the mode count")
    if any(o < 0 for o in occ) or k < 0:
        raise ValueError("pattern entries and k must be nonnegative")
    return occ


def tilted_moment(s: OneBodySpectrum, T: float, occ_pattern, k: int) -> float:
    """Closed form of the free-state moment that mixes a fixed occupation
    pattern with k extra number factors:

        sum over s_j >= 0 with sum_j s_j = k of
            prod_j (n_j + s_j)! / (T (exp(lambda_j/T) - 1))^(n_j + s_j).

    All powers are read in normal order, matching
    :func:`tilted_number_operator`.
    """
    occ = _check_pattern(s, occ_pattern, k)
    if not T > 0:
        raise ValueError("temperature must be positive")
    denom = T * np.expm1(s.as_array() / T)
    total = 0.0
    for extra in _compositions_desc(k, s.mode_count):
        term = 1.0
        for j, (nj, sj) in enumerate(zip(occ, extra)):
            term *= math.factorial(nj + sj) / denom[j] ** (nj + sj)
        total += term
    return total


def tilted_moment_limit(s: OneBodySpectrum, occ_pattern, k: int) -> float:
    """High-temperature limit of :func:`tilted_moment`: T(exp(l/T)-1) -> l."""
    occ = _check_pattern(s, occ_pattern, k)
    lam = s.as_array()
    total = 0.0
    for extra in _compositions_desc(k, s.mode_count):
        term = 1.0
        for j, (nj, sj) in enumerate(zip(occ, extra)):
            term *= math.factorial(nj + sj) / lam[j] ** (nj + sj)
        total += term
    return total


def tilted_number_operator(basis: FockBasis, occ_pattern, k: int,
                           T: float) -> FockOperator:
    """Operator whose free-state trace :func:`tilted_moment` evaluates.

    Built from explicit ladder products:

        T^-(|n|+k) * sum over compositions s of k of
            prod_j adag_j^(n_j+s_j) a_j^(n_j+s_j),

    i.e. every power is normally ordered.  Serves as the quantum-side route
    that the closed form is audited against.
    """
    occ = tuple(int(o) for o in occ_pattern)
    if len(occ) != basis.J:
        raise ValueError("pattern length must equal the mode count")
    if any(o < 0 for o in occ) or k < 0:
        raise ValueError("pattern entries and k must be nonnegative")
    if not T > 0:
        raise ValueError("temperature must be positive")
    a_ops = [annihilation_op(basis, j) for j in range(basis.J)]
    total = None
    for extra in _compositions_desc(k, basis.J):
        term = None
        for j, (nj, sj) in enumerate(zip(occ, extra)):
            reps = nj + sj
            if reps == 0:
                continue
            low = a_ops[j]
            for _ in range(reps - 1):
                low = a_ops[j] @ low
            factor = low.adjoint() @ low
            term = factor if term is None else term @ factor
        if term is None:
            term = identity_op(basis)
        total = term if total is None else total + term
    scale = T ** (-(sum(occ) + k))
    return total * scale


# ---------------------------------------------------------------------------
# A-priori bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    """Outcome of one rigorous inequality check."""
    name: str
    value: float
    lower: float | None
    upper: float | None
    passed: bool
    slack: float

    def describe(self) -> str:
        lo = "-inf" if self.lower is None else f"{self.lower:.6e}"
        hi = "+inf" if self.upper is None else f"{self.upper:.6e}"
        flag = "ok" if self.passed else "VIOLATED"
        return f"{self.name}: {lo} <= {self.value:.6e} <= {hi} [{flag}]"


def _make_check(name, value, lower, upper, tol) -> BoundCheck:
    slack = math.inf
    ok = True
    if lower is not None:
        gap = value - lower
        slack = min(slack, gap)
        ok = ok and gap >= -tol
    if upper is not None:
        gap = upper - value
        slack = min(slack, gap)
        ok = ok and gap >= -tol
    return BoundCheck(name=name, value=float(value), lower=lower, upper=upper,
                      passed=ok, slack=float(slack))


def apriori_bound_checks(s: OneBodySpectrum, kernel: TwoBodyKernel, T: float,
                         lam: float, *, log_ratio: float,
                         rdm1: ReducedDensityMatrix, w_gamma2: float,
                         state: QuantumState, free_state: QuantumState,
                         number_powers=(1, 2), tol: float = 1e-9) -> dict:
    """Rigorous inequality battery for a repulsive interacting Gibbs state.

    Parameters are the already-computed observables: ``log_ratio`` is
    log(Z_int / Z_free) on the truncated space, ``rdm1`` the one-particle
    matrix of the interacting state, ``w_gamma2`` the interaction energy
    tr[w Gamma^(2)].  Checks (all consequences of Jensen/monotonicity
    arguments, valid up to truncation error absorbed in ``tol``):

    * partition_ratio: -lam*T*c <= log_ratio <= 0 with
      c = tr[w (h^-1 x h^-1)];
    * interaction_energy: 0 <= w_gamma2 <= T^2 c;
    * one_particle_dominated: 0 <= Gamma^(1) <= 2T(1 + lam*T*c) h^-1 as
      operators;
    * number_moment_k: E_int[(N/T)^k] <= (Z_free/Z_int) E_free[(N/T)^k].
    """
    if lam < 0:
        raise ValueError("coupling must be nonnegative")
    c = pair_h_inv_trace(s, kernel)
    checks = {}
    checks["partition_ratio"] = _make_check(
        "partition_ratio", log_ratio, -lam * T * c, 0.0, tol)
    checks["interaction_energy"] = _make_check(
        "interaction_energy", w_gamma2, 0.0, T * T * c, tol)

    lam_arr = s.as_array()
    cap = 2.0 * T * (1.0 + lam * T * c)
    dom = np.diag(cap / lam_arr) - rdm1.matrix
    min_dom = float(np.min(np.linalg.eigvalsh(0.5 * (dom + dom.conj().T))))
    min_rdm = rdm1.min_eigenvalue()
    checks["one_particle_dominated"] = _make_check(
        "one_particle_dominated", min(min_dom, min_rdm), 0.0, None, tol)

    ratio = math.exp(-log_ratio)
    for k in number_powers:
        lhs = scaled_number_moment(state, k, 1.0 / T)
        rhs = ratio * scaled_number_moment(free_state, k, 1.0 / T)
        checks[f"number_moment_{k}"] = _make_check(
            f"number_moment_{k}", lhs, None, rhs * (1.0 + 1e-12) + tol, tol)
    return checks
