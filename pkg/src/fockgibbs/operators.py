"""Second-quantized operators on the truncated Fock basis.

Operators are stored as sparse blocks between particle-number sectors.  All
Hamiltonians built here commute with the number operator, so their blocks are
square per sector; creation and annihilation operators shift sectors by one.
Truncation semantics: a creation operator annihilates the top sector instead
of erroring, and identity checks restrict themselves to "safe" sectors where
the cutoff cannot leak.

Two-body interaction convention
-------------------------------
Kernels are supplied in the PRODUCT mode basis, as coefficients
``W[(a,b),(c,d)] = <phi_a x phi_b, w phi_c x phi_d>`` with the symmetry
``W[(a,b),(c,d)] = W[(b,a),(d,c)]`` and Hermiticity
``W[(a,b),(c,d)] = conj(W[(c,d),(a,b)])``.  The second quantization used
throughout is

    W_op = (1/2) sum_{a,b,c,d} W[(a,b),(c,d)] adag_a adag_b a_d a_c,

which is the unique normalization making the sector-n restriction equal the
pairwise sum ``sum_{i<j} w_ij``.  Any alternative scaling of the pair operator
w must be absorbed into the kernel coefficients before construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import FockBasis
from .spectra import OneBodySpectrum

__all__ = [
    "FockOperator",
    "TwoBodyKernel",
    "creation_op",
    "annihilation_op",
    "dGamma_op",
    "number_op",
    "identity_op",
    "delta_kernel",
    "finite_rank_kernel",
    "two_body_op",
    "hamiltonian",
    "wick_identity_check",
    "ccr_defect",
    "mode_annihilator",
    "mode_creator",
    "pair_basis",
    "kernel_symmetric_matrix",
    "pair_h_inv_trace",
]


def _infer_structure(keys) -> str:
    offs = {m - n for m, n in keys}
    if offs <= {0}:
        return "diagonal"
    if offs <= {1}:
        return "raising"
    if offs <= {-1}:
        return "lowering"
    return "general"


class FockOperator:
    """Block operator between particle-number sectors of a FockBasis.

    Parameters
    ----------
    basis : FockBasis
    blocks : dict
        Maps (m, n) -> sparse matrix sending sector n to sector m.  Missing
        blocks are zero.
    """

    def __init__(self, basis: FockBasis, blocks: dict):
        self.basis = basis
        self.blocks = {}
        for (m, n), mat in blocks.items():
            mat = sp.csr_matrix(mat)
            if mat.nnz == 0:
                continue
            expected = (basis.sector_dim(m), basis.sector_dim(n))
            if mat.shape != expected:
                raise ValueError(f"block ({m},{n}) has shape {mat.shape}, "
                                 f"expected {expected}")
            self.blocks[(m, n)] = mat
        self.structure = _infer_structure(self.blocks.keys())

    def block(self, m: int, n: int):
        """Sparse block sector n -> sector m, or None when zero."""
        return self.blocks.get((m, n))

    def sector_matrix(self, n: int) -> np.ndarray:
        """Dense (n, n) block; zeros when absent.  Diagonal-structure helper."""
        blk = self.blocks.get((n, n))
        d = self.basis.sector_dim(n)
        if blk is None:
            return np.zeros((d, d), dtype=complex)
        return blk.toarray()

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        if other.basis is not self.basis:
            raise ValueError("operator bases differ")
        out = {}
        for (m, k), a in self.blocks.items():
            for (k2, n), b in other.blocks.items():
                if k != k2:
                    continue
                prod = a @ b
                if (m, n) in out:
                    out[(m, n)] = out[(m, n)] + prod
                else:
                    out[(m, n)] = prod
        return FockOperator(self.basis, out)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        if other.basis is not self.basis:
            raise ValueError("operator bases differ")
        out = dict(self.blocks)
        for key, mat in other.blocks.items():
            out[key] = out[key] + mat if key in out else mat
        return FockOperator(self.basis, out)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return self + (other * (-1.0))

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.basis,
                            {k: mat * scalar for k, mat in self.blocks.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "FockOperator":
        return FockOperator(self.basis,
                            {(n, m): mat.conj().T.tocsr()
                             for (m, n), mat in self.blocks.items()})

    def hermiticity_defect(self) -> float:
        """Max absolute block-wise deviation from self-adjointness."""
        keys = set(self.blocks) | {(n, m) for m, n in self.blocks}
        worst = 0.0
        for m, n in keys:
            a = self.blocks.get((m, n))
            b = self.blocks.get((n, m))
            a = a.toarray() if a is not None else 0.0
            bt = b.conj().T.toarray() if b is not None else 0.0
            diff = a - bt
            if np.ndim(diff):
                worst = max(worst, float(np.max(np.abs(diff))))
        return worst

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_defect() <= tol

    def is_number_diagonal(self) -> bool:
        return self.structure == "diagonal"

    def full_matrix(self) -> np.ndarray:
        """Dense matrix on the whole truncated space (small bases only)."""
        dim = self.basis.total_dim
        out = np.zeros((dim, dim), dtype=complex)
        for (m, n), mat in self.blocks.items():
            r0 = self.basis.sector_offset(m)
            c0 = self.basis.sector_offset(n)
            out[r0:r0 + mat.shape[0], c0:c0 + mat.shape[1]] = mat.toarray()
        return out

    def max_block_deviation(self, other: "FockOperator", sectors=None) -> float:
        """Max |self - other| entrywise over the requested (n, n) range."""
        diff = self - other
        worst = 0.0
        for (m, n), mat in diff.blocks.items():
            if sectors is not None and (m not in sectors or n not in sectors):
                continue
            if mat.nnz:
                worst = max(worst, float(np.max(np.abs(mat.data))))
        return worst


def identity_op(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, {(n, n): sp.identity(basis.sector_dim(n), format="csr")
                                for n in range(basis.N_max + 1)})


def creation_op(basis: FockBasis, mode: int) -> FockOperator:
    """Ladder raising operator for one mode: adds sqrt(n_i + 1) amplitudes.

    The top sector N_max is mapped to zero (truncation).  Modes are 0-indexed.
    """
    if not 0 <= mode < basis.J:
        raise ValueError(f"mode {mode} out of range for J={basis.J}")
    blocks = {}
    for n in range(basis.N_max):
        src = basis.sector(n)
        rows, cols, vals = [], [], []
        for pos in range(src.shape[0]):
            occ = src[pos].copy()
            amp = math.sqrt(occ[mode] + 1.0)
            occ[mode] += 1
            _, tgt = basis.index(occ)
            rows.append(tgt)
            cols.append(pos)
            vals.append(amp)
        blocks[(n + 1, n)] = sp.csr_matrix(
            (vals, (rows, cols)),
            shape=(basis.sector_dim(n + 1), basis.sector_dim(n)))
    return FockOperator(basis, blocks)


def annihilation_op(basis: FockBasis, mode: int) -> FockOperator:
    """Ladder lowering operator for one mode; the vacuum maps to zero."""
    if not 0 <= mode < basis.J:
        raise ValueError(f"mode {mode} out of range for J={basis.J}")
    blocks = {}
    for n in range(1, basis.N_max + 1):
        src = basis.sector(n)
        rows, cols, vals = [], [], []
        for pos in range(src.shape[0]):
            occ = src[pos].copy()
            if occ[mode] == 0:
                continue
            amp = math.sqrt(float(occ[mode]))
            occ[mode] -= 1
            _, tgt = basis.index(occ)
            rows.append(tgt)
            cols.append(pos)
            vals.append(amp)
        blocks[(n - 1, n)] = sp.csr_matrix(
            (vals, (rows, cols)),
            shape=(basis.sector_dim(n - 1), basis.sector_dim(n)))
    return FockOperator(basis, blocks)


def mode_creator(basis: FockBasis, coeffs) -> FockOperator:
    """adag(f) = sum_i f_i adag_i for a coefficient vector f (linear in f)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != (basis.J,):
        raise ValueError("coefficient vector length must equal J")
    out = None
    for i, c in enumerate(coeffs):
        if c == 0:
            continue
        term = creation_op(basis, i) * c
        out = term if out is None else out + term
    return out if out is not None else FockOperator(basis, {})


def mode_annihilator(basis: FockBasis, coeffs) -> FockOperator:
    """a(f) = sum_i conj(f_i) a_i (antilinear in f), so a(f) = adag(f)^dagger."""
    return mode_creator(basis, coeffs).adjoint()


def dGamma_op(basis: FockBasis, s: OneBodySpectrum) -> FockOperator:
    """Second quantization of h: diagonal with entry sum_i lambda_i n_i."""
    if s.mode_count != basis.J:
        raise ValueError("spectrum mode count does not match basis")
    lam = s.as_array()
    blocks = {}
    for n in range(basis.N_max + 1):
        vals = basis.sector(n).astype(float) @ lam
        blocks[(n, n)] = sp.diags(vals, format="csr")
    return FockOperator(basis, blocks)


def number_op(basis: FockBasis) -> FockOperator:
    """Total particle number: diagonal with entry n on sector n."""
    return FockOperator(basis, {
        (n, n): sp.identity(basis.sector_dim(n), format="csr") * float(n)
        for n in range(basis.N_max + 1)})


# ---------------------------------------------------------------------------
# Two-body kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoBodyKernel:
    """Two-body coefficients in the product mode basis.

    Attributes
    ----------
    J : int
    coeffs : ndarray, shape (J, J, J, J), complex
        ``coeffs[a, b, c, d]`` is the matrix element between phi_a x phi_b
        and phi_c x phi_d (0-indexed modes).
    psd_certificate : bool
        True when the induced matrix on the symmetric pair space has smallest
        eigenvalue >= -1e-10.
    """

    J: int
    coeffs: np.ndarray = field(repr=False)
    psd_certificate: bool = False

    def __post_init__(self):
        W = np.asarray(self.coeffs, dtype=complex)
        if W.shape != (self.J,) * 4:
            raise ValueError("kernel coefficient array must have shape (J,J,J,J)")
        swap = np.transpose(W, (1, 0, 3, 2))
        herm = np.conj(np.transpose(W, (2, 3, 0, 1)))
        defect = max(float(np.max(np.abs(W - swap))), float(np.max(np.abs(W - herm))))
        if defect > 1e-12:
            raise ValueError(f"kernel symmetry/Hermiticity defect {defect:.3e} > 1e-12")
        object.__setattr__(self, "coeffs", W)
        smallest = float(np.min(np.linalg.eigvalsh(kernel_symmetric_matrix(self))))
        object.__setattr__(self, "psd_certificate", smallest >= -1e-10)

    def nonzeros(self):
        """Sorted (a, b, c, d, value) tuples of nonzero coefficients."""
        idx = np.argwhere(np.abs(self.coeffs) > 0)
        out = [(int(a), int(b), int(c), int(d), complex(self.coeffs[a, b, c, d]))
               for a, b, c, d in idx]
        out.sort(key=lambda t: t[:4])
        return out

    def to_json(self) -> str:
        entries = [[a, b, c, d, v.real, v.imag] for a, b, c, d, v in self.nonzeros()]
        return json.dumps({"J": self.J, "entries": entries})

    @staticmethod
    def from_json(text: str) -> "TwoBodyKernel":
        doc = json.loads(text)
        J = int(doc["J"])
        W = np.zeros((J, J, J, J), dtype=complex)
        for a, b, c, d, re, im in doc["entries"]:
            W[int(a), int(b), int(c), int(d)] = re + 1j * im
        return TwoBodyKernel(J=J, coeffs=W)


def pair_basis(J: int):
    """Ordered-pair labels (a, b) with a <= b of the symmetric pair basis."""
    return [(a, b) for a in range(J) for b in range(a, J)]


def kernel_symmetric_matrix(kernel: TwoBodyKernel) -> np.ndarray:
    """Kernel compressed to the orthonormal symmetric pair basis.

    The basis vector for a < b is (phi_a x phi_b + phi_b x phi_a)/sqrt(2) and
    phi_a x phi_a for the diagonal pairs; the matrix is the symmetrizer
    conjugation of the product-basis coefficients.
    """
    pairs = pair_basis(kernel.J)
    W = kernel.coeffs
    out = np.zeros((len(pairs), len(pairs)), dtype=complex)
    for i, (a, b) in enumerate(pairs):
        perms_i = [(a, b)] if a == b else [(a, b), (b, a)]
        nu_i = 1.0 if a == b else 1.0 / math.sqrt(2.0)
        for j, (c, d) in enumerate(pairs):
            perms_j = [(c, d)] if c == d else [(c, d), (d, c)]
            nu_j = 1.0 if c == d else 1.0 / math.sqrt(2.0)
            acc = 0.0 + 0.0j
            for p, q in perms_i:
                for r, s_ in perms_j:
                    acc += W[p, q, r, s_]
            out[i, j] = nu_i * nu_j * acc
    return out


def pair_h_inv_trace(s: OneBodySpectrum, kernel: TwoBodyKernel) -> float:
    """Trace of w (h^-1 x h^-1) over the symmetric pair space of the J modes."""
    if s.mode_count != kernel.J:
        raise ValueError("spectrum and kernel mode counts differ")
    lam = s.as_array()
    S = kernel_symmetric_matrix(kernel)
    total = 0.0
    for i, (a, b) in enumerate(pair_basis(kernel.J)):
        total += (S[i, i] / (lam[a] * lam[b])).real
    return float(total)


def _sine_quartic_integral(a: int, b: int, c: int, d: int) -> float:
    """(2/pi)^2 * integral over (0, pi) of sin(ax) sin(bx) sin(cx) sin(dx).

    Evaluated by expanding the sine products into cosines; only zero-frequency
    combinations survive the integration.
    """
    def delta(m: int) -> int:
        return 1 if m == 0 else 0

    s = (delta(a - b - c + d) + delta(a - b + c - d)
         - delta(a - b - c - d) - delta(a - b + c + d)
         - delta(a + b - c + d) - delta(a + b + c - d)
         + delta(a + b - c - d) + delta(a + b + c + d))
    return s / (2.0 * math.pi)


def delta_kernel(J: int) -> TwoBodyKernel:
    """Contact interaction on (0, pi) restricted to the first J sine modes.

    ``W[(a,b),(c,d)] = integral phi_a phi_b phi_c phi_d`` with
    ``phi_n(x) = sqrt(2/pi) sin(n x)``; entries with odd index sum vanish by
    the reflection x -> pi - x.  Positive semidefinite on the symmetric pair
    space because multiplication by a point mass is.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    W = np.zeros((J, J, J, J))
    for a in range(J):
        for b in range(J):
            for c in range(J):
                for d in range(J):
                    W[a, b, c, d] = _sine_quartic_integral(a + 1, b + 1, c + 1, d + 1)
    return TwoBodyKernel(J=J, coeffs=W.astype(complex))


def finite_rank_kernel(J: int, vectors, weights) -> TwoBodyKernel:
    """Kernel w = sum_r weight_r |g_r><g_r| from symmetric pair vectors.

    Parameters
    ----------
    vectors : sequence of arrays
        Each of length J(J+1)/2, the coefficients of g_r on the orthonormal
        symmetric pair basis returned by :func:`pair_basis`.
    weights : sequence of positive floats
    """
    pairs = pair_basis(J)
    weights = [float(w) for w in weights]
    if len(vectors) != len(weights):
        raise ValueError("vectors and weights must have equal length")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    W = np.zeros((J, J, J, J), dtype=complex)
    for g_sym, w in zip(vectors, weights):
        g_sym = np.asarray(g_sym, dtype=complex)
        if g_sym.shape != (len(pairs),):
            raise ValueError(f"pair vector must have length {len(pairs)}")
        g_prod = np.zeros((J, J), dtype=complex)
        for coeff, (a, b) in zip(g_sym, pairs):
            if a == b:
                g_prod[a, a] += coeff
            else:
                g_prod[a, b] += coeff / math.sqrt(2.0)
                g_prod[b, a] += coeff / math.sqrt(2.0)
        W += w * np.einsum("ab,cd->abcd", g_prod, np.conj(g_prod))
    return TwoBodyKernel(J=J, coeffs=W)


def two_body_op(basis: FockBasis, kernel: TwoBodyKernel) -> FockOperator:
    """Second quantization (1/2) sum W[(a,b),(c,d)] adag_a adag_b a_d a_c.

    Block-diagonal in the particle number; sectors 0 and 1 vanish, and the
    sector-n block equals the pairwise interaction sum over the n particles.
    """
    if kernel.J != basis.J:
        raise ValueError("kernel and basis mode counts differ")
    nz = kernel.nonzeros()
    blocks = {}
    for n in range(2, basis.N_max + 1):
        occs = basis.sector(n)
        rows, cols, vals = [], [], []
        for pos in range(occs.shape[0]):
            occ = occs[pos]
            for a, b, c, d, w in nz:
                if occ[c] == 0:
                    continue
                occ2 = occ.copy()
                amp_sq = float(occ2[c])
                occ2[c] -= 1
                if occ2[d] == 0:
                    continue
                amp_sq *= occ2[d]
                occ2[d] -= 1
                amp_sq *= occ2[b] + 1
                occ2[b] += 1
                amp_sq *= occ2[a] + 1
                occ2[a] += 1
                _, tgt = basis.index(occ2)
                rows.append(tgt)
                cols.append(pos)
                vals.append(0.5 * w * math.sqrt(amp_sq))
        blocks[(n, n)] = sp.csr_matrix((vals, (rows, cols)),
                                       shape=(occs.shape[0], occs.shape[0]))
    return FockOperator(basis, blocks)


def hamiltonian(basis: FockBasis, s: OneBodySpectrum, kernel: TwoBodyKernel | None,
                lam: float) -> FockOperator:
    """H_lambda = dGamma(h) + lambda * W_op; Hermitian, block-diagonal in N.

    Repulsive coupling only: lambda < 0 is rejected.
    """
    if lam < 0:
        raise ValueError("coupling must be nonnegative (repulsive interactions only)")
    H = dGamma_op(basis, s)
    if kernel is not None and lam > 0:
        H = H + two_body_op(basis, kernel) * lam
    return H


def wick_identity_check(basis: FockBasis, v, k: int) -> float:
    """Deviation of a(v)^k adag(v)^k from its normally ordered expansion.

    Both sides of

        a(v)^k adag(v)^k
            = sum_{l=0}^{k} C(k,l) (k!/l!) |v|^(2(k-l)) adag(v)^l a(v)^l

    are assembled as explicit matrices and compared on the sectors
    n <= N_max - k, where the cutoff cannot contaminate either side.  For a
    unit vector the norm factors disappear and the classical normal-ordering
    formula is recovered; the k = 1 case is the canonical commutation relation
    a adag = adag a + |v|^2.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k > basis.N_max - 1:
        raise ValueError(f"k={k} too large for cutoff N_max={basis.N_max}")
    v = np.asarray(v, dtype=complex)
    norm_sq = float(np.vdot(v, v).real)
    A = mode_annihilator(basis, v)
    Adag = mode_creator(basis, v)

    lhs = identity_op(basis)
    for _ in range(k):
        lhs = A @ lhs
    for _ in range(k):
        lhs = lhs @ Adag
    # lhs is now a(v)^k adag(v)^k

    rhs = None
    for ell in range(k + 1):
        coeff = math.comb(k, ell) * math.factorial(k) / math.factorial(ell)
        coeff *= norm_sq ** (k - ell)
        term = identity_op(basis)
        for _ in range(ell):
            term = term @ A
        for _ in range(ell):
            term = Adag @ term
        rhs = term * coeff if rhs is None else rhs + term * coeff

    safe = set(range(basis.N_max - k + 1))
    return lhs.max_block_deviation(rhs, sectors=safe)


def ccr_defect(basis: FockBasis) -> float:
    """Max deviation of [a_i, adag_j] from delta_ij over all mode pairs.

    The commutator is assembled blockwise and compared on the sectors
    n <= N_max - 1; on the top sector the truncated adag is zero, so the
    relation necessarily fails there and is excluded by design.
    """
    safe = set(range(basis.N_max))
    worst = 0.0
    for i in range(basis.J):
        a_i = annihilation_op(basis, i)
        for j in range(basis.J):
            adag_j = creation_op(basis, j)
            comm = a_i @ adag_j - adag_j @ a_i
            target = identity_op(basis) * (1.0 if i == j else 0.0)
            worst = max(worst, comm.max_block_deviation(target, sectors=safe))
    return worst
