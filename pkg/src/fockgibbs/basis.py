"""Occupation-number basis of a truncated bosonic Fock space.

The Fock space over ``J`` modes is the direct sum of symmetric n-particle
spaces; truncating at total particle number ``N_max`` leaves, for each sector
n, the C(n+J-1, J-1) occupation vectors (n_1, ..., n_J) with sum n.  Basis
vectors are the *orthonormalized* symmetric tensors: the unnormalized
symmetric tensor built from an occupation has squared norm ``prod_i n_i!``,
and every matrix in this package is expressed in the orthonormal basis, so
Hermiticity and traces are the standard matrix ones.

Sectors are enumerated in descending lexicographic order of the counts,
fixed once and for all so that results are bit-stable across runs.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FockBasis",
    "build_basis",
    "sector_dimension",
    "symmetric_norm_factor",
    "DEFAULT_STATE_CEILING",
]

DEFAULT_STATE_CEILING = 5_000_000


def sector_dimension(J: int, n: int) -> int:
    """Number of occupation vectors of J modes with total n: C(n+J-1, J-1).

    Computed exactly in integer arithmetic; values beyond the 64-bit range
    raise OverflowError rather than wrapping.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    if n < 0:
        raise ValueError("n must be nonnegative")
    dim = math.comb(n + J - 1, J - 1)
    if dim > np.iinfo(np.int64).max:
        raise OverflowError(f"sector dimension C({n + J - 1},{J - 1}) exceeds int64")
    return dim


def symmetric_norm_factor(occ) -> int:
    """Squared norm ``prod_i n_i!`` of the unnormalized symmetric tensor.

    Dividing the symmetric tensor with occupation ``occ`` by the square root
    of this factor yields the orthonormal basis vector used throughout.
    """
    result = 1
    for n in occ:
        n = int(n)
        if n < 0:
            raise ValueError("occupation numbers must be nonnegative")
        result *= math.factorial(n)
    return result


def _compositions_desc(n: int, J: int):
    """Yield all J-tuples of nonnegative ints summing to n, descending lex."""
    if J == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions_desc(n - first, J - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FockBasis:
    """Indexed occupation basis of the truncated Fock space.

    Attributes
    ----------
    J : int
        Number of modes.
    N_max : int
        Particle-number cutoff; sectors 0..N_max are stored.
    sectors : tuple of ndarray
        ``sectors[n]`` has shape (dim_n, J); row p is the occupation vector
        at position p of sector n.
    """

    J: int
    N_max: int
    sectors: tuple = field(repr=False)
    _offsets: np.ndarray = field(repr=False)
    _lookup: dict = field(repr=False)

    @property
    def total_dim(self) -> int:
        return int(self._offsets[-1])

    def sector(self, n: int) -> np.ndarray:
        return self.sectors[n]

    def sector_dim(self, n: int) -> int:
        return self.sectors[n].shape[0]

    def sector_offset(self, n: int) -> int:
        """Flat index of the first state of sector n."""
        return int(self._offsets[n])

    def index(self, occ) -> tuple:
        """Map an occupation vector to its (sector, position) pair."""
        key = tuple(int(x) for x in occ)
        try:
            return self._lookup[key]
        except KeyError:
            raise KeyError(f"occupation {key} not in basis (J={self.J}, "
                           f"N_max={self.N_max})") from None

    def flat_index(self, occ) -> int:
        n, p = self.index(occ)
        return self.sector_offset(n) + p

    def occupation(self, n: int, pos: int) -> tuple:
        return tuple(int(x) for x in self.sectors[n][pos])

    def sector_totals(self) -> np.ndarray:
        """Array of sector dimensions, indices 0..N_max."""
        return np.array([s.shape[0] for s in self.sectors], dtype=np.int64)


def build_basis(J: int, N_max: int, state_ceiling: int = DEFAULT_STATE_CEILING) -> FockBasis:
    """Enumerate all occupation vectors with total <= N_max.

    Equal parameters return the *same* (immutable) basis object, so states
    and operators built independently but with matching parameters pass the
    identity checks used throughout the package.

    Parameters
    ----------
    J : int
        Number of modes (>= 1).
    N_max : int
        Particle cutoff (>= 0).
    state_ceiling : int
        Resource guard: refuse to build a basis with more states than this.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    if N_max < 0:
        raise ValueError("N_max must be nonnegative")
    total = math.comb(N_max + J, J)  # hockey-stick sum of sector dimensions
    if total > state_ceiling:
        raise ValueError(
            f"basis with {total} states exceeds the ceiling of {state_ceiling}; "
            "raise state_ceiling explicitly if this size is intended"
        )
    return _build_cached(J, N_max)


@functools.lru_cache(maxsize=64)
def _build_cached(J: int, N_max: int) -> FockBasis:
    sectors = []
    lookup = {}
    offsets = np.zeros(N_max + 2, dtype=np.int64)
    for n in range(N_max + 1):
        occs = np.array(list(_compositions_desc(n, J)), dtype=np.int64).reshape(-1, J)
        occs.setflags(write=False)
        sectors.append(occs)
        for pos in range(occs.shape[0]):
            lookup[tuple(int(x) for x in occs[pos])] = (n, pos)
        offsets[n + 1] = offsets[n] + occs.shape[0]
    return FockBasis(J=J, N_max=N_max, sectors=tuple(sectors),
                     _offsets=offsets, _lookup=lookup)
