"""One-particle models as spectral data.

Every downstream quantity (Hamiltonians, Gibbs weights, Gaussian field
variances) depends on the one-body operator h only through its eigenvalues
``lambda_1 <= lambda_2 <= ...`` on the retained modes, so the model is stored
purely spectrally.  Mode eigenfunctions enter only through two-body kernel
coefficients, which are built elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OneBodySpectrum",
    "dirichlet_spectrum",
    "linear_spectrum",
    "custom_spectrum",
    "schatten_trace",
]


@dataclass(frozen=True)
class OneBodySpectrum:
    """Eigenvalues of a positive one-body operator on J retained modes.

    Attributes
    ----------
    eigenvalues : tuple of float
        Strictly positive energies, sorted nondecreasing.
    family_tag : str
        One of ``dirichlet_interval``, ``anharmonic``, ``custom`` —
        provenance label used in reports.
    """

    eigenvalues: tuple = field()
    family_tag: str = "custom"

    def __post_init__(self):
        vals = tuple(float(x) for x in self.eigenvalues)
        if len(vals) == 0:
            raise ValueError("spectrum must contain at least one mode")
        if any(not math.isfinite(x) or x <= 0 for x in vals):
            raise ValueError("all eigenvalues must be strictly positive")
        if any(a > b for a, b in zip(vals, vals[1:])):
            raise ValueError("eigenvalues must be sorted nondecreasing")
        object.__setattr__(self, "eigenvalues", vals)
        if self.family_tag not in ("dirichlet_interval", "anharmonic", "custom"):
            raise ValueError(f"unknown family_tag {self.family_tag!r}")

    @property
    def mode_count(self) -> int:
        return len(self.eigenvalues)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=float)


def dirichlet_spectrum(J: int) -> OneBodySpectrum:
    """Spectrum lambda_n = n^2 of -d^2/dx^2 on (0, pi) with Dirichlet ends.

    Parameters
    ----------
    J : int
        Number of retained modes, J >= 1.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    return OneBodySpectrum(
        tuple(float(n * n) for n in range(1, J + 1)), "dirichlet_interval"
    )


def linear_spectrum(J: int, slope: float = 1.0) -> OneBodySpectrum:
    """Spectrum lambda_n = slope * n, n = 1..J.

    A linearly growing spectrum has divergent sum of 1/lambda_n as J grows,
    which is the regime probed by the Schatten-p (p > 1) campaign.
    """
    if J < 1:
        raise ValueError("J must be a positive integer")
    if slope <= 0:
        raise ValueError("slope must be positive")
    return OneBodySpectrum(tuple(slope * n for n in range(1, J + 1)), "anharmonic")


def custom_spectrum(eigenvalues) -> OneBodySpectrum:
    """Wrap an explicit eigenvalue list (e.g. a constant-shifted model)."""
    return OneBodySpectrum(tuple(eigenvalues), "custom")


def schatten_trace(s: OneBodySpectrum, p: float) -> float:
    """Truncated trace of h^{-p} over the retained modes: sum_j lambda_j^{-p}."""
    if p <= 0:
        raise ValueError("p must be positive")
    return float(np.sum(s.as_array() ** (-p)))
