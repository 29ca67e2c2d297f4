"""Monte Carlo plumbing: reproducible streams and streaming statistics.

Every stochastic routine in the package draws from a counter-based Philox
generator keyed by a user seed and split into numbered substreams, so a
(seed, stream id) pair reproduces the identical sample sequence on any
machine.  Accumulation is chunked in a fixed order; estimates are therefore
bit-stable for a given configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RNG_ALGORITHM",
    "MCEstimate",
    "substream",
    "complex_gaussian",
    "StreamingMoments",
    "RatioAccumulator",
]

RNG_ALGORITHM = "philox4x64-jumped"


def substream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator number ``stream_id`` of the given seed.

    Streams are separated by jumping the Philox counter, which guarantees
    non-overlapping sequences without coordination.
    """
    if stream_id < 0:
        raise ValueError("stream_id must be nonnegative")
    bitgen = np.random.Philox(key=seed & (2**64 - 1))
    if stream_id:
        bitgen = bitgen.jumped(stream_id)
    return np.random.Generator(bitgen)


def complex_gaussian(rng: np.random.Generator, variances, size: int) -> np.ndarray:
    """Circular complex Gaussians, one column per mode.

    ``variances[j]`` is E|z_j|^2; real and imaginary parts are independent
    normals with half that variance.  Returns an array of shape
    (size, len(variances)).
    """
    variances = np.asarray(variances, dtype=float)
    if np.any(variances <= 0):
        raise ValueError("proposal variances must be positive")
    scale = np.sqrt(variances / 2.0)
    re = rng.standard_normal((size, variances.size))
    im = rng.standard_normal((size, variances.size))
    return (re + 1j * im) * scale


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo estimate with enough metadata to reproduce it."""

    value: complex | float
    stderr: float
    n_samples: int
    seed: int
    rng_algorithm: str = RNG_ALGORITHM
    flags: tuple = ()

    def __post_init__(self):
        if self.stderr < 0 or self.n_samples <= 0:
            raise ValueError("stderr must be >= 0 and n_samples positive")

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def within(self, target: float, n_sigma: float = 3.0,
               extra: float = 0.0) -> bool:
        """|value - target| <= n_sigma * stderr + extra."""
        return abs(self.value - target) <= n_sigma * self.stderr + extra

    def to_json_dict(self) -> dict:
        val = self.value
        doc = {"stderr": self.stderr, "n_samples": self.n_samples,
               "seed": self.seed, "rng_algorithm": self.rng_algorithm}
        if isinstance(val, complex):
            doc["value_re"] = val.real
            doc["value_im"] = val.imag
        else:
            doc["value"] = float(val)
        if self.flags:
            doc["flags"] = list(self.flags)
        return doc


class StreamingMoments:
    """Chunked mean/variance accumulation via pairwise (Chan) merging.

    Works for scalars or fixed-shape arrays, real or complex.  The variance
    tracked for complex data is E|x - mean|^2, so ``stderr`` bounds the
    modulus error of the mean.
    """

    def __init__(self, shape=(), dtype=float):
        self.shape = tuple(shape)
        self.n = 0
        self._mean = np.zeros(self.shape, dtype=dtype)
        self._m2 = np.zeros(self.shape, dtype=float)

    def update(self, chunk: np.ndarray):
        """Fold in a chunk whose axis 0 indexes samples."""
        chunk = np.asarray(chunk)
        b = chunk.shape[0]
        if b == 0:
            return
        mean_b = chunk.mean(axis=0)
        m2_b = np.sum(np.abs(chunk - mean_b) ** 2, axis=0).real
        if self.n == 0:
            self.n = b
            self._mean = mean_b.astype(self._mean.dtype, copy=True)
            self._m2 = np.asarray(m2_b, dtype=float)
            return
        delta = mean_b - self._mean
        total = self.n + b
        self._mean = self._mean + delta * (b / total)
        self._m2 = self._m2 + m2_b + np.abs(delta) ** 2 * (self.n * b / total)
        self.n = total

    @property
    def mean(self):
        if self.shape:
            return self._mean.copy()
        scalar = np.asarray(self._mean).item()
        return scalar

    def variance(self):
        if self.n < 2:
            return np.full(self.shape, np.inf) if self.shape else math.inf
        return self._m2 / (self.n - 1)

    def stderr(self):
        v = self.variance()
        out = np.sqrt(np.asarray(v, dtype=float) / max(self.n, 1))
        return out if self.shape else float(out)


@dataclass
class RatioAccumulator:
    """Delta-method statistics for a self-normalized ratio sum(x)/sum(w).

    ``x`` may be complex (matrix entries), ``w`` is a real weight.  Also
    tracks sum(w^2) for the effective sample size diagnostic
    ESS = (sum w)^2 / sum(w^2).
    """

    n: int = 0
    sum_x: complex = 0.0 + 0.0j
    sum_w: float = 0.0
    sum_xx: float = 0.0      # sum |x|^2
    sum_ww: float = 0.0      # sum w^2
    sum_xw: complex = field(default=0.0 + 0.0j)   # sum x*w

    def update(self, x_chunk: np.ndarray, w_chunk: np.ndarray):
        x_chunk = np.asarray(x_chunk)
        w_chunk = np.asarray(w_chunk, dtype=float)
        self.n += x_chunk.shape[0]
        self.sum_x += complex(x_chunk.sum())
        self.sum_w += float(w_chunk.sum())
        self.sum_xx += float(np.sum(np.abs(x_chunk) ** 2))
        self.sum_ww += float(np.sum(w_chunk ** 2))
        self.sum_xw += complex(np.sum(x_chunk * w_chunk))

    @property
    def ratio(self) -> complex:
        if self.sum_w == 0:
            raise ZeroDivisionError("all weights are zero")
        return self.sum_x / self.sum_w

    @property
    def ess(self) -> float:
        if self.sum_ww == 0:
            return 0.0
        return self.sum_w ** 2 / self.sum_ww

    def stderr(self) -> float:
        """First-order (delta method) standard error of the ratio."""
        n = self.n
        if n < 2 or self.sum_w == 0:
            return math.inf
        r = self.ratio
        mean_x = self.sum_x / n
        mean_w = self.sum_w / n
        var_x = max(0.0, self.sum_xx / n - abs(mean_x) ** 2)
        var_w = max(0.0, self.sum_ww / n - mean_w ** 2)
        cov_xw = self.sum_xw / n - mean_x * mean_w
        var_r = (var_x - 2.0 * (np.conj(r) * cov_xw).real
                 + abs(r) ** 2 * var_w) / mean_w ** 2
        var_r = max(0.0, var_r) * n / max(1, n - 1)
        return math.sqrt(var_r / n)

@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo matrix moment with per-entry standard errors."""

    labels: tuple
    matrix: np.ndarray = field(repr=False, default=None)
    stderr: np.ndarray = field(repr=False, default=None)
    n_samples: int = 0
    seed: int = 0
    ess: float = math.inf
    rng_algorithm: str = RNG_ALGORITHM
    flags: tuple = ()

    def max_sigma_gap(self, target: np.ndarray) -> float:
        """Largest entrywise |matrix - target| measured in stderr units."""
        gap = np.abs(self.matrix - np.asarray(target))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(gap == 0.0, 0.0, gap / np.maximum(self.stderr, 1e-300))
        return float(np.max(ratio))

    def to_json_dict(self) -> dict:
        return {
            "labels": [list(lab) for lab in self.labels],
            "matrix_re": np.asarray(self.matrix).real.tolist(),
            "matrix_im": np.asarray(self.matrix).imag.tolist(),
            "stderr": np.asarray(self.stderr).tolist(),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "ess": self.ess,
            "rng_algorithm": self.rng_algorithm,
            "flags": list(self.flags),
        }
