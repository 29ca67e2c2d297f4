"""Monte Carlo plumbing: streams, running moments, ratio estimators."""

import numpy as np
import pytest

from fockgibbs import (MCEstimate, RatioAccumulator, StreamingMoments,
                       complex_gaussian, substream)


def test_substream_is_reproducible_and_disjoint():
    a1 = substream(123, 0).standard_normal(1000)
    a2 = substream(123, 0).standard_normal(1000)
    b = substream(123, 1).standard_normal(1000)
    np.testing.assert_array_equal(a1, a2)
    assert np.max(np.abs(a1 - b)) > 1e-3  # distinct streams decorrelate


def test_complex_gaussian_variances():
    rng = substream(7, 0)
    var = np.array([0.5, 2.0])
    z = complex_gaussian(rng, var, 200_000)
    est = np.mean(np.abs(z) ** 2, axis=0)
    # E|z|^2 = var per mode; MC error ~ var/sqrt(n)
    np.testing.assert_allclose(est, var, rtol=0.02)
    assert abs(np.mean(z)) < 0.02


def test_streaming_moments_match_numpy_in_chunks():
    rng = np.random.default_rng(42)
    data = rng.normal(size=10_000) * 3.0 + 1.5
    acc = StreamingMoments()
    for chunk in np.array_split(data, 13):
        acc.update(chunk)
    assert float(acc.mean) == pytest.approx(data.mean(), rel=1e-12)
    assert float(acc.variance()) == pytest.approx(data.var(ddof=1), rel=1e-10)
    assert float(acc.stderr()) == pytest.approx(
        data.std(ddof=1) / np.sqrt(data.size), rel=1e-10)


def test_streaming_moments_vector_shape():
    rng = np.random.default_rng(1)
    data = rng.normal(size=(5000, 2, 2)) + 1j * rng.normal(size=(5000, 2, 2))
    acc = StreamingMoments(shape=(2, 2), dtype=complex)
    for chunk in np.array_split(data, 7):
        acc.update(chunk)
    np.testing.assert_allclose(acc.mean, data.mean(axis=0), rtol=1e-12)


def test_ratio_accumulator_matches_direct_ratio():
    rng = np.random.default_rng(3)
    w = rng.uniform(0.2, 1.0, size=20_000)
    x = (rng.normal(size=20_000) + 2.0) * w  # pre-multiplied by the weight
    acc = RatioAccumulator()
    for xs, ws in zip(np.array_split(x, 9), np.array_split(w, 9)):
        acc.update(xs, ws)
    assert complex(acc.ratio).real == pytest.approx(x.sum() / w.sum(),
                                                    rel=1e-12)
    assert 0 < acc.ess <= 20_000
    assert acc.stderr() > 0


def test_ratio_accumulator_constant_is_noiseless():
    acc = RatioAccumulator()
    w = np.full(1000, 0.37)
    acc.update(5.0 * w, w)
    assert complex(acc.ratio).real == pytest.approx(5.0, rel=1e-14)
    assert acc.stderr() == pytest.approx(0.0, abs=1e-6)


def test_mc_estimate_interval_logic():
    est = MCEstimate(value=1.0, stderr=0.1, n_samples=100, seed=0)
    assert est.within(1.25, n_sigma=3.0)
    assert not est.within(1.5, n_sigma=3.0)
    doc = est.to_json_dict()
    assert doc["value"] == 1.0 and doc["n_samples"] == 100
