import math

import numpy as np
import pytest

from core.corpus import FeatureTable, Label, Split
from core.errors import DimensionMismatch, SeriesTooShort, TooFewRows
from core.features import (
    STATISTICS, Standardizer, describe_feature, energy_entropy, feature_names,
    feature_vector, fit_standardizer, summarize_row,
)


def test_summary_of_small_series():
    s = summarize_row([1.0, 2.0, 3.0])

    assert s.mean == pytest.approx(2.0)
    assert s.variance == pytest.approx(2.0 / 3.0)
    assert s.rms == pytest.approx(math.sqrt(14.0 / 3.0))
    assert s.skewness == pytest.approx(0.0, abs=1e-12)
    assert not s.degenerate


def test_constant_series_is_flagged():
    s = summarize_row([5.0, 5.0, 5.0, 5.0])

    assert s.degenerate
    assert s.sd == 0.0
    assert s.skewness == 0.0
    assert s.kurtosis == 3.0
    assert s.entropy == pytest.approx(2.0)


def test_numerically_constant_series_is_flagged():
    for series in ([1.0, 1.0 + 2.22e-16, 1.0, 1.0], [-40.0] * 7 + [np.nextafter(-40.0, 0.0)]):
        s = summarize_row(series)

        assert s.degenerate
        assert (s.skewness, s.kurtosis) == (0.0, 3.0)
        assert all(math.isfinite(v) for v in s.as_tuple())


def test_feature_vector_of_a_near_constant_row_is_finite():
    coeffs = np.vstack([np.full(50, 3.0), np.linspace(-1.0, 1.0, 50)])
    coeffs[0, 10] = np.nextafter(3.0, 4.0)

    features = feature_vector(coeffs)

    assert np.isfinite(features).all()
    assert features[4] == 3.0


def test_two_point_alternating_series():
    s = summarize_row([1.0, -1.0] * 50)

    assert s.skewness == pytest.approx(0.0, abs=1e-12)
    assert s.kurtosis == pytest.approx(1.0, rel=1e-12)


def test_series_too_short():
    with pytest.raises(SeriesTooShort):
        summarize_row([1.0])


def test_all_zero_series_has_zero_entropy():
    assert energy_entropy(np.zeros(8)) == 0.0


def test_moment_identities_and_entropy_bounds():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        x = rng.standard_normal(n) * rng.uniform(0.1, 10) + rng.uniform(-5, 5)
        s = summarize_row(x)

        assert s.variance == pytest.approx(s.sd ** 2, rel=1e-9)
        assert s.rms ** 2 == pytest.approx(s.mean ** 2 + s.variance, rel=1e-9)
        assert -1e-12 <= s.entropy <= math.log2(n) + 1e-12


def test_brute_force_moments():
    x = np.random.default_rng(1).standard_normal(40)
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    m3 = np.mean((x - m) ** 3)
    m4 = np.mean((x - m) ** 4)

    s = summarize_row(x)

    assert s.skewness == pytest.approx(m3 / m2 ** 1.5, rel=1e-9)
    assert s.kurtosis == pytest.approx(m4 / m2 ** 2, rel=1e-9)


def test_feature_layout_for_23_coefficients():
    names = feature_names(23)

    assert len(names) == 161
    assert names[0] == 'f001' and names[-1] == 'f161'
    assert describe_feature('f001') == (1, 'mean')
    assert describe_feature('f009') == (2, 'sd')
    assert describe_feature('f161') == (23, 'variance')


def test_feature_vector_ordering():
    rng = np.random.default_rng(2)
    matrix = rng.standard_normal((2, 30))

    vector = feature_vector(matrix)

    assert vector.shape == (14,)
    np.testing.assert_array_equal(vector[:7], summarize_row(matrix[0]).as_tuple())
    assert vector[STATISTICS.index('mean')] == pytest.approx(matrix[0].mean())
    np.testing.assert_array_equal(feature_vector(matrix), vector)


def test_standardizer_two_points():
    z = Standardizer.fit([[0.0], [2.0]])

    assert z.means[0] == 1.0 and z.sds[0] == 1.0
    np.testing.assert_allclose(z.apply([[0.0], [2.0]]), [[-1.0], [1.0]])


def test_standardizer_constant_column_passes_through():
    z = Standardizer.fit([[3.0, 1.0], [3.0, 2.0], [3.0, 4.0]])

    assert z.sds[0] == 1.0
    np.testing.assert_array_equal(z.apply([[3.0, 1.0]])[:, 0], [0.0])


def test_standardized_training_rows_and_idempotence():
    X = np.random.default_rng(4).standard_normal((50, 6)) * 3 + 7
    once = Standardizer.fit(X).apply(X)

    np.testing.assert_allclose(once.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(once.std(axis=0), 1.0, atol=1e-9)
    np.testing.assert_allclose(Standardizer.fit(once).apply(once), once, atol=1e-9)


def test_standardizer_errors():
    with pytest.raises(TooFewRows):
        Standardizer.fit([[1.0, 2.0]])
    with pytest.raises(DimensionMismatch):
        Standardizer.fit([[0.0], [2.0]]).apply([[1.0, 2.0]])


def test_fit_uses_training_rows_only():
    features = np.array([[0.0] * 14, [2.0] * 14, [100.0] * 14, [-50.0] * 14])
    table = FeatureTable(
        ['a', 'b', 'c', 'd'],
        [Label.PATIENT, Label.NON_PATIENT, Label.PATIENT, Label.NON_PATIENT],
        [Split.TRAIN, Split.TRAIN, Split.VALIDATION, Split.TEST],
        features, 2,
    )

    z = fit_standardizer(table)

    np.testing.assert_array_equal(z.means, 1.0)
    np.testing.assert_allclose(z.apply(features[2:3]), 99.0)
