import numpy as np
import pytest
import pywt
import hypothesis.strategies as st
from hypothesis import given, settings

from sensing.errors import InvalidInputError
from sensing.wavelet_basis import (
    BoundaryMode,
    CoefficientPyramid,
    DyadicInterval,
    WaveletSpec,
    daubechies,
    fwt_forward,
    fwt_inverse,
    haar,
    load_filter_table,
    support,
    support_cover,
)


def _flatten(pyramid):
    return np.concatenate([pyramid.scaling, *pyramid.details])


def test_haar_constant_input():
    pyramid = fwt_forward([1.0, 1.0, 1.0, 1.0], haar(0))
    assert pyramid.scaling == pytest.approx([2.0])
    for d in pyramid.details:
        assert np.allclose(d, 0.0)


@pytest.mark.parametrize("spec_args, level", [((1, 0), 5), ((2, 2), 6), ((4, 3), 7), ((8, 5), 8)])
def test_forward_matches_dense_matrix(dense_analysis, spec_args, level):
    spec = daubechies(*spec_args)
    x = np.random.default_rng(level).standard_normal(2 ** level)
    W = dense_analysis(spec, level)
    np.testing.assert_allclose(_flatten(fwt_forward(x, spec)), W @ x, atol=1e-12)
    np.testing.assert_allclose(W @ W.T, np.eye(2 ** level), atol=1e-12)


def test_inverse_of_unit_coefficient_is_basis_vector(dense_analysis, db2_spec):
    W = dense_analysis(db2_spec, 6)
    pyramid = fwt_forward(np.zeros(64), db2_spec)
    details = [d.copy() for d in pyramid.details]
    details[2][5] = 1.0  # beta_{4,5}
    unit = CoefficientPyramid(pyramid.scaling, tuple(details), pyramid.top_level)
    row = 4 + 4 + 8 + 5
    np.testing.assert_allclose(fwt_inverse(unit, db2_spec), W[row], atol=1e-12)


def test_haar_matches_pywavelets(rng):
    x = rng.standard_normal(256)
    ours = fwt_forward(x, haar(0))
    theirs = pywt.wavedec(x, "haar", mode="periodization", level=8)
    np.testing.assert_allclose(ours.scaling, theirs[0], atol=1e-12)
    for d, expected in zip(ours.details, theirs[1:]):
        np.testing.assert_allclose(d, expected, atol=1e-12)


@pytest.mark.parametrize("N, j0", [(1, 0), (2, 2), (8, 5)])
@pytest.mark.parametrize("level", [6, 9, 14])
def test_round_trip_and_parseval(N, j0, level):
    spec = daubechies(N, j0)
    x = np.random.default_rng(level * 10 + N).standard_normal(2 ** level)
    pyramid = fwt_forward(x, spec)
    assert np.max(np.abs(fwt_inverse(pyramid, spec) - x)) <= 1e-10 * np.linalg.norm(x)
    assert pyramid.energy() == pytest.approx(float(np.sum(x ** 2)), rel=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("level", range(6, 15))
def test_round_trip_on_random_vectors_at_every_level(level):
    spec = daubechies(8, 5)
    rng = np.random.default_rng(level)
    for _ in range(200):
        x = rng.standard_normal(2 ** level)
        pyramid = fwt_forward(x, spec)
        assert np.max(np.abs(fwt_inverse(pyramid, spec) - x)) <= 1e-10
        assert abs(pyramid.energy() - np.sum(x ** 2)) <= 1e-9 * np.sum(x ** 2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=32, max_size=32))
def test_round_trip_property(values):
    spec = daubechies(2, 2)
    x = np.array(values)
    assert np.allclose(fwt_inverse(fwt_forward(x, spec), spec), x, atol=1e-9)


def test_inverse_of_zero_pyramid_is_zero(db4_spec):
    zero = fwt_forward(np.zeros(128), db4_spec)
    assert not np.any(fwt_inverse(zero, db4_spec))


@pytest.mark.parametrize("N, j0", [(2, 2), (4, 3)])
def test_interior_details_vanish_on_polynomials(N, j0):
    spec = daubechies(N, j0)
    level = 9
    x = np.arange(2 ** level) / 2 ** level
    coefficients = np.random.default_rng(N).standard_normal(N)
    samples = np.polyval(coefficients, x - 0.5)
    pyramid = fwt_forward(samples, spec)
    L = spec.half_support
    for j in range(j0, level):
        interior = [k for k in range(2 ** j) if k - L + 1 >= 0 and k + L <= 2 ** j]
        assert np.max(np.abs(pyramid.detail(j)[interior]), initial=0.0) <= 1e-8 * np.linalg.norm(samples)


def test_support_examples():
    assert support(2, 1, haar()) == DyadicInterval(1, 2, 2)
    db8 = daubechies(8, 5)
    assert support(5, 0, db8) == DyadicInterval(0, 8, 5)
    assert support(5, 31, db8) == DyadicInterval(24, 32, 5)
    with pytest.raises(InvalidInputError):
        support(5, 32, db8)


def test_support_cover_wraps():
    db8 = daubechies(8, 5)
    assert support_cover(5, 0, db8) == (DyadicInterval(0, 8, 5), DyadicInterval(25, 32, 5))
    assert support_cover(5, 31, db8) == (DyadicInterval(0, 7, 5), DyadicInterval(24, 32, 5))
    assert support_cover(5, 12, db8) == (DyadicInterval(5, 20, 5),)
    assert support_cover(2, 1, db8) == (DyadicInterval(0, 4, 2),)


def test_dyadic_interval_containment():
    outer = DyadicInterval(0, 2, 3)
    assert outer.contains(DyadicInterval(1, 3, 4))
    assert not outer.contains(DyadicInterval(3, 5, 4))
    assert outer.intersects(DyadicInterval(3, 5, 4))
    assert outer.width == 0.25


def test_invalid_filters_rejected():
    with pytest.raises(InvalidInputError):
        WaveletSpec((1.0, 1.0), 1, 1, 0)
    with pytest.raises(InvalidInputError):
        WaveletSpec((2 ** -0.5, 2 ** -0.5, 0.0), 1, 1, 0)
    with pytest.raises(InvalidInputError):
        daubechies(99)


def test_transform_rejects_bad_lengths(haar_spec):
    with pytest.raises(InvalidInputError):
        fwt_forward(np.zeros(12), haar_spec)
    with pytest.raises(InvalidInputError):
        fwt_forward(np.zeros(4), daubechies(2, 2))
    with pytest.raises(InvalidInputError):
        fwt_inverse(fwt_forward(np.zeros(16), daubechies(2, 2)), daubechies(2, 1))


def test_load_filter_table(tmp_path):
    path = tmp_path / "haar.txt"
    path.write_text("# N L\n1 1\n0.7071067811865476\n0.7071067811865476\n")
    spec = load_filter_table(str(path), coarsest_level=0)
    assert spec.half_support == 1
    np.testing.assert_allclose(spec.h, haar().h)


def test_load_filter_table_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("two taps\n0.5\n")
    with pytest.raises(InvalidInputError):
        load_filter_table(str(path))


def test_interval_boundary_is_refused(tmp_path):
    path = tmp_path / "interval.txt"
    path.write_text("1 1 interval\n0.7071067811865476\n0.7071067811865476\n")
    spec = load_filter_table(str(path), coarsest_level=0)
    assert spec.boundary_mode is BoundaryMode.INTERVAL
    with pytest.raises(InvalidInputError, match="interval"):
        fwt_forward(np.zeros(8), spec)
    pyramid = fwt_forward(np.zeros(8), haar())
    with pytest.raises(InvalidInputError, match="interval"):
        fwt_inverse(pyramid, spec)
    path.write_text("1 1 folded\n0.7071067811865476\n0.7071067811865476\n")
    with pytest.raises(InvalidInputError):
        load_filter_table(str(path))
