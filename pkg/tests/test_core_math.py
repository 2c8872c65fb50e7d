import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import central_diff, naive_matmul
from proxygml.core_math import l2_normalize_backward, l2_normalize_rows, matmul, top_k_indices, top_k_rows
from proxygml.errors import DegenerateInputError, ParameterError, ShapeError


def test_matmul_identity():
    np.testing.assert_array_equal(matmul([[1, 0], [0, 1]], [[3, 4], [5, 6]]), [[3, 4], [5, 6]])


def test_matmul_row_times_column():
    assert matmul([[1, 2]], [[3], [4]]).tolist() == [[11.0]]


def test_matmul_bit_exact_vs_triple_loop(rng):
    a, b = rng.standard_normal((7, 5)), rng.standard_normal((5, 3))
    assert np.array_equal(matmul(a, b), naive_matmul(a.tolist(), b.tolist()))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_matmul_bit_exact_property(m, k, n, seed):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((m, k)), r.standard_normal((k, n))
    if m * k * n <= 20000:
        assert np.array_equal(matmul(a, b), naive_matmul(a.tolist(), b.tolist()))


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_normalize_345():
    x, norms = l2_normalize_rows([[3.0, 4.0], [1.0, 0.0]])
    np.testing.assert_allclose(x, [[0.6, 0.8], [1.0, 0.0]], atol=1e-15)
    np.testing.assert_allclose(norms, [5.0, 1.0])


def test_normalize_random_unit_and_idempotent(rng):
    x, _ = l2_normalize_rows(rng.standard_normal((10, 8)))
    assert np.all(np.abs(np.linalg.norm(x, axis=1) - 1) < 1e-12)
    x2, _ = l2_normalize_rows(x)
    assert np.max(np.abs(x2 - x)) < 1e-12


def test_normalize_zero_row_rejected():
    with pytest.raises(DegenerateInputError):
        l2_normalize_rows([[1.0, 1.0], [0.0, 0.0]])


def test_normalize_backward_examples():
    np.testing.assert_allclose(l2_normalize_backward([[1.0, 0.0]], [[0.0, 1.0]]), [[0.0, 1.0]])
    np.testing.assert_allclose(l2_normalize_backward([[1.0, 0.0]], [[1.0, 0.0]]), [[0.0, 0.0]])


def test_normalize_backward_finite_difference(rng):
    x = rng.standard_normal((5, 4))
    c = rng.standard_normal((5, 4))

    def loss(z):
        u, _ = l2_normalize_rows(z)
        return float(np.sum(np.sin(u) * c))

    u, _ = l2_normalize_rows(x)
    analytic = l2_normalize_backward(x, np.cos(u) * c)
    numeric = central_diff(loss, x.copy())
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-6)
    assert rel.max() < 1e-6


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 5), elements=st.floats(-10, 10)),
       arrays(np.float64, (6, 5), elements=st.floats(-10, 10)))
def test_normalize_backward_orthogonal_to_unit_row(x, u):
    if np.any(np.linalg.norm(x, axis=1) < 1e-3):
        return
    g = l2_normalize_backward(x, u)
    unit = x / np.linalg.norm(x, axis=1, keepdims=True)
    assert np.all(np.abs(np.sum(g * unit, axis=1)) < 1e-10 * (1 + np.abs(u).max()))


def test_normalize_backward_shape_error():
    with pytest.raises(ShapeError):
        l2_normalize_backward(np.ones((2, 2)), np.ones((2, 3)))


def test_top_k_examples():
    assert top_k_indices([0.1, 0.9, 0.5], 2).tolist() == [1, 2]
    assert top_k_indices([0.5, 0.5, 0.1], 1).tolist() == [0]


def test_top_k_full_sort_oracle(rng):
    v = rng.standard_normal(200)
    oracle = sorted(sorted(range(200), key=lambda i: (-v[i], i))[:59])
    assert top_k_indices(v, 59).tolist() == oracle


@pytest.mark.parametrize("k", [0, 4])
def test_top_k_out_of_range(k):
    with pytest.raises(ParameterError):
        top_k_indices([1.0, 2.0, 3.0], k)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([-1.0, 0.0, 0.5, 1.0, 2.0]), min_size=1, max_size=30), st.data())
def test_top_k_rows_matches_vector_version_with_ties(values, data):
    k = data.draw(st.integers(1, len(values)))
    v = np.array(values)
    a = top_k_indices(v, k)
    assert a.tolist() == top_k_indices(v.copy(), k).tolist()
    assert top_k_rows(v[None, :], k)[0].tolist() == a.tolist()
    assert a.tolist() == sorted(sorted(range(len(v)), key=lambda i: (-v[i], i))[:k])
