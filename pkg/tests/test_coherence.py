import numpy as np
import pytest

from polrte.coherence import (
    CoherenceField,
    HermiticityError,
    matrix_to_stokes,
    stokes_to_matrix,
    trace_field,
    trace_product,
)

from conftest import make_grid


def test_unpolarized_is_half_identity():
    m = stokes_to_matrix(np.array([1.0, 0.0, 0.0, 0.0]))
    assert np.allclose(m, 0.5 * np.eye(2), atol=0)


def test_pure_q_polarization():
    m = stokes_to_matrix(np.array([1.0, 1.0, 0.0, 0.0]))
    assert np.allclose(m, np.diag([1.0, 0.0]), atol=0)


def test_pure_circular_polarization():
    m = stokes_to_matrix(np.array([0.0, 0.0, 0.0, 1.0]))
    assert np.allclose(m, 0.5 * np.array([[0, 1j], [-1j, 0]]), atol=0)


def test_matrix_to_stokes_examples():
    assert np.allclose(matrix_to_stokes(0.5 * np.eye(2)), [1, 0, 0, 0], atol=1e-15)
    assert np.allclose(matrix_to_stokes(np.diag([1.0, 0.0])), [1, 1, 0, 0], atol=1e-15)


def test_round_trip(rng):
    s = rng.normal(size=(50, 4))
    back = matrix_to_stokes(stokes_to_matrix(s))
    assert np.max(np.abs(back - s)) < 1e-14


def test_non_hermitian_rejected():
    m = 0.5 * np.eye(2, dtype=complex)
    m[0, 1] += 1e-3
    with pytest.raises(HermiticityError):
        matrix_to_stokes(m)


def test_hermiticity_tolerance_scales():
    m = 0.5 * np.eye(2, dtype=complex)
    m[0, 1] += 1e-14
    matrix_to_stokes(m)  # within tolerance: no raise


def test_trace_field_matches_matrix_diagonal(rng):
    g = make_grid(6, angles=8)
    data = rng.normal(size=g.shape + (4,))
    w = CoherenceField(g, data)
    mats = w.matrices()
    diag_sum = np.real(mats[..., 0, 0] + mats[..., 1, 1])
    assert np.max(np.abs(trace_field(w) - diag_sum)) < 1e-14


def test_trace_field_constant():
    g = make_grid(6, angles=8)
    w = CoherenceField.unpolarized(g, 2.0)
    assert np.all(trace_field(w) == 2.0)


def test_trace_product_identity(rng):
    # Tr(AB) via Stokes components against the explicit matrix product
    a = rng.normal(size=(40, 4))
    b = rng.normal(size=(40, 4))
    ma, mb = stokes_to_matrix(a), stokes_to_matrix(b)
    ref = np.real(np.einsum("...ij,...ji->...", ma, mb))
    assert np.max(np.abs(trace_product(a, b) - ref)) < 1e-13


def test_field_shape_validated():
    g = make_grid(6, angles=8)
    with pytest.raises(ValueError):
        CoherenceField(g, np.zeros(g.shape + (3,)))
