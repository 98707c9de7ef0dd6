"""Arc geometry, traces, and arc-spectral decompositions."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from epilab.arcs import (TWO_PI, ArcSet, Trace, decompose_support, eigenpairs,
                         empty_arcset, fourier_coefficients,
                         homogeneity_exponent, split_big_small)
from epilab.errors import GeometryError, SupportMismatchError, ValidationError

# c = sin(theta) on (0, pi) projected on the first arc mode sqrt(2/pi) sin
FIRST_MODE_COEFF_HALF_PLANE = 1.2533141373155003  # sqrt(pi/2)


def test_arcset_normalizes_and_sorts():
    s = ArcSet(arcs=((5.0, 0.5), (1.0, 0.5)))
    assert s.arcs[0][0] == 1.0
    assert s.n_components == 2
    assert_allclose(s.total_length, 1.0)
    assert s.longest() == (1.0, 0.5)


def test_arcset_rejects_overlap():
    with pytest.raises(GeometryError):
        ArcSet(arcs=((0.0, 1.0), (0.5, 1.0)))


def test_arcset_rejects_overflow():
    with pytest.raises(GeometryError):
        ArcSet(arcs=((0.0, 7.0),))


def test_arcset_contains():
    s = ArcSet(arcs=((0.0, 1.0),))
    inside = s.contains(np.array([0.5, 2.0, 0.99, TWO_PI - 0.01]))
    assert inside.tolist() == [True, False, True, False]


def test_empty_arcset():
    assert empty_arcset().total_length == 0.0


def test_trace_validation():
    with pytest.raises(ValidationError):
        Trace(values=np.zeros((63, 1)))  # odd, too short
    with pytest.raises(ValidationError):
        Trace(values=np.array([[np.inf]] * 64))


def test_decompose_half_plane_is_exact():
    tr = Trace.from_function(lambda t: np.maximum(0.0, np.sin(t)), n_samples=1024)
    s = decompose_support(tr)
    assert s.n_components == 1
    start, length = s.arcs[0]
    assert_allclose(start % TWO_PI, 0.0, atol=1e-12)
    assert_allclose(length, math.pi, atol=1e-12)


def test_decompose_two_lobes():
    tr = Trace.from_function(lambda t: np.maximum(0.0, np.sin(2 * t)), n_samples=1024)
    s = decompose_support(tr)
    assert s.n_components == 2
    assert_allclose([a[1] for a in s.arcs], [math.pi / 2] * 2, atol=1e-12)
    assert_allclose([a[0] for a in s.arcs], [0.0, math.pi], atol=1e-12)


def test_decompose_full_and_empty():
    full = decompose_support(Trace.from_function(lambda t: np.ones_like(t)))
    assert full.is_full_circle()
    empty = decompose_support(Trace.from_function(lambda t: np.zeros_like(t)))
    assert empty.total_length == 0.0


def test_eigenpairs_quarter_arc():
    basis = eigenpairs((0.0, math.pi / 2), d=2, n_modes=4)
    assert_allclose(basis.lambdas()[0], 4.0, rtol=1e-14)
    assert_allclose(basis.alphas()[0], 2.0, rtol=1e-14)


def test_eigenpairs_three_half_pi():
    basis = eigenpairs((1.0, 1.5 * math.pi), d=2, n_modes=4)
    assert_allclose(basis.lambdas()[1], 16.0 / 9.0, rtol=1e-14)
    assert_allclose(basis.alphas()[1], 4.0 / 3.0, rtol=1e-14)


def test_homogeneity_exponent_higher_dimension():
    # alpha (alpha + d - 2) = lambda
    for d in (2, 3, 4):
        for lam in (0.5, 1.0, 4.0, 10.0):
            a = homogeneity_exponent(lam, d)
            assert_allclose(a * (a + d - 2), lam, rtol=1e-12)


def test_full_circle_basis_alphas_are_integers():
    basis = eigenpairs((0.0, TWO_PI), n_modes=7)
    assert basis.full_circle
    assert_allclose(basis.alphas(), [0, 1, 1, 2, 2, 3, 3])
    assert_allclose(basis.lambdas(), [0, 1, 1, 4, 4, 9, 9])


@pytest.mark.parametrize("arc", [(0.0, math.pi), (2.0, 0.9), (5.5, 1.8),
                                 (0.0, TWO_PI)])
def test_basis_orthonormality(arc):
    basis = eigenpairs(arc, n_modes=8)
    theta, w = basis.quadrature(4096)
    phi = basis.evaluate(theta)
    gram = (phi * w) @ phi.T
    assert_allclose(gram, np.eye(basis.n_modes), atol=1e-8)


@pytest.mark.parametrize("arc", [(0.0, math.pi), (2.0, 0.9)])
def test_basis_derivative_orthogonality(arc):
    basis = eigenpairs(arc, n_modes=6)
    theta, w = basis.quadrature(8192)
    dphi = basis.evaluate_deriv(theta)
    gram = (dphi * w) @ dphi.T
    assert_allclose(gram, np.diag(basis.lambdas()),
                    atol=1e-6 * max(basis.lambdas()))


def test_fourier_first_mode_coefficient():
    tr = Trace.from_function(lambda t: np.maximum(0.0, np.sin(t)), n_samples=4096)
    st = fourier_coefficients(tr, eigenpairs((0.0, math.pi), n_modes=8))
    assert_allclose(st.coeffs[0, 0], FIRST_MODE_COEFF_HALF_PLANE, rtol=1e-6)
    assert_allclose(st.coeffs[1:, 0], 0.0, atol=1e-6)
    assert st.tail < 1e-8


def test_fourier_parseval():
    rng = np.random.default_rng(7)
    basis = eigenpairs((1.2, 2.1), n_modes=6)
    c = rng.normal(size=(6, 1))
    tr = Trace(values=basis.evaluate(np.arange(8192) * TWO_PI / 8192).T @ c)
    st = fourier_coefficients(tr, basis)
    assert_allclose(st.coeffs, c, atol=1e-6)
    assert abs(st.tail) < 1e-8


def test_fourier_rejects_mass_outside_arc():
    tr = Trace.from_function(lambda t: np.ones_like(t))
    with pytest.raises(SupportMismatchError):
        fourier_coefficients(tr, eigenpairs((0.0, math.pi), n_modes=4))


def test_reconstruct_matches_input_for_band_limited_trace():
    basis = eigenpairs((0.5, 2.5), n_modes=5)
    theta = np.arange(2048) * TWO_PI / 2048
    vals = basis.evaluate(theta).T @ np.array([[1.0], [-0.5], [0.25], [0.0], [0.1]])
    st = fourier_coefficients(Trace(values=vals), basis)
    assert_allclose(st.reconstruct(theta), vals, atol=1e-6)


def test_split_big_small():
    s = ArcSet(arcs=((0.0, math.pi + 0.2), (4.0, 0.8)))
    big, small = split_big_small(s, delta0=0.3)
    assert big == (0.0, math.pi + 0.2)
    assert small.arcs == ((4.0, 0.8),)

    only_small = ArcSet(arcs=((0.0, 1.0), (2.0, 1.0)))
    big, small = split_big_small(only_small, delta0=0.3)
    assert big is None
    assert small.n_components == 2


def test_split_big_small_flags_very_large_total():
    s = ArcSet(arcs=((0.0, math.pi - 0.05), (math.pi, math.pi - 0.05)))
    with pytest.raises(GeometryError):
        split_big_small(s, delta0=0.3)
