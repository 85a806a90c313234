import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, strategies as st

from steklov_shell import (SphereFunction, SphereGrid, analyze, integrate, normalize_to_volume,
                           random_perturbation, surface_gradient_sq, synthesize, unit_ball_volume,
                           volume_of_nearly_spherical, w1inf_norm)
from steklov_shell.sphere import (coefficient_degrees, harmonic_basis, laplace_beltrami_eigenvalues,
                                  n_coeffs, normalize_to_ball)

seeds = st.integers(0, 2**32 - 1)


def _random_coeffs(n, L, seed, mean_zero=False):
    c = np.random.default_rng(seed).standard_normal(n_coeffs(n, L))
    if mean_zero:
        c[0] = 0.0
    return c


# -- grids and basis ------------------------------------------------------

def test_grid_sizes_and_areas():
    g2 = SphereGrid.for_band_limit(2, 32)
    g3 = SphereGrid.for_band_limit(3, 16)
    assert g2.size == 256 and g2.resolves(32)
    assert g3.shape == (34, 68) and g3.resolves(16)
    assert g2.area == pytest.approx(2 * math.pi, rel=1e-15)
    assert g3.area == pytest.approx(4 * math.pi, rel=1e-14)


def test_degree_bookkeeping():
    assert n_coeffs(2, 3) == 7 and n_coeffs(3, 3) == 16
    assert list(coefficient_degrees(2, 2)) == [0, 1, 1, 2, 2]
    assert list(laplace_beltrami_eigenvalues(3, 2)) == [0, 2, 2, 2, 6, 6, 6, 6, 6]


@pytest.mark.parametrize("n,L", [(2, 8), (3, 6)])
def test_basis_orthonormal(n, L):
    grid = SphereGrid.for_band_limit(n, L)
    Y, _ = harmonic_basis(n, L, grid.theta, grid.phi)
    gram = Y.T @ (grid.weights[:, None] * Y)
    assert np.allclose(gram, np.eye(Y.shape[1]), atol=1e-12)


def test_real_harmonics_match_scipy():
    L = 5
    rng = np.random.default_rng(0)
    theta, phi = rng.uniform(0.1, 3.0, 20), rng.uniform(0, 2 * np.pi, 20)
    Y, _ = harmonic_basis(3, L, theta, phi)
    for l in range(L + 1):
        for m in range(-l, l + 1):
            # scipy's complex harmonics carry the Condon-Shortley phase
            ref = scipy.special.sph_harm_y(l, abs(m), theta, phi) if hasattr(scipy.special, "sph_harm_y") \
                else scipy.special.sph_harm(abs(m), l, phi, theta)
            ref = ref * (-1) ** abs(m)
            if m > 0:
                want = math.sqrt(2) * ref.real
            elif m < 0:
                want = math.sqrt(2) * ref.imag
            else:
                want = ref.real
            assert np.allclose(Y[:, l * l + l + m], want, atol=1e-12), (l, m)


@pytest.mark.parametrize("n", [2, 3])
def test_basis_gradient_matches_finite_difference(n):
    L, h = 6, 1e-6
    rng = np.random.default_rng(1)
    theta = rng.uniform(0.3, 2.8, 10)
    phi = rng.uniform(0, 2 * np.pi, 10) if n == 3 else None
    _, grads = harmonic_basis(n, L, theta, phi)
    Yp, _ = harmonic_basis(n, L, theta + h, phi)
    Ym, _ = harmonic_basis(n, L, theta - h, phi)
    assert np.allclose(grads[0], (Yp - Ym) / (2 * h), atol=1e-7)
    if n == 3:
        Yp, _ = harmonic_basis(n, L, theta, phi + h)
        Ym, _ = harmonic_basis(n, L, theta, phi - h)
        d_phi = (Yp - Ym) / (2 * h) / np.sin(theta)[:, None]
        assert np.allclose(grads[1], d_phi, atol=1e-7)


# -- analysis / synthesis -------------------------------------------------

def test_analyze_zero():
    spec = analyze(SphereFunction.zeros(2, 8))
    assert np.all(spec.coeffs == 0)


def test_analyze_cos():
    v = SphereFunction.from_function(np.cos, 2, 8)
    c = analyze(v).coeffs
    assert c[1] == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    c[1] = 0
    assert np.max(np.abs(c)) < 1e-14


def test_analyze_two_modes_roundtrip():
    fn = lambda t: np.cos(3 * t) + 0.5 * np.sin(5 * t)
    v = SphereFunction.from_function(fn, 2, 8)
    c = analyze(v).coeffs
    assert np.count_nonzero(np.abs(c) > 1e-12) == 2
    back = synthesize(analyze(v))
    assert np.max(np.abs(back.values - fn(v.grid.theta))) < 1e-12


def test_analyze_rejects_underresolved():
    v = SphereFunction.from_values(SphereGrid.circle(8), np.ones(8))
    with pytest.raises(ValueError):
        analyze(v, band_limit=10)


@given(st.sampled_from([2, 3]), seeds)
def test_parseval(n, seed):
    L = 10 if n == 2 else 6
    c = _random_coeffs(n, L, seed)
    v = SphereFunction.from_coeffs(n, c, L)
    spec = analyze(v)
    assert spec.l2_norm_sq() == pytest.approx(integrate(v.values**2, v.grid), rel=1e-9)
    assert spec.gradient_norm_sq() == pytest.approx(integrate(surface_gradient_sq(v)), rel=1e-9)


@given(st.sampled_from([2, 3]), seeds)
def test_poincare_for_mean_zero(n, seed):
    L = 10 if n == 2 else 6
    v = SphereFunction.from_coeffs(n, _random_coeffs(n, L, seed, mean_zero=True), L)
    assert integrate(surface_gradient_sq(v)) >= (n - 1) * integrate(v.values**2, v.grid) * (1 - 1e-12)


@given(st.sampled_from([2, 3]), seeds)
def test_poincare_equality_degree_one(n, seed):
    L = 4
    c = _random_coeffs(n, L, seed)
    c[coefficient_degrees(n, L) != 1] = 0
    v = SphereFunction.from_coeffs(n, c, L)
    grad = integrate(surface_gradient_sq(v))
    assert grad == pytest.approx((n - 1) * integrate(v.values**2, v.grid), rel=1e-10)


# -- gradients and integration --------------------------------------------

def test_gradient_of_constant_vanishes():
    for n in (2, 3):
        v = SphereFunction.zeros(n, 6).shifted(0.3)
        assert np.max(surface_gradient_sq(v).values) < 1e-24


def test_gradient_of_cos():
    v = SphereFunction.from_function(np.cos, 2, 8)
    g2 = surface_gradient_sq(v).values
    assert np.max(np.abs(g2 - np.sin(v.grid.theta) ** 2)) < 1e-10
    assert g2.max() == pytest.approx(1.0, abs=1e-10)


def test_gradient_of_y10_n3():
    v = SphereFunction.from_function(lambda t, p: np.cos(t), 3, 6)
    assert integrate(surface_gradient_sq(v)) == pytest.approx(2 * integrate(v.values**2, v.grid), rel=1e-8)


def test_integrate_examples():
    g2, g3 = SphereGrid.for_band_limit(2, 8), SphereGrid.for_band_limit(3, 8)
    assert integrate(np.ones(g2.size), g2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert integrate(np.ones(g3.size), g3) == pytest.approx(4 * math.pi, rel=1e-14)
    assert abs(integrate(np.cos(g2.theta) ** 2, g2) - math.pi) < 1e-14


# -- volume and normalization ---------------------------------------------

def test_volume_examples():
    assert volume_of_nearly_spherical(SphereFunction.zeros(3, 4), 2.0) == pytest.approx(4 * math.pi / 3 * 8, rel=1e-14)
    v = SphereFunction.from_function(lambda t: 0.1 * np.cos(t), 2, 4)
    assert volume_of_nearly_spherical(v) == pytest.approx(math.pi * 1.005, rel=1e-14)


@given(st.sampled_from([2, 3]), st.floats(-0.5, 0.5), st.floats(0.5, 3.0))
def test_volume_of_dilation(n, c, R):
    v = SphereFunction.zeros(n, 4).shifted(c)
    assert volume_of_nearly_spherical(v, R) == pytest.approx(unit_ball_volume(n) * R**n * (1 + c) ** n, rel=1e-13)


def test_volume_rejects_large_v():
    with pytest.raises(ValueError):
        volume_of_nearly_spherical(SphereFunction.zeros(2, 4).shifted(-1.0))


def test_normalize_constant_field():
    v = normalize_to_ball(SphereFunction.zeros(2, 4).shifted(0.1))
    assert np.max(np.abs(v.values)) < 1e-14


@pytest.mark.parametrize("n", [2, 3])
def test_normalize_second_order_shift(n):
    base = SphereFunction.harmonic(n, 2, 0, 6)
    for delta in (1e-2, 1e-3):
        v = base.scaled(delta)
        c = float(np.mean(normalize_to_ball(v).values - v.values))
        mean_v2 = integrate(v.values**2, v.grid) / v.grid.area
        assert c == pytest.approx(-(n - 1) / 2 * mean_v2, rel=20 * delta)


@given(st.sampled_from([2, 3]), seeds)
def test_normalize_random_volume_error(n, seed):
    v = random_perturbation(n, 0.05, seed, band_limit=8 if n == 3 else None)
    target = unit_ball_volume(n) * 8.0
    w = normalize_to_volume(v, target, 2.0)
    assert abs(volume_of_nearly_spherical(w, 2.0) - target) < 1e-12 * target


def test_normalize_unreachable():
    v = SphereFunction.zeros(2, 4)
    with pytest.raises(ValueError):
        normalize_to_volume(v, 100.0, 1.0)


# -- W^{1,inf} norm -------------------------------------------------------

def test_w1inf_examples():
    assert w1inf_norm(SphereFunction.zeros(2, 8)) == 0
    v = SphereFunction.from_function(lambda t: 0.05 * np.cos(t), 2, 8)
    assert w1inf_norm(v) == pytest.approx(0.05, rel=1e-12)
    v = SphereFunction.from_function(lambda t: 0.03 * np.cos(4 * t), 2, 8)
    assert w1inf_norm(v) == pytest.approx(0.12, rel=1e-12)


@given(st.sampled_from([2, 3]), seeds, st.floats(0.001, 0.4))
def test_random_perturbation_norm_and_determinism(n, seed, eps):
    L = None if n == 2 else 6
    a = random_perturbation(n, eps, seed, L)
    b = random_perturbation(n, eps, seed, L)
    assert w1inf_norm(a) == pytest.approx(eps, rel=1e-12)
    assert np.array_equal(a.values, b.values)
    assert a.coeffs[0] == 0


# -- serialization --------------------------------------------------------

@pytest.mark.parametrize("n,L", [(2, 8), (3, 5)])
def test_csv_and_json_roundtrip(tmp_path, n, L):
    v = SphereFunction.from_coeffs(n, _random_coeffs(n, L, 7), L)
    v.to_csv(tmp_path / "v.csv")
    w = SphereFunction.from_csv(tmp_path / "v.csv", L)
    assert np.allclose(w.coeffs, v.coeffs, atol=1e-12)
    v.to_json(tmp_path / "v.json")
    u = SphereFunction.from_json(tmp_path / "v.json")
    assert np.array_equal(u.coeffs, v.coeffs)


def test_evaluate_off_grid_matches_function():
    fn = lambda t: np.cos(3 * t) - 0.2 * np.sin(t)
    v = SphereFunction.from_function(fn, 2, 8)
    t = np.linspace(0, 1, 7)
    vals, (dv,) = v.evaluate(t, gradient=True)
    assert np.allclose(vals, fn(t), atol=1e-13)
    assert np.allclose(dv, -3 * np.sin(3 * t) - 0.2 * np.cos(t), atol=1e-12)


def test_harmonic_order_bounds():
    with pytest.raises(ValueError):
        SphereFunction.harmonic(3, 2, 3)
