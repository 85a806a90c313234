import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from steklov_shell import (PerforatedDomain, ShellGeometry, SphereFunction, assemble, build_mesh,
                           oracle_sigma1, rayleigh_upper_bound, shell_eigenvalue,
                           sign_and_simplicity_check, solve_sigma1)
from steklov_shell.oracle import boundary_schur_complement, convergence_order, rotated

SIGMA_ANNULUS = 1 / (2 * math.log(2))


def _field():
    return SphereFunction.from_function(lambda t: 0.1 * np.cos(2 * t) + 0.05 * np.sin(3 * t), 2, 8)


def test_unperturbed_mesh_weights():
    m = build_mesh(1.0, 2.0, None, 16, 8)
    assert np.allclose(m.boundary_weights(), 2.0 * 2 * np.pi / 16, rtol=1e-15)


def test_constants_in_kernel_without_dirichlet():
    asm = assemble(build_mesh(1.0, 2.0, _field(), 16, 8), eliminate_dirichlet=False)
    assert np.max(np.abs(asm.A @ np.ones(asm.A.shape[0]))) < 1e-12


def test_positive_definite_with_dirichlet():
    asm = assemble(build_mesh(1.0, 2.0, _field(), 16, 8))
    A = asm.A.toarray()
    assert np.allclose(A, A.T, atol=1e-14)
    assert np.linalg.eigvalsh(A).min() > 0


@pytest.mark.parametrize("perturbed", [False, True])
def test_quadratic_patch(perturbed):
    errs = []
    for nt, ns in ((32, 16), (64, 32), (128, 64)):
        m = build_mesh(1.0, 2.0, _field() if perturbed else None, nt, ns)
        asm = assemble(m, eliminate_dirichlet=False)
        rho = m.radius()
        res = (asm.A @ (rho**2).ravel()).reshape(ns + 1, nt)
        vol = m.jacobian() * m.ds * m.dtheta
        errs.append(np.abs(res[1:-1] / vol[1:-1] + 4).max())
    if perturbed:
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    else:
        assert max(errs) < 1e-9


def test_schur_matches_dense():
    asm = assemble(build_mesh(1.0, 2.0, _field(), 12, 6))
    A, nb = asm.A.toarray(), asm.n_boundary
    Aii, Aib, Abb = A[:-nb, :-nb], A[:-nb, -nb:], A[-nb:, -nb:]
    dense = Abb - Aib.T @ np.linalg.solve(Aii, Aib)
    assert np.allclose(boundary_schur_complement(asm), dense, atol=1e-12)


def test_annulus_sigma():
    sol = oracle_sigma1(1.0, 2.0, None, 256, 128)
    assert abs(sol.sigma1 - SIGMA_ANNULUS) / SIGMA_ANNULUS < 1e-3
    assert abs(sol.best - SIGMA_ANNULUS) < 5 * sol.error_estimate + 1e-9


def test_second_order_convergence():
    vals = [solve_sigma1(assemble(build_mesh(1.0, 2.0, None, 16 * k, 8 * k)), extend=False).sigma1
            for k in (1, 2, 4)]
    errs = [abs(x - SIGMA_ANNULUS) for x in vals]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert convergence_order(vals) >= 1.9


def test_perturbed_below_shell_and_below_quotient():
    v = SphereFunction.harmonic(2, 2, 0, 8)
    v = v.scaled(0.05 / np.abs(v.values).max())
    d = PerforatedDomain.from_perturbation(1.0, 3 * math.pi, v)
    sol = oracle_sigma1(1.0, d.shell.R, d.v, 128, 64)
    tol = 3 * sol.error_estimate
    assert sol.best < shell_eigenvalue(d.shell) - tol
    assert sol.best <= rayleigh_upper_bound(d) + tol


@pytest.mark.parametrize("perturbed", [False, True])
def test_sign_and_simplicity(perturbed):
    v = _field() if perturbed else None
    if perturbed:
        v = PerforatedDomain.from_perturbation(1.0, 3 * math.pi, v.with_w1inf(0.05)).v
    sol = solve_sigma1(assemble(build_mesh(1.0, 2.0, v, 64, 32)), extend=True)
    rep = sign_and_simplicity_check(sol)
    assert rep.ok and rep.simple and rep.spectral_gap > 0


def test_sign_check_needs_interior():
    sol = solve_sigma1(assemble(build_mesh(1.0, 2.0, None, 16, 8)), extend=False)
    with pytest.raises(ValueError):
        sign_and_simplicity_check(sol)


def test_mesh_tangling_reported():
    v = SphereFunction.harmonic(2, 1, 0, 4).with_w1inf(0.6)
    with pytest.raises(ValueError, match="obstacle contact.*Jacobian"):
        build_mesh(1.0, 2.0, v, 16, 8)


def test_oracle_rejects_n3():
    with pytest.raises(ValueError):
        build_mesh(1.0, 2.0, SphereFunction.zeros(3, 2), 16, 8)


@settings(max_examples=8)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.5, 3.0))
def test_rotation_and_scaling_invariance(shift, t):
    v = _field()
    base = solve_sigma1(assemble(build_mesh(1.0, 2.0, v, 32, 16)), extend=False).sigma1
    # rotation by whole grid steps is an exact symmetry of the discretization
    k = int(round(shift / (2 * np.pi / 32)))
    rot = solve_sigma1(assemble(build_mesh(1.0, 2.0, rotated(v, k * 2 * np.pi / 32), 32, 16)),
                       extend=False).sigma1
    assert rot == pytest.approx(base, rel=1e-10)
    scaled = solve_sigma1(assemble(build_mesh(t, 2.0 * t, v, 32, 16)), extend=False).sigma1
    assert scaled == pytest.approx(base / t, rel=1e-10)


def test_solution_serialization(tmp_path):
    sol = oracle_sigma1(1.0, 2.0, None, 32, 16)
    sol.to_json(tmp_path / "s.json")
    sol.to_csv(tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "theta,u" and len(text) == 33
    assert set(sol.summary()) >= {"sigma1", "resolution", "error_estimate"}


def test_pencil_first_eigenvector_is_constant_on_annulus():
    sol = solve_sigma1(assemble(build_mesh(1.0, 2.0, None, 32, 16)), extend=True)
    assert np.ptp(sol.boundary) < 1e-10 * np.abs(sol.boundary).max()
    lam = scipy.linalg.eigh(boundary_schur_complement(assemble(build_mesh(1.0, 2.0, None, 32, 16))),
                            np.diag(assemble(build_mesh(1.0, 2.0, None, 32, 16)).B), eigvals_only=True)
    assert lam[0] == pytest.approx(sol.sigma1, rel=1e-14)
