"""Finite-difference Dirichlet-to-Neumann oracle for perturbed annuli (n = 2).

The domain between ``|x| = r`` and ``rho = R (1 + v(theta))`` is mapped to
``(theta, s) in [0, 2 pi) x [0, 1]`` by ``rho = r + s (R (1 + v) - r)``. The
Dirichlet energy in these coordinates,

    int [ a_ss u_s^2 + 2 a_st u_s u_t + a_tt u_t^2 ] ds dtheta,
    a_ss = (rho^2 + rho_t^2) / (rho rho_s),  a_st = -rho_t / rho,  a_tt = rho_s / rho,

is discretized with central differences: ``a_ss`` terms on radial edges,
``a_tt`` terms on angular edges and the cross term at cell centres. This gives
a symmetric stiffness ``A``; the boundary mass is the arclength
``R sqrt(b^2 + b'^2) dtheta`` at ``s = 1``. Interior unknowns are eliminated
by a Schur complement and the DtN pencil is solved densely.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .sphere import SphereFunction


@dataclass(frozen=True, eq=False)
class PolarMesh:
    """Logical ``(s, theta)`` grid with the outer profile sampled at nodes and half-nodes."""

    r: float
    R: float
    n_theta: int
    n_s: int
    b: np.ndarray        # 1 + v at theta_j
    db: np.ndarray       # v'(theta_j)
    b_half: np.ndarray   # 1 + v at theta_j + dtheta/2
    db_half: np.ndarray

    @property
    def dtheta(self) -> float:
        return 2 * np.pi / self.n_theta

    @property
    def ds(self) -> float:
        return 1.0 / self.n_s

    @property
    def theta(self) -> np.ndarray:
        return self.dtheta * np.arange(self.n_theta)

    @property
    def s(self) -> np.ndarray:
        return self.ds * np.arange(self.n_s + 1)

    def radius(self) -> np.ndarray:
        """Node radii, shape ``(n_s + 1, n_theta)``."""
        return self.r + np.outer(self.s, self.R * self.b - self.r)

    def jacobian(self) -> np.ndarray:
        """``rho * rho_s`` at nodes; positive iff the map is untangled."""
        return self.radius() * (self.R * self.b - self.r)[None, :]

    def boundary_weights(self) -> np.ndarray:
        return self.R * np.sqrt(self.b**2 + self.db**2) * self.dtheta


def build_mesh(r: float, R: float, v: Optional[SphereFunction], n_theta: int, n_s: int) -> PolarMesh:
    if not (0 < r < R):
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    if n_theta < 4 or n_s < 2:
        raise ValueError("mesh too coarse")
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    half = theta + np.pi / n_theta
    if v is None:
        one, zero = np.ones(n_theta), np.zeros(n_theta)
        return PolarMesh(r, R, n_theta, n_s, one, zero, one, zero)
    if v.n != 2:
        raise ValueError("the oracle handles planar (n = 2) domains only")
    val, (dv,) = v.evaluate(theta, gradient=True)
    val_h, (dv_h,) = v.evaluate(half, gradient=True)
    mesh = PolarMesh(r, R, n_theta, n_s, 1 + val, dv, 1 + val_h, dv_h)
    min_gap = min((R * mesh.b - r).min(), (R * mesh.b_half - r).min())
    if min_gap <= 0:
        raise ValueError(f"obstacle contact: mesh tangled, min radial thickness {min_gap:.4g} "
                         f"(min Jacobian {mesh.jacobian().min():.4g})")
    return mesh


@dataclass(frozen=True, eq=False)
class Assembly:
    """Stiffness ``A`` and outer-boundary mass ``B`` (diagonal, as a vector).

    Unknowns are ordered layer by layer, ``k = (i - i0) * n_theta + j``, where
    ``i0 = 1`` when the Dirichlet layer is eliminated. The last ``n_theta``
    unknowns are the outer boundary.
    """

    mesh: PolarMesh
    A: sp.csr_matrix
    B: np.ndarray
    dirichlet_eliminated: bool

    @property
    def n_boundary(self) -> int:
        return self.mesh.n_theta


def _accumulate(rows, cols, vals, idx_g, coef_g, idx_k, coef_k, weight):
    """Add ``weight * (g.u)(k.u)`` in symmetrized form; negative indices are dropped."""
    for a in range(idx_g.shape[1]):
        for b in range(idx_k.shape[1]):
            ia, ib = idx_g[:, a], idx_k[:, b]
            val = 0.5 * weight * coef_g[:, a] * coef_k[:, b]
            keep = (ia >= 0) & (ib >= 0)
            rows += [ia[keep], ib[keep]]
            cols += [ib[keep], ia[keep]]
            vals += [val[keep], val[keep]]


def assemble(mesh: PolarMesh, eliminate_dirichlet: bool = True) -> Assembly:
    nt, ns = mesh.n_theta, mesh.n_s
    dt, ds = mesh.dtheta, mesh.ds
    r, R = mesh.r, mesh.R
    i0 = 1 if eliminate_dirichlet else 0
    s = mesh.s
    jj = np.arange(nt)
    jp = (jj + 1) % nt

    def index(i, j):
        i = np.asarray(i)
        return np.where(i >= i0, (i - i0) * nt + j, -1)

    rows, cols, vals = [], [], []
    D, Dp = R * mesh.b - r, R * mesh.db          # rho_s and d rho_theta / ds at nodes
    Dh, Dph = R * mesh.b_half - r, R * mesh.db_half

    # radial edges (i, j) -- (i+1, j), midpoint s_{i+1/2}
    I, J = np.meshgrid(np.arange(ns), jj, indexing="ij")
    I, J = I.ravel(), J.ravel()
    sm = (I + 0.5) * ds
    rho = r + sm * D[J]
    rho_t = sm * Dp[J]
    a_ss = (rho**2 + rho_t**2) / (rho * D[J])
    g_idx = np.stack([index(I + 1, J), index(I, J)], axis=1)
    g_cf = np.tile([1.0, -1.0], (I.size, 1))
    _accumulate(rows, cols, vals, g_idx, g_cf, g_idx, g_cf, a_ss * dt / ds)

    # angular edges (i, j) -- (i, j+1) at theta_{j+1/2}; trapezoid weights in s
    I, J = np.meshgrid(np.arange(i0, ns + 1), jj, indexing="ij")
    I, J = I.ravel(), J.ravel()
    rho = r + s[I] * Dh[J]
    a_tt = Dh[J] / rho
    w_s = np.where(I == ns, 0.5 * ds, ds)
    g_idx = np.stack([index(I, jp[J]), index(I, J)], axis=1)
    g_cf = np.tile([1.0, -1.0], (I.size, 1))
    _accumulate(rows, cols, vals, g_idx, g_cf, g_idx, g_cf, a_tt * w_s / dt)

    # cross term at cell centres (s_{i+1/2}, theta_{j+1/2})
    I, J = np.meshgrid(np.arange(ns), jj, indexing="ij")
    I, J = I.ravel(), J.ravel()
    sm = (I + 0.5) * ds
    rho = r + sm * Dh[J]
    a_st = -sm * Dph[J] / rho
    corners = np.stack([index(I, J), index(I, jp[J]), index(I + 1, J), index(I + 1, jp[J])], axis=1)
    du_s = np.tile([-1.0, -1.0, 1.0, 1.0], (I.size, 1)) / (2 * ds)
    du_t = np.tile([-1.0, 1.0, -1.0, 1.0], (I.size, 1)) / (2 * dt)
    _accumulate(rows, cols, vals, corners, du_s, corners, du_t, 2 * a_st * ds * dt)

    n_unknown = (ns + 1 - i0) * nt
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_unknown, n_unknown)).tocsr()
    A.sum_duplicates()
    return Assembly(mesh, A, mesh.boundary_weights(), eliminate_dirichlet)


@dataclass(frozen=True, eq=False)
class DtnSolution:
    """First DtN eigenpair of a perturbed annulus.

    ``boundary`` is B-normalized and positive on average; ``interior`` holds
    the harmonic extension on layers ``1..n_s-1``. ``error_estimate`` and
    ``sigma1_extrapolated`` come from a half-resolution companion solve.
    """

    sigma1: float
    sigma2: float
    boundary: np.ndarray
    interior: np.ndarray
    theta: np.ndarray
    n_theta: int
    n_s: int
    spectrum: np.ndarray = field(repr=False)
    error_estimate: Optional[float] = None
    sigma1_extrapolated: Optional[float] = None
    sigma1_coarse: Optional[float] = None

    @property
    def best(self) -> float:
        return self.sigma1_extrapolated if self.sigma1_extrapolated is not None else self.sigma1

    def summary(self) -> dict:
        return {
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "resolution": [self.n_theta, self.n_s],
            "error_estimate": self.error_estimate,
            "sigma1_extrapolated": self.sigma1_extrapolated,
            "sigma1_coarse": self.sigma1_coarse,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "u"])
            for t, u in zip(self.theta, self.boundary):
                writer.writerow([repr(float(t)), repr(float(u))])


def _spd_inverse(M: np.ndarray) -> np.ndarray:
    c, info = scipy.linalg.lapack.dpotrf(M, lower=0)
    assert info == 0, "interior block not positive definite"
    inv, info = scipy.linalg.lapack.dpotri(c, lower=0)
    assert info == 0
    return np.triu(inv) + np.triu(inv, 1).T


def boundary_schur_complement(asm: Assembly) -> np.ndarray:
    """``S = A_bb - A_bi A_ii^{-1} A_ib`` by block elimination, layer by layer.

    The stiffness is block tridiagonal in ``s``; eliminating layers from the
    obstacle outwards gives ``S_{i+1} = T_{i+1} - C_i^T S_i^{-1} C_i`` with
    dense ``n_theta x n_theta`` blocks and sparse couplings ``C_i``.
    """
    nt, ns = asm.mesh.n_theta, asm.mesh.n_s
    A = asm.A

    def block(i, k):
        return A[(i - 1) * nt:i * nt, (k - 1) * nt:k * nt]

    S = block(1, 1).toarray()
    for i in range(1, ns):
        C = block(i, i + 1).tocsc()
        X = _spd_inverse(S)
        XC = (C.T @ X).T
        S = block(i + 1, i + 1).toarray() - C.T @ XC
        S = 0.5 * (S + S.T)
    return S


def harmonic_extension(asm: Assembly, u_b: np.ndarray) -> np.ndarray:
    """Interior values (layers ``1..n_s-1``) of the discrete harmonic extension of ``u_b``."""
    nb = asm.n_boundary
    n_int = asm.A.shape[0] - nb
    A_ii = asm.A[:n_int, :n_int].tocsc()
    lu = splu(A_ii)
    diag_u = lu.U.diagonal()
    assert np.all(np.isfinite(diag_u)) and np.min(np.abs(diag_u)) > 0, "singular interior block"
    u_i = -lu.solve(asm.A[:n_int, n_int:] @ u_b)
    return u_i.reshape(asm.mesh.n_s - 1, asm.mesh.n_theta)


def solve_sigma1(asm: Assembly, extend: bool = True) -> DtnSolution:
    """Smallest eigenvalue of the DtN pencil ``(S, B)``.

    With ``extend=False`` the interior extension is skipped (``interior`` is
    an empty array), which avoids a sparse factorization.
    """
    if not asm.dirichlet_eliminated:
        raise ValueError("solve needs the Dirichlet layer eliminated")
    S = boundary_schur_complement(asm)
    lam, vecs = scipy.linalg.eigh(S, np.diag(asm.B))
    u_b = vecs[:, 0]
    if u_b.sum() < 0:
        u_b = -u_b
    interior = harmonic_extension(asm, u_b) if extend else np.empty((0, asm.mesh.n_theta))
    return DtnSolution(float(lam[0]), float(lam[1]), u_b, interior, asm.mesh.theta,
                       asm.mesh.n_theta, asm.mesh.n_s, lam)


def oracle_sigma1(r: float, R: float, v: Optional[SphereFunction] = None, n_theta: int = 256,
                  n_s: int = 128, richardson: bool = True, extend: bool = False) -> DtnSolution:
    """sigma_1 of the perturbed annulus, with a Richardson error estimate.

    The companion solve halves both resolutions; for a second-order scheme
    ``(sigma_h - sigma_2h) / 3`` estimates the error of ``sigma_h``.
    """
    sol = solve_sigma1(assemble(build_mesh(r, R, v, n_theta, n_s)), extend=extend)
    if not richardson:
        return sol
    coarse = solve_sigma1(assemble(build_mesh(r, R, v, n_theta // 2, n_s // 2)), extend=False).sigma1
    corr = (sol.sigma1 - coarse) / 3
    return DtnSolution(sol.sigma1, sol.sigma2, sol.boundary, sol.interior, sol.theta, sol.n_theta,
                       sol.n_s, sol.spectrum, abs(corr), sol.sigma1 + corr, coarse)


@dataclass(frozen=True)
class SignReport:
    boundary_sign_definite: bool
    interior_sign_definite: bool
    spectral_gap: float

    @property
    def simple(self) -> bool:
        return self.spectral_gap > 0

    @property
    def ok(self) -> bool:
        return self.boundary_sign_definite and self.interior_sign_definite and self.simple


def sign_and_simplicity_check(sol: DtnSolution, rel_gap_tol: float = 1e-8) -> SignReport:
    """First eigenvector one-signed (boundary and interior) and sigma_1 < sigma_2."""
    b = sol.boundary
    boundary_ok = bool(np.all(b > 0) or np.all(b < 0))
    sign = np.sign(b.sum())
    if sol.interior.size == 0:
        raise ValueError("solution has no interior extension; solve with extend=True")
    interior_ok = bool(np.all(sign * sol.interior > 0))
    gap = sol.sigma2 - sol.sigma1
    return SignReport(boundary_ok, interior_ok, gap if gap > rel_gap_tol * sol.sigma1 else 0.0)


def convergence_order(values) -> float:
    """Observed order from three solves with halving mesh size (coarse to fine)."""
    a, b, c = values
    return math.log2(abs(a - b) / abs(b - c))


def rotated(v: SphereFunction, shift: float) -> SphereFunction:
    """``v(theta - shift)`` for a planar band-limited field."""
    if v.n != 2:
        raise ValueError("rotation helper is planar")
    c = v.coeffs.copy()
    j = np.arange(1, v.band_limit + 1)
    a, b = c[1::2].copy(), c[2::2].copy()
    cs, sn = np.cos(j * shift), np.sin(j * shift)
    c[1::2] = a * cs - b * sn
    c[2::2] = a * sn + b * cs
    return SphereFunction.from_coeffs(2, c, v.band_limit, v.grid)
