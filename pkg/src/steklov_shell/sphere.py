"""Perturbation fields on the unit sphere S^{n-1} for n = 2 and n = 3.

A :class:`SphereFunction` holds grid samples together with coefficients
against an L2-orthonormal real harmonic basis:

* n = 2: ``1/sqrt(2 pi)``, ``cos(j t)/sqrt(pi)``, ``sin(j t)/sqrt(pi)``, flat
  index ``0, 2j-1, 2j``.
* n = 3: real spherical harmonics ``Y_lm`` (colatitude ``theta``, longitude
  ``phi``), flat index ``l*l + l + m``.

Transforms are dense projections against tabulated harmonics at the
quadrature nodes; at the band limits used here that is cheap and exact.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .shell import unit_ball_volume, unit_sphere_area

DEFAULT_BAND_LIMIT = {2: 32, 3: 16}


def _check_sphere_dim(n: int) -> None:
    if n not in (2, 3):
        raise ValueError(f"sphere fields are implemented for n in (2, 3), got n={n}")


def n_coeffs(n: int, band_limit: int) -> int:
    return 2 * band_limit + 1 if n == 2 else (band_limit + 1) ** 2


def coefficient_degrees(n: int, band_limit: int) -> np.ndarray:
    """Harmonic degree of each flat coefficient index."""
    if n == 2:
        return np.concatenate([[0], np.repeat(np.arange(1, band_limit + 1), 2)])
    return np.concatenate([np.full(2 * l + 1, l) for l in range(band_limit + 1)])


def laplace_beltrami_eigenvalues(n: int, band_limit: int) -> np.ndarray:
    j = coefficient_degrees(n, band_limit)
    return j * (j + n - 2)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature grid on S^{n-1}.

    For n = 2, ``theta`` holds ``M`` equispaced angles. For n = 3, nodes are
    Gauss-Legendre in ``cos(theta)`` times equispaced ``phi``, flattened
    latitude-major; ``shape`` is ``(n_lat, n_lon)``.
    """

    n: int
    theta: np.ndarray
    phi: Optional[np.ndarray]
    weights: np.ndarray
    shape: tuple

    @classmethod
    def circle(cls, m: int) -> "SphereGrid":
        if m < 1:
            raise ValueError("need at least one node")
        theta = 2 * np.pi * np.arange(m) / m
        return cls(2, theta, None, np.full(m, 2 * np.pi / m), (m,))

    @classmethod
    def gauss_legendre(cls, n_lat: int, n_lon: int) -> "SphereGrid":
        x, w = np.polynomial.legendre.leggauss(n_lat)
        # north to south so that theta increases with the latitude index
        x, w = x[::-1], w[::-1]
        theta_1d = np.arccos(x)
        phi_1d = 2 * np.pi * np.arange(n_lon) / n_lon
        theta, phi = np.meshgrid(theta_1d, phi_1d, indexing="ij")
        weights = np.outer(w, np.full(n_lon, 2 * np.pi / n_lon))
        return cls(3, theta.ravel(), phi.ravel(), weights.ravel(), (n_lat, n_lon))

    @classmethod
    def for_band_limit(cls, n: int, band_limit: int, oversample: int = 2) -> "SphereGrid":
        """Grid resolving products of ``oversample`` band-limited factors."""
        _check_sphere_dim(n)
        if n == 2:
            m = oversample * (2 * band_limit + 2)
            return cls.circle(1 << max(int(math.ceil(math.log2(m))), 2))
        n_lat = oversample * (band_limit + 1)
        return cls.gauss_legendre(n_lat, 2 * n_lat)

    def refined(self, factor: int = 2) -> "SphereGrid":
        if self.n == 2:
            return SphereGrid.circle(factor * self.shape[0])
        return SphereGrid.gauss_legendre(factor * self.shape[0], factor * self.shape[1])

    @property
    def size(self) -> int:
        return self.theta.size

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def resolves(self, band_limit: int) -> bool:
        if self.n == 2:
            return self.shape[0] >= 2 * band_limit + 2
        return self.shape[0] > band_limit and self.shape[1] >= 2 * band_limit + 2


def _normalized_legendre(band_limit: int, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre values ``P[l, m, k]`` (no Condon-Shortley phase).

    Normalized so that ``P[l, 0]`` and ``sqrt(2) P[l, m] cos(m phi)`` have unit
    L2 norm on S^2.
    """
    L = band_limit
    P = np.zeros((L + 1, L + 1, x.size))
    P[0, 0] = 1.0 / math.sqrt(4 * math.pi)
    for m in range(1, L + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(L):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def harmonic_basis(n: int, band_limit: int, theta, phi=None):
    """Tabulate the real orthonormal basis and its tangential gradient.

    Returns ``(Y, grads)`` where ``Y`` has shape ``(npts, ncoef)`` and
    ``grads`` is a list of arrays of the same shape holding the orthonormal
    frame components of the surface gradient: ``[d/dtheta]`` for n = 2 and
    ``[d/dtheta, (1/sin theta) d/dphi]`` for n = 3. The n = 3 gradient divides
    by ``sin(theta)`` and must not be evaluated exactly at a pole.
    """
    _check_sphere_dim(n)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    L = band_limit
    if n == 2:
        j = np.arange(1, L + 1)
        arg = np.outer(theta, j)
        c, s = np.cos(arg) / math.sqrt(math.pi), np.sin(arg) / math.sqrt(math.pi)
        Y = np.empty((theta.size, 2 * L + 1))
        dY = np.zeros_like(Y)
        Y[:, 0] = 1.0 / math.sqrt(2 * math.pi)
        Y[:, 1::2], Y[:, 2::2] = c, s
        dY[:, 1::2], dY[:, 2::2] = -j * s, j * c
        return Y, [dY]

    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    x, s = np.cos(theta), np.sin(theta)
    P = _normalized_legendre(L, x, s)
    dP = np.zeros_like(P)
    with np.errstate(divide="ignore", invalid="ignore"):
        for l in range(1, L + 1):
            for m in range(l + 1):
                coef = math.sqrt((2 * l + 1) * (l * l - m * m) / (2 * l - 1))
                dP[l, m] = (l * x * P[l, m] - coef * P[l - 1, m]) / s
    ncoef = (L + 1) ** 2
    Y = np.empty((theta.size, ncoef))
    d_theta = np.zeros_like(Y)
    d_phi = np.zeros_like(Y)
    root2 = math.sqrt(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        for l in range(L + 1):
            base = l * l + l
            Y[:, base] = P[l, 0]
            d_theta[:, base] = dP[l, 0]
            for m in range(1, l + 1):
                cm, sm = np.cos(m * phi), np.sin(m * phi)
                Y[:, base + m] = root2 * P[l, m] * cm
                Y[:, base - m] = root2 * P[l, m] * sm
                d_theta[:, base + m] = root2 * dP[l, m] * cm
                d_theta[:, base - m] = root2 * dP[l, m] * sm
                d_phi[:, base + m] = -m * root2 * P[l, m] * sm / s
                d_phi[:, base - m] = m * root2 * P[l, m] * cm / s
    return Y, [d_theta, d_phi]


@functools.lru_cache(maxsize=32)
def _grid_tables(n: int, band_limit: int, shape: tuple):
    grid = SphereGrid.circle(shape[0]) if n == 2 else SphereGrid.gauss_legendre(*shape)
    return harmonic_basis(n, band_limit, grid.theta, grid.phi)


def grid_tables(grid: SphereGrid, band_limit: int):
    return _grid_tables(grid.n, band_limit, grid.shape)


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Coefficients of a field against the orthonormal basis, with degrees."""

    n: int
    band_limit: int
    coeffs: np.ndarray

    @property
    def degrees(self) -> np.ndarray:
        return coefficient_degrees(self.n, self.band_limit)

    @property
    def eigenvalues(self) -> np.ndarray:
        return laplace_beltrami_eigenvalues(self.n, self.band_limit)

    def l2_norm_sq(self) -> float:
        return float(np.sum(self.coeffs**2))

    def gradient_norm_sq(self) -> float:
        return float(np.sum(self.eigenvalues * self.coeffs**2))

    def degree_power(self) -> np.ndarray:
        """Sum of squared coefficients per degree, indexed by degree."""
        return np.bincount(self.degrees, weights=self.coeffs**2, minlength=self.band_limit + 1)


@dataclass(frozen=True, eq=False)
class SphereFunction:
    """A field ``v`` on S^{n-1}: grid samples plus (optionally) its spectrum.

    ``coeffs`` is None for derived pointwise quantities (e.g. ``|grad v|^2``)
    that are only known on the grid.
    """

    grid: SphereGrid
    values: np.ndarray
    coeffs: Optional[np.ndarray] = None
    band_limit: Optional[int] = None

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def is_band_limited(self) -> bool:
        return self.coeffs is not None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_coeffs(cls, n: int, coeffs, band_limit: Optional[int] = None,
                    grid: Optional[SphereGrid] = None) -> "SphereFunction":
        _check_sphere_dim(n)
        coeffs = np.asarray(coeffs, dtype=float).copy()
        if band_limit is None:
            band_limit = (coeffs.size - 1) // 2 if n == 2 else math.isqrt(coeffs.size) - 1
        if coeffs.size != n_coeffs(n, band_limit):
            raise ValueError(f"expected {n_coeffs(n, band_limit)} coefficients for n={n}, L={band_limit}")
        grid = grid or SphereGrid.for_band_limit(n, band_limit)
        if grid.n != n:
            raise ValueError("grid dimension does not match")
        Y, _ = grid_tables(grid, band_limit)
        return cls(grid, Y @ coeffs, coeffs, band_limit)

    @classmethod
    def from_values(cls, grid: SphereGrid, values, band_limit: Optional[int] = None) -> "SphereFunction":
        values = np.asarray(values, dtype=float).copy()
        if values.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} samples, got shape {values.shape}")
        if band_limit is None:
            return cls(grid, values)
        spec = _project(grid, values, band_limit)
        return cls(grid, values, spec, band_limit)

    @classmethod
    def from_function(cls, fn: Callable, n: int, band_limit: Optional[int] = None,
                      grid: Optional[SphereGrid] = None) -> "SphereFunction":
        """Sample ``fn(theta)`` (n = 2) or ``fn(theta, phi)`` (n = 3) and analyze it.

        Samples are replaced by the synthesis of their projection, so the
        result is exactly band-limited.
        """
        band_limit = DEFAULT_BAND_LIMIT[n] if band_limit is None else band_limit
        grid = grid or SphereGrid.for_band_limit(n, band_limit)
        vals = fn(grid.theta) if n == 2 else fn(grid.theta, grid.phi)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (grid.size,))
        coeffs = _project(grid, vals, band_limit)
        return cls.from_coeffs(n, coeffs, band_limit, grid)

    @classmethod
    def zeros(cls, n: int, band_limit: Optional[int] = None, grid: Optional[SphereGrid] = None):
        band_limit = DEFAULT_BAND_LIMIT[n] if band_limit is None else band_limit
        return cls.from_coeffs(n, np.zeros(n_coeffs(n, band_limit)), band_limit, grid)

    @classmethod
    def harmonic(cls, n: int, degree: int, order: int = 0, band_limit: Optional[int] = None,
                 grid: Optional[SphereGrid] = None) -> "SphereFunction":
        """Unit-L2 basis function of the given degree.

        For n = 2, ``order`` 0 selects ``cos`` and 1 selects ``sin``; for n = 3
        it is the real order ``m`` in ``[-degree, degree]``.
        """
        band_limit = max(degree, DEFAULT_BAND_LIMIT[n] if band_limit is None else band_limit)
        c = np.zeros(n_coeffs(n, band_limit))
        if n == 2:
            if degree == 0:
                c[0] = 1.0
            else:
                c[2 * degree - 1 + (1 if order else 0)] = 1.0
        else:
            if abs(order) > degree:
                raise ValueError("|order| must not exceed degree")
            c[degree * degree + degree + order] = 1.0
        return cls.from_coeffs(n, c, band_limit, grid)

    # -- value semantics ---------------------------------------------------

    def _require_spectrum(self):
        if self.coeffs is None:
            raise ValueError("operation needs a band-limited SphereFunction (coefficients unknown)")

    def scaled(self, a: float) -> "SphereFunction":
        c = None if self.coeffs is None else a * self.coeffs
        return SphereFunction(self.grid, a * self.values, c, self.band_limit)

    def shifted(self, c: float) -> "SphereFunction":
        coeffs = None
        if self.coeffs is not None:
            coeffs = self.coeffs.copy()
            coeffs[0] += c * math.sqrt(unit_sphere_area(self.n))
        return SphereFunction(self.grid, self.values + c, coeffs, self.band_limit)

    def __add__(self, other: "SphereFunction") -> "SphereFunction":
        if other.grid.shape != self.grid.shape or other.band_limit != self.band_limit:
            raise ValueError("fields must share grid and band limit")
        c = None if self.coeffs is None or other.coeffs is None else self.coeffs + other.coeffs
        return SphereFunction(self.grid, self.values + other.values, c, self.band_limit)

    def resample(self, grid: SphereGrid) -> "SphereFunction":
        self._require_spectrum()
        return SphereFunction.from_coeffs(self.n, self.coeffs, self.band_limit, grid)

    def evaluate(self, theta, phi=None, gradient: bool = False):
        """Evaluate the band-limited field off-grid.

        With ``gradient=True`` returns ``(values, [grad components])``.
        """
        self._require_spectrum()
        Y, grads = harmonic_basis(self.n, self.band_limit, theta, phi)
        vals = Y @ self.coeffs
        if gradient:
            return vals, [g @ self.coeffs for g in grads]
        return vals

    def gradient_components(self) -> list:
        self._require_spectrum()
        _, grads = grid_tables(self.grid, self.band_limit)
        return [g @ self.coeffs for g in grads]

    def with_w1inf(self, eps: float) -> "SphereFunction":
        """Rescale so that the grid W^{1,inf} norm equals ``eps``."""
        cur = w1inf_norm(self)
        if cur == 0:
            raise ValueError("cannot rescale the zero field")
        return self.scaled(eps / cur)

    # -- serialization -----------------------------------------------------

    def to_csv(self, path) -> None:
        """Write ``(node, value)`` rows; n = 3 nodes are ``(theta, phi)`` pairs."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.n == 2:
                writer.writerow(["theta", "value"])
                for t, val in zip(self.grid.theta, self.values):
                    writer.writerow([repr(float(t)), repr(float(val))])
            else:
                writer.writerow(["theta", "phi", "value"])
                for t, p, val in zip(self.grid.theta, self.grid.phi, self.values):
                    writer.writerow([repr(float(t)), repr(float(p)), repr(float(val))])

    @classmethod
    def from_csv(cls, path, band_limit: Optional[int] = None) -> "SphereFunction":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        if header == ["theta", "value"]:
            grid = SphereGrid.circle(body.shape[0])
            if not np.allclose(grid.theta, body[:, 0], atol=1e-12):
                raise ValueError("CSV nodes are not an equispaced circle grid")
        elif header == ["theta", "phi", "value"]:
            n_lat = np.unique(np.round(body[:, 0], 12)).size
            grid = SphereGrid.gauss_legendre(n_lat, body.shape[0] // n_lat)
            if grid.size != body.shape[0] or not np.allclose(grid.theta, body[:, 0], atol=1e-12):
                raise ValueError("CSV nodes are not a Gauss-Legendre sphere grid")
        else:
            raise ValueError(f"unrecognised CSV header {header}")
        return cls.from_values(grid, body[:, -1], band_limit)

    def spectrum_dict(self) -> dict:
        self._require_spectrum()
        return {"n": self.n, "L": self.band_limit, "coeffs": [float(c) for c in self.coeffs]}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.spectrum_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path, grid: Optional[SphereGrid] = None) -> "SphereFunction":
        with open(path) as fh:
            d = json.load(fh)
        return cls.from_coeffs(int(d["n"]), d["coeffs"], int(d["L"]), grid)


def _project(grid: SphereGrid, values: np.ndarray, band_limit: int) -> np.ndarray:
    if not grid.resolves(band_limit):
        raise ValueError(f"grid {grid.shape} under-resolves band limit {band_limit}")
    Y, _ = grid_tables(grid, band_limit)
    return Y.T @ (grid.weights * values)


def analyze(v: SphereFunction, band_limit: Optional[int] = None) -> HarmonicSpectrum:
    """Project ``v`` onto the orthonormal harmonics up to ``band_limit``."""
    L = band_limit if band_limit is not None else v.band_limit
    if L is None:
        raise ValueError("band limit required for a field without a spectrum")
    return HarmonicSpectrum(v.n, L, _project(v.grid, v.values, L))


def synthesize(spec: HarmonicSpectrum, grid: Optional[SphereGrid] = None) -> SphereFunction:
    return SphereFunction.from_coeffs(spec.n, spec.coeffs, spec.band_limit, grid)


def surface_gradient_sq(v: SphereFunction) -> SphereFunction:
    """Pointwise ``|grad v|^2`` on the grid of ``v`` (tangential gradient)."""
    comps = v.gradient_components()
    return SphereFunction(v.grid, sum(g * g for g in comps))


def integrate(f, grid: Optional[SphereGrid] = None) -> float:
    """Quadrature of a field (or raw samples on ``grid``) over S^{n-1}."""
    if isinstance(f, SphereFunction):
        return float(f.grid.weights @ f.values)
    return float(grid.weights @ np.asarray(f, dtype=float))


def w1inf_norm(v: SphereFunction) -> float:
    """Grid proxy for ``||v||_{W^{1,inf}}``: max over nodes of ``max(|v|, |grad v|)``."""
    grad = np.sqrt(surface_gradient_sq(v).values)
    return float(max(np.max(np.abs(v.values)), np.max(grad)))


def volume_of_nearly_spherical(v: SphereFunction, R: float = 1.0) -> float:
    """Volume enclosed by ``{R xi (1 + v(xi))}``, i.e. ``R^n/n * int (1+v)^n``."""
    if np.max(np.abs(v.values)) >= 1:
        raise ValueError("need ||v||_inf < 1 for a star-shaped nearly spherical set")
    n = v.n
    return R**n / n * integrate((1 + v.values) ** n, v.grid)


def normalize_to_volume(v: SphereFunction, target: float, R: float = 1.0) -> SphereFunction:
    """Add a constant ``c`` to ``v`` so that the enclosed volume equals ``target``.

    ``c -> int (1 + v + c)^n`` is strictly increasing while ``1 + v + c > 0``,
    so the root is bracketed on the admissible interval ``||v + c||_inf < 1``.
    """
    n, w = v.n, v.grid.weights
    vals = v.values
    lo, hi = -1.0 - vals.min(), 1.0 - vals.max()
    if not lo < hi:
        raise ValueError("oscillation of v too large: no admissible shift")

    def gap(c):
        return R**n / n * float(w @ (1 + vals + c) ** n) - target

    g_lo, g_hi = gap(lo), gap(hi * (1 - 1e-15) if hi > 0 else hi - 1e-15 * abs(hi))
    if g_lo > 0 or g_hi < 0:
        raise ValueError(f"target volume {target} not reachable with ||v + c||_inf < 1")
    c = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    for _ in range(2):
        slope = R**n * float(w @ (1 + vals + c) ** (n - 1))
        c -= gap(c) / slope
    return v.shifted(c)


def normalize_to_ball(v: SphereFunction) -> SphereFunction:
    """Shift ``v`` so the unit-radius nearly spherical set has the unit-ball volume."""
    return normalize_to_volume(v, unit_ball_volume(v.n), 1.0)


def random_perturbation(n: int, eps: float, seed, band_limit: Optional[int] = None,
                        decay: float = 2.0, grid: Optional[SphereGrid] = None) -> SphereFunction:
    """Seeded random band-limited field with ``||v||_{W^{1,inf}} = eps``.

    Degree-j coefficients (j >= 1) are i.i.d. normal scaled by ``j^-decay``;
    the mean coefficient is zero.
    """
    band_limit = DEFAULT_BAND_LIMIT[n] if band_limit is None else band_limit
    rng = np.random.default_rng(seed)
    deg = coefficient_degrees(n, band_limit)
    c = rng.standard_normal(deg.size)
    c[deg == 0] = 0.0
    c[deg > 0] *= deg[deg > 0].astype(float) ** (-decay)
    v = SphereFunction.from_coeffs(n, c, band_limit, grid)
    return v.with_w1inf(eps) if eps > 0 else v.scaled(0.0)
