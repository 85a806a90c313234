"""Closed-form Steklov-Dirichlet spectrum of spherical shells.

The shell ``A_{r,R}`` is the region between concentric balls of radii
``r < R`` in R^n. Its first eigenfunction is radial and everything here is an
exact formula evaluation; no series truncations are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, pi^(n/2) / Gamma(n/2 + 1)."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def unit_sphere_area(n: int) -> float:
    """Surface measure of S^{n-1}, equal to n times the unit-ball volume."""
    return n * unit_ball_volume(n)


def _check_dimension(n: int) -> None:
    if int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n!r}")


@dataclass(frozen=True)
class ShellGeometry:
    """Spherical shell ``B_R minus closed B_r`` in R^n."""

    n: int
    r: float
    R: float

    def __post_init__(self):
        _check_dimension(self.n)
        if not (self.r > 0):
            raise ValueError(f"inner radius must be positive, got r={self.r}")
        if not (self.R > self.r):
            raise ValueError(f"outer radius must exceed inner radius, got r={self.r}, R={self.R}")

    @classmethod
    def from_volume(cls, n: int, r: float, volume: float) -> "ShellGeometry":
        return cls(n, r, radius_for_volume(n, r, volume))

    @property
    def width(self) -> float:
        return self.R - self.r

    @property
    def volume(self) -> float:
        # r^n ((R/r)^n - 1) without cancellation for thin shells
        return unit_ball_volume(self.n) * self.r**self.n * math.expm1(self.n * math.log1p(self.width / self.r))

    def scaled(self, t: float) -> "ShellGeometry":
        return ShellGeometry(self.n, t * self.r, t * self.R)


def shell_eigenvalue(g: ShellGeometry) -> float:
    """First Steklov-Dirichlet eigenvalue of the shell.

    ``1 / (R log(R/r))`` for n = 2 and ``(n-2) / (R ((R/r)^(n-2) - 1))`` for
    n >= 3. Both are written with ``log1p``/``expm1`` of the width ratio so
    that thin shells (``R - r << r``) keep full relative precision.
    """
    n, r, R = g.n, g.r, g.R
    log_ratio = math.log1p((R - r) / r)
    if n == 2:
        return 1.0 / (R * log_ratio)
    return (n - 2) / (R * math.expm1((n - 2) * log_ratio))


def shell_eigenfunction(g: ShellGeometry, rho):
    """Radial first eigenfunction ``z(rho)``, vanishing on the inner sphere.

    Accepts scalars or arrays; every ``rho`` must lie in ``[r, R]``.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < g.r) or np.any(rho_arr > g.R):
        raise ValueError(f"rho must lie in [{g.r}, {g.R}]")
    if g.n == 2:
        z = np.log(rho_arr / g.r)
    else:
        p = g.n - 2
        z = np.power(np.float64(g.r), -p) - np.power(rho_arr, -p)
    return float(z) if np.ndim(z) == 0 else z


def radius_for_volume(n: int, r: float, volume: float) -> float:
    """Outer radius R such that the shell A_{r,R} has the given volume."""
    _check_dimension(n)
    if not (volume > 0):
        raise ValueError(f"shell volume must be positive, got {volume}")
    if not (r > 0):
        raise ValueError(f"inner radius must be positive, got r={r}")
    x = volume / (unit_ball_volume(n) * r**n)
    return r * math.exp(math.log1p(x) / n)


def coarse_upper_bound(n: int, r: float, volume: float) -> float:
    """Upper bound on sigma_1 depending only on (n, r, |Omega|).

    Uses the radius ``Rbar`` of the shell holding half the volume; valid for
    every admissible perforated domain of that volume.
    """
    _check_dimension(n)
    if not (volume > 0) or not (r > 0):
        raise ValueError(f"need volume > 0 and r > 0, got volume={volume}, r={r}")
    wn = unit_ball_volume(n)
    r_bar = (volume / (2 * wn) + r**n) ** (1.0 / n)
    return 2 * volume ** (1.0 / n) / (n * wn ** (1.0 / n) * (r_bar - r) ** 2)


@dataclass(frozen=True)
class AsymptoticRegime:
    """Family of shells: fixed volume ``omega`` or fixed width ``d = R - r``."""

    mode: Literal["fixed-volume", "fixed-width"]
    parameter: float

    def __post_init__(self):
        if self.mode not in ("fixed-volume", "fixed-width"):
            raise ValueError(f"unknown regime {self.mode!r}")
        if not (self.parameter > 0):
            raise ValueError(f"regime parameter must be positive, got {self.parameter}")

    def geometry(self, n: int, r: float) -> ShellGeometry:
        if self.mode == "fixed-volume":
            return ShellGeometry.from_volume(n, r, self.parameter)
        return ShellGeometry(n, r, r + self.parameter)

    def reference(self, n: int, r: float) -> float:
        """Large-r asymptote: ``1/d`` (fixed width) or ``n w_n r^(n-1) / omega`` (fixed volume)."""
        if self.mode == "fixed-width":
            return 1.0 / self.parameter
        return unit_sphere_area(n) * r ** (n - 1) / self.parameter


def asymptotic_curve(regime: AsymptoticRegime, r_grid, n: int = 2) -> np.ndarray:
    """Exact ``(r, sigma_1)`` table along a regime; shape ``(len(r_grid), 2)``."""
    r_values = np.asarray(r_grid, dtype=float).ravel()
    if np.any(r_values <= 0):
        raise ValueError("r grid must be strictly positive")
    sigma = [shell_eigenvalue(regime.geometry(n, float(r))) for r in r_values]
    return np.column_stack([r_values, np.asarray(sigma, dtype=float)]) if len(r_values) else np.empty((0, 2))
