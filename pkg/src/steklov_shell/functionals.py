"""Weighted volume and perimeter of nearly spherical perforated domains.

Testing the Rayleigh quotient with the shell eigenfunction ``z`` and
changing variables ``y = R xi (1 + v(xi))`` gives the upper bound

    sigma_1(Omega) <= V / P,
    V = int_S f(1+v) (1+v)^(n-1),
    P = int_S h(1+v) (1+v)^(n-1) sqrt(1 + |grad v|^2 / (1+v)^2),

with the radial profiles ``h = w^2`` and ``f = h' / (2R)`` of ``w(t) = z(tR)``.
V and P are stored without the common ``R^(n-1)`` surface Jacobian; only
their quotient is a physical eigenvalue bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .shell import ShellGeometry, radius_for_volume, unit_ball_volume
from .sphere import SphereFunction, SphereGrid, surface_gradient_sq, volume_of_nearly_spherical, normalize_to_volume


def _profile_w(n: int, r: float, R: float, t, order: int):
    """Derivatives ``w^(k)(t)``, k = 0..order, of ``w(t) = z(tR)``.

    Writing ``c = w'(1)`` (1 for n = 2, ``(n-2) R^(2-n)`` otherwise),
    ``w' = c t^(1-n)``, ``w'' = -(n-1) c t^(-n)`` and
    ``w''' = n(n-1) c t^(-n-1)`` in every dimension.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < r / R):
        raise ValueError(f"profile argument t must be >= r/R = {r / R}")
    if n == 2:
        w = np.log(t * R / r)
        c = 1.0
    else:
        w = r ** (2 - n) - (t * R) ** (2 - n)
        c = (n - 2) * R ** (2 - n)
    out = [w, c * t ** (1 - n), -(n - 1) * c * t ** (-n), n * (n - 1) * c * t ** (-n - 1)]
    return out[: order + 1]


def profile_derivatives(n: int, r: float, R: float, t) -> dict:
    """Closed-form ``h, h', h'', h''', f, f', f''`` at ``t`` (arrays allowed)."""
    w, w1, w2, w3 = _profile_w(n, r, R, t, 3)
    return {
        "h": w * w,
        "h1": 2 * w * w1,
        "h2": 2 * (w1 * w1 + w * w2),
        "h3": 2 * (3 * w1 * w2 + w * w3),
        "f": w * w1 / R,
        "f1": (w1 * w1 + w * w2) / R,
        "f2": (3 * w1 * w2 + w * w3) / R,
    }


def h_profile(n: int, r: float, R: float, t):
    """``h_R(t) = z(tR)^2``; zero at ``t = r/R``."""
    (w,) = _profile_w(n, r, R, t, 0)
    return w * w


def f_profile(n: int, r: float, R: float, t):
    """``f_R(t) = h_R'(t) / (2R) = z(tR) z'(tR)``."""
    w, w1 = _profile_w(n, r, R, t, 1)
    return w * w1 / R


@dataclass(frozen=True, eq=False)
class PerforatedDomain:
    """``Omega = Omega_0 minus closed B_r`` with ``d Omega_0 = {R xi (1 + v(xi))}``.

    ``shell.R`` is the radius of the shell with the same volume, so the
    invariant ``|Omega_0| = |B_R|`` is checked on construction, as is
    clearance from the obstacle.
    """

    shell: ShellGeometry
    v: SphereFunction
    volume_rtol: float = 1e-10

    def __post_init__(self):
        if self.v.n != self.shell.n:
            raise ValueError("field dimension does not match shell dimension")
        clearance = self.shell.R * (1 + self.v.values.min()) - self.shell.r
        if clearance <= 0:
            raise ValueError(
                f"obstacle contact: R(1+v) - r has minimum {clearance:.3g} <= 0 "
                f"(need ||v||_inf < 1 - r/R = {1 - self.shell.r / self.shell.R:.4g})"
            )
        got = volume_of_nearly_spherical(self.v, self.shell.R)
        want = unit_ball_volume(self.shell.n) * self.shell.R**self.shell.n
        if abs(got - want) > self.volume_rtol * want:
            raise ValueError(f"volume constraint violated: |Omega_0|={got!r}, expected {want!r}")

    @classmethod
    def from_perturbation(cls, r: float, volume: float, v: SphereFunction) -> "PerforatedDomain":
        """Build the domain of prescribed volume, shifting ``v`` to meet the constraint."""
        n = v.n
        R = radius_for_volume(n, r, volume)
        v_norm = normalize_to_volume(v, unit_ball_volume(n) * R**n, R)
        return cls(ShellGeometry(n, r, R), v_norm)

    @property
    def n(self) -> int:
        return self.shell.n

    @property
    def volume(self) -> float:
        return self.shell.volume

    def scaled(self, t: float) -> "PerforatedDomain":
        return PerforatedDomain(self.shell.scaled(t), self.v, self.volume_rtol)


@dataclass(frozen=True)
class WeightedPair:
    V: float
    P: float

    @property
    def quotient(self) -> float:
        return self.V / self.P


def _quadrature_field(v: SphereFunction) -> SphereFunction:
    # products and the square root widen the spectrum; evaluate on a 2x finer grid
    if v.is_band_limited:
        return v.resample(v.grid.refined(2))
    return v


def weighted_integrands(d: PerforatedDomain, v: SphereFunction | None = None):
    """Pointwise integrands of V and P on the quadrature grid of ``v``."""
    v = v if v is not None else _quadrature_field(d.v)
    n, r, R = d.n, d.shell.r, d.shell.R
    b = 1 + v.values
    grad_sq = surface_gradient_sq(v).values if v.is_band_limited else np.zeros_like(b)
    jac = b ** (n - 1)
    vol = f_profile(n, r, R, b) * jac
    per = h_profile(n, r, R, b) * jac * np.sqrt(1 + grad_sq / b**2)
    return v.grid, vol, per


def weighted_pair(d: PerforatedDomain) -> WeightedPair:
    grid, vol, per = weighted_integrands(d)
    return WeightedPair(float(grid.weights @ vol), float(grid.weights @ per))


def rayleigh_upper_bound(d: PerforatedDomain) -> float:
    """``V/P``, an upper bound for sigma_1 of the perforated domain."""
    return weighted_pair(d).quotient
