"""Second-order stability of the shell under volume-preserving perturbations.

With ``Q1 = f h' - f' h``, ``Q2 = Q1' = f h'' - f'' h`` and ``Q3 = f h``
evaluated at ``t = 1``, the deficit ``f(1) P - h(1) V`` of a volume-normalized
perturbation ``v`` is, to second order,

    Q1 int v + (Q2 + 2(n-1) Q1)/2 int v^2 + Q3/2 int |grad v|^2
      >= K int v^2,   K = ((n-1)(Q1 + Q3) + Q2) / 2,

using ``int v = -(n-1)/2 int v^2`` and the spherical Poincare inequality.
In terms of ``w = sqrt(h(1))`` and ``c = w'(1)``:

    Q1 = (w^2 c^2 + (n-1) w^3 c) / R
    Q2 = (2 w c^3 + (n-1) w^2 c^2 - n(n-1) w^3 c) / R
    Q3 = w^3 c / R
    K  = (w c^3 + (n-1) w^2 c^2) / R
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .functionals import PerforatedDomain, profile_derivatives, weighted_pair
from .shell import ShellGeometry, shell_eigenvalue, unit_ball_volume
from .sphere import (SphereFunction, integrate, normalize_to_volume, surface_gradient_sq,
                     volume_of_nearly_spherical, w1inf_norm)

SHELL_TOL = 1e-18
DEFAULT_EPS0 = 0.1
ROUNDOFF_FIELD = 1e-13


def _w_c(n: int, r: float, R: float):
    ShellGeometry(n, r, R)
    w = math.log(R / r) if n == 2 else r ** (2 - n) - R ** (2 - n)
    c = 1.0 if n == 2 else (n - 2) * R ** (2 - n)
    return w, c


def q_coefficients(n: int, r: float, R: float) -> tuple[float, float, float]:
    """``(Q1(1), Q2(1), Q3(1))`` in closed form."""
    w, c = _w_c(n, r, R)
    q1 = (w * w * c * c + (n - 1) * w**3 * c) / R
    q2 = (2 * w * c**3 + (n - 1) * w * w * c * c - n * (n - 1) * w**3 * c) / R
    q3 = w**3 * c / R
    return q1, q2, q3


def q_functions(n: int, r: float, R: float, t):
    """``(Q1(t), Q2(t), Q3(t))`` from the profile derivatives, any ``t >= r/R``."""
    p = profile_derivatives(n, r, R, t)
    return (p["f"] * p["h1"] - p["f1"] * p["h"],
            p["f"] * p["h2"] - p["f2"] * p["h"],
            p["f"] * p["h"])


def leading_constant(n: int, r: float, R: float) -> float:
    """``K = ((n-1)(Q1 + Q3) + Q2) / 2``, positive for every shell."""
    w, c = _w_c(n, r, R)
    return (w * c**3 + (n - 1) * w * w * c * c) / R


def mode_limit(n: int, r: float, R: float, degree: int) -> float:
    """Limit of ``lhs / int v^2`` for a small volume-normalized degree-``degree`` harmonic."""
    q1, q2, q3 = q_coefficients(n, r, R)
    lam = degree * (degree + n - 2)
    return ((n - 1) * q1 + q2) / 2 + q3 * lam / 2


def positivity_flags(n: int, r: float, R: float) -> tuple[bool, bool, bool]:
    q1, q2, q3 = q_coefficients(n, r, R)
    return q1 > 0, q3 > 0, (n - 1) * (q1 + q3) + q2 > 0


@dataclass(frozen=True)
class StabilityReport:
    n: int
    r: float
    R: float
    eps: float
    Q1: float
    Q2: float
    Q3: float
    K_leading: float
    V: float
    P: float
    lhs: float
    int_v2: float
    ratio: float
    q1_positive: bool
    q3_positive: bool
    combination_positive: bool
    lhs_positive: bool
    key_estimate_holds: bool
    is_shell: bool

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, c) for c in self.columns()]

    def as_dict(self) -> dict:
        return asdict(self)


def _check_normalized(d: PerforatedDomain, rtol: float = 1e-10) -> None:
    got = volume_of_nearly_spherical(d.v, d.shell.R)
    want = unit_ball_volume(d.n) * d.shell.R**d.n
    if abs(got - want) > rtol * want:
        raise ValueError("key estimate presumes |Omega| = |A_{r,R}|; normalize the perturbation first")


def key_estimate_check(d: PerforatedDomain, eps0: float = DEFAULT_EPS0) -> StabilityReport:
    """Evaluate ``lhs = f(1) P - h(1) V`` against ``K int v^2``.

    ``lhs`` equals ``(V(A) P(Omega) - P(A) V(Omega)) / (n w_n)`` in the stored
    convention. ``key_estimate_holds`` allows the first-order slack
    ``lhs >= K (1 - eps) int v^2`` and requires ``eps <= eps0``.
    """
    _check_normalized(d)
    n, r, R = d.n, d.shell.r, d.shell.R
    q1, q2, q3 = q_coefficients(n, r, R)
    K = leading_constant(n, r, R)
    p1 = profile_derivatives(n, r, R, 1.0)
    pair = weighted_pair(d)
    lhs = p1["f"] * pair.P - p1["h"] * pair.V
    v2 = integrate(d.v.values**2, d.v.grid)
    eps = w1inf_norm(d.v) if d.v.is_band_limited else float(np.max(np.abs(d.v.values)))
    shell = v2 < SHELL_TOL
    ratio = lhs / v2 if not shell else float("nan")
    f1, f3, fc = positivity_flags(n, r, R)
    holds = shell or (eps <= eps0 and lhs >= K * (1 - eps) * v2)
    return StabilityReport(n, r, R, eps, q1, q2, q3, K, pair.V, pair.P, lhs, v2, ratio,
                           f1, f3, fc, bool(lhs > 0 or shell), bool(holds), bool(shell))


@dataclass(frozen=True)
class QuantitativeCheck:
    sigma_shell: float
    sigma_omega: float
    K: float
    int_v2: float
    bound: float
    passed: bool
    main_inequality: bool
    empirical_K: float


def quantitative_bound_check(d: PerforatedDomain, sigma_omega: float | None = None,
                             k_factor: float = 0.5, rtol: float = 1e-12,
                             atol: float = 0.0) -> QuantitativeCheck:
    """Check ``sigma_1(A) >= sigma_1(Omega) (1 + k_factor K int v^2)``.

    Without ``sigma_omega`` the quotient V/P stands in for sigma_1(Omega);
    it over-estimates the eigenvalue, so a pass with it implies a pass with
    the true value. ``k_factor`` leaves room for the O(eps) corrections to the
    second-order constant. ``atol`` absorbs the discretization error of a
    numerical ``sigma_omega``. ``empirical_K`` is the largest constant for
    which the inequality would still hold.
    """
    n, r, R = d.n, d.shell.r, d.shell.R
    sigma_a = shell_eigenvalue(d.shell)
    sigma_o = weighted_pair(d).quotient if sigma_omega is None else float(sigma_omega)
    K = leading_constant(n, r, R)
    v2 = integrate(d.v.values**2, d.v.grid)
    if v2 < SHELL_TOL:
        # shell case: the inequality degenerates to sigma_1(Omega) <= sigma_1(A)
        ok = sigma_o <= sigma_a * (1 + rtol) + atol
        return QuantitativeCheck(sigma_a, sigma_o, K, v2, sigma_o, bool(ok), bool(ok), float("nan"))
    bound = sigma_o * (1 + k_factor * K * v2)
    return QuantitativeCheck(sigma_a, sigma_o, K, v2, bound, bool(sigma_a >= bound - atol),
                             bool(sigma_o < sigma_a), (sigma_a / sigma_o - 1) / v2)


@dataclass(frozen=True)
class ExpansionResidual:
    """Empirical constants of the quadratic-remainder expansions.

    Each entry is ``sup |remainder| / (eps * weight)`` over the grid, with
    weight ``v^2`` (pointwise power, h and f expansions), ``v^2 + |grad v|^2``
    (square-root expansion) or ``||v||^2`` (mean identity).
    """

    power: float
    sqrt_term: float
    mean: float
    h_expansion: float
    f_expansion: float

    def as_dict(self) -> dict:
        return asdict(self)


def _sup_ratio(num: np.ndarray, den: np.ndarray) -> float:
    mask = den > 1e-6 * den.max() if den.size and den.max() > 0 else np.zeros(den.shape, bool)
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(num[mask]) / den[mask]))


def expansion_residuals(v: SphereFunction, eps: float | None = None, r: float = 1.0,
                        R: float = 2.0) -> ExpansionResidual:
    """Remainder constants for the Taylor expansions used in the deficit estimate.

    ``v`` is first shifted so the unit nearly spherical set has the unit-ball
    volume; ``eps`` defaults to the grid W^{1,inf} norm of the shifted field.
    Fields that are zero up to roundoff after the shift are the sphere itself
    and report zero residuals.
    """
    n = v.n
    v = normalize_to_volume(v, unit_ball_volume(n), 1.0)
    eps = w1inf_norm(v) if eps is None else eps
    x = v.values
    if eps == 0 or np.max(np.abs(x)) < ROUNDOFF_FIELD:
        return ExpansionResidual(0.0, 0.0, 0.0, 0.0, 0.0)
    g2 = surface_gradient_sq(v).values
    x2 = x * x

    # binomial tail sum_{k>=3} C(n-1, k) x^k, free of cancellation
    power = sum(math.comb(n - 1, k) * x**k for k in range(3, n))
    power = np.zeros_like(x) + power
    sqrt_term = 1 + g2 / 2 - np.sqrt(1 + g2 / (1 + x) ** 2)
    p0 = profile_derivatives(n, r, R, 1.0)
    h_rem = profile_derivatives(n, r, R, 1 + x)["h"] - p0["h"] - p0["h1"] * x - p0["h2"] * x2 / 2
    f_rem = profile_derivatives(n, r, R, 1 + x)["f"] - p0["f"] - p0["f1"] * x - p0["f2"] * x2 / 2

    v2 = integrate(x2, v.grid)
    mean = abs(integrate(x, v.grid) + (n - 1) / 2 * v2) / (eps * v2)
    return ExpansionResidual(
        power=_sup_ratio(power, eps * x2),
        sqrt_term=_sup_ratio(sqrt_term, eps * (x2 + g2)),
        mean=float(mean),
        h_expansion=_sup_ratio(h_rem, eps * x2),
        f_expansion=_sup_ratio(f_rem, eps * x2),
    )
