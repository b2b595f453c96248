"""Ambient hyperbolic space in geodesic polar coordinates.

Everything here is exact (closed forms, or adaptive quadrature at tight
tolerance): warp factor of the polar metric, curvature of geodesic spheres,
mixed volumes of balls, and the inverse map from a mixed volume back to the
ball radius.  These are the reference values the flow diagnostics compare
against, so they are kept free of any grid discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "AmbientParams",
    "warp",
    "warp_deriv",
    "sphere_curvature",
    "unit_sphere_area",
    "sphere_area",
    "ball_mixed_volume",
    "ball_radius_for_mixed_volume",
]


@dataclass(frozen=True)
class AmbientParams:
    """Hyperbolic space of dimension n+1 with sectional curvature -a**2.

    n is the hypersurface dimension (curves in the hyperbolic plane have
    n = 1), a > 0 the curvature scale.
    """

    n: int
    a: float

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"hypersurface dimension n must be an integer >= 1, got {self.n!r}")
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError(f"curvature scale a must be positive and finite, got {self.a!r}")


def warp(r, a):
    """Polar warp factor sinh(a r)/a of the metric dr^2 + warp(r)^2 dsigma^2."""
    r = np.asarray(r, dtype=float)
    return np.sinh(a * r) / a


def warp_deriv(r, a):
    """Radial derivative of the warp factor, cosh(a r)."""
    r = np.asarray(r, dtype=float)
    return np.cosh(a * r)


def sphere_curvature(r, a):
    """Principal curvature a*coth(a r) of the geodesic sphere of radius r.

    All principal curvatures of a geodesic sphere are equal, and the value
    stays strictly above a (the h-convexity threshold) for every r > 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("geodesic sphere radius must be positive")
    return a / np.tanh(a * r)


def unit_sphere_area(n):
    """Surface measure of the round unit n-sphere, 2 pi^((n+1)/2) / Gamma((n+1)/2)."""
    if not isinstance(n, int) or n < 0:
        raise ValueError(f"sphere dimension must be a non-negative integer, got {n!r}")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def sphere_area(r, ambient):
    """Area |S_r| = |S^n| * (sinh(a r)/a)^n of the geodesic sphere of radius r."""
    return unit_sphere_area(ambient.n) * warp(r, ambient.a) ** ambient.n


def _sinh2x_minus_2x(x):
    """sinh(2x) - 2x, evaluated without the small-x cancellation (the direct
    difference loses all significant digits as x -> 0; the series is exact to
    machine precision for |x| < 0.2 with the terms kept here)."""
    if abs(x) >= 0.2:
        return math.sinh(2.0 * x) - 2.0 * x
    y = 2.0 * x
    y2 = y * y
    term = y**3 / 6.0
    total = term
    for m in (20.0, 42.0, 72.0, 110.0, 156.0):  # (2m+2)(2m+3) for m = 1..5
        term *= y2 / m
        total += term
    return total


def _warp_power_integral(r, n, a):
    """Integral of (sinh(a s)/a)^n over s in [0, r].

    Closed forms for n in {1, 2, 3}, arranged to avoid the subtractive
    cancellation the textbook forms suffer at small a r (cosh(x) - 1 is
    written as 2 sinh^2(x/2), and cosh^3/3 - cosh + 2/3 factors as
    (cosh - 1)^2 (cosh + 2)/3); adaptive quadrature for larger n.
    """
    ar = a * r
    if n == 1:
        return 2.0 * math.sinh(0.5 * ar) ** 2 / a**2
    if n == 2:
        return _sinh2x_minus_2x(ar) / (4.0 * a**3)
    if n == 3:
        cm1 = 2.0 * math.sinh(0.5 * ar) ** 2  # cosh(ar) - 1, stable
        return cm1**2 * (cm1 + 3.0) / (3.0 * a**4)
    val, _ = integrate.quad(lambda s: (math.sinh(a * s) / a) ** n, 0.0, r,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def ball_mixed_volume(r, k, ambient):
    """Mixed volume of the geodesic ball of radius r tracked by a k-flow.

    k = 0 gives the enclosed (n+1)-volume
        |S^n| * integral_0^r (sinh(a s)/a)^n ds,
    and k in 1..n gives
        binom(n, k-1)^{-1} * H_{k-1} on the sphere * |S_r|
          = (a*coth(a r))^{k-1} * |S^n| * (sinh(a r)/a)^n,
    since the sphere's principal curvatures are all a*coth(a r).
    """
    n, a = ambient.n, ambient.a
    if not isinstance(k, int) or not (0 <= k <= n):
        raise ValueError(f"flow index k must be an integer in [0, {n}], got {k!r}")
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"ball radius must be positive and finite, got {r!r}")
    if k == 0:
        return unit_sphere_area(n) * _warp_power_integral(r, n, a)
    kappa = a / math.tanh(a * r)
    return kappa ** (k - 1) * unit_sphere_area(n) * (math.sinh(a * r) / a) ** n


def _ball_mixed_volume_deriv(r, k, ambient):
    """Exact d/dr of ball_mixed_volume, used by the Newton polish."""
    n, a = ambient.n, ambient.a
    sn = unit_sphere_area(n)
    if k == 0:
        return sn * (math.sinh(a * r) / a) ** n
    # V(r) = |S^n| a^(k-1-n) cosh^(k-1)(ar) sinh^(n-k+1)(ar)
    s, c = math.sinh(a * r), math.cosh(a * r)
    term1 = (k - 1) * c ** (k - 2) * s ** (n - k + 2) if k >= 2 else 0.0
    term2 = (n - k + 1) * c ** k * s ** (n - k) if k <= n else 0.0
    return sn * a ** (k - n) * (term1 + term2)


def ball_radius_for_mixed_volume(value, k, ambient):
    """Radius of the geodesic ball whose k-th tracked mixed volume equals value.

    The map r -> V is strictly increasing, so the root is unique.  A bisection
    on [1e-8, 50/a] brackets it, then a few Newton steps with the exact
    derivative polish to relative tolerance 1e-12.
    """
    if not (value > 0.0 and math.isfinite(value)):
        raise ValueError(f"mixed volume must be positive and finite, got {value!r}")
    a = ambient.a
    lo, hi = 1e-8, 50.0 / a
    flo = ball_mixed_volume(lo, k, ambient) - value
    fhi = ball_mixed_volume(hi, k, ambient) - value
    if flo > 0.0 or fhi < 0.0:
        raise ValueError(f"mixed volume {value!r} outside the invertible bracket for k={k}")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ball_mixed_volume(mid, k, ambient) - value > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * max(lo, 1.0):
            break
    r = 0.5 * (lo + hi)
    for _ in range(4):
        step = (ball_mixed_volume(r, k, ambient) - value) / _ball_mixed_volume_deriv(r, k, ambient)
        r_new = r - step
        if not (lo - 1e-6 <= r_new <= hi + 1e-6):
            break  # keep the bisection answer if Newton escapes the bracket
        if abs(r_new - r) <= 1e-14 * r_new:
            r = r_new
            break
        r = r_new
    return r
