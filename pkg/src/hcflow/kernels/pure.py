"""Pure-numpy kernel lane.

Reference implementations of the hot per-node kernels: graph geometry of the
radial graph (finite differences, curvatures, measure density) and the full
flow stage evaluation (curvature speed, nonlocal forcing term, right-hand
side).  The compiled lane in `_core.pyx` mirrors these bit-for-bit up to
summation order; parity is pinned by tests.

Conventions
-----------
FullCircle backend: n = 1, uniform periodic grid theta_j = 2*pi*j/N, 4th-order
central differences.  Axisymmetric backend: n >= 1, staggered colatitude grid
theta_j = pi*(j+1/2)/N, 2nd-order central differences with even reflection
through both poles.  Principal curvatures of the graph u over the geodesic
sphere, with phi = sinh(a*u)/a and phi' = cosh(a*u):

    kappa_theta = (phi'*(2*u'^2 + phi^2) - phi*u'') / g^(3/2)
    kappa_phi   = (phi' - u'*cot(theta)/phi) / sqrt(g),   g = u'^2 + phi^2

(kappa_phi carries multiplicity n-1; it equals phi'/phi on spheres).  The
measure density is sqrt(g)*phi^(n-1): the surface measure is
sum_j W_j * mdens_j with the caller's quadrature weights W.

Stage results are tuples
    (ok, margin, rhs, F, f, <kappa...>, v, mdens, lam, max_metric_grad,
     min_u, min_sqrt_g)
with ok = 0 on success, 1 for invalid u (non-finite or non-positive), and
2 when the shifted-cone admissibility margin min(kappa) - alpha is <= 0
(rhs/F/f are None in the failure cases).

Family codes: 0 MeanH, 1 NormA, 2 CompletelySymmetric(k=p1),
3 ElemSymmetricQuotient(k=p1, l=p2), 4 PowerMean(r=p1).
"""

from __future__ import annotations

import math

import numpy as np

LANE = "pure"

FAM_MEANH = 0
FAM_NORMA = 1
FAM_CSYM = 2
FAM_QUOTIENT = 3
FAM_POWER = 4


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def geom_fullcircle(u, a):
    N = u.shape[0]
    h = 2.0 * math.pi / N
    up1 = np.roll(u, -1)
    um1 = np.roll(u, 1)
    up2 = np.roll(u, -2)
    um2 = np.roll(u, 2)
    du = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * h)
    d2u = (-up2 + 16.0 * up1 - 30.0 * u + 16.0 * um1 - um2) / (12.0 * h * h)
    return _fullcircle_fields(u, du, d2u, a)


def _fullcircle_fields(u, du, d2u, a):
    """Curve geometry from u and given derivatives (shared with the optional
    spectral-differentiation path)."""
    phi = np.sinh(a * u) / a
    phip = np.cosh(a * u)
    g = du * du + phi * phi
    sq = np.sqrt(g)
    v = sq / phi
    kappa = (phip * (2.0 * du * du + phi * phi) - phi * d2u) / (g * sq)
    return du, d2u, v, g, kappa, sq


def geom_axisym(u, cot_theta, a, n):
    N = u.shape[0]
    h = math.pi / N
    ue = np.empty(N + 2)
    ue[1:-1] = u
    ue[0] = u[0]       # even reflection across theta = 0
    ue[-1] = u[-1]     # even reflection across theta = pi
    du = (ue[2:] - ue[:-2]) / (2.0 * h)
    d2u = (ue[2:] - 2.0 * u + ue[:-2]) / (h * h)
    phi = np.sinh(a * u) / a
    phip = np.cosh(a * u)
    g = du * du + phi * phi
    sq = np.sqrt(g)
    v = sq / phi
    kth = (phip * (2.0 * du * du + phi * phi) - phi * d2u) / (g * sq)
    kph = (phip - du * cot_theta / phi) / sq
    mdens = sq * phi ** (n - 1)
    return du, d2u, v, g, kth, kph, mdens


# ---------------------------------------------------------------------------
# curvature families on the (kappa_theta, kappa_phi x (n-1)) pair form
# ---------------------------------------------------------------------------

def _family_value_pair(fam, p1, p2, c_F, n, x, y):
    """Normalized family value on the multiset {x} + (n-1)*{y}, x,y > 0."""
    if fam == FAM_MEANH:
        return (x + (n - 1) * y) / n
    if fam == FAM_NORMA:
        return np.sqrt((x * x + (n - 1) * y * y) / n)
    if fam == FAM_CSYM:
        k = int(p1)
        return c_F * _h_pair_table(k, n, x, y)[k] ** (1.0 / k)
    if fam == FAM_QUOTIENT:
        k, l = int(p1), int(p2)
        ek = _e_pair(k, n, x, y)
        el = _e_pair(l, n, x, y)
        return c_F * (ek / el) ** (1.0 / (k - l))
    r = float(p1)
    if r == 0.0:
        return (x * y ** (n - 1)) ** (1.0 / n)
    return ((x ** r + (n - 1) * y ** r) / n) ** (1.0 / r)


def _family_lam_pair(fam, p1, p2, c_F, n, x, y):
    """Largest gradient entry max(dF/dx, dF/dy) per node (CFL diffusivity)."""
    if fam == FAM_MEANH:
        return np.full_like(x, 1.0 / n)
    if fam == FAM_NORMA:
        val = np.sqrt((x * x + (n - 1) * y * y) / n)
        return np.maximum(x, y) / (n * val)
    if fam == FAM_CSYM:
        k = int(p1)
        h = _h_pair_table(k, n, x, y)
        dhx = np.zeros_like(x)
        dhy = np.zeros_like(x)
        powx = np.ones_like(x)
        powy = np.ones_like(x)
        for j in range(k):
            dhx = dhx + powx * h[k - 1 - j]
            dhy = dhy + powy * h[k - 1 - j]
            if j < k - 1:
                powx = powx * x
                powy = powy * y
        factor = c_F * (1.0 / k) * h[k] ** (1.0 / k - 1.0)
        return factor * np.maximum(dhx, dhy)
    if fam == FAM_QUOTIENT:
        k, l = int(p1), int(p2)
        val = _family_value_pair(fam, p1, p2, c_F, n, x, y)
        ek = _e_pair(k, n, x, y)
        el = _e_pair(l, n, x, y)
        dkx = _e_pair_minus_x(k, n, y)
        dky = _e_pair_minus_y(k, n, x, y)
        if l == 0:
            relx = dkx / ek
            rely = dky / ek
        else:
            relx = dkx / ek - _e_pair_minus_x(l, n, y) / el
            rely = dky / ek - _e_pair_minus_y(l, n, x, y) / el
        return val * np.maximum(relx, rely) / (k - l)
    r = float(p1)
    if r == 0.0:
        val = (x * y ** (n - 1)) ** (1.0 / n)
        return val / (n * np.minimum(x, y))
    val = ((x ** r + (n - 1) * y ** r) / n) ** (1.0 / r)
    zmax = np.minimum(x, y) if r < 1.0 else np.maximum(x, y)
    return val ** (1.0 - r) * zmax ** (r - 1.0) / n


def _h_pair_table(kmax, n, x, y):
    """Complete homogeneous h_0..h_kmax of {x} + (n-1)*{y} as a list of arrays:
    h_m = sum_i x^i * binom(n-2+m-i, m-i) * y^(m-i)."""
    table = []
    for m in range(kmax + 1):
        acc = np.zeros_like(x)
        powx = np.ones_like(x)
        for i in range(m + 1):
            acc = acc + math.comb(n - 2 + m - i, m - i) * powx * y ** (m - i)
            powx = powx * x
        table.append(acc)
    return table


def _e_pair(m, n, x, y):
    """Elementary symmetric e_m of {x} + (n-1)*{y}."""
    if m == 0:
        return np.ones_like(x)
    acc = math.comb(n - 1, m) * y ** m if m <= n - 1 else np.zeros_like(x)
    if m - 1 <= n - 1:
        acc = acc + math.comb(n - 1, m - 1) * x * y ** (m - 1)
    return acc


def _e_pair_minus_x(m, n, y):
    """d e_m/dx = e_{m-1} of (n-1)*{y}."""
    if m - 1 > n - 1:
        return np.zeros_like(y)
    return math.comb(n - 1, m - 1) * y ** (m - 1) if m >= 1 else np.zeros_like(y)


def _e_pair_minus_y(m, n, x, y):
    """d e_m/dy for one of the y's = e_{m-1} of {x} + (n-2)*{y}."""
    acc = math.comb(n - 2, m - 1) * y ** (m - 1) if 1 <= m <= n - 1 else np.zeros_like(x)
    if m >= 2 and m - 2 <= n - 2:
        acc = acc + math.comb(n - 2, m - 2) * x * y ** (m - 2)
    return acc


def _global_weight_pair(k, n, a, x, y):
    """Nonlocal-term weight k*H_k + a^2*(n-k+2)*H_{k-2} (H_k for k <= 1)."""
    if k == 0:
        return np.ones_like(x)
    if k == 1:
        return _e_pair(1, n, x, y)
    return k * _e_pair(k, n, x, y) + a * a * (n - k + 2) * _e_pair(k - 2, n, x, y)


# ---------------------------------------------------------------------------
# stage evaluation
# ---------------------------------------------------------------------------

def stage_fullcircle(u, a, alpha, k, fam, p1, p2, c_F, W):
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        return (1, math.nan) + (None,) * 10
    du, d2u, v, g, kappa, mdens = geom_fullcircle(u, a)
    margin = float(kappa.min()) - alpha
    phi = np.sinh(a * u) / a
    max_metric_grad = float(np.abs(du / phi).max())
    min_u = float(u.min())
    min_sqrt_g = float(mdens.min())  # n = 1: mdens = sqrt(g)
    if margin <= 0.0:
        return (2, margin, None, None, None, kappa, v, mdens, None,
                max_metric_grad, min_u, min_sqrt_g)
    x = kappa - alpha
    F = x  # every normalized degree-one family is the identity for n = 1
    lam = 1.0
    wgt = np.ones_like(u) if k == 0 else kappa
    wm = W * mdens * wgt
    f = float(np.dot(wm, F) / wm.sum())
    rhs = -v * (F - f)
    return (0, margin, rhs, F, f, kappa, v, mdens, lam,
            max_metric_grad, min_u, min_sqrt_g)


def stage_axisym(u, cot_theta, a, n, alpha, k, fam, p1, p2, c_F, W):
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        return (1, math.nan) + (None,) * 11
    du, d2u, v, g, kth, kph, mdens = geom_axisym(u, cot_theta, a, n)
    if n == 1:
        kmin = kth
    else:
        kmin = np.minimum(kth, kph)
    margin = float(kmin.min()) - alpha
    phi = np.sinh(a * u) / a
    max_metric_grad = float(np.abs(du / phi).max())
    min_u = float(u.min())
    min_sqrt_g = float(np.sqrt(g).min())
    if margin <= 0.0:
        return (2, margin, None, None, None, kth, kph, v, mdens, None,
                max_metric_grad, min_u, min_sqrt_g)
    x = kth - alpha
    y = kph - alpha
    if n == 1:
        F = x
        lam = 1.0
    else:
        F = _family_value_pair(fam, p1, p2, c_F, n, x, y)
        lam = float(_family_lam_pair(fam, p1, p2, c_F, n, x, y).max())
    wgt = _global_weight_pair(k, n, a, kth, kph)
    wm = W * mdens * wgt
    f = float(np.dot(wm, F) / wm.sum())
    rhs = -v * (F - f)
    return (0, margin, rhs, F, f, kth, kph, v, mdens, lam,
            max_metric_grad, min_u, min_sqrt_g)
