"""Discrete radial graphs over geodesic spheres in hyperbolic space.

A hypersurface is stored as a positive radial function u on a uniform angular
grid about a center point:

* ``fullcircle`` -- a closed curve in the hyperbolic plane (n = 1), nodes
  theta_j = 2*pi*j/N, periodic, 4th-order central differences (optionally
  spectral differentiation).
* ``axisym`` -- a rotationally symmetric hypersurface in H^{n+1}, radial
  profile over the colatitude theta in [0, pi], staggered nodes
  theta_j = pi*(j+1/2)/N (no node sits on a pole), 2nd-order central
  differences with even reflection across both poles (u'(0) = u'(pi) = 0).

This module owns the patch type, geometry assembly (metric, curvatures,
measure), quadrature, mixed volumes, recentering by hyperbolic isometries,
inball-center estimation, snapshot I/O, and initial-data construction.

Quadrature note: on the axisym grid the weight of node j is not the naive
midpoint value sin^{n-1}(theta_j)*dtheta.  The even extension of a smooth
profile makes integrands cosine series, so we use the unique weights on the
same nodes that integrate cos(m*theta)*sin^{n-1}(theta) exactly for
m = 0..N-1 (moment matching).  They are spectrally accurate, positive, and
reduce to plain midpoint for n = 1; the naive weights would bias every
surface integral at O(N^-2) from the pole kinks of the extension.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.fft import dct

from . import kernels
from .ambient import AmbientParams, unit_sphere_area
from .curvfn import elementary_symmetric_all

BACKENDS = ("fullcircle", "axisym")
U0_KINDS = ("sphere", "cosine", "random_fourier")


class GeometryError(ValueError):
    """Graph geometry has degenerated (non-finite or non-positive fields)."""


class RecenterError(ValueError):
    """Recentering failed: target center not strictly inside, or no unique
    ray-surface intersection."""


# ---------------------------------------------------------------------------
# patch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphPatch:
    """Immutable radial graph u(theta_j) > 0 about a fixed center."""

    backend: str
    n: int
    a: float
    u: np.ndarray

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"dimension n must be an integer >= 1, got {self.n!r}")
        if self.backend == "fullcircle" and self.n != 1:
            raise ValueError("fullcircle backend is the plane curve case (n = 1)")
        if not (isinstance(self.a, (int, float)) and self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"curvature scale a must be positive and finite, got {self.a!r}")
        u = np.array(self.u, dtype=float, copy=True)
        if u.ndim != 1 or u.shape[0] < 8:
            raise ValueError(f"u must be a 1-D vector with at least 8 nodes, got shape {u.shape}")
        if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
            raise ValueError("graph values u must be finite and strictly positive")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "a", float(self.a))

    @property
    def N(self):
        return self.u.shape[0]

    @property
    def dtheta(self):
        return (2.0 * math.pi if self.backend == "fullcircle" else math.pi) / self.N

    @property
    def ambient(self):
        return AmbientParams(n=self.n, a=self.a)

    def thetas(self):
        if self.backend == "fullcircle":
            return 2.0 * math.pi * np.arange(self.N) / self.N
        return math.pi * (np.arange(self.N) + 0.5) / self.N

    def with_u(self, u):
        return GraphPatch(backend=self.backend, n=self.n, a=self.a, u=u)


# ---------------------------------------------------------------------------
# quadrature weights
# ---------------------------------------------------------------------------

def _sin_power_series(p):
    """Exact trig-polynomial coefficients of sin^p:
    sin^p(t) = alpha_0 + sum_{m=1}^{p} (alpha_m cos(m t) + beta_m sin(m t)).

    Sampled on a grid fine enough that the DFT recovers the coefficients
    exactly (up to roundoff, which is zeroed below 1e-14)."""
    if p == 0:
        return np.array([1.0]), np.array([0.0])
    M = 4 * (p + 2)
    t = 2.0 * math.pi * np.arange(M) / M
    c = np.fft.rfft(np.sin(t) ** p) / M
    alpha = 2.0 * c.real
    alpha[0] = c[0].real
    beta = -2.0 * c.imag
    alpha, beta = alpha[: p + 1], beta[: p + 1]
    alpha[np.abs(alpha) < 1e-14] = 0.0
    beta[np.abs(beta) < 1e-14] = 0.0
    return alpha, beta


@lru_cache(maxsize=None)
def _axisym_weights(N, p):
    """Weights w_j on theta_j = pi*(j+1/2)/N with
    sum_j w_j cos(m theta_j) = integral_0^pi cos(m t) sin^p(t) dt
    for every m = 0..N-1 (see module docstring)."""
    alpha, beta = _sin_power_series(p)
    m = np.arange(N)
    c = np.zeros(N)
    for q in range(min(p, N - 1) + 1):
        if alpha[q] != 0.0:
            c[q] += alpha[q] * (math.pi if q == 0 else math.pi / 2.0)
    for q in range(1, p + 1):
        if beta[q] != 0.0:
            odd = (m + q) % 2 == 1
            c[odd] += beta[q] * 2.0 * q / (q * q - m[odd] ** 2)
    theta = math.pi * (np.arange(N) + 0.5) / N
    w = (c[0] + 2.0 * np.cos(np.outer(theta, m[1:])) @ c[1:]) / N
    if np.any(w <= 0.0):
        raise GeometryError(f"axisym quadrature weights not positive for N={N}, n={p + 1}")
    w.flags.writeable = False
    return w


def quad_weights(patch):
    """Angular quadrature weights W_j such that
    integral over M of (field) dmu = sum_j W_j * mdens_j * field_j."""
    if patch.backend == "fullcircle":
        return np.full(patch.N, 2.0 * math.pi / patch.N)
    return unit_sphere_area(patch.n - 1) * _axisym_weights(patch.N, patch.n - 1)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryFields:
    """Per-node geometry of a patch.

    kappa holds the distinct principal curvatures per node, column 0 the
    meridian curvature kappa_theta and (axisym, n >= 2) column 1 the
    azimuthal curvature kappa_phi; mult gives their multiplicities.
    g_diag are the diagonal induced-metric blocks in the same column layout.
    mdens is the area element per unit quadrature weight (pairs with
    quad_weights), chi = v/sinh(a u)."""

    du: np.ndarray
    d2u: np.ndarray
    v: np.ndarray
    g_diag: np.ndarray
    kappa: np.ndarray
    mult: tuple
    mdens: np.ndarray
    chi: np.ndarray

    @property
    def g_inv_diag(self):
        return 1.0 / self.g_diag

    @property
    def h_diag(self):
        """Second-fundamental-form diagonal blocks h = kappa * g."""
        return self.kappa * self.g_diag

    def kappa_full(self):
        """(N, n) matrix of all principal curvatures, multiplicities expanded."""
        return np.repeat(self.kappa, self.mult, axis=1)

    def mean_curvature(self):
        return self.kappa @ np.asarray(self.mult, dtype=float)


def _spectral_derivs(u):
    N = u.shape[0]
    uh = np.fft.rfft(u)
    m = np.arange(uh.shape[0], dtype=float)
    if N % 2 == 0:
        m_first = m.copy()
        m_first[-1] = 0.0  # odd-derivative Nyquist mode has no real representative
    else:
        m_first = m
    du = np.fft.irfft(1j * m_first * uh, n=N)
    d2u = np.fft.irfft(-(m * m) * uh, n=N)
    return du, d2u


def build_geometry(patch, spectral=False):
    """Assemble metric, curvatures, and measure for a patch.

    spectral=True switches the fullcircle derivatives to FFT differentiation
    (the default is the 4th-order stencil); it is not available for the
    axisym backend.
    """
    a, n, u = patch.a, patch.n, patch.u
    if patch.backend == "fullcircle":
        if spectral:
            du, d2u = _spectral_derivs(u)
            du, d2u, v, g, kap, sq = kernels.pure._fullcircle_fields(u, du, d2u, a)
        else:
            du, d2u, v, g, kap, sq = kernels.geom_fullcircle(u, a)
        g_diag = g[:, None]
        kappa = kap[:, None]
        mult = (1,)
        mdens = sq
    else:
        if spectral:
            raise ValueError("spectral differentiation is only available on the fullcircle backend")
        theta = patch.thetas()
        cot = np.cos(theta) / np.sin(theta)
        du, d2u, v, g, kth, kph, mdens = kernels.geom_axisym(u, cot, a, n)
        phi = np.sinh(a * u) / a
        g_diag = np.stack([g, (phi * np.sin(theta)) ** 2], axis=1)
        kappa = np.stack([kth, kph], axis=1)
        mult = (1, n - 1)
    fields = (du, d2u, v, g_diag, kappa, mdens)
    for arr in fields:
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise GeometryError(f"non-finite geometry at node {bad}")
    if np.any(g_diag <= 0.0):
        bad = int(np.argwhere(g_diag <= 0.0)[0][0])
        raise GeometryError(f"induced metric not positive definite at node {bad}")
    chi = v / np.sinh(a * u)
    return GeometryFields(du=du, d2u=d2u, v=v, g_diag=g_diag, kappa=kappa,
                          mult=mult, mdens=mdens, chi=chi)


# ---------------------------------------------------------------------------
# integrals and mixed volumes
# ---------------------------------------------------------------------------

def surface_integral(patch, field, geom=None):
    """Integral of a per-node field over the hypersurface measure."""
    field = np.asarray(field, dtype=float)
    if field.shape != (patch.N,):
        raise ValueError(f"field must have shape ({patch.N},), got {field.shape}")
    if geom is None:
        geom = build_geometry(patch)
    return float(quad_weights(patch) @ (geom.mdens * field))


def _enclosed_volume_density(u, n, a):
    """Psi(u) = integral_0^u (sinh(a s)/a)^n ds, vectorized over nodes."""
    au = a * u
    if n == 1:
        return (np.cosh(au) - 1.0) / a**2
    if n == 2:
        return (np.sinh(2.0 * au) / 2.0 - au) / (2.0 * a**3)
    if n == 3:
        c = np.cosh(au)
        return (c**3 / 3.0 - c + 2.0 / 3.0) / a**4
    out = np.empty_like(u)
    for j, r in enumerate(u):
        out[j], _ = integrate.quad(lambda s: (math.sinh(a * s) / a) ** n, 0.0, r,
                                   epsabs=1e-13, epsrel=1e-13, limit=200)
    return out


def mixed_volume(patch, k, geom=None):
    """V_{n+1-k}(M): enclosed volume for k = 0, else
    binom(n, k-1)^{-1} * integral of H_{k-1} over M."""
    n = patch.n
    if not isinstance(k, int) or not (0 <= k <= n):
        raise ValueError(f"flow index k must be an integer in [0, {n}], got {k!r}")
    if k == 0:
        psi = _enclosed_volume_density(patch.u, n, patch.a)
        return float(quad_weights(patch) @ psi)
    if geom is None:
        geom = build_geometry(patch)
    if k == 1:
        field = np.ones(patch.N)
    else:
        field = elementary_symmetric_all(geom.kappa_full())[:, k - 1]
    return surface_integral(patch, field, geom=geom) / math.comb(n, k - 1)


def all_mixed_volumes(patch, geom=None):
    """Array [V_{n+1}, V_n, ..., V_1] indexed by k = 0..n."""
    if geom is None:
        geom = build_geometry(patch)
    return np.array([mixed_volume(patch, k, geom=geom) for k in range(patch.n + 1)])


def area(patch, geom=None):
    """Surface measure |M|."""
    return surface_integral(patch, np.ones(patch.N), geom=geom)


# ---------------------------------------------------------------------------
# radial interpolation
# ---------------------------------------------------------------------------

def interpolate_radius(patch, theta):
    """Evaluate the radial function at arbitrary angles by its exact
    trigonometric interpolant (periodic for fullcircle, cosine series on the
    staggered grid for axisym)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    u = patch.u
    N = patch.N
    if patch.backend == "fullcircle":
        c = np.fft.rfft(u)
        half = (N - 1) // 2
        m = np.arange(1, half + 1)
        ang = np.outer(theta, m)
        vals = c[0].real + 2.0 * (np.cos(ang) @ c[1:half + 1].real
                                  - np.sin(ang) @ c[1:half + 1].imag)
        if N % 2 == 0:
            vals = vals + c[N // 2].real * np.cos((N // 2) * theta)
        return vals / N
    A = dct(u, type=2) / 2.0  # A_m = sum_j u_j cos(m theta_j)
    ang = np.outer(theta, np.arange(1, N))
    return (A[0] + 2.0 * (np.cos(ang) @ A[1:])) / N


# ---------------------------------------------------------------------------
# recentering
# ---------------------------------------------------------------------------

def _resolve_displacement(patch, distance, direction):
    """Normalize to d >= 0 and a backend-legal direction angle."""
    d = float(distance)
    psi = float(direction)
    if patch.backend == "axisym":
        if min(abs(psi), abs(psi - math.pi)) > 1e-12:
            raise RecenterError("axisym recentering must translate along the symmetry axis "
                                "(direction 0 or pi)")
        toward_zero = abs(psi) <= 1e-12
        s = d if toward_zero else -d  # signed displacement toward theta = 0
        if s >= 0.0:
            return s, 0.0
        return -s, math.pi
    if d < 0.0:
        d, psi = -d, psi + math.pi
    return d, math.atan2(math.sin(psi), math.cos(psi))


def recenter(patch, distance, direction=0.0):
    """Re-express the hypersurface as a graph about a translated center.

    The new center sits at geodesic distance `distance` from the old one in
    angular direction `direction` (old coordinates).  Per new-grid ray the
    radius solves the hyperbolic law of cosines against the old graph
    (root-finding tolerance 1e-12).  Axisym patches may only translate along
    the symmetry axis.
    """
    d, psi = _resolve_displacement(patch, distance, direction)
    a = patch.a
    if d == 0.0:
        return patch.with_u(patch.u)
    u_psi = float(interpolate_radius(patch, psi)[0])
    if d >= u_psi * (1.0 - 1e-12):
        raise RecenterError(f"displacement {d} reaches the surface "
                            f"(radius {u_psi} along the move direction)")

    theta_new = patch.thetas()
    cb = np.cos(theta_new - psi)
    if patch.backend == "fullcircle":
        sgn = np.where(np.sin(theta_new - psi) >= 0.0, 1.0, -1.0)
    chd, shd = math.cosh(a * d), math.sinh(a * d)

    def gap(rho):
        """Signed distance along each new ray: (radius from old center) minus
        (old graph at the ray's old angle); increasing through the root."""
        arg = chd * np.cosh(a * rho) + shd * np.sinh(a * rho) * cb
        arg = np.maximum(arg, 1.0)
        r_old = np.arccosh(arg) / a
        denom = np.maximum(shd * np.sqrt(np.maximum(arg * arg - 1.0, 0.0)), 1e-300)
        cos_th = np.clip((chd * arg - np.cosh(a * rho)) / denom, -1.0, 1.0)
        th_hat = np.arccos(cos_th)
        if patch.backend == "fullcircle":
            th_old = psi + sgn * th_hat
        else:
            th_old = th_hat if psi == 0.0 else math.pi - th_hat
        return r_old - interpolate_radius(patch, th_old)

    lo = np.full(patch.N, 1e-12)
    hi = np.full(patch.N, d + float(patch.u.max()) + 0.5 / a)
    if np.any(gap(lo) >= 0.0) or np.any(gap(hi) <= 0.0):
        raise RecenterError("ray-surface intersection not bracketed; "
                            "star-shapedness about the new center is broken")
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        neg = gap(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if float((hi - lo).max()) < 1e-13:
            break
    u_new = 0.5 * (lo + hi)
    try:
        return patch.with_u(u_new)
    except ValueError as exc:
        raise RecenterError(f"recentered graph invalid: {exc}") from exc


def _min_distance_to_nodes(patch, d_c, psi_c):
    """Smallest geodesic distance from the interior point (d_c, psi_c) in old
    polar coordinates to the surface nodes (law of cosines)."""
    a = patch.a
    arg = (math.cosh(a * d_c) * np.cosh(a * patch.u)
           - math.sinh(a * d_c) * np.sinh(a * patch.u) * np.cos(patch.thetas() - psi_c))
    return float(np.arccosh(np.maximum(arg, 1.0)).min()) / a


def inball_displacement(patch):
    """Approximate inball center as (distance, direction, inradius) in the
    patch's current coordinates.

    Fullcircle: start from the hyperboloid-model barycenter of the measure
    and improve by compass pattern search on pseudo-Cartesian displacement
    coordinates.  Axisym: 1-D search along the symmetry axis (coarse scan +
    bounded refinement).
    """
    a = patch.a
    u = patch.u
    theta = patch.thetas()
    if patch.backend == "axisym":
        lo = -float(interpolate_radius(patch, math.pi)[0]) * (1.0 - 1e-9)
        hi = float(interpolate_radius(patch, 0.0)[0]) * (1.0 - 1e-9)

        def inr(s):
            arg = (np.cosh(a * s) * np.cosh(a * u)
                   - np.sinh(a * s) * np.sinh(a * u) * np.cos(theta))
            return float(np.arccosh(np.maximum(arg, 1.0)).min()) / a

        grid = np.linspace(lo, hi, 201)
        vals = [inr(s) for s in grid]
        i = int(np.argmax(vals))
        from scipy.optimize import minimize_scalar
        lo_i = grid[max(i - 1, 0)]
        hi_i = grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(lambda s: -inr(s), bounds=(lo_i, hi_i),
                              method="bounded", options={"xatol": 1e-13})
        s_best = float(res.x)
        if inr(0.0) >= inr(s_best):
            s_best = 0.0
        return (abs(s_best), 0.0 if s_best >= 0.0 else math.pi, inr(s_best))

    geom = build_geometry(patch)
    mu = quad_weights(patch) * geom.mdens
    T = np.cosh(a * u)
    X = np.sinh(a * u) * np.cos(theta)
    Y = np.sinh(a * u) * np.sin(theta)
    B = np.array([mu @ T, mu @ X, mu @ Y])
    norm2 = B[0] ** 2 - B[1] ** 2 - B[2] ** 2
    if norm2 <= 0.0:
        z = np.zeros(2)
    else:
        Bh = B / math.sqrt(norm2)
        d0 = math.acosh(max(Bh[0], 1.0)) / a
        psi0 = math.atan2(Bh[2], Bh[1])
        z = np.array([d0 * math.cos(psi0), d0 * math.sin(psi0)])

    def inr(zv):
        d_c = math.hypot(zv[0], zv[1])
        psi_c = math.atan2(zv[1], zv[0]) if d_c > 0.0 else 0.0
        if d_c >= float(u.min()) + 0.5 / a:  # certainly not interior; reject
            return -math.inf
        return _min_distance_to_nodes(patch, d_c, psi_c)

    best = inr(z)
    if not math.isfinite(best):
        z = np.zeros(2)
        best = inr(z)
    step = max(0.2 * float(u.mean()), 1e-3)
    moves = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    evals = 0
    while step > 1e-12 and evals < 100_000:
        improved = False
        for mv in moves:
            cand = z + step * mv
            val = inr(cand)
            evals += 1
            if val > best:
                z, best = cand, val
                improved = True
        if not improved:
            step *= 0.5
    d_c = math.hypot(z[0], z[1])
    psi_c = math.atan2(z[1], z[0]) if d_c > 0.0 else 0.0
    return (d_c, psi_c, best)


def recenter_to_inball(patch):
    """Recenter at the approximate inball center; returns
    (patch', {distance, direction, inradius})."""
    d, psi, rho = inball_displacement(patch)
    info = {"distance": d, "direction": psi, "inradius": rho}
    if d < 1e-12:
        return patch.with_u(patch.u), info
    return recenter(patch, d, psi), info


def radial_gap(patch):
    """max u - min u about the current center."""
    return float(patch.u.max() - patch.u.min())


# ---------------------------------------------------------------------------
# snapshot I/O
# ---------------------------------------------------------------------------

def save_patch(path, patch, t=0.0):
    """Write a snapshot: one header line `backend N n a t`, then N lines
    `theta u`, full double precision, written atomically."""
    lines = [f"{patch.backend} {patch.N} {patch.n} {patch.a:.17g} {t:.17g}"]
    th = patch.thetas()
    lines.extend(f"{th[j]:.17g} {patch.u[j]:.17g}" for j in range(patch.N))
    payload = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snap-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_patch(path):
    """Read a snapshot back; returns (patch, t)."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ValueError(f"snapshot {path!r} is empty")
    head = raw[0].split()
    if len(head) != 5:
        raise ValueError(f"snapshot header must be 'backend N n a t', got {raw[0]!r}")
    backend, N, n, a, t = head[0], int(head[1]), int(head[2]), float(head[3]), float(head[4])
    if len(raw) - 1 != N:
        raise ValueError(f"snapshot {path!r} has {len(raw) - 1} rows, header says {N}")
    data = np.array([[float(x) for x in ln.split()] for ln in raw[1:]])
    if data.shape != (N, 2):
        raise ValueError(f"snapshot rows must be 'theta u' pairs, got shape {data.shape}")
    patch = GraphPatch(backend=backend, n=n, a=a, u=data[:, 1])
    if float(np.abs(data[:, 0] - patch.thetas()).max()) > 1e-9:
        raise ValueError(f"snapshot {path!r} node angles do not match the uniform grid")
    return patch, t


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def make_initial(backend, n, a, N, kind, radius, amp=0.0, mode=2, seed=0):
    """Construct initial data: 'sphere' (u = radius), 'cosine'
    (radius + amp*cos(mode*theta)), or 'random_fourier' (deterministic
    low-mode perturbation with sup-norm amp, seeded)."""
    if kind not in U0_KINDS:
        raise ValueError(f"u0.kind must be one of {U0_KINDS}, got {kind!r}")
    if not (radius > 0.0 and math.isfinite(radius)):
        raise ValueError(f"u0.radius must be positive and finite, got {radius!r}")
    theta = (2.0 * math.pi * np.arange(N) / N if backend == "fullcircle"
             else math.pi * (np.arange(N) + 0.5) / N)
    if kind == "sphere":
        u = np.full(N, float(radius))
    elif kind == "cosine":
        u = radius + amp * np.cos(mode * theta)
    else:
        rng = np.random.default_rng(seed)
        mmax = max(int(mode), 1)
        pert = np.zeros(N)
        for m in range(1, mmax + 1):
            amp_m = rng.standard_normal() / (m * m)
            if backend == "fullcircle":
                phase = rng.uniform(0.0, 2.0 * math.pi)
                pert += amp_m * np.cos(m * theta + phase)
            else:
                pert += amp_m * np.cos(m * theta)
        peak = float(np.abs(pert).max())
        if peak > 0.0 and amp != 0.0:
            pert *= amp / peak
        else:
            pert[:] = 0.0
        u = radius + pert
    return GraphPatch(backend=backend, n=n, a=a, u=u)
