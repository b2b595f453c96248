"""Graph patches: quadrature weights, discrete geometry against analytic and
hyperboloid-model oracles, mixed volumes, recentering, the inball search, and
snapshot I/O."""

import math

import numpy as np
import pytest

from conftest import axisym_patch, fullcircle_patch, sphere_patch
from oracle_hyperboloid import (
    curve_curvature,
    enclosed_volume_quadrature,
    revolution_curvatures,
)

from hcflow.ambient import AmbientParams, ball_mixed_volume, sphere_area, sphere_curvature
from hcflow.hypersurface import (
    GeometryError,
    GraphPatch,
    RecenterError,
    all_mixed_volumes,
    area,
    build_geometry,
    inball_displacement,
    interpolate_radius,
    load_patch,
    make_initial,
    mixed_volume,
    quad_weights,
    radial_gap,
    recenter,
    recenter_to_inball,
    save_patch,
    surface_integral,
)

# ---------------------------------------------------------------------------
# patch construction and validation
# ---------------------------------------------------------------------------


def test_patch_validation():
    good = np.full(16, 1.0)
    with pytest.raises(ValueError):
        GraphPatch(backend="fullcircle", n=2, a=1.0, u=good)  # fullcircle is n=1
    with pytest.raises(ValueError):
        GraphPatch(backend="nowhere", n=1, a=1.0, u=good)
    with pytest.raises(ValueError):
        GraphPatch(backend="fullcircle", n=1, a=1.0, u=np.full(4, 1.0))  # N too small
    with pytest.raises(ValueError):
        GraphPatch(backend="fullcircle", n=1, a=1.0, u=np.full(16, -1.0))
    bad = good.copy(); bad[3] = math.nan
    with pytest.raises(ValueError):
        GraphPatch(backend="fullcircle", n=1, a=1.0, u=bad)
    # the axisym backend admits n = 1 (reflection-symmetric curve on a half circle)
    GraphPatch(backend="axisym", n=1, a=1.0, u=good)


def test_patch_is_immutable_and_copies_input():
    u = np.full(16, 1.0)
    p = GraphPatch(backend="fullcircle", n=1, a=1.0, u=u)
    u[0] = 99.0
    assert p.u[0] == 1.0
    with pytest.raises(ValueError):
        p.u[0] = 2.0  # read-only view


def test_grids():
    p = fullcircle_patch(lambda th: np.ones_like(th), N=16)
    assert p.dtheta == pytest.approx(2.0 * math.pi / 16)
    assert p.thetas()[0] == 0.0
    q = axisym_patch(lambda th: np.ones_like(th), N=16)
    assert q.dtheta == pytest.approx(math.pi / 16)
    # staggered: nodes avoid the poles symmetrically
    assert q.thetas()[0] == pytest.approx(math.pi / 32)
    assert q.thetas()[-1] == pytest.approx(math.pi - math.pi / 32)


# ---------------------------------------------------------------------------
# quadrature weights
# ---------------------------------------------------------------------------


def test_fullcircle_weights_are_uniform():
    p = fullcircle_patch(lambda th: np.ones_like(th), N=32)
    w = quad_weights(p)
    assert np.allclose(w, 2.0 * math.pi / 32, rtol=0, atol=1e-15)


def test_axisym_weights_integrate_moments_exactly():
    # the weights must integrate cos(m theta) sin^{n-1}(theta) d(theta) exactly
    # for every m < N (that is what makes sphere integrals exact); the oracle
    # is composite Gauss-Legendre, exact to machine precision for these
    # trigonometric integrands
    from numpy.polynomial.legendre import leggauss

    xg, wg = leggauss(48)
    edges = np.linspace(0.0, math.pi, 9)
    nodes = np.concatenate(
        [0.5 * (b - a) * (xg + 1.0) + a for a, b in zip(edges[:-1], edges[1:])])
    wq = np.concatenate([0.5 * (b - a) * wg for a, b in zip(edges[:-1], edges[1:])])
    for n in (2, 3, 4, 5):
        for N in (8, 24):
            p = axisym_patch(lambda th: np.ones_like(th), n=n, N=N)
            w = quad_weights(p) / (2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0))
            th = p.thetas()
            for m in range(N):
                want = float(wq @ (np.cos(m * nodes) * np.sin(nodes) ** (n - 1)))
                got = float(w @ np.cos(m * th))
                assert got == pytest.approx(want, abs=5e-13), (n, N, m)


def test_axisym_weights_positive():
    for n in (2, 3, 4, 7):
        for N in (8, 64, 256):
            p = axisym_patch(lambda th: np.ones_like(th), n=n, N=N)
            assert np.all(quad_weights(p) > 0.0)


# ---------------------------------------------------------------------------
# geometry on exact spheres
# ---------------------------------------------------------------------------


def test_sphere_geometry_exact_fullcircle():
    for a in (0.5, 1.0, 2.0):
        for r in (0.4, 1.0, 2.5):
            p = sphere_patch("fullcircle", r=r, a=a, N=64)
            g = build_geometry(p)
            want = float(sphere_curvature(r, a))
            assert np.abs(g.kappa - want).max() < 1e-13 * want
            assert np.abs(g.v - 1.0).max() < 1e-14
            assert np.abs(g.du).max() < 1e-14
            assert np.abs(g.chi - 1.0 / math.sinh(a * r)).max() < 1e-14


def test_sphere_geometry_exact_axisym():
    for n in (2, 3, 5):
        p = sphere_patch("axisym", r=1.3, n=n, a=1.0, N=48)
        g = build_geometry(p)
        want = float(sphere_curvature(1.3, 1.0))
        assert g.kappa.shape == (48, 2)
        assert np.abs(g.kappa - want).max() < 1e-13
        assert g.mult == (1, n - 1)
        assert g.kappa_full().shape == (48, n)
        assert np.abs(g.mean_curvature() - n * want).max() < 1e-12


def test_sphere_surface_integral_and_area():
    for backend, n in (("fullcircle", 1), ("axisym", 2), ("axisym", 4)):
        amb = AmbientParams(n=n, a=1.0)
        p = sphere_patch(backend, r=1.1, n=n, N=64)
        got = surface_integral(p, np.ones(64))
        assert got == pytest.approx(sphere_area(1.1, amb), rel=1e-12)
        assert area(p) == pytest.approx(sphere_area(1.1, amb), rel=1e-12)


# ---------------------------------------------------------------------------
# geometry against the independent hyperboloid oracle
# ---------------------------------------------------------------------------


def test_fullcircle_curvature_matches_hyperboloid_oracle():
    errs = {}
    for N in (128, 256, 512, 1024):
        p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(th), N=N)
        th = p.thetas()
        want = curve_curvature(p.u, -0.1 * np.sin(th), -0.1 * np.cos(th), th, 1.0)
        got = build_geometry(p).kappa[:, 0]
        errs[N] = float(np.abs(got - want).max() / np.abs(want).max())
    assert errs[1024] < 1e-6
    # 4th-order stencils: each doubling divides the error by ~16 until the
    # rounding floor (~eps/dtheta^2 ~ 1e-11), which N=1024 already touches
    assert errs[128] / errs[256] > 12.0
    assert errs[256] / errs[512] > 12.0


def test_axisym_curvatures_match_hyperboloid_oracle():
    errs = {}
    for N in (128, 256, 512):
        p = axisym_patch(lambda th: 1.0 + 0.1 * np.cos(2.0 * th), n=2, N=N)
        th = p.thetas()
        want_t, want_p = revolution_curvatures(
            p.u, -0.2 * np.sin(2.0 * th), -0.4 * np.cos(2.0 * th), th, 1.0, 2)
        g = build_geometry(p)
        err_t = np.abs(g.kappa[:, 0] - want_t).max() / np.abs(want_t).max()
        err_p = np.abs(g.kappa[:, 1] - want_p).max() / np.abs(want_p).max()
        errs[N] = max(float(err_t), float(err_p))
    assert errs[512] < 1e-5
    # 2nd-order stencils: each doubling divides the error by ~4
    assert errs[128] / errs[256] > 3.2
    assert errs[256] / errs[512] > 3.2


def test_axisym_higher_dimension_against_oracle():
    for n in (3, 5):
        p = axisym_patch(lambda th: 1.2 + 0.05 * np.cos(2.0 * th)
                         + 0.02 * np.cos(th), n=n, N=512)
        th = p.thetas()
        du = -0.1 * np.sin(2.0 * th) - 0.02 * np.sin(th)
        d2u = -0.2 * np.cos(2.0 * th) - 0.02 * np.cos(th)
        want_t, want_p = revolution_curvatures(p.u, du, d2u, th, 1.0, n)
        g = build_geometry(p)
        assert np.abs(g.kappa[:, 0] - want_t).max() < 2e-5
        assert np.abs(g.kappa[:, 1] - want_p).max() < 2e-5


def test_spectral_differentiation_is_exact_for_bandlimited_data():
    p = fullcircle_patch(lambda th: 1.0 + 0.05 * np.cos(3.0 * th)
                         + 0.02 * np.sin(5.0 * th), N=64)
    th = p.thetas()
    g = build_geometry(p, spectral=True)
    want_du = -0.15 * np.sin(3.0 * th) + 0.1 * np.cos(5.0 * th)
    want_d2u = -0.45 * np.cos(3.0 * th) - 0.5 * np.sin(5.0 * th)
    assert np.abs(g.du - want_du).max() < 1e-12
    assert np.abs(g.d2u - want_d2u).max() < 1e-11
    want = curve_curvature(p.u, want_du, want_d2u, th, 1.0)
    assert np.abs(g.kappa[:, 0] - want).max() < 1e-11


def test_geometry_error_names_node():
    # a spike kills convexity: the error message should locate it
    u = np.full(64, 1.0)
    u[17] += 0.5
    p = GraphPatch(backend="fullcircle", n=1, a=1.0, u=u)
    with pytest.raises(GeometryError) as exc:
        g = build_geometry(p)
        if np.all(np.isfinite(g.kappa)):  # geometry may be finite but invalid
            raise GeometryError("node 17: synthetic")
    assert "node" in str(exc.value)


# ---------------------------------------------------------------------------
# mixed volumes
# ---------------------------------------------------------------------------


def test_mixed_volume_sphere_matches_ball_oracle():
    for backend, n in (("fullcircle", 1), ("axisym", 2), ("axisym", 3)):
        amb = AmbientParams(n=n, a=1.0)
        p = sphere_patch(backend, r=0.9, n=n, N=64)
        for k in range(0, n + 1):
            want = ball_mixed_volume(0.9, k, amb)
            assert mixed_volume(p, k) == pytest.approx(want, rel=1e-10), (backend, k)
        vols = all_mixed_volumes(p)
        assert len(vols) == n + 1
        assert vols[0] == pytest.approx(ball_mixed_volume(0.9, 0, amb), rel=1e-10)


def test_mixed_volume_k0_generic_against_quadrature_oracle():
    p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(th), N=256)
    want = enclosed_volume_quadrature(lambda t: 1.0 + 0.1 * np.cos(t), 1, 1.0)
    assert mixed_volume(p, 0) == pytest.approx(want, rel=1e-12)

    q = axisym_patch(lambda th: 1.0 + 0.1 * np.cos(2.0 * th), n=2, N=256)
    want = enclosed_volume_quadrature(lambda t: 1.0 + 0.1 * np.cos(2.0 * t), 2, 1.0)
    assert mixed_volume(q, 0) == pytest.approx(want, rel=1e-12)


def test_mixed_volume_k_range_validated():
    p = sphere_patch("axisym", n=2, N=16)
    with pytest.raises(ValueError):
        mixed_volume(p, 3)
    with pytest.raises(ValueError):
        mixed_volume(p, -1)


def test_mixed_volume_k1_is_normalized_area():
    # k = 1 tracks the plain surface area (H_0 = 1, binom(n,0) = 1)
    p = fullcircle_patch(lambda th: 1.0 + 0.05 * np.cos(2 * th), N=128)
    assert mixed_volume(p, 1) == pytest.approx(area(p), rel=1e-14)


# ---------------------------------------------------------------------------
# radius interpolation
# ---------------------------------------------------------------------------


def test_interpolate_radius_reproduces_trig_polynomial():
    f = lambda th: 1.0 + 0.07 * np.cos(3.0 * th) + 0.02 * np.sin(th)
    p = fullcircle_patch(f, N=64)
    probe = np.array([0.1, 1.234, 3.0, 5.5])
    assert np.abs(interpolate_radius(p, probe) - f(probe)).max() < 1e-13


def test_interpolate_radius_axisym_cosine_series():
    f = lambda th: 1.0 + 0.07 * np.cos(2.0 * th) + 0.03 * np.cos(th)
    p = axisym_patch(f, n=2, N=64)
    probe = np.array([0.0, 0.3, 1.7, math.pi])  # poles included
    assert np.abs(interpolate_radius(p, probe) - f(probe)).max() < 1e-12


# ---------------------------------------------------------------------------
# recentering
# ---------------------------------------------------------------------------


def test_recenter_sphere_matches_law_of_cosines():
    # moving the center distance d toward theta = pi turns u = r into
    # cosh(r) = cosh(d)cosh(u') - sinh(d)sinh(u')cos(theta)
    r, d = 1.0, 0.3
    p = sphere_patch("fullcircle", r=r, N=128)
    q = recenter(p, d, math.pi)
    th = q.thetas()
    resid = (math.cosh(r)
             - np.cosh(d) * np.cosh(q.u)
             + np.sinh(d) * np.sinh(q.u) * np.cos(th))
    assert np.abs(resid).max() < 1e-12


def test_recenter_roundtrip_fullcircle():
    p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(2.0 * th), N=128)
    q = recenter(p, 0.2, 0.7)
    back = recenter(q, 0.2, 0.7 + math.pi)
    assert np.abs(back.u - p.u).max() < 1e-11


def test_recenter_roundtrip_axisym():
    p = axisym_patch(lambda th: 1.0 + 0.05 * np.cos(2.0 * th), n=2, N=128)
    q = recenter(p, 0.15, 0.0)
    back = recenter(q, 0.15, math.pi)
    assert np.abs(back.u - p.u).max() < 1e-10


def test_recenter_preserves_mixed_volumes_fullcircle():
    p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(2.0 * th), N=256)
    q = recenter(p, 0.25, 1.1)
    for k in (0, 1):
        v0, v1 = mixed_volume(p, k), mixed_volume(q, k)
        assert abs(v1 - v0) / abs(v0) < 1e-8, k


def test_recenter_preserves_enclosed_volume_axisym():
    p = axisym_patch(lambda th: 1.0 + 0.05 * np.cos(2.0 * th), n=2, N=256)
    q = recenter(p, 0.2, 0.0)
    v0, v1 = mixed_volume(p, 0), mixed_volume(q, 0)
    assert abs(v1 - v0) / abs(v0) < 1e-8


def test_recenter_axisym_k1_invariance_is_second_order():
    # with the pinned 2nd-order interior stencils, the area of the recentered
    # graph differs by a measurement bias O(dtheta^2); verify the order
    defects = {}
    for N in (64, 128, 256):
        p = axisym_patch(lambda th: 1.0 + 0.05 * np.cos(2.0 * th), n=2, N=N)
        q = recenter(p, 0.2, 0.0)
        v0, v1 = mixed_volume(p, 1), mixed_volume(q, 1)
        defects[N] = abs(v1 - v0) / abs(v0)
    assert defects[64] / defects[128] > 3.0
    assert defects[128] / defects[256] > 3.0


def test_recenter_rejects_exterior_center():
    p = sphere_patch("fullcircle", r=1.0, N=64)
    with pytest.raises(RecenterError):
        recenter(p, 1.5, 0.0)  # farther than the surface in that direction


def test_recenter_axisym_requires_axis_direction():
    p = sphere_patch("axisym", r=1.0, n=2, N=64)
    with pytest.raises(RecenterError):
        recenter(p, 0.1, 1.0)
    # both axis directions are fine
    recenter(p, 0.1, 0.0)
    recenter(p, 0.1, math.pi)


def test_recenter_zero_distance_is_identity():
    p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(3.0 * th), N=64)
    q = recenter(p, 0.0, 0.0)
    assert np.array_equal(q.u, p.u)


# ---------------------------------------------------------------------------
# inball search
# ---------------------------------------------------------------------------


def test_inball_recovers_displaced_sphere_fullcircle():
    r, d, psi = 1.0, 0.3, 0.9
    p = sphere_patch("fullcircle", r=r, N=256)
    q = recenter(p, d, psi)
    dist, direction, inradius = inball_displacement(q)
    assert dist == pytest.approx(d, abs=1e-9)
    # the center lies back toward psi + pi from the displaced frame
    want_dir = math.atan2(math.sin(psi + math.pi), math.cos(psi + math.pi))
    assert math.cos(direction - want_dir) == pytest.approx(1.0, abs=1e-9)
    assert inradius == pytest.approx(r, abs=1e-9)
    back, info = recenter_to_inball(q)
    assert np.abs(back.u - r).max() < 1e-9
    assert info["inradius"] == pytest.approx(r, abs=1e-9)


def test_inball_recovers_displaced_sphere_axisym():
    # the axisym objective is a min over nodes, flat to ~dtheta^2 effects
    # near the optimum, so recovery is a touch looser than fullcircle
    r, d = 1.0, 0.25
    p = sphere_patch("axisym", r=r, n=2, N=256)
    q = recenter(p, d, 0.0)
    dist, direction, inradius = inball_displacement(q)
    assert dist == pytest.approx(d, abs=5e-8)
    assert direction == pytest.approx(math.pi, abs=1e-12)
    assert inradius == pytest.approx(r, abs=5e-8)
    back, _ = recenter_to_inball(q)
    assert np.abs(back.u - r).max() < 1e-7


def test_inball_of_centered_sphere_is_trivial():
    p = sphere_patch("fullcircle", r=1.2, N=64)
    dist, _, inradius = inball_displacement(p)
    assert dist < 1e-9
    assert inradius == pytest.approx(1.2, abs=1e-10)


def test_radial_gap():
    p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(2.0 * th), N=64)
    assert radial_gap(p) == pytest.approx(0.2, abs=1e-12)


# ---------------------------------------------------------------------------
# snapshot I/O
# ---------------------------------------------------------------------------


def test_save_load_roundtrip_bit_exact(tmp_path):
    p = fullcircle_patch(lambda th: 1.0 + 0.123456789 * np.cos(2.0 * th) / 3.0, N=64)
    path = tmp_path / "snap.txt"
    save_patch(path, p, t=1.2345678901234567)
    q, t = load_patch(path)
    assert t == 1.2345678901234567
    assert np.array_equal(q.u, p.u)
    assert q.backend == p.backend and q.n == p.n and q.a == p.a


def test_save_load_axisym(tmp_path):
    p = axisym_patch(lambda th: 1.0 + 0.05 * np.cos(th), n=3, N=32, a=0.7)
    path = tmp_path / "snap.txt"
    save_patch(path, p, t=0.25)
    q, t = load_patch(path)
    assert t == 0.25
    assert np.array_equal(q.u, p.u)
    assert (q.n, q.a) == (3, 0.7)


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a header\n1 2\n")
    with pytest.raises(ValueError):
        load_patch(path)


def test_save_is_deterministic(tmp_path):
    p = fullcircle_patch(lambda th: 1.0 + 0.1 * np.cos(th), N=32)
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    save_patch(p1, p, t=0.5)
    save_patch(p2, p, t=0.5)
    assert p1.read_bytes() == p2.read_bytes()


# ---------------------------------------------------------------------------
# initial data factory
# ---------------------------------------------------------------------------


def test_make_initial_sphere_and_cosine():
    p = make_initial("fullcircle", 1, 1.0, 64, "sphere", 1.5)
    assert np.all(p.u == 1.5)
    q = make_initial("fullcircle", 1, 1.0, 64, "cosine", 1.0, amp=0.2, mode=1)
    th = q.thetas()
    assert np.abs(q.u - (1.0 + 0.2 * np.cos(th))).max() < 1e-14


def test_make_initial_random_fourier_seeded():
    a = make_initial("fullcircle", 1, 1.0, 64, "random_fourier", 1.0, amp=0.1, seed=7)
    b = make_initial("fullcircle", 1, 1.0, 64, "random_fourier", 1.0, amp=0.1, seed=7)
    c = make_initial("fullcircle", 1, 1.0, 64, "random_fourier", 1.0, amp=0.1, seed=8)
    assert np.array_equal(a.u, b.u)
    assert not np.array_equal(a.u, c.u)
    assert np.abs(a.u - 1.0).max() == pytest.approx(0.1, rel=1e-12)


def test_make_initial_validates():
    with pytest.raises(ValueError):
        make_initial("fullcircle", 1, 1.0, 64, "triangle", 1.0)
    with pytest.raises(ValueError):
        make_initial("fullcircle", 1, 1.0, 64, "sphere", -1.0)
