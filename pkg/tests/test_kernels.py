"""Kernel lanes: the compiled stage kernels must agree with the pure-python
reference on every output, across backends, families and flow indices, and the
lane selection must honor the environment override."""

import os
import subprocess
import sys

import numpy as np
import pytest

from hcflow import kernels
from hcflow.curvfn import CurvatureSpec
from hcflow.hypersurface import GraphPatch, quad_weights

FAMILY_PARAMS = [
    ("MeanH", 0.0, 0.0),
    ("NormA", 0.0, 0.0),
    ("CompletelySymmetric", 2.0, 0.0),
    ("ElemSymmetricQuotient", 2.0, 1.0),
    ("ElemSymmetricQuotient", 2.0, 0.0),
    ("PowerMean", 0.5, 0.0),
    ("PowerMean", 0.0, 0.0),
    ("PowerMean", -1.0, 0.0),
]

BOTH_LANES = sorted(kernels.available_lanes())
needs_cython = pytest.mark.skipif(
    "cython" not in BOTH_LANES, reason="compiled kernel lane not built")


def _admissible_case(backend, n, N=48):
    if backend == "fullcircle":
        th = 2.0 * np.pi * np.arange(N) / N
        u = 1.2 + 0.08 * np.cos(2.0 * th) + 0.05 * np.sin(3.0 * th)
        cot = None
    else:
        th = np.pi * (np.arange(N) + 0.5) / N
        u = 1.2 + 0.08 * np.cos(2.0 * th) + 0.03 * np.cos(th)
        cot = np.cos(th) / np.sin(th)
    patch = GraphPatch(backend=backend, n=n, a=1.0, u=u)
    return u, cot, quad_weights(patch)


def _compare_outputs(op, oc, where):
    assert op[0] == oc[0], where
    for a, b in zip(op, oc):
        if isinstance(a, np.ndarray):
            assert b is not None and np.abs(a - b).max() < 1e-12, where
        elif isinstance(a, float):
            if np.isnan(a):
                assert np.isnan(b), where
            else:
                assert abs(a - b) < 1e-12 * max(1.0, abs(a)), where
        else:
            assert a is b or a == b, where


@needs_cython
def test_lane_parity_across_families_and_k():
    sf_p, sa_p = kernels.get_stage_functions("pure")
    sf_c, sa_c = kernels.get_stage_functions("cython")
    for backend, n in (("fullcircle", 1), ("axisym", 2), ("axisym", 3), ("axisym", 5)):
        u, cot, W = _admissible_case(backend, n)
        for fname, p1, p2 in FAMILY_PARAMS:
            if n == 1 and fname in ("CompletelySymmetric", "ElemSymmetricQuotient"):
                continue  # k=2 quotients need n >= 2
            fam = kernels.FAMILY_CODES[fname]
            spec = CurvatureSpec(family=fname, n=n, alpha=0.5, param1=p1, param2=p2)
            for k in range(0, n + 1):
                if backend == "fullcircle":
                    args = (u, 1.0, 0.5, k, fam, p1, p2, spec.c_F, W)
                    op, oc = sf_p(*args), sf_c(*args)
                else:
                    args = (u, cot, 1.0, n, 0.5, k, fam, p1, p2, spec.c_F, W)
                    op, oc = sa_p(*args), sa_c(*args)
                assert op[0] == 0, (backend, n, fname, k)
                _compare_outputs(op, oc, (backend, n, fname, k))


@needs_cython
def test_lane_parity_on_invalid_radius():
    sf_p, sa_p = kernels.get_stage_functions("pure")
    sf_c, sa_c = kernels.get_stage_functions("cython")
    u = np.full(16, 1.0)
    u[3] = -0.5
    W = np.full(16, 2.0 * np.pi / 16)
    op = sf_p(u, 1.0, 0.0, 0, 0, 0.0, 0.0, 1.0, W)
    oc = sf_c(u, 1.0, 0.0, 0, 0, 0.0, 0.0, 1.0, W)
    assert op[0] == oc[0] == 1
    assert np.isnan(op[1]) and np.isnan(oc[1])


@needs_cython
def test_lane_parity_on_admissibility_loss():
    # white noise destroys convexity: both lanes must flag ok=2 with
    # identical margins and still return the curvature arrays
    rng = np.random.default_rng(0)
    N = 64
    u = 1.0 + 0.05 * rng.standard_normal(N)
    W = np.full(N, 2.0 * np.pi / N)
    sf_p, _ = kernels.get_stage_functions("pure")
    sf_c, _ = kernels.get_stage_functions("cython")
    op = sf_p(u, 1.0, 1.0, 1, 0, 0.0, 0.0, 1.0, W)
    oc = sf_c(u, 1.0, 1.0, 1, 0, 0.0, 0.0, 1.0, W)
    assert op[0] == oc[0] == 2
    assert op[1] == pytest.approx(oc[1], abs=1e-13)
    assert op[2] is None and oc[2] is None  # no rhs on inadmissible data
    _compare_outputs(op, oc, "noise case")


@needs_cython
def test_cython_accepts_readonly_arrays():
    u = np.full(16, 1.0)
    u.setflags(write=False)
    W = np.full(16, 2.0 * np.pi / 16)
    W.setflags(write=False)
    sf_c, _ = kernels.get_stage_functions("cython")
    out = sf_c(u, 1.0, 0.0, 0, 0, 0.0, 0.0, 1.0, W)
    assert out[0] == 0


def test_geom_helpers_match_manual_stencils():
    N = 32
    th = 2.0 * np.pi * np.arange(N) / N
    u = 1.0 + 0.1 * np.cos(2.0 * th)
    du, d2u, v, g, kappa, mdens = kernels.geom_fullcircle(u, 1.0)
    dth = 2.0 * np.pi / N
    want_du = (-np.roll(u, -2) + 8 * np.roll(u, -1) - 8 * np.roll(u, 1) + np.roll(u, 2)) / (12 * dth)
    assert np.abs(du - want_du).max() < 1e-14
    phi = np.sinh(u)
    assert np.abs(g - (du**2 + phi**2)).max() < 1e-13
    assert np.abs(v - np.sqrt(g) / phi).max() < 1e-13


def test_lane_selection_env_override():
    code = ("import hcflow.kernels as K; print(K.LANE)")
    env = dict(os.environ)
    env["HCFLOW_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "pure"


@needs_cython
def test_default_lane_is_compiled_when_available():
    env = {k: v for k, v in os.environ.items() if k != "HCFLOW_PURE"}
    code = ("import hcflow.kernels as K; print(K.LANE)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "cython"


def test_get_stage_functions_rejects_unknown_lane():
    with pytest.raises(ValueError):
        kernels.get_stage_functions("fortran")
