"""Shared fixtures and small factories for the test suite."""

import numpy as np
import pytest

from hcflow.hypersurface import GraphPatch


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)


def fullcircle_patch(u_func, N=64, a=1.0):
    """Build a fullcircle patch from u(theta) evaluated on the periodic grid."""
    theta = 2.0 * np.pi * np.arange(N) / N
    return GraphPatch(backend="fullcircle", n=1, a=a, u=np.asarray(u_func(theta), dtype=float))


def axisym_patch(u_func, n=2, N=64, a=1.0):
    """Build an axisym patch from u(theta) on the staggered colatitude grid."""
    theta = np.pi * (np.arange(N) + 0.5) / N
    return GraphPatch(backend="axisym", n=n, a=a, u=np.asarray(u_func(theta), dtype=float))


def sphere_patch(backend, r=1.0, n=None, N=64, a=1.0):
    n = 1 if backend == "fullcircle" else (n or 2)
    if backend == "fullcircle":
        return fullcircle_patch(lambda th: np.full_like(th, r), N=N, a=a)
    return axisym_patch(lambda th: np.full_like(th, r), n=n, N=N, a=a)
