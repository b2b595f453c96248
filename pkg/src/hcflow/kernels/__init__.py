"""Kernel lane selection.

The flow's hot path (the per-stage evaluation) exists twice: a pure-numpy
reference in `pure.py` and a compiled Cython mirror in `_core.pyx`.  At import
we pick the compiled lane when the extension is built, unless the environment
variable ``HCFLOW_PURE`` is set to a non-empty value, in which case the numpy
lane is forced.  `LANE` records the active choice ("cython" or "pure").

Geometry helpers (`geom_fullcircle`, `geom_axisym`) always come from the pure
lane -- they run off the hot path and vectorized numpy is plenty.  Use
`get_stage_functions(lane)` to grab a specific lane explicitly (parity tests,
benchmarks).
"""

from __future__ import annotations

import os

from . import pure
from .pure import (
    FAM_CSYM,
    FAM_MEANH,
    FAM_NORMA,
    FAM_POWER,
    FAM_QUOTIENT,
    geom_axisym,
    geom_fullcircle,
)

FAMILY_CODES = {
    "MeanH": FAM_MEANH,
    "NormA": FAM_NORMA,
    "CompletelySymmetric": FAM_CSYM,
    "ElemSymmetricQuotient": FAM_QUOTIENT,
    "PowerMean": FAM_POWER,
}

try:
    from . import _core
except ImportError:  # extension not built; numpy lane carries the load
    _core = None

if _core is not None and not os.environ.get("HCFLOW_PURE"):
    LANE = "cython"
    stage_fullcircle = _core.stage_fullcircle
    stage_axisym = _core.stage_axisym
else:
    LANE = "pure"
    stage_fullcircle = pure.stage_fullcircle
    stage_axisym = pure.stage_axisym


def available_lanes():
    """Names of the lanes importable in this environment."""
    return ("pure", "cython") if _core is not None else ("pure",)


def get_stage_functions(lane):
    """Return (stage_fullcircle, stage_axisym) for an explicit lane."""
    if lane == "pure":
        return pure.stage_fullcircle, pure.stage_axisym
    if lane == "cython":
        if _core is None:
            raise ValueError("compiled lane requested but _core is not built")
        return _core.stage_fullcircle, _core.stage_axisym
    raise ValueError(f"unknown kernel lane {lane!r}")


__all__ = [
    "FAMILY_CODES",
    "LANE",
    "available_lanes",
    "geom_axisym",
    "geom_fullcircle",
    "get_stage_functions",
    "stage_axisym",
    "stage_fullcircle",
]
