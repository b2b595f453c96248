"""Per-state invariant measurement and post-hoc run verification.

Everything here is read-only: `snapshot` maps a flow state to a flat record
of the monitored quantities (margins, pinching, nonlocal term, radii,
parabolicity), `fit_decay` fits exponential tails, and the check_* /
*_report helpers turn trajectories into pass/fail verdicts for the
quantities the theory says are conserved, monotone, or decaying.
"""

from __future__ import annotations

import math
import os
import tempfile
from collections import namedtuple
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .ambient import ball_radius_for_mixed_volume, sphere_area
from .curvfn import grad_F
from .hypersurface import all_mixed_volumes, quad_weights, radial_gap, recenter_to_inball


class FitError(ValueError):
    """Decay-fit preconditions violated (too few points or non-positive data);
    on convergence series this signals non-convergence."""


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsRecord:
    """One cadence tick of monitored quantities (all plain floats except
    `volumes`, the tuple V_{n+1-j} for j = 0..n)."""

    t: float
    dt: float
    steps: int
    recenters: int
    v_tracked: float
    volumes: tuple
    area: float
    hconv_margin: float
    pinch_ratio: float
    sup_trace_free: float
    sup_F: float
    inf_F_shifted: float
    f: float
    sup_abs_F_minus_f: float
    min_u: float
    max_u: float
    chi_max: float
    parabolicity_cond: float


def _pinch_ratio_nodes(kap, n, a):
    """Guarded min over nodes of (kappa_min - a)/(H - n a)."""
    kmin = kap.min(axis=1)
    den = kap.sum(axis=1) - n * a
    num = kmin - a
    guarded = np.abs(den) < 1e-12
    ratio = np.where(guarded, 1.0 / n, num / np.where(guarded, 1.0, den))
    return float(ratio.min())


def _sup_trace_free(kap, n):
    """sup over nodes of |A|^2 - H^2/n, evaluated cancellation-free as
    (1/n) sum_{i<j} (kappa_i - kappa_j)^2."""
    diffs = kap[:, :, None] - kap[:, None, :]
    return float((diffs * diffs).sum(axis=(1, 2)).max()) / (2.0 * n)


def snapshot(state, config):
    """Measure a full DiagnosticsRecord from a materialized FlowState."""
    geom = state.geometry
    patch = state.patch
    n, a = config.n, config.a
    alpha = config.alpha
    kap = geom.kappa_full()
    vols = all_mixed_volumes(patch, geom=geom)
    W = quad_weights(patch)
    area_val = float(W @ geom.mdens)
    grads = grad_F(config.curvature, kap)
    F_shift = state.F - (a - alpha)
    return DiagnosticsRecord(
        t=float(state.t),
        dt=float(state.dt_last),
        steps=int(state.steps),
        recenters=int(state.recenters),
        v_tracked=float(vols[config.k]),
        volumes=tuple(float(v) for v in vols),
        area=area_val,
        hconv_margin=float(kap.min() - a),
        pinch_ratio=_pinch_ratio_nodes(kap, n, a),
        sup_trace_free=_sup_trace_free(kap, n),
        sup_F=float(state.F.max()),
        inf_F_shifted=float(F_shift.min()),
        f=float(state.f),
        sup_abs_F_minus_f=state.sup_F_minus_f,
        min_u=float(patch.u.min()),
        max_u=float(patch.u.max()),
        chi_max=float(geom.chi.max()),
        parabolicity_cond=float(grads.max() / grads.min()),
    )


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

DecayFit = namedtuple("DecayFit", "amplitude rate r_squared n_points")


def decaying(fit):
    """True when the fitted rate is a genuine decay."""
    return fit.rate > 0.0


def fit_decay(ts, ys, tail_fraction=0.5):
    """Least-squares exponential fit y ~ C exp(-rate t) on the trailing
    tail_fraction of the series; returns DecayFit(C, rate, R^2, points)."""
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ts.shape != ys.shape or ts.ndim != 1:
        raise FitError("series must be matching 1-D (t, y) arrays")
    if not (0.0 < tail_fraction <= 1.0):
        raise FitError(f"tail_fraction must lie in (0, 1], got {tail_fraction!r}")
    m = ts.shape[0]
    start = m - max(int(math.ceil(tail_fraction * m)), 1)
    tt, yy = ts[start:], ys[start:]
    if tt.shape[0] < 10:
        raise FitError(f"need at least 10 tail points for a fit, got {tt.shape[0]}")
    if np.any(yy <= 0.0) or not np.all(np.isfinite(yy)):
        raise FitError("tail contains non-positive or non-finite values")
    logy = np.log(yy)
    slope, intercept = np.polyfit(tt, logy, 1)
    pred = slope * tt + intercept
    ss_res = float(((logy - pred) ** 2).sum())
    ss_tot = float(((logy - logy.mean()) ** 2).sum())
    if ss_tot < 1e-300:
        r2 = 1.0 if ss_res < 1e-300 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return DecayFit(amplitude=float(np.exp(intercept)), rate=float(-slope),
                    r_squared=r2, n_points=int(tt.shape[0]))


def convergence_tail(ts, ys, drop=0.1):
    """Slice a series from the first index where it falls below drop * y[0]
    (the asymptotic regime); raises FitError if it never does."""
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        raise FitError("empty series")
    below = np.nonzero(ys < drop * ys[0])[0]
    if below.size == 0:
        raise FitError(f"series never dropped below {drop} of its initial value")
    i = int(below[0])
    return ts[i:], ys[i:]


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

RadiusGap = namedtuple("RadiusGap", "gap bound passed")


def check_radius_gap(patch):
    """Outer-minus-inner radial gap of a patch recentered at the (approximate)
    inball center, against the uniform bound a log 2 (+ 1e-6 slack).  The
    caller is responsible for the recentering."""
    gap = radial_gap(patch)
    bound = patch.a * math.log(2.0)
    return RadiusGap(gap=gap, bound=bound, passed=gap < bound + 1e-6)


@dataclass(frozen=True)
class IsoperimetricReport:
    monotone_ok: bool
    max_area_increase: float
    monotone_tol: float
    initial_ratio: float
    final_ratio: float
    ball_ratio: float
    ball_radius: float
    final_area_ok: bool
    ratio_rel_err: float
    passed: bool

    def lines(self):
        return [
            f"area monotone non-increasing: {'PASS' if self.monotone_ok else 'FAIL'} "
            f"(max increase {self.max_area_increase:.3e}, tol {self.monotone_tol:.3e})",
            f"final area >= ball area (1 - 1e-3): {'PASS' if self.final_area_ok else 'FAIL'}",
            f"ratio V/|M|: initial {self.initial_ratio:.12g} <= ball {self.ball_ratio:.12g}; "
            f"final {self.final_ratio:.12g} (rel err {self.ratio_rel_err:.3e})",
            f"isoperimetric verdict: {'PASS' if self.passed else 'FAIL'}",
        ]


def isoperimetric_report(trajectory):
    """Volume/area inequality audit for the enclosed-volume-preserving mean
    curvature flow (k = 0, MeanH); other flows are a domain error."""
    config = trajectory.config
    if config.k != 0 or config.curvature.family != "MeanH":
        raise ValueError("isoperimetric report requires the k = 0, MeanH flow")
    recs = trajectory.records
    if len(recs) < 2:
        raise ValueError("trajectory too short for an isoperimetric report")
    areas = np.array([r.area for r in recs])
    v0 = recs[0].v_tracked
    dts = np.array([r.dt for r in recs if math.isfinite(r.dt)])
    max_dt = float(dts.max()) if dts.size else 0.0
    monotone_tol = max_dt * areas[0]
    increases = np.diff(areas)
    max_increase = float(increases.max()) if increases.size else 0.0
    monotone_ok = max_increase <= monotone_tol

    ambient = trajectory.final_state.patch.ambient
    R0 = ball_radius_for_mixed_volume(v0, 0, ambient)
    ball_area = sphere_area(R0, ambient)
    ball_ratio = v0 / ball_area
    initial_ratio = v0 / float(areas[0])
    final_ratio = recs[-1].v_tracked / float(areas[-1])
    final_area_ok = float(areas[-1]) >= ball_area * (1.0 - 1e-3)
    ratio_rel_err = abs(final_ratio - ball_ratio) / ball_ratio
    inequality_ok = initial_ratio <= ball_ratio * (1.0 + 1e-12)
    passed = bool(monotone_ok and final_area_ok and inequality_ok
                  and ratio_rel_err <= 1e-3)
    return IsoperimetricReport(
        monotone_ok=bool(monotone_ok), max_area_increase=max_increase,
        monotone_tol=monotone_tol, initial_ratio=initial_ratio,
        final_ratio=final_ratio, ball_ratio=ball_ratio, ball_radius=R0,
        final_area_ok=bool(final_area_ok), ratio_rel_err=ratio_rel_err,
        passed=passed)


def check_evolution_identity(state_before, state_after, dt=None):
    """Max relative residual of the area-element evolution identity,
    one-sided in time; O(dt) by construction.

    The identity d(sqrt det g)/dt = -(F - f) H sqrt(det g) holds for material
    (normal-parametrized) area elements.  Our nodes sit at fixed angles, so the
    nodal sqrt(det g) additionally feels the tangential reparametrization flux
    d/dtheta(S u' phi^{n-2} sin^{n-1} theta) with S = -(F - f); without it the
    residual saturates at the flux size instead of vanishing with dt.  Both
    terms are evaluated at the earlier state with the same stencils the
    geometry uses (4th-order periodic / 2nd-order even-reflection)."""
    pa, pb = state_before.patch, state_after.patch
    if pa.backend != pb.backend or pa.N != pb.N or pa.n != pb.n:
        raise ValueError("states live on different grids")
    if dt is None:
        dt = state_after.t - state_before.t
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError(f"states must be a positive time apart, got dt={dt!r}")

    def sqrt_det_g(state):
        md = state.geometry.mdens
        if state.patch.backend == "axisym":
            return md * np.sin(state.patch.thetas()) ** (state.patch.n - 1)
        return md

    ga = sqrt_det_g(state_before)
    gb = sqrt_det_g(state_after)
    H = state_before.geometry.mean_curvature()
    lhs = (gb - ga) / dt
    rhs = -(state_before.F - state_before.f) * H * ga

    n, a = pa.n, pa.a
    u = pa.u
    phi = np.sinh(a * u) / a
    speed = -(state_before.F - state_before.f)
    dtheta = pa.dtheta
    if pa.backend == "fullcircle":
        flux = speed * state_before.geometry.du / phi
        rhs = rhs + (-np.roll(flux, -2) + 8.0 * np.roll(flux, -1)
                     - 8.0 * np.roll(flux, 1) + np.roll(flux, 2)) / (12.0 * dtheta)
    else:
        flux = (speed * state_before.geometry.du * phi ** (n - 2)
                * np.sin(pa.thetas()) ** (n - 1))
        ghosted = np.concatenate(([flux[0]], flux, [flux[-1]]))
        rhs = rhs + (ghosted[2:] - ghosted[:-2]) / (2.0 * dtheta)

    scale = max(float(np.abs(rhs).max()), float(np.abs(ga).max()))
    return float(np.abs(lhs - rhs).max()) / scale


# ---------------------------------------------------------------------------
# run-level verification
# ---------------------------------------------------------------------------

CheckItem = namedtuple("CheckItem", "name passed detail")


@dataclass
class VerifyReport:
    checks: list
    passed: bool

    def lines(self):
        out = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]
        out.append(f"verify verdict: {'PASS' if self.passed else 'FAIL'}")
        return out


def verify_invariants(trajectory):
    """Post-hoc audit of the trajectory-level invariants: conservation,
    h-convexity, pinching monotonicity, parabolicity and barrier bounds,
    and the recentered radius gap."""
    recs = trajectory.records
    checks = []

    v0 = recs[0].v_tracked
    drift = max(abs(r.v_tracked - v0) for r in recs) / abs(v0)
    checks.append(CheckItem("volume_conservation", drift <= 1e-3,
                            f"max relative drift {drift:.3e} (tol 1e-3)"))

    margin_min = min(r.hconv_margin for r in recs)
    checks.append(CheckItem("hconv_margin_positive", margin_min > 0.0,
                            f"min margin {margin_min:.3e}"))

    pinch = [r.pinch_ratio for r in recs]
    worst_drop = min((pinch[i + 1] - pinch[i] for i in range(len(pinch) - 1)), default=0.0)
    checks.append(CheckItem("pinch_nondecreasing", worst_drop >= -1e-3,
                            f"worst decrease {worst_drop:.3e} (slack 1e-3)"))

    cond_max = max(r.parabolicity_cond for r in recs)
    checks.append(CheckItem("parabolicity_bounded",
                            math.isfinite(cond_max) and cond_max >= 1.0,
                            f"max condition number {cond_max:.6g}"))

    supF_max = max(r.sup_F for r in recs)
    supF_bound = 10.0 * recs[0].sup_F + 1.0
    checks.append(CheckItem("sup_F_bounded", supF_max <= supF_bound,
                            f"max sup F {supF_max:.6g} (bound {supF_bound:.6g})"))

    infF_min = min(r.inf_F_shifted for r in recs)
    checks.append(CheckItem("inf_F_shifted_positive", infF_min > 0.0,
                            f"min of F - (a - alpha) is {infF_min:.3e}"))

    u_lo = min(r.min_u for r in recs)
    u_hi = max(r.max_u for r in recs)
    bracket_ok = u_lo >= 0.5 * recs[0].min_u and u_hi <= 2.0 * recs[0].max_u + 1.0
    checks.append(CheckItem("radii_bracketed", bracket_ok,
                            f"u stayed in [{u_lo:.6g}, {u_hi:.6g}]"))

    try:
        centered, _info = recenter_to_inball(trajectory.final_state.patch)
        rg = check_radius_gap(centered)
        checks.append(CheckItem("radius_gap", rg.passed,
                                f"gap {rg.gap:.6g} < bound {rg.bound:.6g} + 1e-6"))
    except ValueError as exc:
        checks.append(CheckItem("radius_gap", False, f"recentering failed: {exc}"))

    return VerifyReport(checks=checks, passed=all(c.passed for c in checks))


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _csv_columns(record):
    cols = []
    for f in dataclass_fields(DiagnosticsRecord):
        if f.name == "volumes":
            cols.extend(f"v_k{j}" for j in range(len(record.volumes)))
        else:
            cols.append(f.name)
    return cols


def write_csv(records, path):
    """Write diagnostics records as CSV (full double precision, atomic)."""
    if not records:
        raise ValueError("no records to write")
    cols = _csv_columns(records[0])
    lines = [",".join(cols)]
    for r in records:
        row = []
        for f in dataclass_fields(DiagnosticsRecord):
            val = getattr(r, f.name)
            if f.name == "volumes":
                row.extend(format(v, ".17g") for v in val)
            elif isinstance(val, int):
                row.append(str(val))
            else:
                row.append(format(val, ".17g"))
        lines.append(",".join(row))
    payload = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".csv-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
