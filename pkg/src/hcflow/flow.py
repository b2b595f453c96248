"""Mixed-volume-preserving curvature flow.

Integrates du/dt = -v (F - f) for a radial graph, where F is the (shifted,
normalized) curvature speed and f its nonlocal surface average weighted so
that one chosen mixed volume V_{n+1-k} is conserved:

    k <= 1:  f = int H_k F dmu / int H_k dmu                (H_0 = 1)
    k >= 2:  f = int (k H_k + a^2 (n-k+2) H_{k-2}) F dmu
                  / int (k H_k + a^2 (n-k+2) H_{k-2}) dmu

with the H_m the elementary symmetric polynomials of the *unshifted*
principal curvatures.  Time stepping is classical RK4 under a parabolic CFL
  dt = cfl_safety * (min induced arclength spacing)^2 / (n * Lambda),
Lambda = max over nodes of the largest eigenvalue of grad F, recomputed every
step; on admissibility loss mid-step the step is rejected and dt halved (at
most 20 times).  The graph is re-expressed about the approximate inball
center whenever max |Du| or min u crosses the configured thresholds.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .ambient import ball_radius_for_mixed_volume
from .curvfn import AdmissibilityError, CurvatureSpec, elementary_symmetric_all, eval_F
from .hypersurface import (
    BACKENDS,
    U0_KINDS,
    GeometryError,
    GraphPatch,
    RecenterError,
    build_geometry,
    make_initial,
    mixed_volume,
    quad_weights,
    recenter_to_inball,
)

MAX_STEP_HALVINGS = 20


class StepFailure(RuntimeError):
    """A step could not be accepted after the maximum number of dt halvings,
    or the run lost admissibility irrecoverably.  `records` carries the
    diagnostics history collected up to the failure."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = list(records) if records is not None else []


@dataclass(frozen=True)
class FlowConfig:
    """Full description of a run (ambient, speed, conserved index, grid,
    initial data, stepping and recentering policy)."""

    backend: str
    n: int
    a: float
    curvature: CurvatureSpec
    k: int
    N: int
    u0_kind: str = "cosine"
    u0_radius: float = 1.0
    u0_amp: float = 0.0
    u0_mode: int = 2
    cfl_safety: float = 0.4
    t_max: float = 50.0
    tol_converged: float = 1e-8
    output_every: int = 50
    recenter_max_grad: float = 2.0
    recenter_min_u: float = None
    seed: int = 0
    volume_projection: bool = False

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n!r}")
        if self.backend == "fullcircle" and self.n != 1:
            raise ValueError("fullcircle backend requires n = 1")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive and finite, got {self.a!r}")
        if not isinstance(self.curvature, CurvatureSpec):
            raise ValueError("curvature must be a CurvatureSpec")
        if self.curvature.n != self.n:
            raise ValueError(f"curvature spec dimension {self.curvature.n} != flow dimension {self.n}")
        if not (0.0 <= self.curvature.alpha <= self.a):
            raise ValueError(f"alpha must lie in [0, a] = [0, {self.a}], got {self.curvature.alpha}")
        if not isinstance(self.k, int) or not (0 <= self.k <= self.n):
            raise ValueError(f"k must be an integer in [0, {self.n}], got {self.k!r}")
        if not isinstance(self.N, int) or self.N < 8:
            raise ValueError(f"N must be an integer >= 8, got {self.N!r}")
        if self.u0_kind not in U0_KINDS:
            raise ValueError(f"u0.kind must be one of {U0_KINDS}, got {self.u0_kind!r}")
        if not (self.u0_radius > 0 and math.isfinite(self.u0_radius)):
            raise ValueError(f"u0.radius must be positive, got {self.u0_radius!r}")
        if not (0.0 < self.cfl_safety < 1.0):
            raise ValueError(f"cfl_safety must lie in (0, 1), got {self.cfl_safety!r}")
        if not (self.t_max > 0):
            raise ValueError(f"t_max must be positive, got {self.t_max!r}")
        if not (self.tol_converged >= 0):
            raise ValueError(f"tol_converged must be >= 0, got {self.tol_converged!r}")
        if not isinstance(self.output_every, int) or self.output_every < 1:
            raise ValueError(f"output_every must be a positive integer, got {self.output_every!r}")
        if not (self.recenter_max_grad > 0):
            raise ValueError(f"recenter.max_grad must be positive, got {self.recenter_max_grad!r}")
        if self.recenter_min_u is None:
            object.__setattr__(self, "recenter_min_u", 0.1 / self.a)
        elif not (self.recenter_min_u > 0):
            raise ValueError(f"recenter.min_u must be positive, got {self.recenter_min_u!r}")
        if not isinstance(self.seed, int):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")

    @property
    def alpha(self):
        return self.curvature.alpha

    def initial_patch(self):
        return make_initial(self.backend, self.n, self.a, self.N, self.u0_kind,
                            self.u0_radius, self.u0_amp, self.u0_mode, self.seed)


@dataclass(frozen=True)
class FlowState:
    """One accepted point on a trajectory (geometry consistent with patch)."""

    t: float
    patch: GraphPatch
    geometry: object
    F: np.ndarray
    f: float
    steps: int = 0
    recenters: int = 0
    dt_last: float = math.nan

    @property
    def sup_F_minus_f(self):
        return float(np.abs(self.F - self.f).max())


StageEval = namedtuple(
    "StageEval",
    "ok margin rhs F f kappa v mdens lam max_grad min_u min_sqrt_g",
)


class _Ctx:
    """Precomputed per-run arrays and the lane-bound stage closure."""

    def __init__(self, config):
        self.config = config
        self.N = config.N
        self.n = config.n
        self.a = config.a
        self.alpha = config.curvature.alpha
        self.k = config.k
        self.dtheta = (2.0 * math.pi if config.backend == "fullcircle" else math.pi) / config.N
        template = GraphPatch(backend=config.backend, n=config.n, a=config.a,
                              u=np.full(config.N, config.u0_radius))
        self.template = template
        self.W = quad_weights(template)
        spec = config.curvature
        self.fam = kernels.FAMILY_CODES[spec.family]
        self.p1 = float(spec.param1) if spec.param1 is not None else 0.0
        self.p2 = float(spec.param2) if spec.param2 is not None else 0.0
        self.c_F = spec.c_F
        if config.backend != "fullcircle":
            theta = template.thetas()
            self.cot = np.cos(theta) / np.sin(theta)

    def stage(self, u):
        cfg = self.config
        if cfg.backend == "fullcircle":
            out = kernels.stage_fullcircle(u, self.a, self.alpha, self.k,
                                           self.fam, self.p1, self.p2, self.c_F, self.W)
            return StageEval(*out)
        out = kernels.stage_axisym(u, self.cot, self.a, self.n, self.alpha, self.k,
                                   self.fam, self.p1, self.p2, self.c_F, self.W)
        return StageEval(out[0], out[1], out[2], out[3], out[4], (out[5], out[6]),
                         out[7], out[8], out[9], out[10], out[11], out[12])

    def patch_from(self, u):
        return self.template.with_u(u)


def _min_kappa_minus(stage, n, shift):
    """min over nodes and directions of (kappa - shift) from a stage eval."""
    if isinstance(stage.kappa, tuple):
        kth, kph = stage.kappa
        kmin = kth if n == 1 else np.minimum(kth, kph)
    else:
        kmin = stage.kappa
    return float(kmin.min()) - shift


def _pinch_ratio(stage, n, a):
    """min over nodes of (kappa_min - a) / (H - n a), guarded at the sphere
    limit where the quotient tends to 1/n."""
    if not isinstance(stage.kappa, tuple):
        return 1.0 / n  # single curvature: ratio is identically 1
    kth, kph = stage.kappa
    if n == 1:
        return 1.0
    kmin = np.minimum(kth, kph)
    H = kth + (n - 1) * kph
    num = kmin - a
    den = H - n * a
    ratio = np.where(np.abs(den) < 1e-12, 1.0 / n, num / np.where(np.abs(den) < 1e-12, 1.0, den))
    return float(ratio.min())


def cfl_dt(stage, config, dtheta):
    """Parabolic step size from the current stage evaluation."""
    ds_min = stage.min_sqrt_g * dtheta
    return config.cfl_safety * ds_min * ds_min / (config.n * stage.lam)


def _try_rk4(ctx, u, s1, dt):
    """One RK4 attempt; returns (accepted?, u_new, stage(u_new))."""
    k1 = s1.rhs
    s2 = ctx.stage(u + (0.5 * dt) * k1)
    if s2.ok != 0:
        return False, None, s2
    s3 = ctx.stage(u + (0.5 * dt) * s2.rhs)
    if s3.ok != 0:
        return False, None, s3
    s4 = ctx.stage(u + dt * s3.rhs)
    if s4.ok != 0:
        return False, None, s4
    u_new = u + (dt / 6.0) * (k1 + 2.0 * s2.rhs + 2.0 * s3.rhs + s4.rhs)
    s_new = ctx.stage(u_new)
    if s_new.ok != 0:
        return False, None, s_new
    return True, u_new, s_new


def _step(ctx, u, s1, dt):
    """Advance one accepted RK4 step, halving dt on admissibility loss.
    Returns (u_new, stage_new, dt_used, halvings)."""
    last = None
    for halvings in range(MAX_STEP_HALVINGS + 1):
        ok, u_new, s_new = _try_rk4(ctx, u, s1, dt)
        if ok:
            return u_new, s_new, dt, halvings
        last = s_new
        dt *= 0.5
    detail = "invalid graph values" if last.ok == 1 else f"admissibility margin {last.margin:.3e}"
    raise StepFailure(
        f"step rejected {MAX_STEP_HALVINGS} times (dt down to {dt:.3e}): {detail}")


def _maybe_recenter(ctx, u, s):
    """Apply the recentering policy; returns (u, stage, recentered?)."""
    cfg = ctx.config
    if s.max_grad <= cfg.recenter_max_grad and s.min_u >= cfg.recenter_min_u:
        return u, s, False
    patch, _info = recenter_to_inball(ctx.patch_from(u))
    s_new = ctx.stage(patch.u)
    if s_new.ok != 0:
        raise StepFailure("state inadmissible after recentering "
                          f"(margin {s_new.margin!r})")
    return patch.u, s_new, True


def _project_volume(ctx, u, v_target):
    """Optional per-step correction: shift u by the constant that restores
    the tracked mixed volume (secant solve, a few iterations)."""
    patch = ctx.patch_from(u)
    k = ctx.k

    def defect(eps):
        return mixed_volume(patch.with_u(u + eps), k) - v_target

    e0, f0 = 0.0, defect(0.0)
    if abs(f0) <= 1e-15 * max(abs(v_target), 1.0):
        return u
    h = 1e-8 * max(1.0, float(np.mean(u)))
    e1 = e0 - f0 * h / (defect(h) - f0)
    for _ in range(3):
        f1 = defect(e1)
        if abs(f1) <= 1e-14 * max(abs(v_target), 1.0) or f1 == f0:
            break
        e0, f0, e1 = e1, f1, e1 - f1 * (e1 - e0) / (f1 - f0)
    return u + e1


def make_state(ctx, u, t, steps=0, recenters=0, dt_last=math.nan, stage=None):
    """Materialize a full FlowState (geometry rebuilt) from raw arrays."""
    if stage is None:
        stage = ctx.stage(u)
    if stage.ok != 0:
        raise AdmissibilityError(_worst_node(ctx, stage), float("nan"), ctx.alpha)
    patch = ctx.patch_from(u)
    geom = build_geometry(patch)
    return FlowState(t=t, patch=patch, geometry=geom, F=stage.F, f=stage.f,
                     steps=steps, recenters=recenters, dt_last=dt_last)


def _worst_node(ctx, stage):
    if isinstance(stage.kappa, tuple):
        kth, kph = stage.kappa
        if kth is None:
            return -1
        kmin = kth if ctx.n == 1 else np.minimum(kth, kph)
    else:
        if stage.kappa is None:
            return -1
        kmin = stage.kappa
    return int(np.argmin(kmin))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def global_term(state, config):
    """Nonlocal forcing f_k computed from a materialized state (reference
    path; the stage kernels carry the hot-loop version)."""
    kap = state.geometry.kappa_full()
    n, a, k = config.n, config.a, config.k
    e = elementary_symmetric_all(kap)
    if k <= 1:
        wgt = e[:, k]
    else:
        wgt = k * e[:, k] + a * a * (n - k + 2) * e[:, k - 2]
    F = eval_F(config.curvature, kap)
    W = quad_weights(state.patch)
    wm = W * state.geometry.mdens * wgt
    den = float(wm.sum())
    if den <= 0.0:
        raise AdmissibilityError(int(np.argmin(wgt)), float(wgt.min()), config.alpha)
    return float(wm @ F) / den


def flow_rhs(state, config):
    """Nodal du/dt = -v (F - f) at a materialized state."""
    kap = state.geometry.kappa_full()
    bad = np.min(kap, axis=1) - config.alpha
    if float(bad.min()) <= 0.0:
        j = int(np.argmin(bad))
        raise AdmissibilityError(j, float(kap[j].min()), config.alpha)
    F = eval_F(config.curvature, kap)
    f = global_term(state, config)
    return -state.geometry.v * (F - f)


def advance(state, config, dt=None):
    """One accepted RK4 step (with retry and the recentering policy applied);
    returns the next FlowState."""
    ctx = _Ctx(config)
    s = ctx.stage(state.patch.u)
    if s.ok != 0:
        raise AdmissibilityError(_worst_node(ctx, s), float("nan"), ctx.alpha)
    if dt is None:
        dt = cfl_dt(s, config, ctx.dtheta)
    u, s_new, dt_used, _ = _step(ctx, state.patch.u, s, dt)
    recenters = state.recenters
    u, s_new, did = _maybe_recenter(ctx, u, s_new)
    if did:
        recenters += 1
    return make_state(ctx, u, state.t + dt_used, steps=state.steps + 1,
                      recenters=recenters, dt_last=dt_used, stage=s_new)


def initial_state(config):
    """Validated t = 0 state (strict h-convexity checked)."""
    ctx = _Ctx(config)
    patch = config.initial_patch()
    s = ctx.stage(patch.u)
    if s.ok == 1:
        raise GeometryError("initial data has invalid graph values")
    hmargin = _min_kappa_minus(s, config.n, config.a)
    if hmargin <= 0.0:
        raise AdmissibilityError(_worst_node(ctx, s), hmargin + config.a, config.a)
    if s.ok != 0:
        raise AdmissibilityError(_worst_node(ctx, s), s.margin + ctx.alpha, ctx.alpha)
    return make_state(ctx, patch.u, 0.0, stage=s)


@dataclass
class Trajectory:
    """Result of run_flow: cadence records/states plus the final state."""

    config: FlowConfig
    records: list
    states: list
    final_state: FlowState
    stop_reason: str
    summary: dict = field(default_factory=dict)


def run_flow(config, record_hook=None):
    """Integrate until convergence (sup|F - f| < tol and pinch ratio at the
    sphere value to 1e-6) or t_max.  `record_hook(state)` may map states to
    records (defaults to diagnostics.snapshot); failures re-raise with the
    partial record history attached."""
    from . import diagnostics  # deferred: diagnostics does not import flow

    if record_hook is None:
        record_hook = lambda st: diagnostics.snapshot(st, config)

    ctx = _Ctx(config)
    state0 = initial_state(config)
    v_target = mixed_volume(state0.patch, config.k, geom=state0.geometry)

    records, states = [], []

    def emit(st):
        records.append(record_hook(st))
        states.append(st)

    emit(state0)
    u = state0.patch.u
    s = ctx.stage(u)
    t, steps, recenters = 0.0, 0, 0
    dt_used = math.nan
    stop_reason = None
    try:
        while True:
            sup = float(np.abs(s.F - s.f).max())
            if sup < config.tol_converged and \
                    abs(_pinch_ratio(s, config.n, config.a) - 1.0 / config.n) <= 1e-6:
                stop_reason = "converged"
                break
            if t >= config.t_max * (1.0 - 1e-15):
                stop_reason = "t_max"
                break
            dt = min(cfl_dt(s, config, ctx.dtheta), config.t_max - t)
            u, s, dt_used, _ = _step(ctx, u, s, dt)
            t += dt_used
            steps += 1
            u, s, did = _maybe_recenter(ctx, u, s)
            if did:
                recenters += 1
            if config.volume_projection:
                u = _project_volume(ctx, u, v_target)
                s = ctx.stage(u)
                if s.ok != 0:
                    raise StepFailure("volume projection left an inadmissible state")
            if steps % config.output_every == 0:
                emit(make_state(ctx, u, t, steps, recenters, dt_used, stage=s))
    except (StepFailure, GeometryError, RecenterError, AdmissibilityError) as exc:
        if isinstance(exc, StepFailure):
            exc.records = records
        else:
            exc = StepFailure(f"{type(exc).__name__}: {exc}", records)
        raise exc from None

    final = make_state(ctx, u, t, steps, recenters, dt_used, stage=s)
    if not states or states[-1].steps != steps:
        emit(final)
    traj = Trajectory(config=config, records=records, states=states,
                      final_state=final, stop_reason=stop_reason)
    traj.summary = _summarize(traj, v_target)
    return traj


def _summarize(traj, v_target):
    config = traj.config
    final = traj.final_state
    v_final = mixed_volume(final.patch, config.k, geom=final.geometry)
    summary = {
        "stop_reason": traj.stop_reason,
        "converged": traj.stop_reason == "converged",
        "t_final": final.t,
        "steps": final.steps,
        "recenters": final.recenters,
        "sup_F_minus_f_final": final.sup_F_minus_f,
        "v_tracked_initial": v_target,
        "v_tracked_final": v_final,
        "volume_drift_rel": abs(v_final - v_target) / abs(v_target),
        "alpha": config.alpha,
        "kernel_lane": kernels.LANE,
    }
    try:
        summary["r0_oracle"] = ball_radius_for_mixed_volume(v_target, config.k,
                                                            final.patch.ambient)
    except ValueError:
        summary["r0_oracle"] = math.nan
    try:
        centered, _info = recenter_to_inball(final.patch)
        summary["r0_estimate"] = float(centered.u.mean())
        summary["max_dev_from_r0"] = float(np.abs(centered.u - summary["r0_oracle"]).max())
    except (RecenterError, ValueError):
        summary["r0_estimate"] = math.nan
        summary["max_dev_from_r0"] = math.nan
    return summary
