"""Command-line interface.

Subcommands:
  run          integrate a flow from a config file; writes diagnostics.csv,
               periodic patch snapshots, and summary.json into --out
  check-curvfn randomized hypothesis checks for a curvature family
  volumes      print the mixed volumes of a patch snapshot file
  oracle       print closed-form geodesic-ball mixed volumes
  verify       run a flow and audit every trajectory-level invariant

Config files are flat `key = value` text ('#' comments allowed); the key set
is fixed and unknown keys are a hard error.  Exit codes: 0 success, 1 a
verification/check command found violations, 2 config error, 3 numerical
abort (partial diagnostics are still flushed).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .ambient import AmbientParams, ball_mixed_volume
from .curvfn import FAMILIES, AdmissibilityError, CurvatureSpec, verify_assumptions
from .diagnostics import (
    FitError,
    convergence_tail,
    fit_decay,
    verify_invariants,
    write_csv,
)
from .flow import FlowConfig, StepFailure, run_flow
from .hypersurface import (
    BACKENDS,
    U0_KINDS,
    GeometryError,
    RecenterError,
    all_mixed_volumes,
    load_patch,
    save_patch,
)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (StepFailure, GeometryError, RecenterError, AdmissibilityError)


class ConfigError(ValueError):
    """Invalid config file: unknown/missing key or out-of-range value."""


_CONVERTERS = {
    "backend": str,
    "n": int,
    "a": float,
    "alpha": float,
    "curvature.family": str,
    "curvature.param1": float,
    "curvature.param2": float,
    "k": int,
    "N": int,
    "u0.kind": str,
    "u0.radius": float,
    "u0.amp": float,
    "u0.mode": int,
    "cfl_safety": float,
    "t_max": float,
    "tol_converged": float,
    "output_every": int,
    "recenter.max_grad": float,
    "recenter.min_u": float,
    "seed": int,
}

_REQUIRED = ("backend", "n", "a", "curvature.family", "k", "N", "u0.kind", "u0.radius")


def read_config_text(path):
    """Parse the flat key-value file into a {key: raw string} dict."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONVERTERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            if not value:
                raise ConfigError(f"{path}:{lineno}: empty value for key {key!r}")
            raw[key] = value
    return raw


def build_config(raw):
    """Convert a raw key->string dict into a validated FlowConfig."""
    vals = {}
    for key, text in raw.items():
        try:
            vals[key] = _CONVERTERS[key](text)
        except ValueError:
            raise ConfigError(f"key {key!r}: cannot parse {text!r} as {_CONVERTERS[key].__name__}")
    for key in _REQUIRED:
        if key not in vals:
            raise ConfigError(f"missing required key {key!r}")
    try:
        spec = CurvatureSpec(
            family=vals["curvature.family"],
            n=vals["n"],
            alpha=vals.get("alpha", vals["a"]),
            param1=vals.get("curvature.param1"),
            param2=vals.get("curvature.param2"),
        )
        return FlowConfig(
            backend=vals["backend"],
            n=vals["n"],
            a=vals["a"],
            curvature=spec,
            k=vals["k"],
            N=vals["N"],
            u0_kind=vals["u0.kind"],
            u0_radius=vals["u0.radius"],
            u0_amp=vals.get("u0.amp", 0.0),
            u0_mode=vals.get("u0.mode", 2),
            cfl_safety=vals.get("cfl_safety", 0.4),
            t_max=vals.get("t_max", 50.0),
            tol_converged=vals.get("tol_converged", 1e-8),
            output_every=vals.get("output_every", 50),
            recenter_max_grad=vals.get("recenter.max_grad", 2.0),
            recenter_min_u=vals.get("recenter.min_u"),
            seed=vals.get("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path):
    """File path -> validated FlowConfig (exit code 2 territory on failure)."""
    return build_config(read_config_text(path))


def _atomic_write_text(path, payload):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cli-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fit_to_dict(fit):
    return {"amplitude": fit.amplitude, "rate": fit.rate,
            "r_squared": fit.r_squared, "n_points": fit.n_points}


def _tail_fit(records, getter):
    ts = np.array([r.t for r in records])
    ys = np.array([getter(r) for r in records])
    tt, yy = convergence_tail(ts, ys, drop=0.1)
    return fit_decay(tt, yy, tail_fraction=0.5)


def _write_run_artifacts(outdir, config, trajectory, quiet):
    records = trajectory.records
    write_csv(records, os.path.join(outdir, "diagnostics.csv"))

    states = trajectory.states
    picks = sorted({0, len(states) - 1,
                    *range(0, len(states), max(1, len(states) // 8))})
    for idx in picks:
        st = states[idx]
        save_patch(os.path.join(outdir, f"snapshot_{idx:04d}.txt"), st.patch, t=st.t)

    summary = dict(trajectory.summary)
    for name, getter in (("sup_F_minus_f", lambda r: r.sup_abs_F_minus_f),
                         ("pinch_deficit", lambda r: 1.0 / config.n - r.pinch_ratio),
                         ("trace_free", lambda r: r.sup_trace_free)):
        try:
            summary[f"fit_{name}"] = _fit_to_dict(_tail_fit(records, getter))
        except FitError as exc:
            summary[f"fit_{name}"] = {"error": str(exc)}
    _atomic_write_text(os.path.join(outdir, "summary.json"),
                       json.dumps(summary, indent=2, sort_keys=True) + "\n")

    lines = [f"{key} = {val}" for key, val in sorted(_config_as_items(config))]
    _atomic_write_text(os.path.join(outdir, "config_resolved.txt"), "\n".join(lines) + "\n")
    if not quiet:
        print(f"[{os.path.basename(outdir) or outdir}] {trajectory.stop_reason} "
              f"t={trajectory.final_state.t:.6g} steps={trajectory.final_state.steps} "
              f"sup|F-f|={trajectory.final_state.sup_F_minus_f:.3e}")


def _config_as_items(config):
    spec = config.curvature
    items = [
        ("backend", config.backend), ("n", config.n), ("a", format(config.a, ".17g")),
        ("alpha", format(spec.alpha, ".17g")), ("curvature.family", spec.family),
        ("k", config.k), ("N", config.N), ("u0.kind", config.u0_kind),
        ("u0.radius", format(config.u0_radius, ".17g")),
        ("u0.amp", format(config.u0_amp, ".17g")), ("u0.mode", config.u0_mode),
        ("cfl_safety", format(config.cfl_safety, ".17g")),
        ("t_max", format(config.t_max, ".17g")),
        ("tol_converged", format(config.tol_converged, ".17g")),
        ("output_every", config.output_every),
        ("recenter.max_grad", format(config.recenter_max_grad, ".17g")),
        ("recenter.min_u", format(config.recenter_min_u, ".17g")),
        ("seed", config.seed),
    ]
    if spec.param1 is not None:
        items.append(("curvature.param1", format(spec.param1, ".17g")))
    if spec.param2 is not None:
        items.append(("curvature.param2", format(spec.param2, ".17g")))
    return items


def _run_single(raw, outdir, quiet):
    """One run: returns an exit code, flushing partial history on aborts."""
    config = build_config(raw)
    os.makedirs(outdir, exist_ok=True)
    try:
        trajectory = run_flow(config)
    except NUMERICAL_ERRORS as exc:
        records = getattr(exc, "records", [])
        if records:
            write_csv(records, os.path.join(outdir, "diagnostics.csv"))
        _atomic_write_text(os.path.join(outdir, "summary.json"),
                           json.dumps({"error": str(exc)}, indent=2) + "\n")
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_run_artifacts(outdir, config, trajectory, quiet)
    return EXIT_OK


def _parse_sweep(sweep):
    key, _, values = sweep.partition("=")
    key = key.strip()
    if key not in _CONVERTERS:
        raise ConfigError(f"--sweep key {key!r} is not a config key")
    vals = [v.strip() for v in values.split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"--sweep {sweep!r} has no values")
    return key, vals


def cmd_run(args):
    raw = read_config_text(args.config)
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.sweep is None:
        build_config(raw)  # validate before creating directories
        return _run_single(raw, args.out, args.quiet)

    key, values = _parse_sweep(args.sweep)
    jobs = []
    for val in values:
        sub = dict(raw)
        sub[key] = val
        build_config(sub)  # validate every variant up front
        safe = val.replace("/", "_").replace(" ", "")
        jobs.append((sub, os.path.join(args.out, f"{key.replace('.', '_')}_{safe}")))
    workers = min(len(jobs), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(lambda j: _run_single(j[0], j[1], args.quiet), jobs))
    return max(codes)


def cmd_check_curvfn(args):
    spec = CurvatureSpec(family=args.family, n=args.n, alpha=args.alpha,
                         param1=args.param1, param2=args.param2)
    report = verify_assumptions(spec, samples=args.samples, seed=args.seed or 0)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_VIOLATIONS


def cmd_volumes(args):
    patch, t = load_patch(args.snapshot)
    vols = all_mixed_volumes(patch)
    print(f"snapshot: backend={patch.backend} N={patch.N} n={patch.n} "
          f"a={patch.a:.17g} t={t:.17g}")
    ks = range(patch.n + 1) if args.k is None else [args.k]
    for k in ks:
        if not 0 <= k <= patch.n:
            raise ConfigError(f"k must lie in [0, {patch.n}], got {k}")
        print(f"V_[n+1-k] for k={k}: {vols[k]:.17g}")
    return EXIT_OK


def cmd_oracle(args):
    ambient = AmbientParams(n=args.n, a=args.a)
    ks = range(args.n + 1) if args.k is None else [args.k]
    for k in ks:
        if not 0 <= k <= args.n:
            raise ConfigError(f"k must lie in [0, {args.n}], got {k}")
        val = ball_mixed_volume(args.r, k, ambient)
        print(f"V_[n+1-k](B_r) for k={k}, n={args.n}, a={args.a:.17g}, "
              f"r={args.r:.17g}: {val:.17g}")
    return EXIT_OK


def cmd_verify(args):
    config = parse_config(args.config)
    try:
        trajectory = run_flow(config)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    report = verify_invariants(trajectory)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_VIOLATIONS


def make_parser():
    parser = argparse.ArgumentParser(
        prog="hcflow",
        description="Mixed-volume-preserving curvature flows of h-convex "
                    "hypersurfaces in hyperbolic space.")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a flow from a config file")
    p_run.add_argument("--config", required=True, help="path to the run config")
    p_run.add_argument("--out", default="out", help="output directory (default ./out)")
    p_run.add_argument("--sweep", default=None, metavar="KEY=v1,v2,...",
                       help="fan out runs over one config key")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.set_defaults(fn=cmd_run)

    p_chk = sub.add_parser("check-curvfn", help="randomized hypothesis checks for a family")
    p_chk.add_argument("family", choices=FAMILIES)
    p_chk.add_argument("--n", type=int, default=3)
    p_chk.add_argument("--alpha", type=float, default=0.0)
    p_chk.add_argument("--param1", type=float, default=None)
    p_chk.add_argument("--param2", type=float, default=None)
    p_chk.add_argument("--samples", type=int, default=10_000)
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.set_defaults(fn=cmd_check_curvfn)

    p_vol = sub.add_parser("volumes", help="mixed volumes of a patch snapshot")
    p_vol.add_argument("snapshot", help="path to a snapshot file")
    p_vol.add_argument("--k", type=int, default=None)
    p_vol.set_defaults(fn=cmd_volumes)

    p_orc = sub.add_parser("oracle", help="closed-form geodesic-ball mixed volumes")
    p_orc.add_argument("--n", type=int, required=True)
    p_orc.add_argument("--a", type=float, default=1.0)
    p_orc.add_argument("--r", type=float, required=True)
    p_orc.add_argument("--k", type=int, default=None)
    p_orc.set_defaults(fn=cmd_oracle)

    p_ver = sub.add_parser("verify", help="run a flow and audit its invariants")
    p_ver.add_argument("--config", required=True, help="path to the run config")
    p_ver.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
