"""Batch command-line front end.

Subcommands::

    stifflab run        integrate one trajectory (stiff or effective)
    stifflab sweep      epsilon sweep with a convergence report
    stifflab diagnose   weak-limit averages, virial/adiabatic residuals
    stifflab scenarios  list the builtin scenarios

Configuration can come from a TOML file (--config) with flat keys
(scenario, mode, eps, eps_list, t0, t1, tol, window, launch_p, launch_v,
m, a, b, out_dir, timestamp) or a [custom] table for assembled
scenarios; command-line flags override file values.  Output lands in
--out-dir, the STIFFLAB_OUT_DIR environment variable, or the working
directory, in that order of preference.

Exit status: 0 success, 1 invalid configuration, 2 numerical failure.
Errors emit a single machine-readable JSON record on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import diagnostics, dynamics, fileio, scenarios
from .errors import NumericalError, StiffLabError, ValidationError
from .geometry import split_velocity


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="stifflab",
        description="Stiff constrained-Lagrangian laboratory: integrate "
                    "stiff and effective dynamics, estimate weak limits, "
                    "and run epsilon sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, with_eps=True):
        sp.add_argument("--scenario", help="builtin scenario name")
        sp.add_argument("--config", help="TOML config file")
        if with_eps:
            sp.add_argument("--eps", type=float, help="stiffness parameter")
        sp.add_argument("--eps-list",
                        help="comma-separated decreasing epsilon values")
        sp.add_argument("--t0", type=float, help="start time (default 0)")
        sp.add_argument("--t1", type=float, help="end time (default 3)")
        sp.add_argument("--tol", type=float,
                        help="integrator tolerance (default 1e-10)")
        sp.add_argument("--window", type=float,
                        help="averaging half-width (default 0.1)")
        sp.add_argument("--launch-p", dest="launch_p",
                        help="launch point, comma-separated")
        sp.add_argument("--launch-v", dest="launch_v",
                        help="launch velocity, comma-separated")
        sp.add_argument("--m", type=int, help="shape exponent parameter")
        sp.add_argument("--out-dir", dest="out_dir", help="output directory")
        sp.add_argument("--no-timestamp", dest="no_timestamp",
                        action="store_true",
                        help="omit the timestamp header line")

    sp_run = sub.add_parser("run", help="integrate one trajectory")
    sp_run.add_argument("--mode", choices=("stiff", "effective"),
                        help="which system to integrate (default stiff)")
    common(sp_run)
    sp_sweep = sub.add_parser("sweep", help="epsilon sweep + report")
    common(sp_sweep, with_eps=False)
    sp_diag = sub.add_parser("diagnose", help="weak-limit diagnostics")
    common(sp_diag)
    sub.add_parser("scenarios", help="list builtin scenarios")
    return parser


def _parse_vector(text, label):
    try:
        return [float(tok) for tok in str(text).split(",")]
    except ValueError:
        raise ValidationError("could not parse %s %r as comma-separated "
                              "floats" % (label, text))


class RunConfig:
    """Merged file + flag configuration with defaults and validation."""

    def __init__(self):
        self.scenario = None
        self.custom = None
        self.mode = "stiff"
        self.eps = None
        self.eps_list = None
        self.t0 = 0.0
        self.t1 = 3.0
        self.tol = 1e-10
        self.window = 0.1
        self.launch_p = None
        self.launch_v = None
        self.m = None
        self.a = None
        self.b = None
        self.out_dir = None
        self.timestamp = True

    @classmethod
    def from_args(cls, args):
        cfg = cls()
        path = getattr(args, "config", None)
        if path:
            try:
                with open(path, "rb") as fh:
                    raw = tomllib.load(fh)
            except OSError as exc:
                raise ValidationError("cannot read config file: %s" % exc)
            except tomllib.TOMLDecodeError as exc:
                raise ValidationError("malformed config file: %s" % exc)
            cfg._absorb(raw)
        cfg._absorb_flags(args)
        cfg._validate()
        return cfg

    def _absorb(self, raw):
        simple = {"scenario": str, "mode": str, "eps": float, "t0": float,
                  "t1": float, "tol": float, "window": float, "m": int,
                  "a": float, "b": float, "out_dir": str}
        for key, cast in simple.items():
            if key in raw:
                setattr(self, key, cast(raw[key]))
        if "timestamp" in raw:
            self.timestamp = bool(raw["timestamp"])
        if "eps_list" in raw:
            self.eps_list = [float(e) for e in raw["eps_list"]]
        for key in ("launch_p", "launch_v"):
            if key in raw:
                val = raw[key]
                if isinstance(val, str):
                    val = _parse_vector(val, key)
                setattr(self, key, [float(x) for x in val])
        if "custom" in raw:
            self.custom = dict(raw["custom"])
        known = set(simple) | {"timestamp", "eps_list", "launch_p",
                               "launch_v", "custom"}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError("unknown config keys: %s"
                                  % ", ".join(sorted(unknown)))

    def _absorb_flags(self, args):
        for key in ("scenario", "mode", "eps", "t0", "t1", "tol", "window",
                    "m", "out_dir"):
            val = getattr(args, key, None)
            if val is not None:
                setattr(self, key, val)
        if getattr(args, "eps_list", None):
            self.eps_list = _parse_vector(args.eps_list, "--eps-list")
        if getattr(args, "launch_p", None):
            self.launch_p = _parse_vector(args.launch_p, "--launch-p")
        if getattr(args, "launch_v", None):
            self.launch_v = _parse_vector(args.launch_v, "--launch-v")
        if getattr(args, "no_timestamp", False):
            self.timestamp = False

    def _validate(self):
        if self.eps is not None and not self.eps > 0.0:
            raise ValidationError("eps must be positive, got %g" % self.eps)
        if self.eps_list is not None:
            if any(e <= 0.0 for e in self.eps_list):
                raise ValidationError("eps_list entries must be positive")
        if not self.t1 > self.t0:
            raise ValidationError("need t1 > t0 (got %g, %g)"
                                  % (self.t0, self.t1))
        if not self.tol > 0.0:
            raise ValidationError("tol must be positive")
        if not self.window > 0.0:
            raise ValidationError("window must be positive")

    def resolve_scenario(self):
        if self.custom is not None:
            return scenarios.custom(self.custom)
        if self.scenario is None:
            raise ValidationError(
                "no scenario: pass --scenario or a [custom] config block")
        kwargs = {}
        if self.m is not None:
            kwargs["m"] = self.m
        if self.a is not None:
            kwargs["a"] = self.a
        if self.b is not None:
            kwargs["b"] = self.b
        return scenarios.builtin(self.scenario, **kwargs)

    def resolve_launch(self, scenario):
        p, v = scenario.default_launch
        if self.launch_p is not None:
            p = np.asarray(self.launch_p, dtype=float)
        if self.launch_v is not None:
            v = np.asarray(self.launch_v, dtype=float)
        return p, v

    def resolve_out_dir(self):
        out = self.out_dir or os.environ.get("STIFFLAB_OUT_DIR") or "."
        os.makedirs(out, exist_ok=True)
        return out


def _effective_inputs(scenario, p, v):
    metric, spec = scenario.metric, scenario.potential
    if abs(spec.f.eval(p)) > dynamics.ON_TOL:
        p = dynamics.constraint_project(metric, spec, p)
    params = dynamics.adiabatic_invariant(metric, spec, p, v)
    grho = metric.inv_apply(p, spec.f.grad(p))
    v_par, _ = split_velocity(metric, p, grho, v)
    return params, v_par


def _cmd_run(cfg):
    scenario = cfg.resolve_scenario()
    p, v = cfg.resolve_launch(scenario)
    out_dir = cfg.resolve_out_dir()
    span = (cfg.t0, cfg.t1)
    if cfg.mode == "stiff":
        if cfg.eps is None:
            raise ValidationError("mode stiff requires --eps")
        traj = dynamics.integrate_stiff(scenario.metric, scenario.potential,
                                        cfg.eps, p, v, span, tol=cfg.tol)
        path = os.path.join(out_dir, "%s_stiff_eps%g.csv"
                            % (scenario.name, cfg.eps))
    else:
        params, v_par = _effective_inputs(scenario, p, v)
        traj = dynamics.integrate_effective(scenario.metric,
                                            scenario.potential, params,
                                            v_par, span, tol=cfg.tol)
        path = os.path.join(out_dir, "%s_effective.csv" % scenario.name)
    fileio.write_trajectory(traj, path, scenario=scenario.name,
                            timestamp=cfg.timestamp)
    print("wrote %s (%d samples, %d steps, flags: %s)"
          % (path, len(traj), traj.n_steps,
             ",".join(traj.flags) if traj.flags else "none"))
    return 0


def _cmd_sweep(cfg):
    scenario = cfg.resolve_scenario()
    if not cfg.eps_list:
        raise ValidationError("sweep requires --eps-list")
    p, v = cfg.resolve_launch(scenario)
    out_dir = cfg.resolve_out_dir()
    report, runs = diagnostics.convergence_study(
        scenario, p, v, cfg.eps_list, (cfg.t0, cfg.t1), tol=cfg.tol,
        return_runs=True)
    eff = runs.pop("effective")
    path = os.path.join(out_dir, "%s_effective.csv" % scenario.name)
    fileio.write_trajectory(eff, path, scenario=scenario.name,
                            timestamp=cfg.timestamp)
    for eps, traj in sorted(runs.items(), reverse=True):
        path = os.path.join(out_dir, "%s_stiff_eps%g.csv"
                            % (scenario.name, eps))
        fileio.write_trajectory(traj, path, scenario=scenario.name,
                                timestamp=cfg.timestamp)
    pairs = [("scenario", scenario.name), ("t0", cfg.t0), ("t1", cfg.t1),
             ("tol", cfg.tol), ("n_eps", len(report.eps_list))]
    for i, (eps, err) in enumerate(zip(report.eps_list,
                                       report.sup_errors), 1):
        pairs.append(("eps_%d" % i, float(eps)))
        pairs.append(("sup_error_%d" % i, float(err)))
    pairs += [("monotone", "true" if report.monotone else "false"),
              ("fitted_rate", report.fitted_rate),
              ("flags", ";".join(report.flags) if report.flags else "none")]
    rpath = os.path.join(out_dir, "%s_sweep.txt" % scenario.name)
    fileio.write_report(rpath, "sweep report", pairs,
                        timestamp=cfg.timestamp)
    print("wrote %s (monotone: %s, fitted rate: %.3f)"
          % (rpath, report.monotone, report.fitted_rate))
    return 0


def _cmd_diagnose(cfg):
    scenario = cfg.resolve_scenario()
    eps = cfg.eps if cfg.eps is not None else 1e-3
    p, v = cfg.resolve_launch(scenario)
    out_dir = cfg.resolve_out_dir()
    metric, spec = scenario.metric, scenario.potential
    traj = dynamics.integrate_stiff(metric, spec, eps, p, v,
                                    (cfg.t0, cfg.t1), tol=cfg.tol)
    est = diagnostics.weak_limits(traj, cfg.window)
    alpha = scenario.alpha
    vres = diagnostics.virial_residual(est, traj, alpha)
    ares = diagnostics.adiabatic_residual(est, traj, alpha)
    series = diagnostics.adiabatic_series(est, traj, alpha)
    params, _ = _effective_inputs(scenario, traj.xs[0], v)
    measured = float(np.mean(series))
    theta = params.theta
    rel = abs(measured - theta) / theta if theta > 0.0 else float("nan")
    pairs = [("scenario", scenario.name), ("eps", float(eps)),
             ("t0", cfg.t0), ("t1", cfg.t1), ("tol", cfg.tol),
             ("window", cfg.window), ("alpha", float(alpha)),
             ("virial_residual", vres),
             ("adiabatic_residual", ares),
             ("theta_launch", theta),
             ("theta_measured_mean", measured),
             ("theta_rel_error", rel),
             ("interior_samples", est.times.size),
             ("flags", ",".join(traj.flags) if traj.flags else "none")]
    rpath = os.path.join(out_dir, "%s_diagnose.txt" % scenario.name)
    fileio.write_report(rpath, "diagnose report", pairs,
                        timestamp=cfg.timestamp)
    spath = os.path.join(out_dir, "%s_weaklimits.csv" % scenario.name)
    fileio.write_series(spath, ["t", "sigma_hat", "pi_hat", "adiabatic"],
                        [est.times, est.sigma_hat, est.pi_hat, series],
                        timestamp=cfg.timestamp)
    print("wrote %s and %s (virial %.4g, adiabatic %.4g, theta %.6g vs "
          "measured %.6g)" % (rpath, spath, vres, ares, theta, measured))
    return 0


def _cmd_scenarios(cfg):
    for name in scenarios.BUILTIN_NAMES:
        sc = scenarios.builtin(name)
        p, v = sc.default_launch
        print("%-18s dim=%d alpha=%-6g r_max=%-4g launch p=%s v=%s"
              % (sc.name, sc.dim, sc.alpha, sc.r_max,
                 np.array2string(p, separator=","),
                 np.array2string(v, separator=",")))
        print("    %s" % sc.notes)
    return 0


_DISPATCH = {"run": _cmd_run, "sweep": _cmd_sweep, "diagnose": _cmd_diagnose,
             "scenarios": _cmd_scenarios}


def _emit_error(exc, status):
    record = {"error": type(exc).__name__, "message": str(exc),
              "exit_status": status}
    print(json.dumps(record), file=sys.stderr)
    return status


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses status 2 for usage errors; map those onto the
        # validation-error status and let --help keep its clean exit.
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "scenarios":
            return _cmd_scenarios(None)
        cfg = RunConfig.from_args(args)
        return _DISPATCH[args.command](cfg)
    except ValidationError as exc:
        return _emit_error(exc, 1)
    except NumericalError as exc:
        return _emit_error(exc, 2)
    except StiffLabError as exc:  # any other library error: treat as config
        return _emit_error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
