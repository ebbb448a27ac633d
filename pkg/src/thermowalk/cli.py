"""``thermowalk`` command line: mc, pde, steady, compare, soret, variance.

Settings come from flags, then a flat ``key=value`` config file
(``--config``), then built-in defaults.  Exit status is 0 on success, 2 for
bad configuration and 3 for numerical failure; errors are reported as one
JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import analysis, fvm, gridfile, mc
from .errors import ConfigError, NumericalError, ThermowalkError
from .fields import DomainSpec, FieldGrid, WalkProfile

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class _Fail(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Fail(EXIT_CONFIG, "usage", message)


def _pos_int(v):
    n = int(float(v))
    if n <= 0 or n != float(v):
        raise ValueError(f"expected a positive integer, got {v}")
    return n


def _pos_float(v):
    x = float(v)
    if not x > 0:
        raise ValueError(f"expected a positive number, got {v}")
    return x


def _flag(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v}")


# name -> (type, default, help); flags are the names with '_' -> '-'
OPTIONS = {
    "profile": (str, "paper-fig2", "walk profile name, or DX_FILE,DT_FILE grid files"),
    "law": (str, "randomwalk", "flux law: " + ", ".join(fvm.LAWS)),
    "particles": (_pos_int, 100000, "number of walkers"),
    "t_final": (_pos_float, None, "simulated time"),
    "bins": (_pos_int, 50, "histogram bins per axis"),
    "cells": (_pos_int, 100, "solver cells per axis"),
    "dim": (int, 2, "spatial dimension (1 or 2)"),
    "seed": (int, None, "master seed (default $THERMOWALK_SEED or 42)"),
    "workers": (_pos_int, None, "worker threads"),
    "rule": (str, "midpoint", "where step length/time are evaluated: midpoint or departure"),
    "tol": (_pos_float, 1e-10, "steady-state residual threshold"),
    "max_steps": (_pos_int, 10**8, "solver step cap"),
    "steady": (_flag, False, "run the solver to steady state"),
    "init": (str, None, "initial density grid file"),
    "perturb": (float, 0.0, "amplitude of a sin(2 pi x) perturbation of the uniform start"),
    "out": (str, None, "output grid file (default: stdout)"),
    "emit_plot_data": (str, None, "also write an x,y,value table to this path"),
    "dx": (_pos_float, 0.01, "walk length for the constant profile"),
    "dt": (_pos_float, 0.01, "traveling time for the constant profile"),
    "D": (_pos_float, 0.005, "diffusivity for the sqrt-temperature profile and soret runs"),
    "t0": (_pos_float, 1.0, "temperature T = t0 + t1 x: offset"),
    "t1": (float, 1.0, "temperature T = t0 + t1 x: slope"),
    "temperature": (str, None, "1D temperature grid file for soret"),
}

COMMANDS = {
    "mc": ("gridless Monte Carlo walk, binned to a density grid",
           ["profile", "particles", "t_final", "bins", "dim", "seed", "workers", "rule", "dx",
            "dt", "D", "t0", "t1", "out", "emit_plot_data"]),
    "pde": ("finite-volume solution under a flux law",
            ["law", "profile", "cells", "dim", "t_final", "steady", "tol", "max_steps", "init",
             "perturb", "dx", "dt", "D", "t0", "t1", "out", "emit_plot_data"]),
    "steady": ("closed-form steady state of a flux law",
               ["law", "profile", "cells", "dim", "dx", "dt", "D", "t0", "t1", "out",
                "emit_plot_data"]),
    "compare": ("norms between two grid files", ["out"]),
    "soret": ("steady 1D profile under a temperature ramp and its Soret fit",
              ["law", "cells", "D", "t0", "t1", "temperature", "tol", "max_steps", "out"]),
    "variance": ("empirical diffusivity <x^2>/(2 n t)",
                 ["profile", "particles", "t_final", "dim", "seed", "workers", "rule", "dx", "dt",
                  "D", "t0", "t1", "out"]),
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thermowalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_, keys) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--config", help="flat key=value file; flags take precedence")
        if name == "compare":
            sp.add_argument("a")
            sp.add_argument("b")
        for k in keys:
            typ, default, h = OPTIONS[k]
            flag = "--" + k.replace("_", "-")
            if typ is _flag:
                sp.add_argument(flag, nargs="?", const="true", default=None, help=h)
            else:
                sp.add_argument(flag, default=None, help=h + (f" [{default}]" if default is not None else ""))
    return p


def read_config(path) -> dict:
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        cfg[k.replace("-", "_")] = v
    return cfg


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config over defaults and convert types."""
    keys = COMMANDS[args.command][1]
    cfg = read_config(args.config) if args.config else {}
    unknown = set(cfg) - set(keys)
    if unknown:
        raise ConfigError(f"config keys not used by {args.command}: {sorted(unknown)}")
    out = {}
    for k in keys:
        typ, default, _ = OPTIONS[k]
        raw = getattr(args, k)
        if raw is None:
            raw = cfg.get(k, default)
        if raw is None:
            out[k] = None
            continue
        try:
            out[k] = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"--{k.replace('_', '-')}: {exc}") from None
    if "seed" in out and out["seed"] is None:
        env = os.environ.get("THERMOWALK_SEED")
        try:
            out["seed"] = int(env) if env not in (None, "") else 42
        except ValueError:
            raise ConfigError(f"THERMOWALK_SEED={env!r} is not an integer") from None
    if "dim" in out and out["dim"] not in (1, 2):
        raise ConfigError("dim must be 1 or 2")
    return out


def _profile(cfg) -> WalkProfile:
    name = cfg["profile"]
    if "," in name:
        fdx, fdt = name.split(",", 1)
        gdx, _ = gridfile.read_grid(fdx)
        gdt, _ = gridfile.read_grid(fdt)
        if gdx.domain.dim != cfg["dim"]:
            raise ConfigError(f"profile grids are {gdx.domain.dim}D but dim={cfg['dim']}")
        return WalkProfile.sampled(gdx, gdt)
    if name == "constant":
        return WalkProfile.constant(cfg["dx"], cfg["dt"])
    if name == "sqrt-temperature":
        return WalkProfile.sqrt_temperature(cfg["D"], cfg["t0"], cfg["t1"])
    return WalkProfile.from_name(name)


def _domain(cfg, key) -> DomainSpec:
    return DomainSpec(dim=cfg["dim"], cells=(cfg[key],) * cfg["dim"], extent=(1.0,) * cfg["dim"])


def law_from_profile(tag: str, profile: WalkProfile, domain: DomainSpec) -> fvm.FluxLaw:
    """Coefficient fields of ``tag`` built from a walk profile at cell centres.

    ``D = dx^2 / (2 n dt)`` and ``S = dx / dt``; laws that need a temperature
    use ``T = S^2`` (speed proportional to sqrt(T)), which gives
    ``D_T = D / (2 T)`` for the thermophoretic form.
    """
    dx, dt = profile.evaluate(domain.centers())
    D = dx * dx / (2 * domain.dim * dt)
    S = dx / dt
    T = S * S
    if tag in ("fick", "chapman"):
        return fvm.FluxLaw(tag, domain, {"kappa": D})
    if tag == "vankampen":
        return fvm.FluxLaw.van_kampen(domain, D, T)
    if tag == "randomwalk":
        return fvm.FluxLaw.random_walk(domain, D, S)
    if tag == "thermophoretic":
        return fvm.FluxLaw.thermophoretic(domain, D, D / (2 * T), T)
    raise ConfigError(f"unknown flux law {tag!r}; choose from {fvm.LAWS}")


def _emit_grid(grid: FieldGrid, meta: dict, cfg, stdout) -> None:
    text = gridfile.format_grid(grid, meta)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    else:
        stdout.write(text)
    if cfg.get("emit_plot_data"):
        Path(cfg["emit_plot_data"]).write_text(gridfile.plot_table(grid))


def _summary(obj: dict, cfg, stdout, grid_written: bool) -> None:
    line = json.dumps(obj, sort_keys=True)
    # with the grid on stdout the summary goes to stderr to keep stdout parseable
    if grid_written and not cfg.get("out"):
        sys.stderr.write(line + "\n")
    else:
        stdout.write(line + "\n")


def cmd_mc(cfg, stdout):
    if cfg["t_final"] is None:
        raise ConfigError("mc needs --t-final")
    profile = _profile(cfg)
    domain = DomainSpec(dim=cfg["dim"], cells=(max(cfg["bins"], 4),) * cfg["dim"],
                        extent=(1.0,) * cfg["dim"])
    t = time.perf_counter()
    ens = mc.init_ensemble(domain, cfg["particles"], cfg["seed"])
    out = mc.simulate(ens, profile, cfg["t_final"], rule=cfg["rule"], workers=cfg["workers"])
    grid = mc.histogram(out, cfg["bins"])
    wall = time.perf_counter() - t
    meta = {"command": "mc", "profile": cfg["profile"], "rule": cfg["rule"],
            "particles": cfg["particles"], "t_final": cfg["t_final"], "seed": cfg["seed"]}
    _emit_grid(grid, meta, cfg, stdout)
    _summary({"command": "mc", "particles": cfg["particles"], "steps": int(out.steps.sum()),
              "wall_time": wall, "seed": cfg["seed"], "t_final": cfg["t_final"]},
             cfg, stdout, True)


def cmd_pde(cfg, stdout):
    domain = _domain(cfg, "cells")
    law = law_from_profile(cfg["law"], _profile(cfg), domain)
    if cfg["init"]:
        u0, _ = gridfile.read_grid(cfg["init"])
        if u0.domain != domain:
            raise ConfigError(f"initial grid {u0.domain.cells} does not match the solver grid")
    else:
        x = domain.centers()[..., 0]
        u0 = FieldGrid(domain, 1.0 + cfg["perturb"] * np.sin(2 * np.pi * x))
    state = fvm.SolverState.start(law, u0)
    if cfg["steady"]:
        state = fvm.run_to_steady(state, tol=cfg["tol"], max_steps=cfg["max_steps"])
    elif cfg["t_final"] is not None:
        state = fvm.run_for(state, cfg["t_final"])
    else:
        raise ConfigError("pde needs --steady or --t-final")
    meta = {"command": "pde", "law": cfg["law"], "profile": cfg["profile"], "dt": state.dt,
            "steps": state.steps, "time": state.time, "residual": state.residual}
    _emit_grid(state.u, meta, cfg, stdout)
    _summary({"command": "pde", "law": cfg["law"], "steps": state.steps, "time": state.time,
              "residual": state.residual, "mass_drift": state.mass_drift}, cfg, stdout, True)


def cmd_steady(cfg, stdout):
    domain = _domain(cfg, "cells")
    law = law_from_profile(cfg["law"], _profile(cfg), domain)
    grid = fvm.analytic_steady(law)
    _emit_grid(grid, {"command": "steady", "law": cfg["law"], "profile": cfg["profile"]},
               cfg, stdout)


def cmd_compare(cfg, stdout, a, b):
    ga, _ = gridfile.read_grid(a)
    gb, _ = gridfile.read_grid(b)
    rep = analysis.compare_grids(ga, gb)
    extra = {}
    if min(ga.values.shape) >= 2:
        extra["uniformity_ratio"] = analysis.noise_uniformity(analysis.difference(ga, gb)).ratio
    text = rep.to_json(**extra) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    stdout.write(text)


def cmd_soret(cfg, stdout):
    if cfg["temperature"]:
        tg, _ = gridfile.read_grid(cfg["temperature"])
        if tg.domain.dim != 1:
            raise ConfigError("soret needs a 1D temperature grid")
        domain, T = tg.domain, np.array(tg.values)
    else:
        domain = DomainSpec.line(cfg["cells"])
        T = cfg["t0"] + cfg["t1"] * domain.axis_centers(0)
    if np.any(T <= 0):
        raise ConfigError("temperature must be positive")
    D = np.full(domain.shape, cfg["D"])
    if cfg["law"] == "randomwalk":
        law = fvm.FluxLaw.random_walk(domain, D, np.sqrt(T))
    elif cfg["law"] == "vankampen":
        law = fvm.FluxLaw.van_kampen(domain, D, T)
    else:
        raise ConfigError("soret supports the randomwalk and vankampen laws")
    state = fvm.run_to_steady(fvm.SolverState.start(law), tol=cfg["tol"],
                              max_steps=cfg["max_steps"])
    u = state.u.normalized().values
    if np.ptp(T) == 0:
        # isothermal: no gradient, no thermophoresis
        idx = np.arange(1, T.size - 1)
        local = np.zeros(idx.size)
        exponent = 0.0
    else:
        fit = analysis.fit_soret(u, T)
        idx, local, exponent = fit.index, fit.local, fit.exponent
    ref = 1.0 / (2.0 * T[idx])
    report = {"command": "soret", "law": cfg["law"], "exponent": exponent,
              "steps": state.steps, "residual": state.residual,
              "max_rel_dev_from_1_over_2T": float(np.max(np.abs(local - ref) / ref)),
              "table": [{"x": float(domain.axis_centers(0)[i]), "T": float(T[i]),
                         "S_T": float(s), "half_inverse_T": float(r)}
                        for i, s, r in zip(idx, local, ref)]}
    text = json.dumps(report, sort_keys=True) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    stdout.write(text)


def cmd_variance(cfg, stdout):
    if cfg["t_final"] is None:
        raise ConfigError("variance needs --t-final")
    profile = _profile(cfg)
    domain = DomainSpec(dim=cfg["dim"], cells=(4,) * cfg["dim"], extent=(1.0,) * cfg["dim"])
    ens = mc.init_ensemble(domain, cfg["particles"], cfg["seed"], track_displacement=True)
    out = mc.simulate(ens, profile, cfg["t_final"], rule=cfg["rule"], workers=cfg["workers"])
    t_eff = float(out.clocks.mean())
    D_emp = mc.variance(ens, out, t_eff)
    x = domain.centers().reshape(-1, cfg["dim"])
    dx, dt = profile.evaluate(x)
    report = {"command": "variance", "D_empirical": D_emp,
              "D_profile_mean": float(np.mean(dx * dx / (2 * cfg["dim"] * dt))),
              "t_elapsed": t_eff, "particles": cfg["particles"], "seed": cfg["seed"]}
    text = json.dumps(report, sort_keys=True) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    stdout.write(text)


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    # numba notes an outdated TBB once per process; it falls back silently
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        if args.command == "compare":
            cmd_compare(cfg, stdout, args.a, args.b)
        else:
            globals()["cmd_" + args.command](cfg, stdout)
    except _Fail as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, type(exc).__name__, str(exc))
    except (ThermowalkError, ValueError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, "OSError", str(exc))
    return 0


def _fail(code, kind, message) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": message}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
