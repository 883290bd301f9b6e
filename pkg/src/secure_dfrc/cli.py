"""Command-line entry point.

Subcommands: ``run`` (one trace), ``convergence`` (mean curve over trials),
``omega-sweep`` (rates against the power split) and ``dump-scenario``.

Parameters come from a flat ``key = value`` file (``--config``) and
``--set key=value`` overrides, in that order; dB values are converted to
linear units once, here.  Exit status: 0 success, 2 bad configuration or
arguments, 3 no feasible trial.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .optimizer import InitializationInfeasible, RunConfig
from .scenario import ArrayGeometry, ScenarioConfig, db_to_lin, dbm_to_watt, dump_scenario, parse_key_values

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ConfigError(ValueError):
    pass


def _db_amp(x: float) -> float:
    """Power-dB figure of a squared magnitude to the magnitude itself."""
    return 10.0 ** (x / 20.0)


# key -> (parser, destination, field)
_KEYS = {
    "n_tx": (int, "geometry", "n_tx"),
    "n_rx": (int, "geometry", "n_rx"),
    "irs_rows": (int, "geometry", "irs_rows"),
    "irs_cols": (int, "geometry", "irs_cols"),
    "spacing": (float, "geometry", "spacing"),
    "rician_k_db": (lambda v: db_to_lin(float(v)), "scenario", "rician_k"),
    "beta_db": (lambda v: _db_amp(float(v)), "scenario", "beta_abs"),
    "beta_h": (float, "scenario", "beta_h"),
    "sigma2_r_dbm": (lambda v: dbm_to_watt(float(v)), "scenario", "sigma2_r"),
    "sigma2_u_dbm": (lambda v: dbm_to_watt(float(v)), "scenario", "sigma2_u"),
    "sigma2_te_dbm": (lambda v: dbm_to_watt(float(v)), "scenario", "sigma2_te"),
    "p_r_dbm": (lambda v: dbm_to_watt(float(v)), "run", "p_r"),
    "gamma_th_db": (lambda v: db_to_lin(float(v)), "run", "gamma_th"),
    "epsilon_db": (lambda v: db_to_lin(float(v)), "run", "epsilon"),
    "t_max": (int, "run", "t_max"),
    "omega": (lambda v: None if v.lower() == "none" else float(v), "run", "omega"),
    "solver_tol": (float, "run", "solver_tol"),
    "search_steps": (int, "run", "search_steps"),
    "max_redraws": (int, "run", "max_redraws"),
}


def build_configs(values: dict[str, str]) -> tuple[ScenarioConfig, RunConfig]:
    """Typed configs from raw ``key -> text`` pairs (defaults for missing keys)."""
    parts: dict[str, dict] = {"geometry": {}, "scenario": {}, "run": {}}
    for key, text in values.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parse, dest, name = _KEYS[key]
        try:
            parts[dest][name] = parse(text.strip())
        except ValueError as err:
            raise ConfigError(f"bad value for {key}: {text!r}") from err
    try:
        scfg = ScenarioConfig(geometry=ArrayGeometry(**parts["geometry"]), **parts["scenario"])
        rcfg = RunConfig(**parts["run"])
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    return scfg, rcfg


def parse_grid(text: str) -> tuple[float, ...]:
    """``a:step:b`` (inclusive of ``b``) or a comma list."""
    try:
        if ":" in text:
            a, step, b = (float(x) for x in text.split(":"))
            if not step > 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return tuple(round(a + i * step, 10) for i in range(n))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as err:
        raise ConfigError(f"malformed grid {text!r}") from err


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value parameter file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter (repeatable)")
    common.add_argument("--seed", type=int, default=0, help="seed of the first trial")
    common.add_argument("--out", type=Path, help="output file (stdout if omitted)")

    batch = argparse.ArgumentParser(add_help=False)
    batch.add_argument("--trials", type=int, default=30)
    batch.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="secure-dfrc", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="one run, per-iteration trace CSV")
    r.add_argument("--omega", type=float)
    c = sub.add_parser("convergence", parents=[common, batch], help="mean convergence curve CSV")
    c.add_argument("--omega", type=float)
    w = sub.add_parser("omega-sweep", parents=[common, batch], help="rates against omega CSV")
    w.add_argument("--grid", default="0.1:0.05:1.0")
    sub.add_parser("dump-scenario", parents=[common], help="serialize the channel draw")
    return p


def _configs(args) -> tuple[ScenarioConfig, RunConfig]:
    values: dict[str, str] = {}
    if args.config is not None:
        try:
            values.update(parse_key_values(args.config.read_text()))
        except OSError as err:
            raise ConfigError(f"cannot read {args.config}: {err}") from err
        except ValueError as err:
            raise ConfigError(f"{args.config}: {err}") from err
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v
    scfg, rcfg = build_configs(values)
    if getattr(args, "omega", None) is not None:
        try:
            rcfg = replace(rcfg, omega=args.omega)
        except ValueError as err:
            raise ConfigError(str(err)) from err
    return scfg, rcfg


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        scfg, rcfg = _configs(args)
        kind = {"run": "single_run", "convergence": "convergence",
                "omega-sweep": "omega_sweep", "dump-scenario": "single_run"}[args.command]
        extra = {}
        if args.command in ("convergence", "omega-sweep"):
            extra = {"n_trials": args.trials, "workers": args.workers}
        if args.command == "omega-sweep":
            extra["omega_grid"] = parse_grid(args.grid)
        spec = ex.ExperimentSpec(kind=kind, seed_base=args.seed, scenario=scfg, run=rcfg, **extra)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "dump-scenario":
            text = dump_scenario(ex.trial_scenario(spec.seed_base, spec.scenario))
        elif args.command == "run":
            text = ex.run_single(spec).trace_csv()
        elif args.command == "convergence":
            table = ex.run_convergence(spec)
            text = table.to_csv()
            if table.n_failed:
                print(f"warning: {table.n_failed} trial(s) had no feasible start", file=sys.stderr)
        else:
            table = ex.run_omega_sweep(spec)
            text = table.to_csv()
            failed = sum(not o.ok for trials in table.trials.values() for o in trials)
            if failed:
                print(f"warning: {failed} run(s) had no feasible start", file=sys.stderr)
    except (InitializationInfeasible, ex.NoFeasibleTrials) as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
