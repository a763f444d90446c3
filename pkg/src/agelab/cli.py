"""Command-line front door: JSON config plus flag overrides, CSV output.

Exit codes: 0 success, 2 config/parse error, 3 runtime error,
4 validation report with failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

from . import analytic, experiments, simcore
from .distributions import (
    KINDS,
    AdmissibilityError,
    ArrivalProcess,
    ServiceDistribution,
)

COMMANDS = ("analytic", "sim", "sweep", "curves", "scalarize", "validate")

CSV_HEADER = ("policy,dist_kind,dist_param,lambda,mu,avg_age,age_stderr,"
              "avg_delay,delay_stderr,delay_var,source,seed,horizon,status")

OUT_DIR_ENV = "AGELAB_OUT_DIR"

_TOP_KEYS = {"command", "arrival", "service", "services", "family", "policy",
             "policies", "sim", "lambda_grid", "nu", "simulate", "out"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    arrival: ArrivalProcess | None
    services: tuple[ServiceDistribution, ...]
    policies: tuple[simcore.PolicyConfig, ...]
    sim: experiments.SimSettings
    simulate: bool
    lambda_grid: tuple[float, ...] | None
    nu: float | None
    out: str
    resolved: dict  # fully materialized config, echoed next to the output


def _parse_arrival(spec) -> ArrivalProcess:
    if not isinstance(spec, dict):
        raise ConfigError("arrival: expected an object")
    known = {"kind", "lambda", "shape"}
    _reject_unknown(spec, known, "arrival")
    kind = spec.get("kind", "poisson")
    lam = spec.get("lambda")
    if lam is None or not lam > 0:
        raise ConfigError("arrival.lambda: a positive rate is required")
    try:
        if kind == "poisson":
            return ArrivalProcess.poisson(lam)
        if kind == "periodic":
            return ArrivalProcess.periodic(lam)
        if kind in KINDS:
            return ArrivalProcess(ServiceDistribution(kind, lam, spec.get("shape")))
    except AdmissibilityError as exc:
        raise ConfigError(f"arrival: {exc}") from exc
    raise ConfigError(f"arrival.kind: unknown kind {kind!r}")


def _parse_service(spec, where="service") -> ServiceDistribution:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected an object")
    _reject_unknown(spec, {"kind", "mu", "shape"}, where)
    kind = spec.get("kind")
    mu = spec.get("mu")
    if kind not in KINDS:
        raise ConfigError(f"{where}.kind: must be one of {', '.join(KINDS)}")
    if mu is None or not mu > 0:
        raise ConfigError(f"{where}.mu: a positive rate is required")
    try:
        return ServiceDistribution(kind, mu, spec.get("shape"))
    except AdmissibilityError as exc:
        raise ConfigError(f"{where}.shape: {exc}") from exc


def _parse_policy(spec) -> simcore.PolicyConfig:
    if not isinstance(spec, str):
        raise ConfigError(f"policy: expected a string, got {spec!r}")
    name = spec.strip()
    if name == "lcfsp":
        return simcore.lcfsp()
    if name == "lcfsp_restart":
        return simcore.lcfsp(simcore.RESTART)
    if name == "fcfs":
        return simcore.fcfs()
    if name == "infinite":
        return simcore.infinite()
    if name.startswith("fcfs_pool:"):
        try:
            return simcore.fcfs_pool(int(name.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"policy: {exc}") from exc
    raise ConfigError(
        f"policy: unknown policy {spec!r} (use lcfsp, lcfsp_restart, fcfs, "
        f"fcfs_pool:M, infinite)")


def _parse_sim(spec, overrides) -> experiments.SimSettings:
    spec = dict(spec or {})
    _reject_unknown(spec, {"horizon", "warmup", "reps", "seed"}, "sim")
    if overrides.horizon is not None:
        spec["horizon"] = overrides.horizon
    if overrides.reps is not None:
        spec["reps"] = overrides.reps
    if overrides.seed is not None:
        spec["seed"] = overrides.seed
    horizon = float(spec.get("horizon", experiments.DEFAULT_HORIZON))
    warmup = float(spec.get("warmup", min(experiments.DEFAULT_WARMUP,
                                          0.1 * horizon)))
    reps = int(spec.get("reps", experiments.DEFAULT_REPS))
    seed = int(spec.get("seed", 1))
    if not 0 <= warmup < horizon:
        raise ConfigError("sim.warmup: need 0 <= warmup < horizon")
    if reps < 1:
        raise ConfigError("sim.reps: must be >= 1")
    return experiments.SimSettings(horizon, warmup, reps, seed)


def _reject_unknown(spec, known, where):
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def parse_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    command = args.command or raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command: must be one of {', '.join(COMMANDS)}")

    arrival = _parse_arrival(raw["arrival"]) if "arrival" in raw else None
    if command != "curves" and arrival is None:
        raise ConfigError("arrival: required")

    services: tuple[ServiceDistribution, ...] = ()
    if "service" in raw:
        services = (_parse_service(raw["service"]),)
    if "services" in raw:
        services += tuple(_parse_service(s, f"services[{i}]")
                          for i, s in enumerate(raw["services"]))
    if "family" in raw:
        fam = raw["family"]
        _reject_unknown(fam, {"kind", "mu", "grid"}, "family")
        try:
            services += experiments.family_grid(fam["kind"], fam["mu"],
                                                fam.get("grid", []))
        except (KeyError, ValueError, AdmissibilityError) as exc:
            raise ConfigError(f"family: {exc}") from exc
    if not services:
        raise ConfigError("service: at least one service distribution is required")

    pol_specs = []
    if "policy" in raw:
        pol_specs.append(raw["policy"])
    pol_specs.extend(raw.get("policies", []))
    if not pol_specs:
        if command == "validate":
            pol_specs = ["lcfsp"]
        else:
            raise ConfigError("policy: at least one policy is required")
    policies = tuple(_parse_policy(p) for p in pol_specs)

    sim = _parse_sim(raw.get("sim"), args)
    simulate = bool(raw.get("simulate", "sim" in raw))

    lambda_grid = tuple(raw["lambda_grid"]) if raw.get("lambda_grid") else None
    if command == "curves" and not lambda_grid:
        raise ConfigError("lambda_grid: required for the curves command")

    nu = raw.get("nu")
    if command == "scalarize":
        if nu is None or nu < 0:
            raise ConfigError("nu: a nonnegative weight is required for scalarize")

    # stability gate for commands whose delay formulas need rho < 1
    if command in ("analytic", "sim", "validate") and arrival is not None:
        for pol in policies:
            if pol.kind == simcore.FCFS:
                for svc in services:
                    if arrival.rate >= svc.mu:
                        raise ConfigError(
                            f"arrival.lambda: {arrival.rate:g} >= service.mu="
                            f"{svc.mu:g} is unstable for policy {pol.label}")

    out = args.out or raw.get("out")
    if out is None:
        out_dir = os.environ.get(OUT_DIR_ENV, ".")
        ext = ".txt" if command == "validate" else ".csv"
        out = os.path.join(out_dir, command + ext)

    resolved = {
        "command": command,
        "arrival": None if arrival is None else {
            "kind": arrival.law.kind, "lambda": arrival.rate,
            "shape": arrival.law.shape},
        "services": [{"kind": s.kind, "mu": s.mu, "shape": s.shape}
                     for s in services],
        "policies": [p.label for p in policies],
        "sim": {"horizon": sim.horizon, "warmup": sim.warmup,
                "reps": sim.n_reps, "seed": sim.seed},
        "simulate": simulate,
        "lambda_grid": list(lambda_grid) if lambda_grid else None,
        "nu": nu,
        "out": out,
    }
    return ExperimentConfig(command, arrival, services, policies, sim,
                            simulate, lambda_grid, nu, out, resolved)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def point_row(p: experiments.TradeoffPoint) -> str:
    return ",".join(_fmt(v) for v in (
        p.policy, p.dist_kind, p.dist_param, p.lam, p.mu, p.avg_age,
        p.age_stderr, p.avg_delay, p.delay_stderr, p.delay_var, p.source,
        p.seed, p.horizon, p.status))


def emit_csv(points, path) -> None:
    """TradeoffPoint rows under the fixed header; full-precision decimals,
    infinities as the literal token inf."""
    try:
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for p in points:
                fh.write(point_row(p) + "\n")
    except OSError as exc:
        raise RuntimeError(f"cannot write CSV to {path}: {exc}") from exc


def emit_curve_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("lambda,dist_kind,dist_param,avg_age,age_bound\n")
        for r in rows:
            fh.write(",".join(_fmt(r[k]) for k in
                              ("lambda", "dist_kind", "dist_param",
                               "avg_age", "age_bound")) + "\n")


def _echo_metadata(cfg: ExperimentConfig) -> None:
    with open(cfg.out + ".meta.json", "w") as fh:
        json.dump(cfg.resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_command(cfg: ExperimentConfig) -> int:
    if cfg.command == "analytic":
        points = []
        for pol in cfg.policies:
            for svc in cfg.services:
                p = experiments.analytic_point(cfg.arrival, svc, pol,
                                               experiments.DEFAULT_MIN_TERM_PATHS,
                                               cfg.sim.seed)
                if p is None:
                    raise RuntimeError(
                        f"no analytic formula for policy {pol.label!r}")
                points.append(p)
        emit_csv(points, cfg.out)
    elif cfg.command == "sim":
        points = [experiments.simulated_point(cfg.arrival, svc, pol, cfg.sim,
                                              cfg.sim.seed,
                                              check_convergence=False)
                  for pol in cfg.policies for svc in cfg.services]
        emit_csv(points, cfg.out)
    elif cfg.command == "sweep":
        spec = experiments.SweepSpec(cfg.arrival, cfg.services, cfg.policies,
                                     cfg.sim if cfg.simulate else None)
        emit_csv(experiments.tradeoff_sweep(spec), cfg.out)
    elif cfg.command == "curves":
        rows = []
        for pol in cfg.policies:
            rows.extend(experiments.age_vs_rate_curves(
                cfg.services, cfg.lambda_grid, pol, base_seed=cfg.sim.seed))
        emit_curve_csv(rows, cfg.out)
    elif cfg.command == "scalarize":
        best = experiments.scalarized_search(cfg.arrival, cfg.services, cfg.nu,
                                             cfg.policies[0],
                                             seed=cfg.sim.seed)
        emit_csv([best], cfg.out)
    else:  # validate
        report = experiments.validate(cfg.arrival, cfg.services[0],
                                      cfg.policies[0], cfg.sim)
        text = report.render()
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
        print(text)
        _echo_metadata(cfg)
        return 0 if report.passed else 4
    _echo_metadata(cfg)
    print(f"wrote {cfg.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="agelab",
        description="Age-delay tradeoff laboratory: analytics, simulation, sweeps")
    ap.add_argument("config", nargs="?", help="JSON experiment config")
    ap.add_argument("--command", choices=COMMANDS,
                    help="override the config's command")
    ap.add_argument("--seed", type=int, help="override sim.seed")
    ap.add_argument("--horizon", type=float, help="override sim.horizon")
    ap.add_argument("--reps", type=int, help="override sim.reps")
    ap.add_argument("--out", help="output path (CSV, or text for validate)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _run_command(cfg)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
