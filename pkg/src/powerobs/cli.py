"""Command-line front end: config parsing, runs, diagnostics, CSV output.

Subcommands:

    simulate --config <path> --out <path> [--observers drem,ftc,kalman,speed]
             [--dt <s>] [--t-end <s>] [--decimate <m>]
    gramian  --config <path> --window <s>
    sweep    --config <path> --param <name> --values <v1,v2,...> --out <path>

Exit status is 0 iff no error; every error prints one machine-parsable
line of the form ``error: <Kind>: <reason>`` to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import observers as obs
from .errors import ParseError, PowerobsError, ValidationError
from .model import MachineParams, NetworkParams, SystemState, derive_params
from .sim import ObserverSetup, Scenario, TrajectoryLog, run_scenario, settling_time

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "bundled_config_path",
    "cmd_simulate",
    "cmd_gramian",
    "cmd_sweep",
    "main",
]

OBSERVER_NAMES = ("drem", "ftc", "kalman", "speed")
KALMAN_CONV_THRESHOLD = 1e-2
SETTLE_THRESHOLD = 1e-3
UCO_RATIO_THRESHOLD = 1e-8
SWEEP_PARAMS = ("gamma", "k_omega", "k", "mu")


@dataclass
class RunConfig:
    """Resolved run options: file paths, observer selection and overrides."""

    config_path: str | None = None
    out_path: str | None = None
    observers: tuple[str, ...] = ()
    gamma: float | None = None
    k_omega: float | None = None
    mu: float | None = None
    k: float | None = None
    dt: float | None = None
    t_end: float | None = None
    decimate: int | None = None


def bundled_config_path(name: str = "two_machine_table1.json") -> Path:
    """Path of a scenario file shipped inside the package."""
    return Path(resources.files("powerobs.data") / name)


def _need(doc, key, where):
    if key not in doc:
        raise ValidationError(f"{where}{key}: missing required field")
    return doc[key]


def _machine_params(doc: dict, n: int, where: str) -> MachineParams:
    composite = all(k in doc for k in ("a", "b", "D", "P", "d"))
    if not composite and "raw" in doc:
        raw = dict(doc["raw"])
        for k in ("E_f", "nu"):
            if k in doc:
                raw[k] = doc[k]
        try:
            return derive_params(raw)
        except ValidationError as e:
            raise ValidationError(f"{where}raw.{e}") from e
    try:
        return MachineParams(
            a=_need(doc, "a", where), b=_need(doc, "b", where),
            D=_need(doc, "D", where), P=_need(doc, "P", where),
            d=_need(doc, "d", where),
            E_f=doc.get("E_f", np.zeros(n)), nu=doc.get("nu", np.zeros(n)),
            tau=doc.get("tau"),
        )
    except ValidationError as e:
        raise ValidationError(f"{where}{e}") from e


def _network_params(doc: dict, n: int, where: str) -> NetworkParams:
    try:
        return NetworkParams(
            n=n,
            Y=_need(doc, "Y", where), alpha=_need(doc, "alpha", where),
            G_shunt=_need(doc, "G_shunt", where), B_shunt=_need(doc, "B_shunt", where),
        )
    except ValidationError as e:
        raise ValidationError(f"{where}{e}") from e


def _observer_setup(doc: dict, n: int) -> ObserverSetup:
    kw: dict = {}
    filt = doc.get("filter", {})
    kw["filter_poles"] = filt.get("k", 1.0)
    if "drem" in doc:
        kw["drem"] = True
        kw["drem_gamma"] = doc["drem"].get("gamma", 1.0)
        if "theta0" in doc["drem"]:
            kw["theta0"] = doc["drem"]["theta0"]
    if "ftc" in doc:
        kw["ftc"] = True
        kw["ftc_gamma"] = doc["ftc"].get("gamma", 1.0)
        kw["mu"] = doc["ftc"].get("mu", 0.1)
    if "speed" in doc:
        kw["speed"] = True
        kw["k_omega"] = doc["speed"].get("k_omega", 1.0)
        if "xi_omega0" in doc["speed"]:
            kw["xi_omega0"] = doc["speed"]["xi_omega0"]
    if "kalman" in doc:
        kw["kalman"] = True
        kal = doc["kalman"]
        if "S_noise" in kal:
            kw["S_noise"] = np.asarray(kal["S_noise"], dtype=float)
        if "H0" in kal:
            kw["H0"] = np.asarray(kal["H0"], dtype=float)
        kw["h_bound"] = kal.get("h_bound", 1e6)
    if "pebo" in doc and "xi_E0" in doc["pebo"]:
        kw["xi_E0"] = doc["pebo"]["xi_E0"]
    return ObserverSetup(**kw)


def parse_config(text: str):
    """Parse and validate a JSON scenario document.

    Returns (Scenario, RunConfig); the RunConfig carries the defaults the
    file established (observer selection, decimation).  Raises ParseError
    on malformed JSON and ValidationError with a field path on any
    invariant breach.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("top-level config must be a JSON object")
    schema = doc.get("schema")
    if schema != 1:
        raise ValidationError(f"schema: expected 1, got {schema!r}")
    n = _need(doc, "n", "")
    if not isinstance(n, int) or n < 2:
        raise ValidationError(f"n: machine count must be an integer >= 2, got {n!r}")

    net_doc = _need(doc, "network", "")
    mach_doc = _need(doc, "machines", "")
    net_initial = _network_params(_need(net_doc, "initial", "network."), n, "network.initial.")
    mp_initial = _machine_params(_need(mach_doc, "initial", "machines."), n, "machines.initial.")
    event_time = doc.get("event_time")
    net_after = mp_after = None
    if event_time is not None:
        net_after = _network_params(
            _need(net_doc, "after", "network."), n, "network.after.")
        mp_after = _machine_params(
            _need(mach_doc, "after", "machines."), n, "machines.after.")

    x0_doc = _need(doc, "x0", "")
    try:
        x0 = SystemState(
            delta=_need(x0_doc, "delta", "x0."),
            omega=_need(x0_doc, "omega", "x0."),
            E=_need(x0_doc, "E", "x0."),
        )
    except ValidationError as e:
        raise ValidationError(f"x0.{e}") from e
    if x0.n != n:
        raise ValidationError(f"x0: state dimension {x0.n} != n = {n}")

    setup = _observer_setup(doc.get("observers", {}), n)
    try:
        scenario = Scenario(
            net_initial=net_initial, mp_initial=mp_initial, x0=x0,
            t_end=float(doc.get("t_end", 50.0)), dt=float(doc.get("dt", 1e-3)),
            event_time=event_time, net_after=net_after, mp_after=mp_after,
            observers=setup, decimate=int(doc.get("decimate", 1)),
        )
    except ValidationError:
        raise
    selected = tuple(name for name in OBSERVER_NAMES if getattr(setup, name))
    run_cfg = RunConfig(observers=selected, decimate=scenario.decimate)
    return scenario, run_cfg


def load_config(path) -> tuple[Scenario, RunConfig]:
    """parse_config on the contents of a file."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read config {path!r}: {e}") from e
    scenario, run_cfg = parse_config(text)
    run_cfg.config_path = str(path)
    return scenario, run_cfg


def _apply_overrides(scenario: Scenario, cfg: RunConfig) -> Scenario:
    ob = scenario.observers
    if cfg.observers:
        unknown = [o for o in cfg.observers if o not in OBSERVER_NAMES]
        if unknown:
            raise ValidationError(f"observers: unknown observer(s) {unknown}")
        ob = dataclasses.replace(
            ob,
            drem="drem" in cfg.observers, ftc="ftc" in cfg.observers,
            speed="speed" in cfg.observers, kalman="kalman" in cfg.observers,
        )
    if cfg.gamma is not None:
        if cfg.gamma <= 0:
            raise ValidationError(f"gamma: must be positive, got {cfg.gamma!r}")
        ob = dataclasses.replace(ob, drem_gamma=cfg.gamma)
    if cfg.k_omega is not None:
        if cfg.k_omega <= 0:
            raise ValidationError(f"k_omega: must be positive, got {cfg.k_omega!r}")
        ob = dataclasses.replace(ob, k_omega=cfg.k_omega)
    if cfg.mu is not None:
        if not (0.0 < cfg.mu < 1.0):
            raise ValidationError(f"mu: must lie in (0, 1), got {cfg.mu!r}")
        ob = dataclasses.replace(ob, mu=cfg.mu)
    if cfg.k is not None:
        if cfg.k <= 0:
            raise ValidationError(f"k: must be positive, got {cfg.k!r}")
        ob = dataclasses.replace(ob, filter_poles=cfg.k)
    if not ob.any_enabled():
        raise ValidationError("observers: at least one observer must be selected")
    kw: dict = {"observers": ob}
    if cfg.dt is not None:
        kw["dt"] = cfg.dt
    if cfg.t_end is not None:
        kw["t_end"] = cfg.t_end
    if cfg.decimate is not None:
        kw["decimate"] = cfg.decimate
    return dataclasses.replace(scenario, **kw)


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def csv_columns(log: TrajectoryLog) -> list[str]:
    n = log.E.shape[1]
    ob = log.scenario.observers
    cols = ["t"]
    cols += [f"delta_{i+1}" for i in range(n)]
    cols += [f"omega_{i+1}" for i in range(n)]
    cols += [f"E_{i+1}" for i in range(n)]
    if ob.drem:
        cols += [f"Ehat_drem_{i+1}" for i in range(n)]
    if ob.ftc:
        cols += [f"Ehat_ftc_{i+1}" for i in range(n)]
    if ob.kalman:
        cols += [f"Ehat_kalman_{i+1}" for i in range(n)]
    if ob.speed:
        cols += [f"omegahat_{i+1}" for i in range(n)]
    if ob.drem:
        cols.append("err_E_drem")
    if ob.ftc:
        cols.append("err_E_ftc")
    if ob.kalman:
        cols.append("err_E_kalman")
    if ob.speed:
        cols.append("err_omega")
    if ob.pebo:
        cols += ["Delta", "intDelta2"]
    if ob.ftc:
        cols.append("w")
    return cols


def write_csv(log: TrajectoryLog, path) -> None:
    """Write the trajectory in the flat schema used by all figure tooling."""
    ob = log.scenario.observers
    fields = [log.t, log.delta, log.omega, log.E]
    if ob.drem:
        fields.append(log.E_hat_drem)
    if ob.ftc:
        fields.append(log.E_hat_ftc)
    if ob.kalman:
        fields.append(log.E_hat_kalman)
    if ob.speed:
        fields.append(log.omega_hat)
    if ob.drem:
        fields.append(log.err_E("drem"))
    if ob.ftc:
        fields.append(log.err_E("ftc"))
    if ob.kalman:
        fields.append(log.err_E("kalman"))
    if ob.speed:
        fields.append(log.err_omega())
    if ob.pebo:
        fields += [log.Delta, log.int_Delta2]
    if ob.ftc:
        fields.append(log.w)
    table = np.column_stack([f if f.ndim == 2 else f[:, None] for f in fields])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(csv_columns(log)) + "\n")
        for row in table:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# commands


def _monitor_for(log: TrajectoryLog):
    ob = log.scenario.observers
    if not ob.pebo:
        return None
    gamma = float(ob.ftc_gamma) if ob.ftc else float(np.atleast_1d(ob.drem_gamma)[0])
    mu = ob.mu if ob.ftc else 0.1
    return obs.excitation_monitor(log.Delta, log.sample_dt, gamma, mu)


def _gramian_of(log: TrajectoryLog, window: float | None = None):
    if log.Phi is None:
        return None
    if window is None:
        sel = slice(None)
    else:
        m = int(np.floor(window / log.sample_dt + 1e-9)) + 1
        sel = slice(0, m)
    return obs.observability_gramian(log.Phi[sel], log.C[sel], log.sample_dt)


def summarize(log: TrajectoryLog, out=None) -> dict:
    """Print the run summary; returns the summary values as a dict."""
    out = sys.stdout if out is None else out
    ob = log.scenario.observers
    info: dict = {}
    names = [n for n in OBSERVER_NAMES if getattr(ob, n)]
    print(f"run: t_end={log.t[-1]:g} samples={len(log.t)} "
          f"observers={','.join(names)}", file=out)
    for which in ("drem", "ftc", "kalman"):
        if getattr(ob, which):
            err = log.err_E(which)
            info[f"final_err_E_{which}"] = err[-1]
            line = f"final err_E_{which}: {_fmt(err[-1])}"
            if which == "kalman":
                verdict = ("converged" if err[-1] <= KALMAN_CONV_THRESHOLD
                           else "NOT converged")
                line += f"  ({verdict} vs threshold {KALMAN_CONV_THRESHOLD:g})"
                info["kalman_converged"] = err[-1] <= KALMAN_CONV_THRESHOLD
            print(line, file=out)
    if ob.speed:
        info["final_err_omega"] = log.err_omega()[-1]
        print(f"final err_omega: {_fmt(info['final_err_omega'])}", file=out)
    rep = _monitor_for(log)
    if rep is not None:
        info["t_c"] = rep.t_c
        info["intDelta2"] = rep.integral
        tc = "not reached" if rep.t_c is None else _fmt(rep.t_c)
        print(f"t_c: {tc}  (threshold {_fmt(rep.threshold)})", file=out)
        growing = "yes" if rep.still_growing else "no"
        print(f"intDelta2 at t_end: {_fmt(rep.integral)}  "
              f"(tail increase {_fmt(rep.tail_increase)}, still growing: {growing})",
              file=out)
        gmin, gmax = _gramian_of(log)
        info["gramian_min"], info["gramian_max"] = gmin, gmax
        print(f"gramian: min_eig={_fmt(gmin)} max_eig={_fmt(gmax)}", file=out)
    return info


def cmd_simulate(cfg: RunConfig, out=None) -> dict:
    """Run one scenario, write the CSV, print the summary."""
    out = sys.stdout if out is None else out
    if cfg.config_path is None:
        raise ValidationError("config: no config file given")
    if cfg.out_path is None:
        raise ValidationError("out: no output path given")
    scenario, file_cfg = load_config(cfg.config_path)
    if not cfg.observers:
        cfg.observers = file_cfg.observers
    scenario = _apply_overrides(scenario, cfg)
    log = run_scenario(scenario)
    write_csv(log, cfg.out_path)
    info = summarize(log, out=out)
    print(f"wrote {cfg.out_path}", file=out)
    return info


def cmd_gramian(cfg: RunConfig, window: float, out=None) -> dict:
    """Accumulate the observability Gramian over [0, window] and judge UCO."""
    out = sys.stdout if out is None else out
    if cfg.config_path is None:
        raise ValidationError("config: no config file given")
    scenario, _ = load_config(cfg.config_path)
    # the diagnostic needs the transition matrix; estimator gains are inert
    cfg = dataclasses.replace(cfg, observers=("drem",))
    scenario = _apply_overrides(scenario, cfg)
    if window > scenario.t_end:
        raise ValidationError(
            f"window: {window!r} exceeds scenario t_end {scenario.t_end!r}")
    log = run_scenario(scenario)
    gmin, gmax = _gramian_of(log, window)
    ratio = gmin / gmax if gmax > 0 else 0.0
    verdict = "not UCO" if ratio <= UCO_RATIO_THRESHOLD else "UCO evidence"
    print(f"gramian window [0, {window:g}]: min_eig={_fmt(gmin)} "
          f"max_eig={_fmt(gmax)} ratio={_fmt(ratio)}", file=out)
    print(f"verdict: {verdict} (ratio threshold {UCO_RATIO_THRESHOLD:g})", file=out)
    return {"min_eig": gmin, "max_eig": gmax, "ratio": ratio, "verdict": verdict}


def _sweep_value_cfg(cfg: RunConfig, param: str, value: float) -> RunConfig:
    cfg = dataclasses.replace(cfg)
    if param == "gamma":
        cfg.gamma = value
    elif param == "k_omega":
        cfg.k_omega = value
    elif param == "k":
        cfg.k = value
    elif param == "mu":
        cfg.mu = value
    return cfg


def cmd_sweep(cfg: RunConfig, param: str, values: list[float], out=None) -> list[dict]:
    """One run per parameter value; per-value trajectory CSVs plus a
    comparative summary CSV with interpolated settling times."""
    out = sys.stdout if out is None else out
    if param not in SWEEP_PARAMS:
        raise ValidationError(f"param: expected one of {SWEEP_PARAMS}, got {param!r}")
    if not values:
        raise ValidationError("values: empty sweep value list")
    if cfg.config_path is None:
        raise ValidationError("config: no config file given")
    if cfg.out_path is None:
        raise ValidationError("out: no output path given")
    out_path = Path(cfg.out_path)
    rows: list[dict] = []
    for value in values:
        scenario, file_cfg = load_config(cfg.config_path)
        vcfg = _sweep_value_cfg(cfg, param, value)
        if not vcfg.observers:
            vcfg.observers = file_cfg.observers
        scenario = _apply_overrides(scenario, vcfg)
        log = run_scenario(scenario)
        traj_path = out_path.with_name(f"{out_path.stem}_{param}_{value:g}{out_path.suffix}")
        write_csv(log, traj_path)
        ob = scenario.observers
        for metric in ("err_E_drem", "err_E_ftc", "err_E_kalman", "err_omega"):
            which = metric.replace("err_E_", "").replace("err_", "")
            if which == "omega":
                if not ob.speed:
                    continue
                err = log.err_omega()
            else:
                if not getattr(ob, which):
                    continue
                err = log.err_E(which)
            st = settling_time(log.t, err, SETTLE_THRESHOLD)
            rows.append({
                "param": param, "value": value, "metric": metric,
                "settling_time": st, "final_error": err[-1],
                "csv": traj_path.name,
            })
        print(f"{param}={value:g}: wrote {traj_path}", file=out)
    with open(out_path, "w", newline="") as fh:
        fh.write("param,value,metric,settling_time,final_error,csv\n")
        for r in rows:
            st = "" if r["settling_time"] is None else _fmt(r["settling_time"])
            fh.write(f"{r['param']},{_fmt(r['value'])},{r['metric']},{st},"
                     f"{_fmt(r['final_error'])},{r['csv']}\n")
    print(f"wrote {out_path}", file=out)
    return rows


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="powerobs",
        description="Simulate multimachine power systems and their state observers.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--observers", help="comma list from {drem,ftc,kalman,speed}")
        p.add_argument("--dt", type=float, help="integration step override (s)")
        p.add_argument("--t-end", type=float, dest="t_end", help="horizon override (s)")
        p.add_argument("--decimate", type=int, help="log every m-th step")

    p = sub.add_parser("simulate", help="run a scenario and write the CSV log")
    common(p)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("gramian", help="observability Gramian diagnostic")
    common(p)
    p.add_argument("--window", type=float, required=True, help="window length (s)")

    p = sub.add_parser("sweep", help="comparative runs over one parameter")
    common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, help="summary CSV path")
    return ap


def _run_cfg_from(args) -> RunConfig:
    observers = tuple(s.strip() for s in args.observers.split(",") if s.strip()) \
        if args.observers else ()
    if args.observers is not None and not observers:
        raise ValidationError("observers: at least one observer must be selected")
    return RunConfig(
        config_path=args.config, out_path=getattr(args, "out", None),
        observers=observers, dt=args.dt, t_end=args.t_end, decimate=args.decimate,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _run_cfg_from(args)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "gramian":
            cmd_gramian(cfg, args.window)
        elif args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            cmd_sweep(cfg, args.param, values)
    except PowerobsError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: IOError: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
