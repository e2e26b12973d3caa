"""Command-line front end.

    delaylab simulate --tau 1.0 --delta 5.0
    delaylab figure tau02
    delaylab verify-theorem1 --delta 100 --tau 1
    delaylab periodic --tau 1 --n-max 3 --seed-run
    delaylab threshold --tau 0.2 --lo 2 --hi 3

Settings come from built-in defaults, then ``--config FILE`` (``key = value``
lines, or a ``.meta.json`` sidecar written by an earlier run), then flags.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .blowup import (
    BLOWUP,
    BracketError,
    RunRequest,
    classify_run,
    threshold_search,
    verify_theorem1_bounds,
)
from .branches import (
    bifurcation_diagram,
    enumerate_equilibria,
    equilibrium_residual,
    origin_branch_point,
    periodic_seed_history,
)
from .experiments import (
    DIAGRAM_N,
    DIAGRAM_OMEGA_WINDOW,
    DIAGRAM_TAU,
    FIGURES,
    TAU001_BRACKET,
    is_monotone_split,
    radius_curve,
    sweep,
)
from .export import trajectory_table, write_csv, write_json
from .integrator import IntegrationError, IntegratorOptions, integrate_dde
from .model import ModelParams, polar_radius, polar_system
from .svgplot import PALETTE, Plot

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
FORMATS = ("csv", "svg", "json")

REQUIRED = object()


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _formats(v):
    items = v if isinstance(v, (list, tuple)) else str(v).split(",")
    out = []
    for f in items:
        f = f.strip()
        if f not in FORMATS:
            raise ValueError(f"unknown format {f!r}")
        if f not in out:
            out.append(f)
    return ",".join(out)


def _opt_float(v):
    return None if v in (None, "", "None", "none") else float(v)


# key -> (type, default, help)
GLOBAL_KEYS = {
    "out_dir": (str, "out", "output directory"),
    "rel_tol": (float, 1e-9, "relative local error tolerance"),
    "abs_tol": (float, 1e-12, "absolute local error tolerance"),
    "r_max": (float, 1e8, "blow-up guard radius"),
    "horizon": (float, 100.0, "maximum integration time"),
    "h_min": (float, 1e-12, "step-size floor"),
    "workers": (int, 1, "worker processes for sweeps"),
    "format": (_formats, "csv,svg,json", "comma list of outputs to write"),
}

COMMAND_KEYS = {
    "simulate": {
        "tau": (float, REQUIRED, "delay (0 runs the delay-free system from --r0)"),
        "delta": (float, 1.0, "history amplitude"),
        "phi_tilde": (str, "linear", "history ramp preset"),
        "form": (str, "cartesian", "model form: cartesian or polar"),
        "r0": (_opt_float, None, "initial radius for tau = 0"),
        "t_end": (_opt_float, None, "end time (default: horizon)"),
        "resample": (int, 0, "also write a uniform grid with this many points"),
        "name": (str, "", "output file stem"),
    },
    "figure": {
        "figure": (str, REQUIRED, "tau1 | tau02 | tau001 | diagram"),
        "samples": (int, 400, "samples per branch for the diagram"),
    },
    "verify-theorem1": {
        "delta": (float, REQUIRED, "history amplitude"),
        "tau": (float, REQUIRED, "delay"),
        "phi_tilde": (str, "linear", "history ramp preset"),
    },
    "periodic": {
        "tau": (float, REQUIRED, "delay (> 0)"),
        "n_max": (int, 3, "largest branch index |n|"),
        "seed_run": (_bool, False, "simulate each equilibrium from its seed history"),
        "seed_periods": (float, 5.0, "seeded run length in units of tau"),
    },
    "threshold": {
        "tau": (float, REQUIRED, "delay"),
        "lo": (float, REQUIRED, "delta expected bounded"),
        "hi": (float, REQUIRED, "delta expected to blow up"),
        "tol": (float, 0.01, "final bracket width"),
        "phi_tilde": (str, "linear", "history ramp preset"),
    },
}


class ConfigError(ValueError):
    pass


def read_config(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        if "config" not in data:
            return dict(data)
        cfg = dict(data["config"])
        if "command" in data:
            cfg["command"] = data["command"]
        return cfg
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def resolve(command: str, flags: dict, config_path=None) -> dict:
    """Merge defaults, config file and explicit flags; validate types."""
    keys = {**GLOBAL_KEYS, **COMMAND_KEYS[command]}
    file_cfg = read_config(config_path) if config_path else {}
    unknown = sorted(set(file_cfg) - set(keys) - {"command"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if file_cfg.get("command", command) != command:
        raise ConfigError(f"config was written by {file_cfg['command']!r}, not {command!r}")
    out = {}
    for k, (typ, default, _help) in keys.items():
        if flags.get(k) is not None:
            raw = flags[k]
        elif k in file_cfg:
            raw = file_cfg[k]
        elif default is REQUIRED:
            raise ConfigError(f"missing required setting {k!r}")
        else:
            out[k] = default
            continue
        try:
            out[k] = typ(raw) if raw is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {exc}") from None
    return out


def integrator_options(cfg: dict) -> IntegratorOptions:
    try:
        return IntegratorOptions(
            rel_tol=cfg["rel_tol"],
            abs_tol=cfg["abs_tol"],
            r_max=cfg["r_max"],
            t_horizon=cfg["horizon"],
            h_min=cfg["h_min"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


class Outputs:
    """Writes files under ``out_dir`` and stamps each with the resolved config."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.dir = Path(cfg["out_dir"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.formats = cfg["format"].split(",")
        self.written = []

    @property
    def meta(self):
        return {"command": self.command, "config": self.cfg, "version": __version__}

    def csv(self, name, header, rows):
        if "csv" not in self.formats:
            return
        p = write_csv(self.dir / name, header, rows)
        write_json(self.dir / f"{name}.meta.json", self.meta)
        self.written.append(p)

    def svg(self, name, plot: Plot):
        if "svg" not in self.formats:
            return
        p = self.dir / name
        plot.save(p, metadata=self.meta)
        self.written.append(p)

    def json(self, name, payload):
        if "json" not in self.formats:
            return
        p = write_json(self.dir / name, {**payload, "meta": self.meta})
        self.written.append(p)


def _table(rows, header):
    cols = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _g(v, digits=8):
    return "-" if v is None else f"{v:.{digits}g}"


def _radius_plot(title, curves, logy=True, xlim=None, legend="left"):
    plot = Plot(title=title, xlabel="t", ylabel="r(t)", logy=logy, xlim=xlim, legend=legend)
    for label, (t, r), T in curves:
        plot.line(t, r, label=label)
        if T is not None:
            plot.vline(T)
    return plot


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: dict) -> int:
    opts = integrator_options(cfg)
    tau = cfg["tau"]
    if tau < 0:
        raise ConfigError("tau must be >= 0")
    if tau == 0 and cfg["r0"] is None:
        raise ConfigError("tau = 0 needs --r0")
    if cfg["form"] not in ("cartesian", "polar"):
        raise ConfigError("form must be cartesian or polar")
    req = RunRequest(tau, cfg["delta"], cfg["phi_tilde"], cfg["form"], cfg["r0"], cfg["t_end"])
    try:
        traj = req.run(opts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Outputs("simulate", cfg)
    name = cfg["name"] or f"sim_tau{tau:g}_delta{cfg['delta']:g}"
    try:
        rep = classify_run(traj, opts)
        report = rep.to_dict()
        code = EXIT_OK
    except IntegrationError as exc:
        report = {"error": str(exc), "status": traj.status, "t_stop": traj.t_end}
        rep = None
        code = EXIT_NUMERIC

    header, rows = trajectory_table(traj, cfg["form"])
    out.csv(f"{name}.csv", header, rows)
    if cfg["resample"] > 1:
        grid = np.linspace(traj.t_start, traj.t_end, cfg["resample"])
        h2, rows2 = trajectory_table(traj, cfg["form"], grid)
        out.csv(f"{name}_resampled.csv", h2, rows2)

    if tau == 0:
        from .model import nondelay_exact_radius

        ts = np.asarray(traj.knots)
        exact = np.array([nondelay_exact_radius(cfg["r0"], t) for t in ts])
        report["max_error_vs_closed_form"] = float(np.max(np.abs(traj.radii() - exact)))

    arr = np.asarray(rows, float)
    t, r = arr[:, header.index("t")], arr[:, header.index("r")]
    blow = rep is not None and rep.classification == BLOWUP
    out.svg(
        f"{name}_r.svg",
        _radius_plot(f"tau={tau:g}, delta={cfg['delta']:g}", [(None, (t, r), rep.T_est if blow else None)],
                     logy=blow),
    )
    x, y = arr[:, header.index("x")], arr[:, header.index("y")]
    keep = r < opts.r_max / 1e4 if blow else np.ones_like(r, bool)
    out.svg(
        f"{name}_orbit.svg",
        Plot(title="orbit (x, y)", xlabel="x", ylabel="y", equal_aspect=True).line(x[keep], y[keep]),
    )
    report["knot_gap"] = traj.max_knot_gap()
    report["stats"] = traj.stats
    out.json(f"{name}_report.json", report)

    if rep is not None:
        print(_table([[k, _g(v) if isinstance(v, float) else str(v)] for k, v in rep.to_dict().items()],
                     ["field", "value"]))
    else:
        print(f"numerical failure: {report['error']}", file=sys.stderr)
    return code


def cmd_figure(cfg: dict) -> int:
    name = cfg["figure"]
    if name == "diagram":
        return _figure_diagram(cfg)
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; choose from tau1, tau02, tau001, diagram")
    opts = integrator_options(cfg)
    tau, deltas = FIGURES[name]
    out = Outputs("figure", cfg)
    results = sweep([RunRequest(tau, d) for d in deltas], opts, cfg["workers"])

    rows = []
    for res in results:
        d = res["request"]["delta"]
        rows.extend([d, *row] for row in res["rows"])
    out.csv(f"fig_{name}.csv", ["delta", *results[0]["header"]], rows)

    summary = [
        {"delta": res["request"]["delta"], **res["report"]} for res in results
    ]
    payload = {"figure": name, "tau": tau, "runs": summary}

    curves = []
    for res in results:
        rep = res["report"]
        T = rep["T_est"] if rep["classification"] == BLOWUP else None
        curves.append((f"delta={res['request']['delta']:g} ({rep['classification']})",
                       radius_curve(res), T))
    any_blow = any(c[2] is not None for c in curves)

    if name == "tau02":
        for res, tag in zip(results, ("a", "c")):
            rep = res["report"]
            blow = rep["classification"] == BLOWUP
            label = f"delta={res['request']['delta']:g} ({rep['classification']})"
            out.svg(f"fig_tau02_{tag}.svg",
                    _radius_plot(f"tau=0.2, {label}", [(label, radius_curve(res), rep["T_est"] if blow else None)],
                                 logy=blow))
        bounded = results[0]
        arr = np.asarray(bounded["rows"], float)
        hdr = bounded["header"]
        out.svg("fig_tau02_b.svg",
                Plot(title="tau=0.2, delta=2: orbit (x, y)", xlabel="x", ylabel="y", equal_aspect=True)
                .line(arr[:, hdr.index("x")], arr[:, hdr.index("y")]))
    else:
        out.svg(f"fig_{name}.svg", _radius_plot(f"r(t), tau={tau:g}", curves, logy=any_blow))
        if name == "tau001" and any_blow:
            # blow-ups happen within a fraction of one time unit; zoom on them
            t_zoom = 4.0 * max(c[2] for c in curves if c[2] is not None)
            out.svg(f"fig_{name}_zoom.svg", _radius_plot(f"r(t), tau={tau:g}, t <= {t_zoom:.3g}",
                                                          curves, logy=True, xlim=(0.0, t_zoom),
                                                          legend="right"))

    if name == "tau001":
        classes = [s["classification"] for s in summary]
        payload["monotone_split"] = is_monotone_split(classes)
        try:
            th = threshold_search(tau, *TAU001_BRACKET, opts=opts)
            payload["threshold"] = th.to_dict()
        except BracketError as exc:
            payload["threshold"] = {"error": str(exc)}

    out.json(f"fig_{name}.json", payload)
    print(_table([[_g(s["delta"]), s["classification"], _g(s["T_est"]), _g(s["r_last"])] for s in summary],
                 ["delta", "classification", "T_est", "r_last"]))
    if "threshold" in payload and "lo" in payload["threshold"]:
        th = payload["threshold"]
        print(f"threshold bracket: [{th['lo']:.6g}, {th['hi']:.6g}]")
    return EXIT_OK


def _figure_diagram(cfg: dict) -> int:
    out = Outputs("figure", cfg)
    branches = bifurcation_diagram(DIAGRAM_TAU, DIAGRAM_N, cfg["samples"])
    rows = []
    plot = Plot(title="equilibria: omega against tau", xlabel="tau", ylabel="omega",
                ylim=DIAGRAM_OMEGA_WINDOW, legend="right")
    labelled = set()
    for b in branches:
        for t, w, r in b.points:
            rows.append([b.n, t, w, r, r**4 * t])
        arr = b.as_array()
        if len(arr):
            label = None if b.n in labelled else f"n={b.n}"
            labelled.add(b.n)
            plot.line(arr[:, 0], arr[:, 1], label=label, color=PALETTE[b.n % len(PALETTE)])
    out.csv("fig_diagram.csv", ["n", "tau", "omega", "r", "r4tau"], rows)
    out.svg("fig_diagram.svg", plot)
    out.json("fig_diagram.json", {
        "figure": "diagram",
        "tau_range": DIAGRAM_TAU,
        "n_range": DIAGRAM_N,
        "branches": [{"n": b.n, "piece": b.label, "points": len(b.points)} for b in branches],
    })
    print(_table([[b.n, b.label, len(b.points)] for b in branches], ["n", "piece", "points"]))
    return EXIT_OK


def cmd_verify_theorem1(cfg: dict) -> int:
    if not (cfg["tau"] > 0 and cfg["delta"] > 0):
        raise ConfigError("tau and delta must be positive")
    opts = integrator_options(cfg)
    rep = verify_theorem1_bounds(cfg["delta"], cfg["tau"], opts, cfg["phi_tilde"])
    out = Outputs("verify-theorem1", cfg)
    out.json(f"theorem1_delta{cfg['delta']:g}_tau{cfg['tau']:g}.json", rep.to_dict())
    print(_table([[c.name, c.status, _g(c.value), _g(c.bound)] for c in rep.checks],
                 ["check", "status", "value", "bound"]))
    print(f"alpha*delta = {rep.alpha_delta:.10g}, classification = {rep.classification}")
    return EXIT_OK if rep.all_passed else EXIT_CHECK


def _seed_drift(point, periods: float, opts: IntegratorOptions) -> dict:
    params = ModelParams(point.tau, 1.0)
    t_end = periods * point.tau
    traj = integrate_dde(polar_system(params), periodic_seed_history(point), point.tau, t_end,
                         opts.with_(t_horizon=max(t_end, opts.t_horizon)), polar_radius)
    r = traj.radii()
    th = np.asarray(traj.knots)
    omega_fd = np.diff(traj.y[:, 1]) / np.diff(th)
    return {
        "status": traj.status,
        "t_stop": traj.t_end,
        "r_drift": float(np.max(np.abs(r - point.r))),
        "omega_drift": float(np.max(np.abs(omega_fd - point.omega))) if len(omega_fd) else 0.0,
    }


def cmd_periodic(cfg: dict) -> int:
    tau = cfg["tau"]
    if not tau > 0:
        raise ConfigError("tau must be positive for branch enumeration")
    if cfg["n_max"] < 0:
        raise ConfigError("n_max must be >= 0")
    opts = integrator_options(cfg)
    pts = enumerate_equilibria(tau, cfg["n_max"])
    origin = origin_branch_point(tau)
    rows, table, recs = [], [], []
    for p in pts:
        res1, res2 = equilibrium_residual(p)
        rec = {"n": p.n, "tau": p.tau, "omega": p.omega, "r": p.r, "r4tau": p.r4tau,
               "res1": res1, "res2": res2, "origin_branch": origin is not None and p == origin}
        if cfg["seed_run"]:
            rec.update(_seed_drift(p, cfg["seed_periods"], opts))
        recs.append(rec)
    header = ["n", "tau", "omega", "r", "r4tau", "res1", "res2"]
    if cfg["seed_run"]:
        header += ["r_drift", "omega_drift"]
    for rec in recs:
        rows.append([rec[k] for k in header])
        table.append([str(rec["n"]), _g(rec["omega"], 12), _g(rec["r"], 12), _g(rec["r4tau"], 6),
                      _g(max(abs(rec["res1"]), abs(rec["res2"])), 3)]
                     + ([_g(rec["r_drift"], 3)] if cfg["seed_run"] else []))
    max_res = max(max(abs(r["res1"]), abs(r["res2"])) for r in recs)
    out = Outputs("periodic", cfg)
    out.csv(f"periodic_tau{tau:g}.csv", header, rows)
    out.json(f"periodic_tau{tau:g}.json", {"tau": tau, "count": len(recs), "max_residual": max_res,
                                           "equilibria": recs})
    print(_table(table, ["n", "omega", "r", "r4tau", "max|res|"] + (["r_drift"] if cfg["seed_run"] else [])))
    print(f"{len(recs)} equilibria, max residual {max_res:.3g}")
    return EXIT_OK


def cmd_threshold(cfg: dict) -> int:
    if not cfg["lo"] < cfg["hi"]:
        raise ConfigError(f"bracket invalid: lo={cfg['lo']} must be below hi={cfg['hi']}")
    if not (cfg["tau"] > 0 and cfg["lo"] > 0 and cfg["tol"] > 0):
        raise ConfigError("tau, lo and tol must be positive")
    opts = integrator_options(cfg)
    try:
        res = threshold_search(cfg["tau"], cfg["lo"], cfg["hi"], opts, cfg["tol"], cfg["phi_tilde"])
    except BracketError as exc:
        raise ConfigError(str(exc)) from None
    out = Outputs("threshold", cfg)
    stem = f"threshold_tau{cfg['tau']:g}"
    out.csv(f"{stem}.csv", ["delta", "classification", "T_est"],
            [[p["delta"], p["classification"], math.nan if p["T_est"] is None else p["T_est"]]
             for p in res.probes])
    out.json(f"{stem}.json", res.to_dict())
    print(_table([[_g(p["delta"], 10), p["classification"], _g(p["T_est"])] for p in res.probes],
                 ["delta", "classification", "T_est"]))
    print(f"threshold in [{res.lo:.10g}, {res.hi:.10g}] (width {res.width:.3g})")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "figure": cmd_figure,
    "verify-theorem1": cmd_verify_theorem1,
    "periodic": cmd_periodic,
    "threshold": cmd_threshold,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaylab",
        description="Blow-up runs, figure data and periodic branches of a planar delayed oscillator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file or .meta.json sidecar")
    for key, (_typ, default, help_) in GLOBAL_KEYS.items():
        common.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"{help_} (default {default})")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, keys in COMMAND_KEYS.items():
        sp = sub.add_parser(cmd, parents=[common])
        for key, (typ, default, help_) in keys.items():
            if cmd == "figure" and key == "figure":
                sp.add_argument("figure", nargs="?", default=None, help=help_)
                continue
            flag = "--" + key.replace("_", "-")
            if typ is _bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=None,
                                help=help_)
            else:
                sp.add_argument(flag, dest=key, default=None,
                                help=help_ + ("" if default in (REQUIRED, None, "") else f" (default {default})"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = resolve(args.command, flags, args.config)
        return COMMANDS[args.command](cfg)
    except (ConfigError, OSError) as exc:
        print(f"delaylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"delaylab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
