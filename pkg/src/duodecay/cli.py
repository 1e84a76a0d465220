"""Command-line runner.

    duodecay simulate     lattice time evolution, observables CSV + metadata JSON
    duodecay compare      analytic layer against the lattice, residual report
    duodecay bound-states one- and two-excitation bound states
    duodecay fit-tail     decay-law classification of a tail
    duodecay markov       Markovian cascade against the lattice
    duodecay sweep        one command over a list of values of a config key
    duodecay plot         SVG overlay of CSV columns

Exit codes: 0 success, 1 a verdict failed, 2 invalid input.  Errors are
printed as one JSON object on stdout and, when --out is given, written to
error.json.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import _accel, io
from .config import ConfigError, RunConfig
from .model import ModelError, build_basis, ee_state, parity_state, basis_state, light_cone_ok, \
    last_untagged_time

COMMANDS = ("simulate", "compare", "bound-states", "fit-tail", "markov", "sweep", "plot")


class CommandFailed(Exception):
    def __init__(self, code, message, report=None):
        super().__init__(message)
        self.code = code
        self.report = report


# --- helpers -------------------------------------------------------------

def _initial_state(basis, name):
    if basis.sector == 2:
        if name == "ee":
            return ee_state(basis)
        raise ConfigError("invalid-initial-state", f"sector 2 supports state = ee, got {name!r}")
    table = {"e1": lambda: basis_state(basis, basis.emitter(1)),
             "e2": lambda: basis_state(basis, basis.emitter(2)),
             "plus": lambda: parity_state(basis, 1),
             "minus": lambda: parity_state(basis, -1)}
    if name not in table:
        raise ConfigError("invalid-initial-state", f"sector 1 supports e1, e2, plus, minus; got {name!r}")
    return table[name]()


def _grid(cfg):
    from .propagate import TimeGrid

    try:
        return TimeGrid(cfg["grid.t_max"], cfg["grid.n_samples"])
    except ValueError as e:
        raise ConfigError("invalid-grid", str(e)) from None


def _guards(params, t_max):
    return {
        "light_cone_ok": bool(light_cone_ok(params, t_max)),
        "untagged_until": last_untagged_time(params),
        "validated_geometry": bool(params.validated_geometry),
    }


def _observable_columns(obs):
    cols = {"t": obs.t, "P_ee": obs.P_ee, "P_e1": obs.P_e1, "P_e2": obs.P_e2,
            "P_one": obs.P_one, "P_two": obs.P_two, "C_ee": obs.C_ee,
            "C_plus": obs.C_plus, "C_minus": obs.C_minus, "norm": obs.norm, "energy": obs.energy}
    return {k: v for k, v in cols.items() if v is not None}


def _emit(out, fmt, stem, columns, meta):
    files = []
    if fmt in ("csv", "both"):
        io.write_csv(os.path.join(out, stem + ".csv"), columns)
        files.append(stem + ".csv")
    if fmt in ("json", "both"):
        meta = dict(meta)
        meta["data"] = {k: (np.asarray(v).tolist() if not np.iscomplexobj(v)
                            else {"re": np.real(v).tolist(), "im": np.imag(v).tolist()})
                        for k, v in columns.items()}
    io.write_json(os.path.join(out, stem + ".json"), meta)
    files.append(stem + ".json")
    return files


def _engine(cfg, args):
    eng = args.engine or cfg["engine.engine"]
    if eng not in ("dense", "krylov"):
        raise ConfigError("invalid-engine", f"engine must be dense or krylov, got {eng!r}")
    return eng


def _tol(cfg, args, key="engine.tol"):
    return float(args.tol) if args.tol is not None else cfg[key]


# --- commands ------------------------------------------------------------

def cmd_simulate(cfg, args):
    from .propagate import Absorber, evolve

    params = cfg.model_params()
    grid = _grid(cfg)
    basis = build_basis(params)
    psi0 = _initial_state(basis, cfg["initial.state"])
    eng = _engine(cfg, args)
    tol = _tol(cfg, args)
    kw = {}
    if cfg["engine.absorber_width"] > 0:
        if eng != "krylov":
            raise ConfigError("invalid-engine", "absorbing boundaries need the krylov engine")
        kw["absorber"] = Absorber(cfg["engine.absorber_width"], cfg["engine.absorber_strength"])
    traj = evolve(psi0, params, grid, engine=eng, tol=tol, **kw)
    obs = traj.observables
    drift = float(np.max(np.abs(obs.norm - 1.0)))
    verdicts = {}
    if "absorber" not in kw:
        e0 = obs.energy[0]
        edrift = float(np.max(np.abs(obs.energy - e0)) / max(abs(e0), 1e-300)) if e0 != 0 else \
            float(np.max(np.abs(obs.energy)))
        verdicts = {"norm_drift": drift, "energy_drift": edrift,
                    "unitarity_pass": bool(drift < 1e-9)}
    meta = io.metadata(
        cfg.digest(),
        guard_flags=_guards(params, grid.t_max),
        tolerances={"krylov_tol": tol},
        verdicts=verdicts,
        command="simulate",
        engine=eng,
        params=params.to_dict(),
        krylov={k: traj.metadata[k] for k in ("steps", "max_subspace") if k in traj.metadata},
    )
    return _emit(args.out, args.format, "observables", _observable_columns(obs), meta), True


def _compare_sector1(cfg, args, params, grid, tol_cmp):
    from .propagate import evolve
    from .single import emitter_amplitude_1exc

    basis = build_basis(params, 1)
    eng = _engine(cfg, args)
    res = {}
    cols = {"t": grid.times}
    for s, name in ((1, "plus"), (-1, "minus")):
        traj = evolve(parity_state(basis, s), params, grid, engine=eng, tol=cfg["engine.tol"])
        orc = traj.observables.C_sigma(s)
        ana = emitter_amplitude_1exc(grid.times, s, params, tol=1e-12)
        res[f"C_{name}"] = float(np.max(np.abs(orc - ana)))
        cols[f"C_{name}_oracle"] = orc
        cols[f"C_{name}_analytic"] = ana
    return res, cols


def _compare_sector2(cfg, args, params, grid, tol_cmp):
    from .propagate import evolve
    from .twoexc import solve_two_excitation

    eng = _engine(cfg, args)
    traj = evolve(ee_state(build_basis(params, 2)), params, grid, engine=eng, tol=cfg["engine.tol"])
    reconstruct = cfg["compare.reconstruct"]
    ta = solve_two_excitation(params, grid, levels=cfg["engine.levels"], h_coarse=cfg["engine.h_coarse"],
                              keep_full=reconstruct)
    bad = cfg["debug.corrupt_metadata"]
    if bad:
        # negative test hook: damage one field that the inversion relies on
        corrupt = {"propagator_phase": [1.0, 0.0], "g": -ta.metadata["g"], "pair_normalization": "plain",
                   "parity_order": [-1, 1], "J": 2 * ta.metadata["J"]}
        if bad not in corrupt:
            raise ConfigError("invalid-config", f"debug.corrupt_metadata: unknown field {bad!r}")
        ta.metadata[bad] = corrupt[bad]
    o = traj.observables
    res = {
        "C_ee": float(np.max(np.abs(o.C_ee - ta.C_ee))),
        "C_plus": float(np.max(np.abs(o.C_plus - ta.C_sigma[1]))),
        "C_minus": float(np.max(np.abs(o.C_minus - ta.C_sigma[-1]))),
    }
    cols = {"t": grid.times, "C_ee_oracle": o.C_ee, "C_ee_analytic": ta.C_ee,
            "C_plus_oracle": o.C_plus, "C_plus_analytic": ta.C_sigma[1],
            "C_minus_oracle": o.C_minus, "C_minus_analytic": ta.C_sigma[-1]}
    if reconstruct:
        if traj.states is None:
            raise CommandFailed("internal", "oracle states unavailable")
        rec = ta.reconstruct(params)
        res["reconstruction"] = float(np.max(np.abs(rec - traj.states)))
        cols["reconstruction_residual"] = np.max(np.abs(rec - traj.states), axis=1)
    return res, cols


def cmd_compare(cfg, args):
    params = cfg.model_params()
    grid = _grid(cfg)
    tol_cmp = float(args.tol) if args.tol is not None else cfg["compare.tol"]
    if not light_cone_ok(params, grid.t_max):
        raise ConfigError("light-cone", "t_max exceeds the untagged window of the lattice")
    if params.n_excitations == 1:
        res, cols = _compare_sector1(cfg, args, params, grid, tol_cmp)
    else:
        res, cols = _compare_sector2(cfg, args, params, grid, tol_cmp)
    verdicts = {k: bool(v <= tol_cmp) for k, v in res.items()}
    ok = all(verdicts.values())
    meta = io.metadata(cfg.digest(), guard_flags=_guards(params, grid.t_max),
                       tolerances={"compare": tol_cmp}, verdicts=verdicts,
                       command="compare", residuals=res, params=params.to_dict())
    if not ok and "reconstruction" in res and not verdicts["reconstruction"]:
        meta["error"] = "reconstruction-mismatch"
    elif not ok:
        meta["error"] = "tolerance-exceeded"
    files = _emit(args.out, args.format, "compare", cols, meta)
    if not ok:
        raise CommandFailed(meta["error"], f"residuals above {tol_cmp:g}: " +
                            ", ".join(f"{k}={v:.3g}" for k, v in res.items() if not verdicts[k]), meta)
    return files, ok


def cmd_bound_states(cfg, args):
    from .secular import bound_state_overlaps, solve_secular
    from .single import find_bound_states_1exc

    params = cfg.model_params()
    rows = []
    for b in find_bound_states_1exc(params):
        rows.append((1, b.sigma, float(b.energy), float(b.weight), float(b.localization_length),
                     float(b.residual)))
    ov = {round(o.energy, 9): o for o in (bound_state_overlaps(params) if params.g > 0 else [])}
    for s in (1, -1):
        prob = solve_secular(params, s)
        for E, res in zip(prob.roots, prob.residuals):
            w = abs(ov[round(E, 9)].ee) ** 2 if s > 0 and round(E, 9) in ov else 0.0
            rows.append((2, s, float(E), float(w), float("nan"), float(res)))
    header = ["sector", "parity", "energy", "weight", "localization_length", "residual"]
    io.write_table(os.path.join(args.out, "bound_states.csv"), header, rows)
    meta = io.metadata(cfg.digest(), guard_flags={"validated_geometry": bool(params.validated_geometry)},
                       tolerances={"root_xtol": 1e-13}, verdicts={"count": len(rows)},
                       command="bound-states", params=params.to_dict(),
                       note="weight: emitter weight (sector 1) or |<ee|B>|^2 (sector 2)")
    io.write_json(os.path.join(args.out, "bound_states.json"), meta)
    return ["bound_states.csv", "bound_states.json"], True


def cmd_fit_tail(cfg, args):
    from .asymptotics import burst_times, classify_decay

    params = cfg.model_params()
    f = cfg.section("fit")
    samples = None
    if f["observable"] == "single-continuum":
        samples = burst_times(f["t_min"], f["t_max"], centers=f["centers"], per_burst=f["burst"], J=params.J)
    fit = classify_decay(params, f["observable"], (f["t_min"], f["t_max"]), producer=f["producer"],
                         sigma=f["sigma"], samples=samples, tie=f["tie"], floor=f["floor"])
    t, y = fit.series
    m = (t >= f["t_min"]) & (t <= f["t_max"])
    cols = {"t": t[m], "y": y[m]}
    if fit.verdict == "ok":
        cols["model"] = fit.model(t[m])
    meta = io.metadata(cfg.digest(), guard_flags={}, tolerances={"floor": f["floor"], "tie": f["tie"]},
                       verdicts={"class": fit.cls, "verdict": fit.verdict},
                       command="fit-tail", fit=fit.to_dict())
    io.write_csv(os.path.join(args.out, "tail.csv"), cols)
    io.write_json(os.path.join(args.out, "fit.json"), meta)
    return ["tail.csv", "fit.json"], True


def cmd_markov(cfg, args):
    from .markov import markov_populations, markov_rates
    from .propagate import Absorber, TimeGrid, evolve_krylov

    params = cfg.model_params()
    mk = cfg.section("markov")
    model = markov_rates(params, mk["constant"])
    if not model.valid:
        raise ConfigError("markov-invalid", "Markov rates undefined at this detuning or coupling")
    t_max = mk["gamma_t_max"] / model.gamma
    grid = TimeGrid(t_max, mk["n_samples"])
    kw = {}
    if cfg["engine.absorber_width"] > 0:
        kw["absorber"] = Absorber(cfg["engine.absorber_width"], cfg["engine.absorber_strength"])
    elif not light_cone_ok(params, t_max):
        raise ConfigError("light-cone", "lattice too short for this run; set engine.absorber_width")
    traj = evolve_krylov(ee_state(build_basis(params, 2)), params, grid, tol=_tol(cfg, args),
                         keep_states=False, m_max=30, **kw)
    pop = markov_populations(model, grid.times)
    dev = float(np.max(np.abs(traj.observables.P_ee - pop.P_ee)))
    tol = float(args.tol) if args.tol is not None else 0.02
    cols = {"t": grid.times, "gamma_t": model.gamma * grid.times, "P_ee_oracle": traj.observables.P_ee,
            "P_ee_markov": pop.P_ee, "P_one_markov": pop.P_one}
    meta = io.metadata(cfg.digest(), guard_flags=_guards(params, t_max), tolerances={"P_ee": tol},
                       verdicts={"max_deviation": dev, "pass": bool(dev <= tol)}, command="markov",
                       rates={"gamma": model.gamma, "gamma_plus": model.gamma_plus,
                              "gamma_minus": model.gamma_minus, "exchange": model.exchange},
                       params=params.to_dict())
    return _emit(args.out, args.format, "markov", cols, meta), dev <= tol


def _sweep_one(job):
    text, command, out, fmt, engine, tol = job
    cfg = RunConfig.from_text(text)
    ns = argparse.Namespace(out=out, format=fmt, engine=engine, tol=tol)
    try:
        files, ok = HANDLERS[command](cfg, ns)
        return {"out": os.path.basename(out), "config_hash": cfg.digest(), "ok": bool(ok), "files": files}
    except (ModelError, CommandFailed) as e:
        _write_error(out, e)
        return {"out": os.path.basename(out), "config_hash": cfg.digest(), "ok": False,
                "error": getattr(e, "code", "error")}


def cmd_sweep(cfg, args):
    sw = cfg.section("sweep")
    cmd = sw["command"]
    if cmd not in HANDLERS or cmd in ("sweep", "plot"):
        raise ConfigError("invalid-config", f"sweep.command cannot be {cmd!r}")
    if not sw["values"]:
        raise ConfigError("invalid-config", "sweep.values is empty")
    jobs = []
    for i, v in enumerate(sw["values"]):
        sub = cfg.set(sw["key"], v).set("sweep.values", "")
        jobs.append((sub.to_text(), cmd, os.path.join(args.out, f"run_{i:03d}"), args.format,
                     args.engine, args.tol))
    workers = min(len(jobs), _accel.thread_cap() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    ok = all(r["ok"] for r in results)
    meta = io.metadata(cfg.digest(), verdicts={"all_ok": ok}, command="sweep", key=sw["key"],
                       values=sw["values"], runs=results)
    io.write_json(os.path.join(args.out, "sweep.json"), meta)
    return ["sweep.json"], ok


def cmd_plot(cfg, args):
    from .svgplot import line_plot

    if not args.input:
        raise ConfigError("invalid-input", "plot needs at least one --input CSV")
    p = cfg.section("plot")
    series = []
    for path in args.input:
        try:
            data = io.read_csv(path)
        except OSError as e:
            raise ConfigError("invalid-input", str(e)) from None
        if "t" not in data:
            raise ConfigError("invalid-input", f"{path}: first column must be t")
        names = p["columns"] or [k for k in data if k != "t" and not k.endswith("_im")]
        tag = os.path.splitext(os.path.basename(path))[0]
        for name in names:
            if name not in data:
                raise ConfigError("invalid-input", f"{path}: no column {name!r}")
            y = data[name]
            if name.endswith("_re") and name[:-3] + "_im" in data:
                y = np.hypot(y, data[name[:-3] + "_im"])
                name = "|" + name[:-3] + "|"
            label = name if len(args.input) == 1 else f"{tag}:{name}"
            series.append((label, data["t"], y))
    svg = line_plot(series, title=p["title"], log_y=p["log_y"])
    path = os.path.join(args.out, "plot.svg")
    io._write(path, svg)
    return ["plot.svg"], True


HANDLERS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "bound-states": cmd_bound_states,
    "fit-tail": cmd_fit_tail,
    "markov": cmd_markov,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
}


def _write_error(out, exc):
    payload = {"error": getattr(exc, "code", "error"), "message": str(exc)}
    if getattr(exc, "report", None):
        payload["report"] = exc.report
    if out:
        io.write_json(os.path.join(out, "error.json"), payload)
    return payload


def build_parser():
    ap = argparse.ArgumentParser(prog="duodecay", description="Two emitters on a tight-binding waveguide.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="run configuration (key = value with [section] headers)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--tol", type=float, default=None, help="tolerance override")
    ap.add_argument("--engine", choices=("dense", "krylov"), default=None)
    ap.add_argument("--format", choices=("csv", "json", "both"), default=None)
    ap.add_argument("--input", action="append", help="CSV input for plot (repeatable)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.format is None:
            args.format = cfg["output.format"]
        if args.format not in ("csv", "json", "both"):
            raise ConfigError("invalid-format", f"format must be csv, json or both, got {args.format!r}")
        os.makedirs(args.out, exist_ok=True)
        stale = os.path.join(args.out, "error.json")
        if os.path.exists(stale):
            os.remove(stale)
        files, ok = HANDLERS[args.command](cfg, args)
    except (ModelError, ValueError) as e:
        code = getattr(e, "code", "invalid-input")
        print(io.dumps(_write_error(args.out if os.path.isdir(args.out) else None,
                                    ModelError(code, str(e)))), end="")
        return 2
    except OSError as e:
        print(io.dumps(_write_error(None, ModelError("io-error", str(e)))), end="")
        return 2
    except CommandFailed as e:
        print(io.dumps(_write_error(args.out, e)), end="")
        return 1
    print(io.dumps({"command": args.command, "ok": bool(ok), "files": files,
                    "config_hash": cfg.digest()}), end="")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
