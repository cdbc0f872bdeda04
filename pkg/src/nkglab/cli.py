"""Command-line interface.

One config file drives everything: the model sections are shared with
the library parser, and each subcommand reads its own section for run
parameters.  Results land in --out as JSON (sorted keys, no
timestamps, so identical inputs give identical bytes) plus CSV profile
files whose headers carry the grid and the model hash.

Exit codes:
    0  success
    1  bad usage, config, or input files
    2  a checked condition failed (hypotheses, multiplicity shortfall,
       instability, blow-up during evolution)
    3  no binding minimizer at the requested charge
    4  time step refused by the stability guard
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from configparser import ConfigParser
from dataclasses import asdict

import numpy as np

from .dynamics import (
    conserved_charge,
    conserved_energy,
    embed_standing_wave,
    evolve,
    stability_experiment,
)
from .errors import (
    CflError,
    ConfigError,
    EvolutionAborted,
    GroundStateNotFound,
    NkgError,
)
from .minimize import (
    SolverConfig,
    certify_local_min,
    find_ground_state,
    find_multiple_states,
)
from .nonlinearity import (
    check_conditions,
    decompose_negative_set,
    model_hash,
    parse_model_text,
)
from .radial import RadialGrid, load_profile, save_profile
from .thresholds import make_threshold_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONDITION = 2
EXIT_NO_STATE = 3
EXIT_CFL = 4


def subseed(seed: int, label: str) -> int:
    """Deterministic substream seed for a named piece of work."""
    ss = np.random.SeedSequence([seed, zlib.crc32(label.encode())])
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------------------
# Config plumbing


def _load_config(path, overrides) -> ConfigParser:
    cp = ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        section, dot, option = key.strip().partition(".")
        if not dot:
            raise ConfigError(f"override key {key!r} is not section.option")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option.strip(), value.strip())
    return cp


def _model_from_config(cp: ConfigParser):
    sio = io.StringIO()
    cp.write(sio)
    return parse_model_text(sio.getvalue(), origin="<config>")


def _grid_from_config(cp: ConfigParser, model) -> RadialGrid:
    sec = cp["grid"] if cp.has_section("grid") else {}
    try:
        r_max = float(sec.get("r_max", 60.0))
        n_cells = int(sec.get("n_cells", 2048))
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc
    try:
        return RadialGrid(r_max=r_max, n_cells=n_cells, dimension=model.dimension)
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc


def _solver_from_config(cp: ConfigParser) -> SolverConfig:
    if not cp.has_section("solver"):
        return SolverConfig()
    sec = cp["solver"]
    try:
        return SolverConfig(
            grad_tol=sec.getfloat("grad_tol", SolverConfig.grad_tol),
            max_iterations=sec.getint("max_iterations", SolverConfig.max_iterations),
        )
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from exc


def _floats(raw: str) -> tuple:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def _write_json(out_dir, name, payload):
    os.makedirs(out_dir, exist_ok=True)
    body = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    path = os.path.join(out_dir, name)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _result_payload(res) -> dict:
    v = res.values
    return {
        "sigma": res.sigma,
        "k": v.k,
        "kinetic": v.kinetic,
        "potential": v.potential,
        "j0": v.j0,
        "e_sigma": v.e_sigma,
        "frequency": res.frequency,
        "energy_charge_ratio": v.energy_charge_ratio,
        "hylomorphic": v.hylomorphic,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "origin": res.origin,
        "max_amplitude": float(np.max(res.u)),
    }


# ---------------------------------------------------------------------------
# Subcommands


def run_check(args) -> int:
    cp = _load_config(args.config, args.override)
    model = _model_from_config(cp)
    sec = cp["check"] if cp.has_section("check") else {}
    s_scan_max = float(sec.get("s_scan_max", 8.0))
    report = check_conditions(model, s_scan_max=s_scan_max)
    dec = decompose_negative_set(model, s_scan_max=s_scan_max)
    payload = {
        "model_hash": model_hash(model),
        "conditions": asdict(report),
        "negative_intervals": [list(iv) for iv in dec.intervals],
    }
    path = _write_json(args.out, "check.json", payload)
    ok = report.hypotheses_ok
    print(f"hypotheses {'ok' if ok else 'FAILED'}; "
          f"nc: {report.nc_status}, zc: {report.zc_status}; "
          f"{dec.count} negativity interval(s); report: {path}")
    return EXIT_OK if ok else EXIT_CONDITION


def run_solve(args) -> int:
    cp = _load_config(args.config, args.override)
    model = _model_from_config(cp)
    grid = _grid_from_config(cp, model)
    solver = _solver_from_config(cp)
    sec = cp["solve"] if cp.has_section("solve") else {}
    try:
        sigmas = _floats(sec.get("sigmas", "1.0"))
        do_certify = sec.get("certify", "false").strip().lower() in ("1", "true", "yes")
    except ValueError as exc:
        raise ConfigError(f"[solve]: {exc}") from exc
    if not sigmas:
        raise ConfigError("[solve]: sigmas is empty")

    def work(sigma):
        try:
            res = find_ground_state(grid, model, sigma, config=solver)
        except GroundStateNotFound as exc:
            return sigma, None, exc
        return sigma, res, None

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(work, sigmas))
    else:
        outcomes = [work(s) for s in sigmas]

    mh = model_hash(model)
    entries = []
    missing = 0
    for i, (sigma, res, err) in enumerate(outcomes):
        if res is None:
            missing += 1
            entries.append({
                "sigma": sigma,
                "found": False,
                "diagnostics": {k: v for k, v in err.diagnostics.items()
                                if isinstance(v, (int, float, bool, str))},
            })
            continue
        entry = {"found": True, **_result_payload(res)}
        if do_certify:
            cert = certify_local_min(grid, model, res.u, sigma)
            entry["certified"] = cert.certified
            entry["smallest_eigenvalues"] = list(cert.smallest_eigenvalues)
        name = f"profile_{i:03d}.csv"
        save_profile(
            os.path.join(args.out, name), grid, {"u": res.u},
            meta={"model": mh, "sigma": repr(sigma), "frequency": repr(res.frequency)},
        )
        entry["profile"] = name
        entries.append(entry)

    path = _write_json(args.out, "solve.json", {"model_hash": mh, "results": entries})
    for e in entries:
        tag = "ok" if e.get("found") else "no state"
        extra = f" e_sigma={e['e_sigma']:.9g}" if e.get("found") else ""
        print(f"sigma={e['sigma']:g}: {tag}{extra}")
    print(f"report: {path}")
    return EXIT_NO_STATE if missing else EXIT_OK


def run_thresholds(args) -> int:
    cp = _load_config(args.config, args.override)
    model = _model_from_config(cp)
    grid = _grid_from_config(cp, model)
    solver = _solver_from_config(cp)
    sec = cp["thresholds"] if cp.has_section("thresholds") else {}
    sigma_ref = float(sec.get("sigma_ref", 1.0))
    include_b = sec.get("include_sigma_b", "true").strip().lower() in ("1", "true", "yes")
    amplitudes = _floats(sec.get("bump_amplitudes", "0.2 0.1 0.04"))
    report = make_threshold_report(
        grid, model, sigma_ref=sigma_ref, config=solver,
        include_sigma_b=include_b, bump_amplitudes=amplitudes,
    )
    payload = {"model_hash": model_hash(model), "report": asdict(report)}
    path = _write_json(args.out, "thresholds.json", payload)
    kb = report.kbar
    print(f"kbar in [{kb.lo:.6g}, {kb.hi:.6g}]")
    print(f"sigma_g in [{report.sigma_g.lo:.6g}, {report.sigma_g.hi:.6g}]")
    if report.sigma_b is not None:
        print(f"sigma_b in [{report.sigma_b.lo:.6g}, {report.sigma_b.hi:.6g}]")
    print(f"small-frequency condition: {'holds' if report.small_frequency.holds else 'fails'} "
          f"(sup ratio {report.small_frequency.sup_ratio:.6g} vs {report.small_frequency.omega_sq:.6g})")
    print(f"report: {path}")
    return EXIT_OK


def run_multiplicity(args) -> int:
    cp = _load_config(args.config, args.override)
    model = _model_from_config(cp)
    grid = _grid_from_config(cp, model)
    solver = _solver_from_config(cp)
    sec = cp["multiplicity"] if cp.has_section("multiplicity") else {}
    sigma = float(sec.get("sigma", 1.0))
    s_scan_max = float(sec.get("s_scan_max", 8.0))
    result = find_multiple_states(grid, model, sigma, config=solver, s_scan_max=s_scan_max)
    mh = model_hash(model)
    entries = []
    for i, st in enumerate(result.states):
        name = f"state_{i:03d}.csv"
        save_profile(
            os.path.join(args.out, name), grid, {"u": st.u},
            meta={"model": mh, "sigma": repr(sigma), "frequency": repr(st.frequency)},
        )
        entries.append({**_result_payload(st), "profile": name})
    payload = {
        "model_hash": mh,
        "intervals": [list(iv) for iv in result.intervals],
        "states": entries,
        "failures": [{"interval": i, "reason": r} for i, r in result.failures],
    }
    path = _write_json(args.out, "multiplicity.json", payload)
    print(f"{result.count} state(s) from {len(result.intervals)} negativity interval(s); report: {path}")
    return EXIT_OK if result.count >= len(result.intervals) and result.count > 0 else EXIT_CONDITION


def _initial_state(args, cp, grid, model, solver, section):
    sec = cp[section] if cp.has_section(section) else {}
    profile = sec.get("profile", "").strip()
    if profile:
        meta, cols = load_profile(profile)
        if "u" not in cols:
            raise ConfigError(f"{profile}: no 'u' column")
        u = cols["u"]
        if u.shape != grid.nodes.shape:
            raise ConfigError(f"{profile}: profile does not match the [grid] section")
        freq = sec.get("frequency", meta.get("frequency", "")).strip()
        if not freq:
            raise ConfigError(f"[{section}]: frequency missing and not in the profile header")
        return u, float(freq), None
    sigma = float(sec.get("sigma", 1.0))
    res = find_ground_state(grid, model, sigma, config=solver)
    return res.u, res.frequency, res


def run_evolve(args) -> int:
    cp = _load_config(args.config, args.override)
    model = _model_from_config(cp)
    grid = _grid_from_config(cp, model)
    solver = _solver_from_config(cp)
    sec = cp["evolve"] if cp.has_section("evolve") else {}
    u, freq, _ = _initial_state(args, cp, grid, model, solver, "evolve")
    dt = float(sec.get("dt", 0.25 * grid.h))
    n_steps = int(sec.get("n_steps", 1000))
    record_every = int(sec.get("record_every", max(1, n_steps // 200)))

    state = embed_standing_wave(grid, u, freq)
    result = evolve(grid, model, state, dt, n_steps, record_every=record_every)
    log = result.log

    os.makedirs(args.out, exist_ok=True)
    rows = ["t,energy,charge"]
    rows += [f"{t:.17g},{e:.17g},{c:.17g}" for t, e, c in zip(log.times, log.energy, log.charge)]
    cons_path = os.path.join(args.out, "conservation.csv")
    with open(cons_path + ".tmp", "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    os.replace(cons_path + ".tmp", cons_path)
    save_profile(
        os.path.join(args.out, "final_state.csv"), grid,
        {"re": result.state.psi.real, "im": result.state.psi.imag,
         "vt_re": result.state.psi_t.real, "vt_im": result.state.psi_t.imag},
        meta={"model": model_hash(model), "time": repr(result.state.time)},
    )
    payload = {
        "model_hash": model_hash(model),
        "dt": dt,
        "n_steps": n_steps,
        "final_time": result.state.time,
        "initial_energy": float(log.energy[0]),
        "initial_charge": float(log.charge[0]),
        "energy_drift": log.energy_drift,
        "charge_drift": log.charge_drift,
    }
    path = _write_json(args.out, "evolve.json", payload)
    print(f"evolved {n_steps} steps to t={result.state.time:.6g}; "
          f"energy drift {log.energy_drift:.3e}, charge drift {log.charge_drift:.3e}")
    print(f"report: {path}")
    return EXIT_OK


def run_stability(args) -> int:
    cp = _load_config(args.config, args.override)
    model = _model_from_config(cp)
    grid = _grid_from_config(cp, model)
    solver = _solver_from_config(cp)
    sec = cp["stability"] if cp.has_section("stability") else {}
    u, freq, _ = _initial_state(args, cp, grid, model, solver, "stability")
    amplitudes = _floats(sec.get("amplitudes", "0.001 0.01"))
    n_trials = int(sec.get("n_trials", 2))
    t_final = float(sec["t_final"]) if "t_final" in sec else None
    ratio_bound = float(sec.get("ratio_bound", 5.0))
    report = stability_experiment(
        grid, model, u, freq,
        amplitudes=amplitudes, n_trials=n_trials, t_final=t_final,
        seed=subseed(args.seed, "stability"), ratio_bound=ratio_bound,
    )
    payload = {"model_hash": model_hash(model), "frequency": freq, "report": asdict(report),
               "stable": report.stable}
    path = _write_json(args.out, "stability.json", payload)
    print(f"max orbit-distance ratio {report.max_ratio:.4g} "
          f"({'within' if report.stable else 'EXCEEDS'} bound {report.ratio_bound:g}); report: {path}")
    return EXIT_OK if report.stable else EXIT_CONDITION


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=0, help="base seed for randomized pieces")
    common.add_argument("--workers", type=int, default=1, help="parallel workers where applicable")
    common.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="config override, repeatable",
    )

    parser = argparse.ArgumentParser(
        prog="nkglab",
        description="Standing-wave solitons of the nonlinear Klein-Gordon equation: "
                    "solve, thresholds, multiplicity, evolution, stability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common],
                   help="verify the structural hypotheses of the model")
    sub.add_parser("solve", parents=[common],
                   help="charge-constrained ground states")
    sub.add_parser("thresholds", parents=[common],
                   help="kbar, sigma_g, sigma_b, small-frequency condition")
    sub.add_parser("multiplicity", parents=[common],
                   help="one bound state per negativity interval")
    sub.add_parser("evolve", parents=[common],
                   help="leapfrog time evolution with conservation log")
    sub.add_parser("stability", parents=[common],
                   help="perturb a standing wave and track the orbit distance")
    return parser


_COMMANDS = {
    "check": run_check,
    "solve": run_solve,
    "thresholds": run_thresholds,
    "multiplicity": run_multiplicity,
    "evolve": run_evolve,
    "stability": run_stability,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CflError as exc:
        print(f"time step refused: {exc}", file=sys.stderr)
        return EXIT_CFL
    except GroundStateNotFound as exc:
        print(f"no state: {exc}", file=sys.stderr)
        return EXIT_NO_STATE
    except EvolutionAborted as exc:
        print(f"evolution aborted: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except NkgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONDITION


if __name__ == "__main__":
    sys.exit(main())
