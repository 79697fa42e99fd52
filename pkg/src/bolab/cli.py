"""Batch front end: configuration, experiment dispatch, artifact I/O.

    bolab <command> [--config run.json] [flags...]

Commands: simulate, gauge-check, params, estimates, smoothing, lipschitz,
lemma21, nfe.  Each writes its JSON + CSV report into the output directory
(--output-dir flag, config "output_dir", env BOLAB_OUTPUT_DIR, or
./bolab-reports) and prints a one-line verdict summary.  Exit codes:
0 every verdict passes (or the run is descriptive-only), 1 a verdict
failed or was inconclusive, 2 usage/config error, 3 numerical failure.

Configuration is a JSON file with the sections in ``DEFAULTS``; flags
override file values, file values override per-command defaults.  Unknown
keys are rejected with their field path.  Identical config + seed produce
byte-identical CSV reports.  ``--jobs`` caps parallelism where cells are
independent (the per-term operator sweeps of ``estimates``); results do
not depend on the worker count.
"""

import argparse
import copy
import json
import os
import sys
from concurrent import futures

import numpy as np

from .dynamics import evolve_bo, evolve_gauged
from .experiments import (lemma21_experiment, lipschitz_experiment,
                          rough_real_data, smoothing_experiment,
                          verify_operator_estimate)
from .gauge import gauge_forward, gauge_inverse
from .infr import bo_terms, gamma_cubic, gamma_quadratic, infr_params
from .integrals import cubic_integral_I, quad_integral_J
from .nfe import nfe_residual
from .reports import EstimateReport
from .spectral import Grid, SpectralField, sobolev_norm, to_spectral

COMMANDS = ("simulate", "gauge-check", "params", "estimates", "smoothing",
            "lipschitz", "lemma21", "nfe")
ENV_OUTPUT_DIR = "BOLAB_OUTPUT_DIR"
DATA_KINDS = ("gaussian-derivative", "rough-random")


class ConfigError(ValueError):
    """Bad configuration; the message carries the offending field path."""


_NUMBER = "number"
_SCHEMA = {
    "command": str,
    "output_dir": str,
    "jobs": int,
    "grid": {"n_points": int, "half_length": _NUMBER},
    "time": {"T": _NUMBER, "dt": _NUMBER, "snapshot_every": int},
    "data": {"kind": str, "seed": int, "amplitude": _NUMBER,
             "regularity": _NUMBER},
    "infr": {"s": _NUMBER, "eps": _NUMBER, "eps_list": list,
             "N_threshold": _NUMBER, "J_max": int},
    "experiment": {"alpha_list": list, "M_list": list, "cutoff": _NUMBER,
                   "resolutions": list, "trials": int,
                   "perturbation_size": _NUMBER, "amplitudes": list,
                   "terms": list, "c_max": _NUMBER},
}

DEFAULTS = {
    "output_dir": None,
    "jobs": 1,
    "grid": {"n_points": 256, "half_length": 8.0 * np.pi},
    "time": {"T": 0.25, "dt": 1e-3, "snapshot_every": 10},
    "data": {"kind": "gaussian-derivative", "seed": 42, "amplitude": 0.3,
             "regularity": 0.5},
    "infr": {"s": 0.5, "eps": 0.0, "eps_list": None, "N_threshold": 1000.0,
             "J_max": 2},
    "experiment": {"alpha_list": [128.0, 256.0, 512.0, 1024.0],
                   "M_list": [16.0, 32.0, 64.0, 128.0], "cutoff": 48.0,
                   "resolutions": [128, 256], "trials": 4,
                   "perturbation_size": 1e-3,
                   "amplitudes": [0.05, 0.1, 0.2, 0.35, 0.5],
                   "terms": ["Q+", "Q-", "C+", "C-"], "c_max": 10.0},
}

# per-command overlays: defaults that make the bare command meaningful
COMMAND_DEFAULTS = {
    "estimates": {"grid": {"n_points": 128, "half_length": np.pi}},
    "smoothing": {"data": {"kind": "rough-random", "amplitude": 0.5},
                  "time": {"dt": 1e-4}, "infr": {"eps_list": [0.4]}},
    "lipschitz": {"data": {"kind": "rough-random", "amplitude": 0.6},
                  "time": {"dt": 4e-4, "T": 0.5},
                  "grid": {"half_length": np.pi}},
    "lemma21": {"grid": {"n_points": 256, "half_length": np.pi},
                "time": {"T": 0.1, "dt": 5e-5}},
    # n = 128 keeps phases up to ~2 (kmax/2)^2 ~ 2000 attainable, so the
    # default N_threshold = 1000 leaves a populated nonresonant frontier;
    # dt keeps max_step x lattice_phase_cap below 0.5 for the trapezoid
    "nfe": {"grid": {"n_points": 128, "half_length": np.pi},
            "time": {"T": 0.02, "dt": 2.5e-5, "snapshot_every": 1},
            "data": {"kind": "rough-random", "amplitude": 0.05}},
}


def _join(path, key):
    return f"{path}.{key}" if path else key


def _validate(node, schema, path=""):
    if not isinstance(node, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    for key, val in node.items():
        if key not in schema:
            raise ConfigError(f"{_join(path, key)}: unknown key")
        want = schema[key]
        here = _join(path, key)
        if isinstance(want, dict):
            _validate(val, want, here)
        elif want is _NUMBER:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{here}: expected a number")
        elif want is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{here}: expected an integer")
        elif want is list:
            if val is not None and not isinstance(val, list):
                raise ConfigError(f"{here}: expected a list")
        elif want is str:
            if not isinstance(val, str):
                raise ConfigError(f"{here}: expected a string")


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(command, file_cfg=None, flag_cfg=None):
    """Per-command defaults <- config file <- flags, validated strictly."""
    for layer in (file_cfg, flag_cfg):
        if layer:
            _validate(layer, _SCHEMA)
    cfg = _deep_merge(DEFAULTS, COMMAND_DEFAULTS.get(command, {}))
    cfg = _deep_merge(cfg, file_cfg or {})
    cfg = _deep_merge(cfg, flag_cfg or {})
    configured = cfg.pop("command", None)
    if configured is not None and configured != command:
        raise ConfigError(
            f"command: config says {configured!r} but {command!r} was invoked")
    cfg["command"] = command
    kind = cfg["data"]["kind"]
    if kind not in DATA_KINDS:
        raise ConfigError(f"data.kind: must be one of {', '.join(DATA_KINDS)}")
    for name in cfg["experiment"]["terms"]:
        if name not in ("Q+", "Q-", "C+", "C-"):
            raise ConfigError(f"experiment.terms: unknown term {name!r}")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs: must be >= 1")
    return cfg


def _output_dir(cfg):
    return (cfg.get("output_dir") or os.environ.get(ENV_OUTPUT_DIR)
            or os.path.join(os.getcwd(), "bolab-reports"))


def _build_grid(cfg):
    g = cfg["grid"]
    try:
        return Grid(g["n_points"], g["half_length"])
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None


def _build_data(grid, cfg):
    d = cfg["data"]
    if d["kind"] == "gaussian-derivative":
        samples = d["amplitude"] * -grid.x * np.exp(-grid.x ** 2 / 2.0)
        return to_spectral(samples, grid)
    return rough_real_data(grid, d["regularity"], d["seed"], d["amplitude"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_simulate(cfg, outdir):
    grid = _build_grid(cfg)
    u0 = _build_data(grid, cfg)
    t = cfg["time"]
    traj = evolve_bo(u0, T=t["T"], dt=t["dt"],
                     snapshot_every=t["snapshot_every"])
    rep = EstimateReport("simulate", params={"config": cfg,
                                             "metadata": traj.metadata})
    norms = []
    for i, ti in enumerate(traj.times):
        f = traj.field(i)
        l2 = sobolev_norm(f, 0.0)
        norms.append(l2)
        rep.add_sample(l2, kind="l2_norm", t=float(ti))
    rep.params["l2_drift"] = float(max(norms) - min(norms))
    rep.params["zero_mode_max"] = float(
        np.max(np.abs(traj.data[:, grid.n // 2])))
    traj_dir = os.path.join(outdir, "trajectory")
    traj.save(traj_dir)
    print(f"trajectory ({len(traj)} snapshots) in {traj_dir}")
    return [("simulate", rep)]


def _cmd_gauge_check(cfg, outdir):
    grid = _build_grid(cfg)
    u0 = _build_data(grid, cfg)
    st = gauge_forward(u0)
    back = gauge_inverse(st)
    rt = sobolev_norm(back - u0, 0.0) / sobolev_norm(u0, 0.0)
    rt_ok = rt <= 1e-10
    print(f"round-trip relative error <= 1e-10: {'PASS' if rt_ok else 'FAIL'}"
          f" ({rt:.3e})")

    t = cfg["time"]
    s = cfg["infr"]["s"]
    traj_u = evolve_bo(u0, T=t["T"], dt=t["dt"], snapshot_every=10 ** 9)
    traj_v = evolve_gauged(st, T=t["T"], dt=t["dt"], snapshot_every=10 ** 9)
    err = sobolev_norm(traj_v.final - gauge_forward(traj_u.final).V, s + 1.0)
    cons_ok = err <= 1e-6
    print(f"gauge/direct consistency error <= 1e-06: "
          f"{'PASS' if cons_ok else 'FAIL'} ({err:.3e})")

    rep = EstimateReport("gauge_check", params={"config": cfg})
    rep.add_sample(rt, kind="round_trip_rel_error")
    rep.add_sample(err, kind="consistency_error")
    rep.checks["round_trip_le_1e-10"] = bool(rt_ok)
    rep.checks["consistency_le_1e-6"] = bool(cons_ok)
    return [("gauge_check", rep)]


def _cmd_params(cfg, outdir):
    infr = cfg["infr"]
    p = infr_params(infr["s"], infr["eps"], N_threshold=infr["N_threshold"])
    rep = EstimateReport("params", params={"config": cfg,
                                           "table": dict(p.table())})
    for name, value in p.table():
        print(f"{name:<18} {value}")
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            rep.add_sample(float(value), kind="parameter", name=name)
    if not p.feasible:
        rep.checks["feasible"] = False
        print(p.message)
    return [("params", rep)]


def _operator_job(args):
    name, s, eps, alphas, Ms, trials, grid_n, half_length = args
    return verify_operator_estimate(name, s, eps, list(alphas), list(Ms),
                                    trials=trials, grid_n=grid_n,
                                    half_length=half_length)


def _integral_report(s, eps, cutoff):
    """M- and alpha-sweeps of the quadrature oracles with exponent caps.

    The integrals are the squared dual quantities, so the caps double the
    operator exponents: M-slope <= 1 + 2 gamma + 0.15, alpha-slope <=
    2 gamma + 0.15.  A cutoff-doubling cell guards tail convergence.
    """
    rep = EstimateReport("integral_scaling", params={
        "s": s, "eps": eps, "cutoff": cutoff,
        "gamma_quad": gamma_quadratic(s, eps),
        "gamma_cubic": gamma_cubic(s, eps)})
    Ms = [2.0, 4.0, 8.0, 16.0, 32.0]
    alphas = [4.0, 8.0, 16.0, 32.0]
    for M in Ms:
        rep.add_sample(quad_integral_J(0.0, M, s, eps, cutoff),
                       fit="quad_m", m=M, alpha=0.0, kind="quad")
        rep.add_sample(cubic_integral_I(0.0, M, s, eps, cutoff),
                       fit="cubic_m", m=M, alpha=0.0, kind="cubic")
    for a in alphas:
        rep.add_sample(quad_integral_J(a, 2.0, s, eps, cutoff),
                       fit="quad_alpha", m=2.0, alpha=a, kind="quad")
        rep.add_sample(cubic_integral_I(a, 2.0, s, eps, cutoff),
                       fit="cubic_alpha", m=2.0, alpha=a, kind="cubic")
    caps = {"quad_m": 1.0 + 2.0 * gamma_quadratic(s, eps) + 0.15,
            "quad_alpha": 2.0 * gamma_quadratic(s, eps) + 0.15,
            "cubic_m": 1.0 + 2.0 * gamma_cubic(s, eps) + 0.15,
            "cubic_alpha": 2.0 * gamma_cubic(s, eps) + 0.15}
    key_for = {"quad_m": "m", "cubic_m": "m",
               "quad_alpha": "alpha", "cubic_alpha": "alpha"}
    for name, cap in caps.items():
        fit = rep.fit_samples(name, key_for[name])
        if fit.conclusive:
            rep.checks[f"{name}_exponent_le_cap"] = bool(fit.exponent <= cap)
        else:
            rep.checks[f"{name}_exponent_le_cap"] = "inconclusive"
        rep.params[f"{name}_cap"] = cap
    base_q = quad_integral_J(0.0, 8.0, s, eps, cutoff)
    wide_q = quad_integral_J(0.0, 8.0, s, eps, 2.0 * cutoff)
    base_c = cubic_integral_I(0.0, 8.0, s, eps, cutoff)
    wide_c = cubic_integral_I(0.0, 8.0, s, eps, 2.0 * cutoff)
    rep.checks["quad_cutoff_converged"] = bool(
        abs(wide_q - base_q) <= 0.05 * base_q)
    rep.checks["cubic_cutoff_converged"] = bool(
        abs(wide_c - base_c) <= 0.05 * base_c)
    return rep


def _cmd_estimates(cfg, outdir):
    infr = cfg["infr"]
    exp = cfg["experiment"]
    grid_cfg = cfg["grid"]
    jobs = cfg["jobs"]
    arglist = [(name, infr["s"], infr["eps"], tuple(exp["alpha_list"]),
                tuple(exp["M_list"]), exp["trials"], grid_cfg["n_points"],
                grid_cfg["half_length"]) for name in exp["terms"]]
    if jobs > 1:
        with futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            term_reps = list(pool.map(_operator_job, arglist))
    else:
        term_reps = [_operator_job(a) for a in arglist]
    safe = {"Q+": "Qp", "Q-": "Qm", "C+": "Cp", "C-": "Cm"}
    out = []
    for name, rep in zip(exp["terms"], term_reps):
        rep.params["config"] = cfg
        out.append((f"operator_{safe[name]}", rep))
    integral = _integral_report(infr["s"], infr["eps"], exp["cutoff"])
    integral.params["config"] = cfg
    out.append(("integral_scaling", integral))
    return out


def _cmd_smoothing(cfg, outdir):
    infr = cfg["infr"]
    eps_list = infr["eps_list"] if infr["eps_list"] else [infr["eps"]]
    rep = smoothing_experiment(
        seed=cfg["data"]["seed"], s=infr["s"], eps_list=eps_list,
        T=cfg["time"]["T"], resolutions=cfg["experiment"]["resolutions"],
        amplitude=cfg["data"]["amplitude"], base_dt=cfg["time"]["dt"])
    rep.params["config"] = cfg
    return [("smoothing", rep)]


def _cmd_lipschitz(cfg, outdir):
    rep = lipschitz_experiment(
        seed=cfg["data"]["seed"], s=cfg["infr"]["s"], T=cfg["time"]["T"],
        perturbation_size=cfg["experiment"]["perturbation_size"],
        resolutions=cfg["experiment"]["resolutions"],
        amplitude=cfg["data"]["amplitude"], dt=cfg["time"]["dt"],
        c_max=cfg["experiment"]["c_max"],
        half_length=cfg["grid"]["half_length"])
    rep.params["config"] = cfg
    return [("lipschitz", rep)]


def _cmd_lemma21(cfg, outdir):
    rep = lemma21_experiment(
        cfg["experiment"]["amplitudes"], cfg["infr"]["s"], cfg["time"]["T"],
        n_points=cfg["grid"]["n_points"], dt=cfg["time"]["dt"],
        seed=cfg["data"]["seed"], half_length=cfg["grid"]["half_length"])
    rep.params["config"] = cfg
    return [("lemma21", rep)]


def _cmd_nfe(cfg, outdir):
    grid = _build_grid(cfg)
    u0 = _build_data(grid, cfg)
    t, infr = cfg["time"], cfg["infr"]
    traj = evolve_gauged(gauge_forward(u0), T=t["T"], dt=t["dt"],
                         rhs_mode="terms",
                         snapshot_every=t["snapshot_every"])
    p = infr_params(infr["s"], infr["eps"], N_threshold=infr["N_threshold"])
    nr = nfe_residual(traj, infr["J_max"], p)
    print(nr.summary())
    rep = EstimateReport("nfe", params={
        "config": cfg, "quadrature_error": nr.quadrature_error,
        "norm_index": nr.norm_index, "counts": nr.counts,
        "phase_cap": nr.phase_cap, "h_max": nr.h_max})
    for j in sorted(nr.residuals):
        rep.add_sample(nr.residuals[j], kind="residual", j=j)
    rep.notes.extend(nr.warnings)
    levels = sorted(nr.residuals)
    vals = [nr.residuals[j] for j in levels]
    rep.checks["residual_monotone"] = bool(
        all(b <= a for a, b in zip(vals, vals[1:])))
    if infr["J_max"] >= 2:
        rep.checks["deepest_below_depth1"] = bool(vals[-1] < vals[0])
    return [("nfe", rep)]


_DISPATCH = {
    "simulate": _cmd_simulate,
    "gauge-check": _cmd_gauge_check,
    "params": _cmd_params,
    "estimates": _cmd_estimates,
    "smoothing": _cmd_smoothing,
    "lipschitz": _cmd_lipschitz,
    "lemma21": _cmd_lemma21,
    "nfe": _cmd_nfe,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _build_parser():
    p = argparse.ArgumentParser(
        prog="bolab",
        description="Benjamin-Ono spectral laboratory: simulations, gauge "
                    "checks, and scaling experiments with JSON/CSV reports.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--jobs", type=int, dest="jobs",
                   help="parallel workers for independent experiment cells")
    p.add_argument("--n-points", type=int, dest="grid.n_points")
    p.add_argument("--half-length", type=float, dest="grid.half_length")
    p.add_argument("--T", type=float, dest="time.T")
    p.add_argument("--dt", type=float, dest="time.dt",
                   help="time step (smoothing: the N=512 reference step)")
    p.add_argument("--snapshot-every", type=int, dest="time.snapshot_every")
    p.add_argument("--kind", choices=DATA_KINDS, dest="data.kind")
    p.add_argument("--seed", type=int, dest="data.seed")
    p.add_argument("--amplitude", type=float, dest="data.amplitude")
    p.add_argument("--regularity", type=float, dest="data.regularity")
    p.add_argument("--s", type=float, dest="infr.s")
    p.add_argument("--eps", type=float, dest="infr.eps")
    p.add_argument("--eps-list", type=_floats, dest="infr.eps_list")
    p.add_argument("--n-threshold", type=float, dest="infr.N_threshold")
    p.add_argument("--j-max", type=int, dest="infr.J_max")
    p.add_argument("--alpha-list", type=_floats, dest="experiment.alpha_list")
    p.add_argument("--m-list", type=_floats, dest="experiment.M_list")
    p.add_argument("--cutoff", type=float, dest="experiment.cutoff")
    p.add_argument("--resolutions", type=_ints,
                   dest="experiment.resolutions")
    p.add_argument("--trials", type=int, dest="experiment.trials")
    p.add_argument("--perturbation-size", type=float,
                   dest="experiment.perturbation_size")
    p.add_argument("--amplitudes", type=_floats,
                   dest="experiment.amplitudes")
    p.add_argument("--terms", type=lambda t: t.split(","),
                   dest="experiment.terms")
    p.add_argument("--c-max", type=float, dest="experiment.c_max")
    return p


def _flags_to_config(namespace):
    cfg = {}
    for dest, value in vars(namespace).items():
        if dest in ("command", "config") or value is None:
            continue
        node = cfg
        *heads, leaf = dest.split(".")
        for head in heads:
            node = node.setdefault(head, {})
        node[leaf] = value
    return cfg


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        file_cfg = None
        if args.config:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
            if not isinstance(file_cfg, dict):
                raise ConfigError("config: top level must be a JSON object")
        cfg = resolve_config(args.command, file_cfg, _flags_to_config(args))
    except (ConfigError, json.JSONDecodeError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    outdir = _output_dir(cfg)
    try:
        results = _DISPATCH[cfg["command"]](cfg, outdir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3

    failed = False
    for stem, rep in results:
        rep.write(outdir, stem)
        print(rep.summary())
        if rep.checks and rep.verdict != "pass":
            failed = True
    print(f"reports in {outdir}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
