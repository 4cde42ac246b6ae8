"""Batch command-line front end: one subcommand per protocol.

Every run takes an INI config (key = value under a section named after the
subcommand, plus a [run] section), a mandatory seed, and writes a directory
containing the config snapshot, CSV data and a JSON summary. Identical
(config, seed) pairs produce byte-identical outputs.
"""

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import KERNEL_BACKEND, __version__
from .levels import B, DIM, G, Q0, Q1, R, X, lop
from .lindblad import evolve_lindblad
from .noise import (
    NoiseConfig,
    noise_config_from_text,
    raman_scatter_collapse_ops,
    rydberg_collapse_ops,
)
from .states import QuantumState

PROTOCOLS = {}


def protocol(name):
    def wrap(fn):
        PROTOCOLS[name] = fn
        return fn

    return wrap


class ConfigError(ValueError):
    pass


def _parse_config(path: Path, section: str):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = path.read_text() if path else ""
    if path:
        parser.read_string(text)
    for sec in parser.sections():
        if sec not in ("run", section):
            raise ConfigError(f"unknown config section [{sec}]")
    run = dict(parser["run"]) if parser.has_section("run") else {}
    proto = dict(parser[section]) if parser.has_section(section) else {}
    return run, proto, text


_RUN_KEYS = {"seed", "shots", "noise_config", "out"}


def _known(d, allowed, where):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in [{where}]")


def _noise_from_run(run, base_dir: Path) -> NoiseConfig:
    if "noise_config" in run:
        p = Path(run["noise_config"])
        if not p.is_absolute():
            p = base_dir / p
        return noise_config_from_text(p.read_text())
    from .budget import reference_budget_config

    return reference_budget_config()


def _floats(s):
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s):
    return [int(x) for x in s.replace(",", " ").split()]


def _bool(s):
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return f"{float(x):.10g}"
    return str(x)


def _summary(path: Path, payload: dict):
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))

    path.write_text(
        json.dumps(payload, sort_keys=True, indent=1, default=default) + "\n"
    )


# --- protocol implementations ----------------------------------------------


@protocol("rabi")
def run_rabi(ctx):
    cfg = ctx.proto
    _known(cfg, {"rabi_mhz", "t_max_us", "n_points", "noiseless"}, "rabi")
    rabi = 2 * np.pi * float(cfg.get("rabi_mhz", 0.017))
    t_max = float(cfg.get("t_max_us", 2.2 * np.pi / rabi * 2))
    n = int(cfg.get("n_points", 41))
    noiseless = _bool(cfg.get("noiseless", "false"))
    ops = [] if noiseless else raman_scatter_collapse_ops(ctx.noise)
    h = (rabi / 2) * (lop(Q0, Q1) + lop(Q1, Q0))
    rows = []
    for t in np.linspace(0.0, t_max, n):
        st = evolve_lindblad(QuantumState.pure([Q1]), h, ops, t)
        d = np.diag(st.rho).real
        rows.append((t, d[Q0], d[Q1], d[G] + d[X]))
    ctx.emit("rabi", ["t_us", "p_q0", "p_q1", "p_leak"], rows)
    _summary(ctx.out / "summary.json", {
        "protocol": "rabi", "rabi_rad_per_us": rabi, "points": n,
        "p_q0_max": max(r[1] for r in rows),
    })


@protocol("rydberg-rabi")
def run_rydberg_rabi(ctx):
    cfg = ctx.proto
    _known(cfg, {"rabi_mhz", "t_max_us", "n_points", "noiseless"}, "rydberg-rabi")
    rabi = 2 * np.pi * float(cfg.get("rabi_mhz", 6.0))
    t_max = float(cfg.get("t_max_us", 0.5))
    n = int(cfg.get("n_points", 51))
    noiseless = _bool(cfg.get("noiseless", "false"))
    ops = [] if noiseless else rydberg_collapse_ops(ctx.noise)
    h = (rabi / 2) * (lop(Q1, R) + lop(R, Q1))
    rows = []
    for t in np.linspace(0.0, t_max, n):
        st = evolve_lindblad(QuantumState.pure([Q1]), h, ops, t)
        d = np.diag(st.rho).real
        rows.append((t, d[Q1], d[R], d[B]))
    ctx.emit("rydberg_rabi", ["t_us", "p_q1", "p_r", "p_lost"], rows)
    _summary(ctx.out / "summary.json", {
        "protocol": "rydberg-rabi", "rabi_rad_per_us": rabi, "points": n,
    })


@protocol("crb")
def run_crb_cmd(ctx):
    from .benchmarking import run_crb

    cfg = ctx.proto
    _known(cfg, {"lengths", "n_sequences", "erasure", "injected_depolarizing"},
           "crb")
    lengths = _ints(cfg.get("lengths", "2,8,16,28,40"))
    n_seq = int(cfg.get("n_sequences", 40))
    erasure = _bool(cfg.get("erasure", "true"))
    injected = cfg.get("injected_depolarizing")
    res = run_crb(
        lengths,
        n_seq,
        ctx.shots,
        None if injected is not None else ctx.noise,
        erasure=erasure and injected is None,
        seed=ctx.seed,
        injected_depolarizing=float(injected) if injected is not None else None,
    )
    rows = []
    for i, m in enumerate(res.lengths):
        row = [m, res.raw_survival[i], res.raw_sem[i], ctx.shots, 1.0]
        if res.corrected_fit is not None:
            row = [m, res.raw_survival[i], res.raw_sem[i],
                   res.corrected_survival[i], res.corrected_sem[i],
                   ctx.shots, res.retained_fraction]
            header = ["length", "raw_mean", "raw_sem", "corrected_mean",
                      "corrected_sem", "n_shots", "retained_fraction"]
        else:
            header = ["length", "raw_mean", "raw_sem", "n_shots",
                      "retained_fraction"]
        rows.append(row)
    ctx.emit("crb", header, rows)
    payload = {
        "protocol": "crb",
        "f1q_raw": res.f1q_raw,
        "f1q_raw_err": res.f1q_raw_err,
        "decay_raw": res.raw_fit.fidelity,
        "amplitude_raw": res.raw_fit.amplitude,
        "raw_fit_covariance": res.raw_fit.covariance.tolist(),
    }
    if res.corrected_fit is not None:
        payload.update(
            f1q_corrected=res.f1q_corrected,
            f1q_corrected_err=res.f1q_corrected_err,
            retained_fraction=res.retained_fraction,
        )
    _summary(ctx.out / "summary.json", payload)


@protocol("ssb")
def run_ssb_cmd(ctx):
    from .benchmarking import run_ssb

    cfg = ctx.proto
    _known(cfg, {"n_cz", "n_sequences", "noiseless"}, "ssb")
    n_cz = _ints(cfg.get("n_cz", "2,6,10,14"))
    n_seq = int(cfg.get("n_sequences", 12))
    noise = None if _bool(cfg.get("noiseless", "false")) else ctx.noise
    res = run_ssb(n_cz, n_seq, ctx.shots, noise, seed=ctx.seed)
    ctx.emit(
        "ssb",
        ["n_cz", "p11_raw", "sem_raw", "p11_erasure", "sem_erasure",
         "p11_loss", "sem_loss", "n_shots"],
        [
            (n, res.p11_raw[i], res.sem_raw[i], res.p11_erasure[i],
             res.sem_erasure[i], res.p11_loss[i], res.sem_loss[i], ctx.shots)
            for i, n in enumerate(res.n_cz)
        ],
    )
    _summary(ctx.out / "summary.json", {
        "protocol": "ssb",
        "f2q_raw": res.fit_raw.fidelity,
        "f2q_raw_err": res.fit_raw.fidelity_err,
        "f2q_erasure": res.fit_erasure.fidelity,
        "f2q_erasure_err": res.fit_erasure.fidelity_err,
        "f2q_loss_excised": res.fit_loss.fidelity,
        "f2q_loss_excised_err": res.fit_loss.fidelity_err,
        "retention_loss": res.retention_loss,
        "fit_covariances": {
            "raw": res.fit_raw.covariance.tolist(),
            "erasure": res.fit_erasure.covariance.tolist(),
            "loss": res.fit_loss.covariance.tolist(),
        },
    })


@protocol("bell")
def run_bell_cmd(ctx):
    from .benchmarking import bell_protocol

    cfg = ctx.proto
    _known(cfg, {"n_phases", "noiseless"}, "bell")
    n_phases = int(cfg.get("n_phases", 16))
    noise = None if _bool(cfg.get("noiseless", "false")) else ctx.noise
    phases = np.linspace(0, 2 * np.pi, n_phases, endpoint=False)
    results = {}
    for tag, excise in (("raw", False), ("excised", True)):
        r = bell_protocol(noise, phases, ctx.shots, loss_excision=excise,
                          seed=ctx.seed)
        results[tag] = r
    ctx.emit(
        "bell_summary",
        ["variant", "p00", "p11", "contrast", "fidelity", "fidelity_err",
         "retention"],
        [
            (tag, r.p00, r.p11, r.contrast, r.fidelity, r.fidelity_err,
             r.retention)
            for tag, r in results.items()
        ],
    )
    _summary(ctx.out / "summary.json", {
        "protocol": "bell",
        "fidelity_raw": results["raw"].fidelity,
        "fidelity_excised": results["excised"].fidelity,
        "fidelity_raw_err": results["raw"].fidelity_err,
        "fidelity_excised_err": results["excised"].fidelity_err,
        "parity_phase_offset": results["excised"].phase_offset,
    })


@protocol("ramsey")
def run_ramsey_cmd(ctx):
    from .benchmarking import ramsey_envelope_time, simulate_ramsey

    cfg = ctx.proto
    _known(cfg, {"sigma_mhz", "t_max_us", "n_points", "mid_circuit_erasure"},
           "ramsey")
    sigma = 2 * np.pi * float(cfg.get("sigma_mhz", 0.053))
    t_max = float(cfg.get("t_max_us", 10.0))
    n = int(cfg.get("n_points", 26))
    erasure = _bool(cfg.get("mid_circuit_erasure", "false"))
    times = np.linspace(0.0, t_max, n)
    contrast = simulate_ramsey(sigma, times, mid_circuit_erasure=erasure)
    ctx.emit("ramsey", ["t_us", "contrast"], list(zip(times, contrast)))
    _summary(ctx.out / "summary.json", {
        "protocol": "ramsey",
        "sigma_rad_per_us": sigma,
        "t2_star_us": ramsey_envelope_time(sigma) if sigma > 0 else None,
        "mid_circuit_erasure": erasure,
    })


@protocol("erasure-roc")
def run_roc_cmd(ctx):
    from .readout import roc_sweep, shallow_trap_model

    cfg = ctx.proto
    _known(cfg, {"n_thresholds"}, "erasure-roc")
    model = shallow_trap_model()
    n = int(cfg.get("n_thresholds", 60))
    ths = np.linspace(-5, model.signal_mean + 15, n)
    reports = roc_sweep(model, ths)
    ctx.emit(
        "roc",
        ["threshold", "tp", "fp", "fidelity"],
        [(r.threshold, r.true_positive, r.false_positive, r.fidelity)
         for r in reports],
    )
    best = max(reports, key=lambda r: r.fidelity)
    _summary(ctx.out / "summary.json", {
        "protocol": "erasure-roc",
        "signal_mean": model.signal_mean,
        "best_threshold": best.threshold,
        "best_fidelity": best.fidelity,
    })


@protocol("state-prep-curve")
def run_prep_cmd(ctx):
    from .readout import shallow_trap_model, state_prep_curve

    cfg = ctx.proto
    _known(cfg, {"eps_sp", "imaging_survival", "n_thresholds"},
           "state-prep-curve")
    eps = float(cfg.get("eps_sp", ctx.noise.state_prep_error))
    surv = float(cfg.get("imaging_survival", 0.998))
    model = shallow_trap_model()
    ths = np.linspace(-5, model.signal_mean + 15, int(cfg.get("n_thresholds", 60)))
    curve = state_prep_curve(eps, model, surv, ths)
    ctx.emit("state_prep", ["threshold", "apparent_fidelity"],
             [(t, c) for t, c in zip(ths, curve)])
    _summary(ctx.out / "summary.json", {
        "protocol": "state-prep-curve",
        "eps_sp": eps,
        "imaging_survival": surv,
        "plateau": float(np.nanmax(curve)),
    })


@protocol("srd")
def run_srd_cmd(ctx):
    from .readout import SRDModel, srd_detect, srd_probabilities

    cfg = ctx.proto
    _known(cfg, {"n_trials"}, "srd")
    n = int(cfg.get("n_trials", 100000))
    model = SRDModel()
    rng = np.random.default_rng(ctx.seed)
    rows = []
    labels = {Q0: "q0", Q1: "q1", X: "x", G: "g", B: "B"}
    for lv, name in labels.items():
        probs = srd_probabilities(lv, model)
        counts = {"detected-0": 0, "detected-1": 0, "loss": 0}
        for _ in range(n):
            counts[srd_detect(lv, model, rng)] += 1
        for outcome in ("detected-0", "detected-1", "loss"):
            rows.append((name, outcome, probs[outcome], counts[outcome] / n, n))
    ctx.emit("srd",
             ["input", "outcome", "p_analytic", "p_empirical", "n_trials"],
             rows)
    _summary(ctx.out / "summary.json", {
        "protocol": "srd",
        "detected0_fidelity_q0": srd_probabilities(Q0, model)["detected-0"],
        "detected1_fidelity_q1": srd_probabilities(Q1, model)["detected-1"],
        "n_trials": n,
    })


@protocol("lifetime-fit")
def run_lifetime_cmd(ctx):
    from .ratedyn import LifetimeDataset, fit_lifetimes, predicted_observables

    cfg = ctx.proto
    _known(cfg, {"dataset"}, "lifetime-fit")
    if "dataset" in cfg:
        p = Path(cfg["dataset"])
        if not p.is_absolute():
            p = ctx.base_dir / p
        data = LifetimeDataset.from_csv(p.read_text())
    else:
        from .ratedyn import DecayModel

        data = LifetimeDataset.synthesize(
            DecayModel(110.0, 37.0, 0.4), np.linspace(2, 150, 15), 0.02,
            seed=ctx.seed,
        )
    fit = fit_lifetimes(data)
    p1m, p2m = predicted_observables(data.times, fit.model)
    ctx.emit(
        "lifetime_fit",
        ["T_us", "P1", "P1_err", "P1_model", "P2", "P2_err", "P2_model"],
        list(zip(data.times, data.p1, data.p1_err, p1m, data.p2, data.p2_err,
                 p2m)),
    )
    _summary(ctx.out / "summary.json", {
        "protocol": "lifetime-fit",
        "tau_bright_us": fit.model.tau_bright,
        "tau_bright_err": fit.tau_bright_err,
        "tau_dark_us": fit.model.tau_dark,
        "tau_dark_err": fit.tau_dark_err,
        "amplitude": fit.model.amplitude,
        "converged": fit.converged,
        "at_bound": fit.at_bound,
    })


@protocol("error-budget")
def run_budget_cmd(ctx):
    from .budget import error_budget

    cfg = ctx.proto
    _known(cfg, {"n_cz", "n_sequences"}, "error-budget")
    n_cz = _ints(cfg.get("n_cz", "2,4,6"))
    n_seq = int(cfg.get("n_sequences", 32))
    rep = error_budget(ctx.noise, n_cz_list=tuple(n_cz), n_seq=n_seq,
                       seed=ctx.seed)
    ctx.emit(
        "budget",
        ["source", "raw_process", "raw_ssb", "corrected_process",
         "corrected_ssb"],
        [e.as_row() for e in list(rep.entries) + [rep.total]],
    )
    _summary(ctx.out / "summary.json", {
        "protocol": "error-budget",
        "raw_total": rep.raw_total,
        "corrected_total": rep.corrected_total,
        "additivity_defect": rep.additivity_defect(),
        "sources": list(rep.sources),
    })


@protocol("psd-infidelity")
def run_psd_cmd(ctx):
    from .czopt import default_profile
    from .psd import FrequencyNoisePSD, mc_gate_infidelity, psd_to_uv
    from .rydberg import RydbergDrive

    cfg = ctx.proto
    _known(cfg, {"psd_file", "n_trajectories", "already_uv"}, "psd-infidelity")
    if "psd_file" not in cfg:
        raise ConfigError("psd-infidelity needs psd_file in the config")
    p = Path(cfg["psd_file"])
    if not p.is_absolute():
        p = ctx.base_dir / p
    psd = FrequencyNoisePSD.from_text(p.read_text())
    if not _bool(cfg.get("already_uv", "false")):
        psd = psd_to_uv(psd)
    n_traj = int(cfg.get("n_trajectories", 40))
    mean, err = mc_gate_infidelity(
        psd, default_profile(), RydbergDrive(), n_traj, ctx.seed,
        threads=ctx.threads,
    )
    ctx.emit("psd_infidelity",
             ["n_trajectories", "infidelity", "std_error"],
             [(n_traj, mean, err)])
    _summary(ctx.out / "summary.json", {
        "protocol": "psd-infidelity",
        "infidelity": mean,
        "std_error": err,
        "n_trajectories": n_traj,
        "psd_variance_hz2": psd.variance_hz2(),
    })


@protocol("rearrange")
def run_rearrange_cmd(ctx):
    from .assembly import (pair_grid_geometry, plan_rearrangement,
                           replay_plan, simulate_assembly)

    cfg = ctx.proto
    _known(cfg, {"n_trials", "loading_probability", "per_move_success",
                 "target_sites"}, "rearrange")
    geom = pair_grid_geometry()
    target = np.zeros(geom.n_sites, dtype=bool)
    tgt = _ints(cfg.get("target_sites", "0,1,2,3,4,5,6,7"))
    target[tgt] = True
    n_trials = int(cfg.get("n_trials", 2000))
    p_load = float(cfg.get("loading_probability", 0.5))
    p_move = float(cfg.get("per_move_success", 0.9907))
    prob, err = simulate_assembly(
        geom, target, loading_probability=p_load, per_move_success=p_move,
        n_trials=n_trials, seed=ctx.seed,
    )
    rng = np.random.default_rng(ctx.seed)
    occ = rng.random(geom.n_sites) < p_load
    plan = plan_rearrangement(occ, target, geom)
    final = replay_plan(plan, occ, geom)
    ctx.emit(
        "occupancy",
        ["site_id", "x_um", "y_um", "initial", "final", "target"],
        [
            (i, geom.sites[i][0], geom.sites[i][1], int(occ[i]),
             int(final[i]), int(target[i]))
            for i in range(geom.n_sites)
        ],
    )
    lines = []
    for k, m in enumerate(plan.moves):
        wps = " ".join(f"({x:.3f},{y:.3f})" for x, y in m.path)
        lines.append(f"{k} {m.source} {m.destination} {wps}")
    (ctx.out / "plan.txt").write_text("\n".join(lines) + "\n")
    _summary(ctx.out / "summary.json", {
        "protocol": "rearrange",
        "defect_free_probability": prob,
        "mc_error": err,
        "n_trials": n_trials,
        "example_plan_moves": len(plan),
        "example_unplaced": list(plan.unplaced_targets),
    })


@protocol("equalize")
def run_equalize_cmd(ctx):
    from .assembly import equalize_depths

    cfg = ctx.proto
    _known(cfg, {"n_sites", "initial_spread", "iterations", "gain"}, "equalize")
    n_sites = int(cfg.get("n_sites", 32))
    spread0 = float(cfg.get("initial_spread", 0.05))
    iters = int(cfg.get("iterations", 8))
    gain = float(cfg.get("gain", 0.7))
    rng = np.random.default_rng(ctx.seed)
    gains = 1.0 + spread0 * rng.standard_normal(n_sites)
    res = equalize_depths(gains, iterations=iters, gain=gain, seed=ctx.seed + 1)
    ctx.emit("equalize", ["iteration", "relative_spread"],
             list(enumerate(res.spread_history)))
    _summary(ctx.out / "summary.json", {
        "protocol": "equalize",
        "final_spread": res.final_spread,
        "iterations": iters,
        "converged": res.converged,
    })


# --- driver -----------------------------------------------------------------


class RunContext:
    def emit(self, stem, header, rows):
        rows = [list(r) for r in rows]
        write_csv(self.out / f"{stem}.csv", header, rows)
        if self.fmt == "json":
            payload = [
                {k: (v.item() if isinstance(v, (np.floating, np.integer))
                     else v) for k, v in zip(header, r)}
                for r in rows
            ]
            (self.out / f"{stem}.json").write_text(
                json.dumps(payload, sort_keys=True, indent=1) + "\n"
            )

    def __init__(self, args, run, proto, base_dir):
        self.proto = proto
        self.base_dir = base_dir
        seed = args.seed if args.seed is not None else run.get("seed")
        if seed is None:
            raise ConfigError("seed is mandatory (config [run] or --seed)")
        self.seed = int(seed)
        self.shots = int(run.get("shots", 200))
        self.threads = args.threads
        self.fmt = args.format
        self.noise = _noise_from_run(run, base_dir)
        out_root = Path(args.out if args.out else run.get("out", "runs"))
        self.out = out_root
        self.out.mkdir(parents=True, exist_ok=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fsqsim",
        description="Simulation and benchmarking suite for a fine-structure "
        "qubit tweezer experiment",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PROTOCOLS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    args = parser.parse_args(argv)

    try:
        run, proto, snapshot = (
            _parse_config(args.config, args.command)
            if args.config
            else ({}, {}, "")
        )
        _known(run, _RUN_KEYS, "run")
        base = args.config.parent if args.config else Path.cwd()
        ctx = RunContext(args, run, proto, base)
        (ctx.out / "config_snapshot.ini").write_text(
            snapshot or f"# no config file; seed={ctx.seed}\n"
        )
        PROTOCOLS[args.command](ctx)
    except (ConfigError, configparser.Error, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failures and everything else
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"fsqsim {args.command}: wrote {ctx.out} (kernel: {KERNEL_BACKEND})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
