"""Command-line front end.

    flowgp design     maximin LHS of training initial conditions
    flowgp simulate   ground-truth trajectory
    flowgp train      fit one GP per flow-map component
    flowgp emulate    ensemble prediction with uncertainty and horizon
    flowgp benchmark  MAE/RMSE over random initial conditions

Settings come from defaults, then ``--config FILE`` (a ``[run]`` section
of ``key = value`` lines), then command-line flags. Output goes to
``--out``, else ``$FLOWGP_OUTPUT_DIR``, else ``./flowgp-out``. Every
subcommand writes ``manifest.ini``, which can be passed back as
``--config`` to reproduce the run.

Exit codes: 0 success, 1 numerical/runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, design as design_mod, dynamics, emulator
from .config import RunConfig, config_from_mapping, load_config
from .errors import FlowGPError, InputError

log = logging.getLogger("flowgp")

_FLAGS = {
    # flag: (config key, type, help)
    "--system": ("system", str, "lorenz | vanderpol | hindmarshrose"),
    "--box-lower": ("box_lower", str, "training box lower corner, comma separated"),
    "--box-upper": ("box_upper", str, "training box upper corner"),
    "--ic-lower": ("ic_lower", str, "benchmark initial-condition box lower corner"),
    "--ic-upper": ("ic_upper", str, "benchmark initial-condition box upper corner"),
    "--x0": ("x0", str, "initial condition, comma separated"),
    "--n": ("n", int, "training design size (default 15 d)"),
    "--dt": ("dt", float, "time step (default 0.01)"),
    "--T": ("T", float, "final time"),
    "--M": ("M", int, "random Fourier features (default 250)"),
    "--S": ("S", int, "realisations (default 100)"),
    "--seed": ("seed", int, "design / fitting seed"),
    "--master-seed": ("master_seed", int, "realisation seed"),
    "--lhs-iterations": ("lhs_iterations", int, "maximin swap proposals"),
    "--substeps": ("substeps", int, "RK4 substeps per dt"),
    "--n-inits": ("n_inits", int, "benchmark initial conditions"),
    "--bench-seed": ("bench_seed", int, "seed for benchmark initial conditions"),
    "--workers": ("workers", int, "parallel processes"),
    "--penalty": ("penalty", float, "change-point penalty factor"),
    "--cp-variance": ("cp_variance", float, "change-point noise variance (<= 0: series variance)"),
    "--divergence-threshold": ("divergence_threshold", float, "abort when |x| exceeds this"),
    "--out": ("output_dir", str, "output directory"),
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file with a [run] section")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                        help="override a system parameter (repeatable)")
    for flag, (dest, typ, help_) in _FLAGS.items():
        common.add_argument(flag, dest=dest, type=typ, default=None, help=help_)
    common.add_argument("--log-sd", dest="log_sd", action="store_const", const="true", default=None,
                        help="detect the horizon on log10(SD) instead of raw SD")
    common.add_argument("--warn-outside-box", dest="warn_outside_box", action="store_const", const="true",
                        default=None, help="warn when a rollout leaves the training box")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="flowgp", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="write the training design")
    sub.add_parser("simulate", parents=[common], help="simulate the true trajectory")
    sub.add_parser("train", parents=[common], help="fit the flow-map emulator")
    for name, help_ in (("emulate", "ensemble prediction from x0"), ("benchmark", "MAE/RMSE benchmark")):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--model", help="emulator file written by 'train' (trains afresh if omitted)")
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {dest: getattr(args, dest) for dest, *_ in _FLAGS.values()}
    overrides["log_sd"] = args.log_sd
    overrides["warn_outside_box"] = args.warn_outside_box
    for item in args.param:
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--param expects NAME=VALUE, got {item!r}")
        overrides[f"param_{name.strip()}"] = value
    return config_from_mapping(overrides, cfg).resolved()


def _outdir(cfg):
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output directory {out}: {err}") from err
    return out


def _design(cfg):
    return emulator.training_design(cfg.n, cfg.box(), cfg.seed, cfg.lhs_iterations)


def cmd_design(cfg):
    out = _outdir(cfg)
    d = _design(cfg)
    path = design_mod.write_design_csv(d, out / "design.csv")
    cfg.write(out / "manifest.ini", {"command": "design", "design": path.name})
    print(f"mean pairwise distance: {design_mod.mean_pairwise_distance(d.points):.17g}")
    print(f"wrote {path}")
    return 0


def cmd_simulate(cfg):
    out = _outdir(cfg)
    traj = dynamics.simulate_trajectory(cfg.spec(), cfg.x0, cfg.T, cfg.dt, cfg.substeps,
                                        threshold=cfg.divergence_threshold)
    path = dynamics.write_trajectory_csv(traj, out / "trajectory.csv")
    cfg.write(out / "manifest.ini", {"command": "simulate", "trajectory": path.name})
    print(f"wrote {path} ({traj.n_step + 1} rows)")
    return 0


def _train(cfg):
    sys_ = cfg.spec()
    if cfg.n < sys_.dim + 2:
        raise InputError(f"n = {cfg.n} is too small; need n >= d + 2 = {sys_.dim + 2}")
    return emulator.train(sys_, cfg.n, cfg.box(), cfg.dt, seed=cfg.seed, M=cfg.M,
                          lhs_iterations=cfg.lhs_iterations, substeps=cfg.substeps,
                          threshold=cfg.divergence_threshold)


def _load_or_train(cfg, model_path):
    if not model_path:
        return _train(cfg)
    try:
        em = emulator.FlowMapEmulator.loads(Path(model_path).read_text())
    except OSError as err:
        raise InputError(f"cannot read model {model_path}: {err}") from err
    if em.system.kind != cfg.system:
        raise InputError(f"model is for {em.system.kind}, config says {cfg.system}")
    return em


def cmd_train(cfg):
    out = _outdir(cfg)
    em = _train(cfg)
    path = out / "model.json"
    path.write_text(em.dumps())
    cfg.write(out / "manifest.ini", {"command": "train", "model": path.name})
    for i, m in enumerate(em.models):
        print(f"x{i + 1}: delta = {np.array2string(m.kernel.length_scales, precision=6)}"
              f"  sigma2 = {m.kernel.signal_variance:.6g}"
              f"  beta = {np.array2string(m.trend.coefficients, precision=6)}"
              f"  profile loglik = {m.objective:.6f}  jitter = {m.jitter:g}")
    print(f"wrote {path}")
    return 0


def cmd_emulate(cfg, model_path=None):
    from .plotting import plot_ensemble

    out = _outdir(cfg)
    em = _load_or_train(cfg, model_path)
    res = emulator.ensemble_predict(em, cfg.x0, cfg.T, cfg.S, cfg.master_seed, cfg.workers,
                                    **cfg.horizon_kwargs())
    summary = emulator.write_summary_csv(res, out / "summary.csv")
    emulator.write_realisation_csvs(res, out / "realisations")
    with (out / "horizon.csv").open("w") as fh:
        fh.write("dim,horizon\n")
        for i, h in enumerate(res.horizon):
            fh.write(f"{i + 1},{h:.17g}\n")
    truth = None
    try:
        truth = dynamics.simulate_trajectory(em.system, cfg.x0, cfg.T, em.dt, em.substeps,
                                             threshold=em.threshold)
        dynamics.write_trajectory_csv(truth, out / "truth.csv")
    except FlowGPError as err:
        log.warning("truth simulation failed: %s", err)
    try:
        plot_ensemble(out, res, None if truth is None else truth.states)
    except Exception as err:  # plots are best effort
        log.warning("plotting failed: %s", err)
    cfg.write(out / "manifest.ini", {
        "command": "emulate", "summary": summary.name, "model": model_path or "",
        "diverged": ",".join(map(str, res.diverged)),
    })
    print("horizon: " + ", ".join(f"x{i + 1}={h:g}" for i, h in enumerate(res.horizon)))
    if res.diverged:
        print(f"{len(res.diverged)} of {cfg.S} realisations diverged and were excluded")
    print(f"wrote {summary}")
    return 0


def cmd_benchmark(cfg, model_path=None):
    out = _outdir(cfg)
    em = _load_or_train(cfg, model_path)
    rep = analysis.benchmark(em, cfg.n_inits, cfg.ic_box(), cfg.T, seed=cfg.bench_seed, S=cfg.S,
                             master_seed=cfg.master_seed, workers=cfg.workers, **cfg.horizon_kwargs())
    p1 = analysis.write_benchmark_csv(rep, out / "benchmark.csv")
    p2 = analysis.write_boxplot_csv(rep, out / "boxplot.csv")
    cfg.write(out / "manifest.ini", {"command": "benchmark", "report": p1.name, "summary": p2.name,
                                     "model": model_path or "", "failures": len(rep.failures)})
    for row in rep.summary():
        print(f"x{row['dim']} {row['method']:8s} {row['metric']:4s} median={row['median']:.4g} "
              f"q1={row['q1']:.4g} q3={row['q3']:.4g} n={row['count']}")
    for f in rep.failures:
        print(f"init {f[0]} {f[1]}: {f[2]}")
    print(f"wrote {p1} and {p2}")
    return 0


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        cmd = args.command
        if cmd in ("emulate", "benchmark"):
            return globals()[f"cmd_{cmd}"](cfg, args.model)
        return globals()[f"cmd_{cmd}"](cfg)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FlowGPError, OSError, ArithmeticError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
