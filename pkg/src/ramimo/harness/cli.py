"""Command line interface: ``ramimo {sweep,calibrate,demo,dump-patterns}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import dataclasses
import logging
import os
import sys
import time

import numpy as np

from ..channel import SystemConfig
from ..exceptions import BudgetExceededError, ConfigError, ContractViolation, InfeasibleError
from ..mode_select import ModeMetric, exhaustive_mode_search, heuristic_mode_search
from ..patterns import generate_pattern_set, write_patterns_csv
from ..precoding import fixed_rf_precoder
from .experiments import (
    Scenario,
    TrendError,
    _rbd_rate,
    calibrate,
    calibration_ensemble,
    run_experiment,
)
from .spec import ExperimentSpec, load_spec

log = logging.getLogger("ramimo")

RUNTIME_ERRORS = (ConfigError, ContractViolation, InfeasibleError, BudgetExceededError, TrendError,
                  OSError, np.linalg.LinAlgError)

DEMO_CONFIG = SystemConfig(n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=4)


def _common_flags():
    # SUPPRESS lets the flags appear before or after the subcommand.
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, help="seed base (overrides the spec file)")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials (overrides the spec file)")
    p.add_argument("--threads", type=int, help="worker threads (default 1)")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser():
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="ramimo", parents=[common],
                                     description="Reconfigurable-antenna MU-MIMO simulation sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="run a figure analogue from a spec file")
    p.add_argument("--spec", required=True, help="JSON experiment spec")

    p = sub.add_parser("calibrate", parents=[common],
                       help="build correlation sets and offline training plans")
    p.add_argument("--spec", help="JSON experiment spec (default: fig4 settings)")
    p.add_argument("--snr-db", type=float, help="SNR of the plans (default: first SNR of the spec file)")

    p = sub.add_parser("demo", parents=[common],
                       help="small N_T=4, L=4 instance checked against exhaustive search")

    p = sub.add_parser("dump-patterns", parents=[common], help="write the radiation pattern set as CSV")
    p.add_argument("--modes", type=int, default=10)
    p.add_argument("--beamwidth", type=float, default=30.0)
    p.add_argument("--exponent", type=float, default=2.0)
    return parser


def _override(spec, args):
    changes = {}
    if "seed" in args:
        changes["seed_base"] = args.seed
    if "trials" in args:
        changes["trials"] = args.trials
    if "out" in args:
        changes["output"] = args.out
    if not changes:
        return spec
    data = spec.to_dict()
    data.update(changes)
    return ExperimentSpec(**data)


def cmd_sweep(args):
    spec = _override(load_spec(args.spec), args)
    start = time.perf_counter()
    _, text = run_experiment(spec, threads=getattr(args, "threads", 1), out=spec.output)
    if spec.output is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {spec.output} ({time.perf_counter() - start:.1f} s)", file=sys.stderr)
    return 0


def cmd_calibrate(args):
    spec = load_spec(args.spec) if args.spec else ExperimentSpec("fig4")
    spec = _override(spec, args)
    if "trials" in args:
        spec.calibration_trials = args.trials
    snr = spec.snr_db[0] if args.snr_db is None else args.snr_db
    scn = Scenario.from_spec(spec)
    channels, azimuth = calibration_ensemble(scn, getattr(args, "threads", 1))
    cal = calibrate(scn, channels, azimuth, scn.cfg.with_snr(snr).noise_power, spec.n_train)
    out = getattr(args, "out", "calibration")
    os.makedirs(out, exist_ok=True)
    cal.plan_channel.save(os.path.join(out, "plan_channel_corr.json"))
    cal.plan_pattern.save(os.path.join(out, "plan_pattern_corr.json"))
    np.savez(os.path.join(out, "correlations.npz"), sector=cal.sector_corr, pattern=cal.pattern_corr)
    for name, plan in (("channel", cal.plan_channel), ("pattern", cal.plan_pattern)):
        for (lo, hi), modes in plan.sectors:
            print(f"{name:8s} [{lo:6.1f}, {hi:6.1f}) -> modes {list(modes)}")
    print(f"wrote {out}/", file=sys.stderr)
    return 0


def cmd_demo(args):
    cfg = DEMO_CONFIG
    n = getattr(args, "trials", 20)
    seed = getattr(args, "seed", 0)
    spec = ExperimentSpec("fig2", config=dataclasses.asdict(cfg), trials=n, seed_base=seed)
    scn = Scenario.from_spec(spec)
    f_rf = fixed_rf_precoder(cfg)
    rows = []
    for i in range(n):
        pool, _ = scn.realization(i)
        es = exhaustive_mode_search(ModeMetric("sum_rate", pool, cfg, f_rf=f_rf))
        mi = heuristic_mode_search(ModeMetric("sum_rate", pool, cfg, f_rf=f_rf))
        eig = heuristic_mode_search(ModeMetric("eig_sum", pool, cfg))
        eig_rate = _rbd_rate(pool, pool, eig.modes, cfg, f_rf, cfg.noise_power)
        rows.append((i, es.score, mi.score, eig_rate, es.n_evaluations, mi.n_evaluations,
                     "".join(map(str, es.modes)), "".join(map(str, mi.modes))))
    lines = ["instance,es_rate,altmi_rate,alteig_rate,es_evals,altmi_evals,es_modes,altmi_modes"]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in r) for r in rows]
    text = "\n".join(lines) + "\n"
    if "out" in args:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    ratio = np.array([r[2] / r[1] for r in rows])
    print(f"AltMI/ES rate ratio: mean {ratio.mean():.4f}, min {ratio.min():.4f}; "
          f"optimum found in {int(np.sum(ratio >= 1 - 1e-12))}/{n}", file=sys.stderr)
    return 0


def cmd_dump_patterns(args):
    patterns = generate_pattern_set(args.modes, beamwidth=args.beamwidth, exponent=args.exponent)
    if "out" in args:
        with open(args.out, "w", newline="") as fh:
            write_patterns_csv(patterns, fh)
    else:
        write_patterns_csv(patterns, sys.stdout)
    return 0


COMMANDS = {"sweep": cmd_sweep, "calibrate": cmd_calibrate, "demo": cmd_demo,
            "dump-patterns": cmd_dump_patterns}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if "verbose" in args else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("ramimo: error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except RUNTIME_ERRORS as exc:
        print(f"ramimo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def run():
    sys.exit(main())
