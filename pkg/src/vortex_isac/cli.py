"""Command-line entry point.

Subcommands: sense, mc, sweep-pilots, link, selftest, dump-hmatrix.
Configuration and scenario come from JSON files (angles in degrees there);
outputs are CSV files under --out.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    ConfigError,
    Scenario,
    load_run_file,
    scenario_from_dict,
    table1_config,
)
from .harness import (
    RunSpec,
    dump_hmatrix,
    run_link,
    run_mc,
    run_sense,
    run_sweep_pilots,
    selftest,
    write_mc_csv,
    write_sweep_csv,
)


def _load_inputs(args) -> tuple:
    import json

    if args.config:
        cfg, scenario = load_run_file(args.config)
    else:
        cfg, scenario = table1_config(), Scenario(targets=())
    if args.scenario:
        with open(args.scenario) as f:
            scenario = scenario_from_dict(json.load(f))
    if args.psen is not None:
        from dataclasses import replace

        cfg = replace(cfg, Psen=args.psen)
    return cfg, scenario


def _spec(args, cfg, scenario) -> RunSpec:
    return RunSpec(
        cfg=cfg,
        scenario=scenario,
        subcommand=args.command,
        seed=args.seed,
        trials=args.trials,
        out_dir=args.out,
        estimator=args.estimator,
        workers=args.workers,
        dump_cubes=getattr(args, "dump_cubes", False),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortex-isac",
        description="Vortex-wavefront integrated sensing and communication toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with {'system': {...}, 'scenario': {...}}")
        p.add_argument("--scenario", help="JSON file with {'targets': [...]} (overrides config's)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=50)
        p.add_argument("--out", default="out")
        p.add_argument(
            "--estimator",
            choices=["cdmm-vcmem", "tdmm-baseline", "cdmm-nocomp"],
            default="cdmm-vcmem",
        )
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--psen", type=int, default=None, help="override sensing pilot length")

    p_sense = sub.add_parser("sense", help="one synth->decode->estimate pipeline")
    common(p_sense)
    p_sense.add_argument("--dump-cubes", action="store_true")

    p_mc = sub.add_parser("mc", help="Monte Carlo error sweep over (snr, velocity)")
    common(p_mc)
    p_mc.add_argument("--snrs", type=float, nargs="+", default=[0, 5, 10, 15, 20])
    p_mc.add_argument("--velocities", type=float, nargs="+", default=[0, 3, 5, 8, 10])
    p_mc.add_argument(
        "--compare-baseline", action="store_true",
        help="also run the tdmm-baseline estimator on the same trials",
    )

    p_sweep = sub.add_parser("sweep-pilots", help="SE vs pilot-length trade-off")
    common(p_sweep)
    p_sweep.add_argument(
        "--psen-grid", type=int, nargs="+",
        default=[16, 24, 32, 48, 64, 96, 128, 192, 256],
    )
    p_sweep.add_argument("--snr", type=float, default=None)

    p_link = sub.add_parser("link", help="sensing-aided link evaluation for the UE target")
    common(p_link)
    p_link.add_argument("--true-csi", action="store_true", help="skip sensing, use ground truth")

    p_self = sub.add_parser("selftest", help="run the analytic identity checks")
    common(p_self)

    p_dump = sub.add_parser("dump-hmatrix", help="dump the Doppler interference matrix")
    common(p_dump)
    p_dump.add_argument("--modes", type=int, default=16, help="code size U (power of two)")
    p_dump.add_argument("--velocity", type=float, default=5.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, scenario = _load_inputs(args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    if args.command == "selftest":
        return 0 if selftest(cfg) else 1
    if args.command == "dump-hmatrix":
        path = dump_hmatrix(cfg, args.modes, args.velocity, args.out)
        print(path)
        return 0

    spec = _spec(args, cfg, scenario)
    if args.command == "sense":
        paths = run_sense(spec)
        for name, p in paths.items():
            print(f"{name}: {p}")
        return 0
    if args.command == "mc":
        estimators = (
            (spec.estimator, "tdmm-baseline") if args.compare_baseline else (spec.estimator,)
        )
        cells = run_mc(
            spec, snrs=tuple(args.snrs), velocities=tuple(args.velocities),
            estimators=estimators,
        )
        print(write_mc_csv(spec, cells))
        return 0
    if args.command == "sweep-pilots":
        rows = run_sweep_pilots(spec, psen_grid=tuple(args.psen_grid), snr_db=args.snr)
        print(write_sweep_csv(spec, rows))
        return 0
    if args.command == "link":
        print(run_link(spec, true_csi=args.true_csi))
        return 0
    parser.error(f"unhandled command {args.command}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
