"""Command line entry point: ``simulate`` runs a distortion sweep, ``oracle-check``
compares the placement MILP with exhaustive enumeration on small instances."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiment import ExperimentConfig, emit_csv, run_sweep, write_artifacts
from .flows import FULL, HALF, brute_force_placement, random_instance, solve_flow, verify_solution

log = logging.getLogger("cellfree_fronthaul")


def _load_config(path) -> ExperimentConfig:
    return ExperimentConfig.load(path) if path else ExperimentConfig()


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duplex is not None:
        changes["duplex"] = args.duplex
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    res = run_sweep(cfg, record_runtime=args.timing)
    emit_csv(res.rows, out / "sweep.csv")
    write_artifacts(res, out, export_mps_files=args.export_mps)
    failed = [r for r in res.rows if np.isnan(r.objective)]
    log.info("wrote %d rows to %s", len(res.rows), out / "sweep.csv")
    if failed:
        log.warning("%d rows without a solver result", len(failed))
    return 0


def cmd_oracle_check(args) -> int:
    cfg = _load_config(args.config)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 99]))
    bad = 0
    for i in range(args.instances):
        L, K = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        Q, N = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        inp = random_instance(rng, L=L, K=K, Q=Q, N=N)
        for mode in (FULL, HALF):
            fs = solve_flow(inp, mode, backend=cfg.backend)
            ref = brute_force_placement(inp, mode)
            viol = verify_solution(fs, inp)
            ok = abs(fs.objective - ref) <= 1e-6 and not viol
            bad += not ok
            print(
                f"instance {i:3d} L={L} K={K} Q={Q} N={N} {mode:4s} milp={fs.objective:.9g} "
                f"enum={ref:.9g} violations={len(viol)} {'ok' if ok else 'MISMATCH'}"
            )
    print(f"{2 * args.instances - bad}/{2 * args.instances} solves agree")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellfree-fronthaul", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a distortion sweep and write sweep.csv")
    s.add_argument("--config", help="JSON file with ExperimentConfig keys (defaults if omitted)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, help="override the configured seed")
    s.add_argument("--duplex", choices=["full", "half", "both"], help="override the configured duplex mode")
    s.add_argument("--export-mps", action="store_true", help="also write every MILP as an MPS file")
    s.add_argument("--timing", action="store_true", help="record wall-clock time in runtime_s")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle-check", help="MILP against brute-force placement on small instances")
    o.add_argument("--config", help="JSON config; seed and backend are used")
    o.add_argument("--instances", type=int, default=50)
    o.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
