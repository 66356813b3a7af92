"""Command line entry point.

Exit codes: 0 success, 1 bad config or I/O, 2 certified infeasible, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import InfeasibleError
from .harness import (SWEEP_HEADER, cmd_constants, cmd_design, cmd_sweep,
                      cmd_validate, load_config)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="texplore",
        description="Targeted exploration input design for linear system "
        "identification with finite-sample guarantees.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--preset", choices=["paper_example"],
                        help="expand a built-in config before applying overrides")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="override the output directory")

    sp = sub.add_parser("design", help="solve the exploration design and save it")
    common(sp)

    sp = sub.add_parser("validate", help="Monte Carlo validation of a saved design")
    common(sp)
    sp.add_argument("--design", help="design.json path (default: <out>/design.json)")
    sp.add_argument("--replicas", type=int, help="override the replica count")

    sp = sub.add_parser("sweep", help="horizon sweep, design only")
    common(sp)

    sp = sub.add_parser("constants", help="audit the bound constants")
    common(sp)
    return p


def _run(args) -> int:
    cfg = load_config(
        path=args.config,
        preset=args.preset,
        seed=args.seed,
        out_dir=args.out,
        replicas=getattr(args, "replicas", None),
    )
    if args.command == "design":
        doc = cmd_design(cfg)
        print(f"gamma_e = {doc['gamma_e']:.6g}  (gamma_e^2 = {doc['gamma_e_sq']:.6g})")
        print(f"outer iterations: {doc['n_outer']}, converged: {doc['converged']}, "
              f"certified: {doc['certified']}")
        print(f"wrote design.json and design.txt to {cfg.out_dir}")
        return 0 if doc["certified"] else 3
    if args.command == "validate":
        summary = cmd_validate(cfg, design_path=args.design)
        print(f"replicas: {summary['replicas']}")
        print(f"goal success rate:   {summary['success_rate']:.4f}")
        print(f"containment rate:    {summary['containment_rate']:.4f}")
        print(f"noise bound rate:    {summary['noise_bound_rate']:.4f}")
        print(f"min excitation margin: {summary['min_excitation_margin']:.3e}")
        print(f"wrote validation.csv and validation.json to {cfg.out_dir}")
        return 0
    if args.command == "sweep":
        rows = cmd_sweep(cfg)
        print(SWEEP_HEADER)
        for row in rows:
            ge = "" if row["gamma_e_sq"] is None else f"{row['gamma_e_sq']:.6g}"
            print(f"{row['T']},{row['Ddes_norm']:.6g},{ge},...,{row['iters']},{row['status']}")
        print(f"wrote sweep.csv to {cfg.out_dir}")
        return 0
    if args.command == "constants":
        doc = cmd_constants(cfg)
        print(json.dumps(doc["values"], indent=2, sort_keys=True))
        print(f"scenario samples: {doc['n_scenario_samples']}")
        print(f"wrote constants.json to {cfg.out_dir}")
        return 0
    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        if e.margins:
            for name, m in sorted(e.margins.items()):
                print(f"  {name}: margin {m:.3e}", file=sys.stderr)
        return 2
    except (ValueError, json.JSONDecodeError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except RuntimeError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
