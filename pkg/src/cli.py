"""
beambit command line
solve, sweep, verify and tables subcommands over the experiment harness
"""
import argparse
import logging
import sys
from typing import List, Optional

from src.acceptance import run_checks
from src.bench import ALGORITHMS, AXES, ExperimentConfig, run_sweep, solve, summarize_tables, write_csv
from src.io_utils import load_csv

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def print_separator(char="=", length=70):
    print(char * length)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beambit",
                                     description="Joint beam and ADC bit selection")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one algorithm over the configured drops")
    p.add_argument("--config", required=True)
    p.add_argument("--algo", required=True, choices=ALGORITHMS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", action="store_true", help="log every joint-selector iteration")

    p = sub.add_parser("sweep", help="sweep transmit power or reference resolution")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=sorted(AXES))
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="run the oracle and property checks")
    p.add_argument("--quick", action="store_true", help="reduced sample counts")
    p.add_argument("--with-bench", action="store_true", help="desk-scale trend checks at full drop counts")

    p = sub.add_parser("tables", help="energy/complexity tables from a sweep CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    return parser


def cmd_solve(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    rows = solve(config, args.algo, args.seed, trace=args.trace)
    write_csv(rows, args.out)
    print(f"{args.algo}: mean wsr {rows['wsr_bps_hz'].mean():.4f} bps/Hz, "
          f"mean energy {rows['energy'].mean():.4f} over {len(rows)} drops -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    table = run_sweep(config, args.axis, args.out)
    print(table[["axis_value", "algo", "mean_wsr_bps_hz", "mean_energy"]].to_string(index=False))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(quick=args.quick, with_bench=args.with_bench)
    print()
    print_separator()
    print("ACCEPTANCE SUMMARY")
    print_separator()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} - {r.name}: {r.detail}")
    print_separator()
    failed = sum(not r.passed for r in results)
    print(f"Total: {len(results)} | Passed: {len(results) - failed} | Failed: {failed}")
    return EXIT_OK if failed == 0 else EXIT_FAILED


def cmd_tables(args) -> int:
    sweep = load_csv(args.inp, required=("axis_name", "axis_value", "algo", "mean_energy",
                                         "mean_hprime_evals", "mean_active_chains",
                                         "mean_bits_per_chain"))
    table = summarize_tables(sweep)
    write_csv(table, args.out)
    print(table.to_string(index=False))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "tables": cmd_tables}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stdout, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except RuntimeError as e:
        logger.error("Internal consistency check failed: %s", e)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
