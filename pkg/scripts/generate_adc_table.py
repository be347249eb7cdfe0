#!/usr/bin/env python3
"""
ADC Look-Up Table Generator
Runs Lloyd-Max on a unit Gaussian for b = 1..5 and writes src/data/adc_lut.json
"""
import argparse
import logging
import sys
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.aqnm import DEFAULT_LUT_PATH, AdcTable
from src.io_utils import save_adc_table


def main():
    parser = argparse.ArgumentParser(description="Generate the ADC quantization-scalar table")
    parser.add_argument("--b-max", type=int, default=5, help="largest tabulated resolution")
    parser.add_argument("--out", default=str(DEFAULT_LUT_PATH))
    args = parser.parse_args()
    logging.basicConfig(stream=sys.stdout, level=logging.INFO,
                        format="%(asctime)s - %(levelname)s - %(message)s")

    table = AdcTable.from_lloyd_max(b_lut_max=args.b_max)
    print(f"{'bits':<6} {'alpha':<14} {'1 - alpha':<14}")
    print("-" * 36)
    for b in range(1, args.b_max + 3):
        marker = "" if b <= args.b_max else "  (formula)"
        print(f"{b:<6} {table.alpha(b):<14.10f} {1 - table.alpha(b):<14.3e}{marker}")
    save_adc_table(table, args.out)
    print(f"\nSaved: {args.out}")


if __name__ == "__main__":
    main()
