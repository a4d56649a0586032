"""Run the full 2x2 (alpha2, s) study with default settings and print the
mean angular error grid next to the reference values."""
import argparse
import json
import logging
from pathlib import Path

from projsmooth.experiment import REFERENCE_TABLE, ExperimentConfig, format_table, run_monte_carlo, write_outputs


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=ExperimentConfig.seed)
    p.add_argument("--out", type=Path, default=Path("results/table"))
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    cfg = ExperimentConfig(runs=args.runs, duration_s=args.duration, seed=args.seed,
                           output_dir=str(args.out))
    table = run_monte_carlo(cfg)
    write_outputs(table, args.out)
    summary = json.loads((args.out / "summary.json").read_text())
    print(format_table(summary))
    print("\nreference means")
    for (a, s), row in REFERENCE_TABLE.items():
        print(f"({a:.0e}, {s:.0e})  " + "  ".join(f"{k}={v:.4f}" for k, v in row.items()))


if __name__ == "__main__":
    main()
