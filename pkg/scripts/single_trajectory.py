"""Simulate one scenario, run all four estimators and write plot-ready CSVs:
scenario.csv, vmf_filter.csv, vmf_smoother.csv, gauss_filter.csv,
gauss_smoother.csv."""
import argparse
from pathlib import Path

import numpy as np

from projsmooth.dynamics import ScenarioConfig, simulate_scenario, write_scenario_csv
from projsmooth.experiment import error_window, trajectory_errors
from projsmooth.gaussian import norm_constrained_estimates, run_gaussian_filter, run_gaussian_smoother
from projsmooth.projection import run_vmf_filter, run_vmf_smoother, write_trajectory_csv
from projsmooth.vmf import MeasurementModel


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--alpha2", type=float, default=1e-2)
    p.add_argument("--s", type=float, default=1e-2)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("results/trajectory"))
    args = p.parse_args()

    cfg = ScenarioConfig(duration_s=args.duration, gamma2=args.s,
                         model=MeasurementModel(9.82, args.alpha2), seed=args.seed)
    sc = simulate_scenario(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_scenario_csv(sc, args.out / "scenario.csv")

    vf = run_vmf_filter(sc, args.s, cfg.model)
    vs = run_vmf_smoother(vf, sc, args.s)
    gf = run_gaussian_filter(sc, args.s, cfg.model)
    gs = run_gaussian_smoother(gf, sc, args.s)
    gf_est = norm_constrained_estimates(gf.means)[0]
    gs_est = norm_constrained_estimates(gs.means)[0]

    write_trajectory_csv(args.out / "vmf_filter.csv", sc.times, vf.theta_f, vf.modes)
    write_trajectory_csv(args.out / "vmf_smoother.csv", sc.times, vs.theta_s, vs.modes)
    write_trajectory_csv(args.out / "gauss_filter.csv", sc.times, gf.means, gf_est, param_name="mean")
    write_trajectory_csv(args.out / "gauss_smoother.csv", sc.times, gs.means, gs_est, param_name="mean")

    k = error_window(sc)
    for name, est in [("VMFF", vf.modes), ("VMFS", vs.modes), ("GF", gf_est), ("GS", gs_est)]:
        print(f"{name}: {float(np.asarray(trajectory_errors(sc.truth[k:], est[k:]))):.4f} deg")
    print(f"wrote CSVs to {args.out}")


if __name__ == "__main__":
    main()
