"""Fit log-power laws to the measured quantity and to both bounds across beta."""
import argparse

from gevnodal.experiment import ExperimentConfig, fit_scaling, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.5, 0.75, 1.0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=1)
    args = ap.parse_args()

    print("beta   which           a       b       residual")
    for beta in args.betas:
        res = run_sweep(ExperimentConfig(seed=args.seed, dim=args.dim, beta=beta, t_min=1e-3))
        for which in ("measurement", "main_bound", "covering_bound"):
            fr = fit_scaling(res, which)
            print(f"{beta:<6.3g} {which:15s} {fr.a:7.3f} {fr.b:7.3f} {fr.residual:.3g}")
        print(f"{'':6s} {'1/beta':15s} {1 / beta:7.3f}")


if __name__ == "__main__":
    main()
