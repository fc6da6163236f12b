"""Random non-crossing chord ensembles: length over crossing count, train/test split."""
import argparse

import numpy as np

from gevnodal.experiment import chord_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ensembles", type=int, default=200)
    ap.add_argument("--kmax", type=int, default=50)
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(5)))
    args = ap.parse_args()

    for seed in args.seeds:
        data = np.array(chord_study(args.ensembles, args.kmax, seed=seed))
        # probe radius is 1, so the estimate is C * n
        ratio = data[:, 0] / data[:, 1]
        half = len(ratio) // 2
        C = ratio[:half].max()
        print(f"seed {seed}: C_train={C:.4f} test_max={ratio[half:].max():.4f} "
              f"violations={int(np.sum(ratio[half:] > C))}")


if __name__ == "__main__":
    main()
