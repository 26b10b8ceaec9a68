"""Sample Strong instances across seeds and tabulate alpha and the strong-yes report."""

import argparse
import json
import sys

from spectral_forrelation.instances import StrongParams, check_strong, sample_strong, spectral_forrelation
from spectral_forrelation.streams import stream


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--ell", type=int, default=16)
    parser.add_argument("--kappa", type=float, default=0.1)
    parser.add_argument("--v", type=int, default=2)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--budget", type=int, default=2000)
    args = parser.parse_args(argv)
    for seed in range(args.seeds):
        inst = sample_strong(StrongParams(args.n, args.ell, args.kappa, seed))
        alpha, _ = spectral_forrelation(inst)
        report = check_strong(inst, args.v, delta_budget=args.budget, rng=stream(seed, "script"))
        row = {"seed": seed, "alpha": alpha, "distinct": len(set(inst.S.elements)), **report.record()}
        print(json.dumps(row, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
