"""Run E1-E9 at their default sizes and append one JSON record per experiment to a file."""

import argparse
import json
import sys

from spectral_forrelation.harness import EXPERIMENT_IDS, ExperimentConfig, run_experiment


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="experiments.jsonl")
    parser.add_argument("--only", nargs="*", choices=EXPERIMENT_IDS, default=list(EXPERIMENT_IDS))
    args = parser.parse_args(argv)
    failed = []
    with open(args.out, "a") as fh:
        for e in args.only:
            report = run_experiment(ExperimentConfig(e, seed=args.seed))
            fh.write(json.dumps(report.record(), sort_keys=True) + "\n")
            fh.flush()
            print(report.text())
            if report.passed is False:
                failed.append(e)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
