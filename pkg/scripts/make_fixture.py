"""Write the synthetic bilingual fixture used by the tests and the demo matrix."""

import argparse
import json

from emoxling.synthetic import write_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-train", type=int, default=200)
    ap.add_argument("--n-pairs", type=int, default=300)
    args = ap.parse_args()
    paths = write_fixture(args.out_dir, seed=args.seed, n_train=args.n_train, n_pairs=args.n_pairs)
    print(json.dumps(paths, indent=2))


if __name__ == "__main__":
    main()
