"""Monitoring cost against stream size, with fitted log-log slopes."""
import argparse
import json

from svdrestart.evaluation import scalability_probe


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="625,1250,2500,5000")
    ap.add_argument("-k", type=int, default=10)
    ap.add_argument("-T", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = scalability_probe([int(s) for s in args.sizes.split(",")], k=args.k, T=args.T, seed=args.seed)
    rows = out["rows"]
    cols = list(rows[0])
    print(",".join(cols))
    for r in rows:
        print(",".join(str(r[c]) for c in cols))
    print(json.dumps(out["slopes"], indent=2))


if __name__ == "__main__":
    main()
