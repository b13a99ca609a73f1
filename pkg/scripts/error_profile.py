"""Error accumulated by holding a fresh decomposition for d slices."""
import argparse

from _common import burst_spec
from svdrestart.evaluation import Setup, error_accumulation_profile


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variant", default="celebrity", choices=["celebrity", "community"])
    ap.add_argument("-n", type=int, default=500)
    ap.add_argument("-T", type=int, default=20)
    ap.add_argument("-k", type=int, default=20)
    ap.add_argument("--intervals", default="1,2,4,8")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    spec = burst_spec(args.variant, args.n, 4 * args.n, 2 * args.n, args.seed)
    prof = error_accumulation_profile(Setup.synthetic(spec, args.T, args.k),
                                      [int(x) for x in args.intervals.split(",")])
    print("interval,mean_r,std_r")
    for d, (mean, std) in sorted(prof.items()):
        print(f"{d},{mean:.6g},{std:.6g}")


if __name__ == "__main__":
    main()
