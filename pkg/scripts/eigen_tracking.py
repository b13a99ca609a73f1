"""RMSE of the tracked leading eigenvalue under first-order updates."""
import argparse

from _common import burst_spec
from svdrestart.engine import LWI2, HeuFL, HeuFT, Timers
from svdrestart.evaluation import Setup, eigen_tracking


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variant", default="celebrity", choices=["celebrity", "community"])
    ap.add_argument("-n", type=int, default=200)
    ap.add_argument("-T", type=int, default=20)
    ap.add_argument("-k", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=3)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args(argv)

    policies = [Timers(), LWI2(), HeuFL(), HeuFT()]
    print("seed," + ",".join(p.name for p in policies))
    for seed in range(args.seeds):
        spec = burst_spec(args.variant, args.n, 4 * args.n, 2 * args.n, seed)
        out = eigen_tracking(Setup.synthetic(spec, args.T, args.k), policies, args.restarts)
        print(f"{seed}," + ",".join(f"{out[p.name]:.6g}" for p in policies), flush=True)


if __name__ == "__main__":
    main()
