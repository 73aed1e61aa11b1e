"""Time exact and approximate block selection on random instances; write one CSV row per run.

    python scripts/selection_benchmark.py --instances 50 --n-max 40 --out selection.csv
"""
import argparse
import csv
import random
import sys
import time
from fractions import Fraction

from babel_ledger.generators import random_instance
from babel_ledger.selection import brute_force, scaled_total_value, select_approx, select_optimal

EPSILONS = (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2))
BRUTE_FORCE_LIMIT = 14


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--n-max", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    rng = random.Random(args.seed)
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out)
    w.writerow(["instance", "n", "model", "algorithm", "eps", "utility", "optimum", "ratio",
                "longestList", "listCap", "seconds"])
    for k in range(args.instances):
        inst = random_instance(rng, args.n_max, decay=k % 2 == 1)
        n = len(inst.mempool)
        t0 = time.perf_counter()
        opt = select_optimal(inst).utility
        w.writerow([k, n, inst.model.mode, "optimal", "", opt, opt, 1, "", "", f"{time.perf_counter() - t0:.4f}"])
        if n <= BRUTE_FORCE_LIMIT:
            t0 = time.perf_counter()
            bf = brute_force(inst).utility
            w.writerow([k, n, inst.model.mode, "brute_force", "", bf, opt, 1 if opt == 0 else float(bf / opt),
                        "", "", f"{time.perf_counter() - t0:.4f}"])
        for eps in EPSILONS:
            longest = [0]
            t0 = time.perf_counter()
            r = select_approx(inst, eps, on_list=lambda j, u: longest.__setitem__(0, max(longest[0], len(u))))
            secs = time.perf_counter() - t0
            cap = min(inst.block_size + 1, scaled_total_value(inst, eps) + 1)
            ratio = 1 if opt == 0 else float(r.utility / opt)
            w.writerow([k, n, inst.model.mode, "approx", str(eps), r.utility, opt, f"{ratio:.4f}",
                        longest[0], cap, f"{secs:.4f}"])
    if out is not sys.stdout:
        out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
