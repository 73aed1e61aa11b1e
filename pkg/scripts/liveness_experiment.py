"""Settlement share against window length, and chain quality, for the adversarial market simulation.

    python scripts/liveness_experiment.py --trials 200 --max-window 12
"""
import argparse
import random
import sys
from fractions import Fraction

from babel_ledger.crypto import key_from_name
from babel_ledger.liveness import SimConfig, liveness_bound, published_table, simulate, size_offer
from babel_ledger.scripts import SignedBy, asset


def setup(cfg: SimConfig, seed: int):
    rng = random.Random(seed)
    tokens = [asset(SignedBy(key_from_name(f"issuer-{k}")), f"T{k}") for k in range(3)]
    rates = {b: [(tok, Fraction(rng.randint(100, 300), 100)) for tok in tokens] for b in range(cfg.m)}
    table = published_table(rates, cfg)
    offers = [size_offer(k, tok, -rng.randint(5, 50), cfg.coverage_p, table) for k, tok in enumerate(tokens)]
    return offers, rates


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--t", type=int, default=3)
    ap.add_argument("--k", type=int, default=6)
    ap.add_argument("--front-run", type=Fraction, default=Fraction(1, 4))
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--max-window", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    base = SimConfig(m=args.m, t=args.t, delta=Fraction(1, 2), mu_q=Fraction(args.m - args.t, args.m), k=args.k,
                     rounds=60, seed=args.seed, front_run_prob=args.front_run, deceptive_rate=Fraction(1, 2))
    base.validate()
    latencies = []
    missing = 0
    for n in range(args.trials):
        cfg = SimConfig(**{**base.__dict__, "seed": args.seed + n})
        offers, rates = setup(cfg, args.seed + n)
        for o in simulate(cfg, offers, rates).per_offer:
            if o.settled_round is None:
                missing += 1
            else:
                latencies.append(o.settled_round - o.submitted_round)
    total = len(latencies) + missing
    print(f"livenessBound={liveness_bound(base.t, base.m, base.mu_q)} k={base.k} offers={total}")
    print("window,settledShare")
    for window in range(1, args.max_window + 1):
        print(f"{window},{sum(1 for x in latencies if x <= window) / total:.4f}")
    quality = simulate(SimConfig(**{**base.__dict__, "rounds": 10**4}), [], {}).chain_quality
    print(f"chainQuality={float(quality):.4f} expected={float(Fraction(base.m - base.t, base.m)):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
