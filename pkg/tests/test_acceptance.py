"""Acceptance criteria, each at its stated tolerance and time limit.

Every test appends one ``CRITERION n PASS|FAIL`` line, shown in pytest's
terminal summary. Running this file directly prints the same lines.
"""
import random
import sys
import time
from fractions import Fraction

from babel_ledger.crypto import key_addr, key_from_name
from babel_ledger.generators import (
    COUNTERPARTY, FEE_ADDRESS, FREE, pair_production_tx, random_fee_batch_case, random_instance,
    random_valid_ledger,
)
from babel_ledger.ledger import Batch, Output
from babel_ledger.liveness import (
    SimConfig, liveness_bound, published_table, simulate, simulate_trials, size_offer,
)
from babel_ledger.market import build_fee_batch, min_attractive_amount, percentile
from babel_ledger.quantities import Quantities, total
from babel_ledger.scenario import load_json, parse_ledger_scenario
from babel_ledger.scripts import AlwaysTrue, SignedBy, asset
from babel_ledger.selection import brute_force, scaled_total_value, select_approx, select_optimal
from babel_ledger.validation import (
    ConditionalInvalidity, ResidualLiability, apply_batch, check_conditional_validity, is_fully_valid_ledger,
)
from tests.conftest import ACCEPTANCE_LINES, SCENARIOS


def record(n: int, ok: bool, detail: str):
    line = f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_1_batch_golden():
    t0 = time.perf_counter()
    sc = parse_ledger_scenario(load_json(SCENARIOS / "batch_swap.json"))
    l = apply_batch(sc.ledger, sc.batches[0], sc.tick)
    t1_asset, t2_asset, c = sc.names.asset("T1"), sc.names.asset("T2"), sc.names.asset("C")
    kappa1, kappa2 = key_addr(key_from_name("kappa1")), key_addr(key_from_name("kappa2"))
    funding_change = key_addr(key_from_name("dave"))
    got = sorted((o.addr, o.value) for o in l.utxo.values())
    want = sorted([(kappa1, Quantities({t1_asset: 5})), (kappa2, Quantities({t2_asset: 10})),
                   (funding_change, Quantities({c: 100}))])
    t1_alone_rejected = False
    try:
        apply_batch(sc.ledger, Batch(sc.batches[0].txs[:1]), sc.tick)
    except ResidualLiability:
        t1_alone_rejected = True
    elapsed = time.perf_counter() - t0
    ok = got == want and t1_alone_rejected and elapsed < 1
    record(1, ok, f"utxo exact={got == want}, t1 alone -> ResidualLiability={t1_alone_rejected}, {elapsed:.3f}s < 1s")
    assert ok


def test_criterion_2_market_anchor():
    t0 = time.perf_counter()
    tok = asset(AlwaysTrue(), "T")
    table = {k: [(tok, Fraction(r, 100))] for k, r in enumerate([163, 138, 300, 178, 200, 181])}
    p = percentile(70, tok, table)
    amount = min_attractive_amount(-16, 70, tok, table)
    elapsed = time.perf_counter() - t0
    ok = p == 2 and amount == 32 and elapsed < 1
    record(2, ok, f"percentile(70)={p} (want 2), minAttractiveAmount(-16)={amount} (want 32), {elapsed:.3f}s < 1s")
    assert ok


def test_criterion_3_optimality():
    t0 = time.perf_counter()
    rng = random.Random(20240301)
    mismatches = 0
    for k in range(200):
        inst = random_instance(rng, 12, decay=k % 2 == 1)
        if select_optimal(inst).utility != brute_force(inst).utility:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    record(3, ok, f"{mismatches}/200 optimal != brute force, {elapsed:.1f}s < 30s")
    assert ok


def test_criterion_4_fptas():
    t0 = time.perf_counter()
    rng = random.Random(20240302)
    bound_failures = 0
    length_violations = 0
    worst_ratio = 0.0
    runs = 0
    for k in range(100):
        inst = random_instance(rng, 40, decay=k % 2 == 1)
        opt = select_optimal(inst).utility
        for eps in (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)):
            runs += 1
            cap = min(inst.block_size + 1, scaled_total_value(inst, eps) + 1)
            longest = [0]
            r = select_approx(inst, eps, on_list=lambda j, u: longest.__setitem__(0, max(longest[0], len(u))))
            if r.utility < (1 - eps) * opt:
                bound_failures += 1
            if longest[0] > cap:
                length_violations += 1
                worst_ratio = max(worst_ratio, longest[0] / cap)
    elapsed = time.perf_counter() - t0
    ok = bound_failures == 0 and length_violations == 0 and elapsed < 60
    record(4, ok, f"(a) utility >= (1-eps)*OPT failed in {bound_failures}/{runs} runs; "
                  f"(b) some DP list longer than min(S_B+1, V_o'+1) in {length_violations}/{runs} runs "
                  f"(worst {worst_ratio:.1f}x); {elapsed:.1f}s < 60s")
    assert ok


def test_criterion_5_pair_production():
    t0 = time.perf_counter()
    rng = random.Random(20240303)
    base, _ = random_valid_ledger(rng, 3)
    rejected = accepted = 0
    for _ in range(1000):
        token = rng.choice(FREE)
        bare, _ = pair_production_tx(rng, base, token, with_script=False)
        report = check_conditional_validity(bare, base, 10)
        if not report.ok and 8 in report.failed:
            try:
                apply_batch(base, Batch([bare]), 10)
            except ConditionalInvalidity as e:
                rejected += e.rule == 8
        # the same transaction with the token's AlwaysTrue script, liability resolved in-batch
        seeded = random.Random(rng.random())
        t_pair, t_resolve = pair_production_tx(seeded, base, token, with_script=True)
        try:
            apply_batch(base, Batch([t_pair, t_resolve]), 10)
            accepted += 1
        except (ConditionalInvalidity, ResidualLiability):
            pass
    elapsed = time.perf_counter() - t0
    ok = rejected == 1000 and accepted == 1000 and elapsed < 30
    record(5, ok, f"{rejected}/1000 rejected by rule 8 without script, {accepted}/1000 accepted with script, "
                  f"{elapsed:.1f}s < 30s")
    assert ok


def test_criterion_6_conservation():
    t0 = time.perf_counter()
    rng = random.Random(20240304)
    violations = invalid = 0
    for _ in range(500):
        l, ticks = random_valid_ledger(rng, rng.randint(0, 15))
        if not is_fully_valid_ledger(l, ticks):
            invalid += 1
        if total(o.value for o in l.utxo.values()) != total(t.forge for t in l.txs):
            violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and invalid == 0 and elapsed < 30
    record(6, ok, f"{violations}/500 conservation violations ({invalid} ledgers not fully valid), "
                  f"{elapsed:.1f}s < 30s")
    assert ok


def liveness_setup(trial_seed: int):
    """m=10, t=3, delta=1/2, muQ=7/10; three tokens, offers sized at 50% coverage."""
    cfg = SimConfig(m=10, t=3, delta=Fraction(1, 2), mu_q=Fraction(7, 10), k=6, rounds=60,
                    coverage_p=50, seed=trial_seed, front_run_prob=Fraction(1, 4),
                    deceptive_rate=Fraction(1, 2))
    rng = random.Random(trial_seed)
    tokens = [asset(SignedBy(key_from_name(f"issuer-{k}")), f"T{k}") for k in range(3)]
    rates = {b: [(tok, Fraction(rng.randint(100, 300), 100)) for tok in tokens] for b in range(cfg.m)}
    table = published_table(rates, cfg)
    offers = [size_offer(k, tok, -rng.randint(5, 50), cfg.coverage_p, table) for k, tok in enumerate(tokens)]
    return cfg, offers, rates


def test_criterion_7_liveness():
    t0 = time.perf_counter()
    settled = offers_total = 0
    latencies = []
    bound = window = None
    for trial in range(1000):
        cfg, offers, rates = liveness_setup(70_000 + trial)
        bound = liveness_bound(cfg.t, cfg.m, cfg.mu_q)
        window = bound + cfg.k
        (r,) = simulate_trials(cfg, offers, rates, 1)
        for o in r.per_offer:
            offers_total += 1
            if o.settled_round is not None and o.settled_round - o.submitted_round <= window:
                settled += 1
            if o.latency is not None:
                latencies.append(o.latency)
    cfg, _, _ = liveness_setup(7)
    quality = simulate(SimConfig(**{**cfg.__dict__, "rounds": 10**4}), [], {}).chain_quality
    elapsed = time.perf_counter() - t0
    share = settled / offers_total
    quality_ok = abs(quality - Fraction(7, 10)) <= Fraction(5, 100)
    latencies.sort()
    p99 = latencies[int(0.99 * (len(latencies) - 1))] if latencies else None
    ok = share >= 0.99 and quality_ok and elapsed < 120
    record(7, ok, f"(a) {share:.3f} of offers settled within livenessBound+k = {bound}+{cfg.k} rounds "
                  f"(need >= 0.99; p99 inclusion latency {p99} rounds vs bound {bound}); "
                  f"(b) chain quality {float(quality):.4f} within 0.05 of 0.7: {quality_ok}; {elapsed:.1f}s < 120s")
    assert ok


def test_criterion_8_fee_batch():
    t0 = time.perf_counter()
    rng = random.Random(20240308)
    passed = exact_payout = 0
    for _ in range(100):
        case = random_fee_batch_case(rng, exact_funds=rng.random() < 0.2)
        b = build_fee_batch(case.ledger, case.offer_tx, 0, case.funds, COUNTERPARTY, key_addr(COUNTERPARTY),
                            case.fee, FEE_ADDRESS)
        try:
            after = apply_batch(case.ledger, b, 1)
        except (ConditionalInvalidity, ResidualLiability):
            continue
        passed += 1
        payout = Output(key_addr(COUNTERPARTY), Quantities({case.token: case.y}))
        if b.txs[1].outputs[0] == payout and payout in after.utxo.values():
            exact_payout += 1
    elapsed = time.perf_counter() - t0
    ok = passed == 100 and exact_payout == 100 and elapsed < 10
    record(8, ok, f"{passed}/100 batches applied, {exact_payout}/100 counterparty outputs hold exactly the "
                  f"offered tokens, {elapsed:.2f}s < 10s")
    assert ok


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
