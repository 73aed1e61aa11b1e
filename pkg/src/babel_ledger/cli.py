"""``babel-ledger`` command line: validate, market, select, sim.

Exit codes: 0 success, 1 rejection or failed check, 2 unreadable input or
guard violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import liveness, market, selection
from .ledger import tx_id
from .scenario import (
    SCHEMA_VERSION, ScenarioError, format_rational, load_json, parse_instance, parse_ledger_scenario,
    parse_market_scenario, parse_rational, parse_sim_config, rational_json,
)
from .validation import (
    ConditionalInvalidity, ResidualLiability, ValidationReport, apply_batch, check_conditional_validity,
    is_conditionally_valid_ledger, residual_liabilities,
)

log = logging.getLogger("babel_ledger")

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2
MAX_COMPARE = 12


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("BABEL_LEDGER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _emit(args, payload: dict, csv_rows: Optional[list[dict]] = None):
    """JSON with --json (or when there is no tabular form), CSV otherwise; --out also writes a file."""
    if args.json or csv_rows is None:
        text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(csv_rows[0]) if csv_rows else [], lineterminator="\n")
        w.writeheader()
        w.writerows(csv_rows)
        text = buf.getvalue()
    sys.stdout.write(text)
    if args.out and args.command != "sim":
        Path(args.out).write_text(text)


def _json_default(x):
    if isinstance(x, Fraction):
        return rational_json(x)
    if isinstance(x, bytes):
        return x.hex()
    raise TypeError(f"not JSON serializable: {x!r}")


# ---------------------------------------------------------------------------
# validate


def _report_json(report: ValidationReport) -> dict:
    return report.to_json()


def cmd_validate(args) -> int:
    sc = parse_ledger_scenario(load_json(args.scenario))
    tick = sc.tick if args.tick is None else args.tick
    label = lambda h: sc.labels.get(h, h.hex())
    ledger_ok = is_conditionally_valid_ledger(sc.ledger, sc.ticks)
    residual = residual_liabilities(sc.ledger)
    out = {"schemaVersion": SCHEMA_VERSION, "tick": tick,
           "ledger": {"transactions": len(sc.ledger), "conditionallyValid": ledger_ok,
                      "fullyValid": ledger_ok and not residual},
           "batches": []}
    ok = ledger_ok and not residual
    ledger = sc.ledger
    for k, b in enumerate(sc.batches):
        entry = {"index": k, "transactions": [label(tx_id(t)) for t in b.txs], "accepted": False,
                 "reports": [], "error": None}
        prefix = ledger
        for t in b.txs:
            # per-transaction reports against the batch prefix, for display only
            rep = check_conditional_validity(t, prefix, tick)
            entry["reports"].append({"tx": label(tx_id(t)), **_report_json(rep)})
            if not rep.ok:
                break
            prefix = prefix.cons(t)
        try:
            ledger = apply_batch(ledger, b, tick)
            entry["accepted"] = True
        except ConditionalInvalidity as e:
            entry["error"] = {"kind": "ConditionalInvalidity", "txIndex": e.tx_index, "rule": e.rule,
                              "failedRules": e.report.failed}
            ok = False
        except ResidualLiability as e:
            entry["error"] = {"kind": "ResidualLiability",
                              "outputs": [{"tx": label(r.id), "index": r.index} for r in sorted(e.refs)]}
            ok = False
        log.info("batch %d accepted=%s", k, entry["accepted"])
        out["batches"].append(entry)
    out["utxo"] = [{"tx": label(ref.id), "index": ref.index, "value": sc.names.bundle_json(o.value)}
                   for ref, o in sorted(ledger.utxo.items())]
    out["accepted"] = ok
    _emit(args, out)
    return EXIT_OK if ok else EXIT_REJECTED


# ---------------------------------------------------------------------------
# market


def cmd_market(args) -> int:
    sc = parse_market_scenario(load_json(args.scenario))
    rows = []
    try:
        for oid, offer in sc.offers:
            token = sc.names.asset(args.token) if args.token else offer.tokens[0][0]
            pct = market.percentile(args.percentile, token, sc.rates)
            row = {
                "offerId": oid,
                "token": sc.names.asset_label(token),
                "liability": offer.liability,
                "percentile": format_rational(pct),
                "minAttractiveAmount": market.min_attractive_amount(offer.liability, args.percentile, token, sc.rates),
                "offeredAmount": dict(offer.tokens).get(token, 0),
                "attractedBuyers": sum(market.is_attractive(offer, r) for r in sc.rates.values()),
                "batchValue": market.batch_val(offer, sc.nominal).initial_value if sc.nominal else "",
            }
            rows.append(row)
        if not sc.offers:
            if not args.token:
                raise UsageError("--token is required when the scenario has no offers")
            pct = market.percentile(args.percentile, sc.names.asset(args.token), sc.rates)
            rows.append({"offerId": "", "token": args.token, "liability": "", "percentile": format_rational(pct),
                         "minAttractiveAmount": "", "offeredAmount": "", "attractedBuyers": "", "batchValue": ""})
    except (market.NoRates, market.UnpricedToken) as e:
        sys.stderr.write(f"error: {e}\n")
        _emit(args, {"schemaVersion": SCHEMA_VERSION, "error": {"kind": type(e).__name__, "message": str(e)}})
        return EXIT_REJECTED
    _emit(args, {"schemaVersion": SCHEMA_VERSION, "percentileRank": args.percentile, "offers": rows}, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# select


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    r = fn(*a, **kw)
    return r, time.perf_counter() - t0


def _result_json(mode: str, r: selection.SelectionResult, wall: float) -> dict:
    return {"mode": mode, "block": r.block, "utility": r.utility, "residual": r.residual,
            "wallTime": round(wall, 6)}


def cmd_select(args) -> int:
    inst = parse_instance(load_json(args.instance))
    eps = Fraction(parse_rational(args.eps)) if args.eps is not None else Fraction(1, 10)
    if not 0 < eps < 1:
        raise UsageError("--eps must lie strictly between 0 and 1")
    n = len(inst.mempool)
    if args.mode == "oracle" and n > selection.MAX_BRUTE_FORCE:
        raise UsageError(f"oracle mode handles at most {selection.MAX_BRUTE_FORCE} candidates, got {n}")
    if args.compare and n > MAX_COMPARE:
        raise UsageError(f"--compare handles at most {MAX_COMPARE} candidates, got {n}")
    if args.mode == "approx" and not inst.mempool:
        raise UsageError("approx mode needs a nonempty mempool")

    runs = {
        "optimal": lambda: selection.select_optimal(inst),
        "approx": lambda: selection.select_approx(inst, eps),
        "oracle": lambda: selection.brute_force(inst),
    }
    primary, wall = _timed(runs[args.mode])
    results = [_result_json(args.mode, primary, wall)]
    checks = []
    if args.compare:
        opt, w_opt = (primary, wall) if args.mode == "optimal" else _timed(runs["optimal"])
        oracle, w_or = (primary, wall) if args.mode == "oracle" else _timed(runs["oracle"])
        if args.mode != "optimal":
            results.append(_result_json("optimal", opt, w_opt))
        if args.mode != "oracle":
            results.append(_result_json("oracle", oracle, w_or))
        checks.append({"check": "optimal == oracle", "ok": opt.utility == oracle.utility,
                       "lhs": opt.utility, "rhs": oracle.utility})
        if args.mode == "approx":
            bound = (1 - eps) * opt.utility
            checks.append({"check": "approx >= (1-eps) * optimal", "ok": primary.utility >= bound,
                           "lhs": primary.utility, "rhs": format_rational(bound)})
    ok = all(c["ok"] for c in checks)
    payload = {"schemaVersion": SCHEMA_VERSION, "n": n, "blockSize": inst.block_size, "reserve": inst.reserve,
               "eps": format_rational(eps) if args.mode == "approx" else None,
               "results": results, "checks": checks, "ok": ok}
    rows = [{"mode": r["mode"], "block": " ".join(map(str, r["block"])), "utility": r["utility"],
             "residual": r["residual"], "wallTime": r["wallTime"]} for r in results]
    _emit(args, payload, rows)
    for c in checks:
        if not c["ok"]:
            sys.stderr.write(f"check failed: {c['check']} ({c['lhs']} vs {c['rhs']})\n")
    return EXIT_OK if ok else EXIT_REJECTED


# ---------------------------------------------------------------------------
# sim


TRIAL_COLUMNS = ["trial", "seed", "offerId", "submittedRound", "includedRound", "includedBy", "settledRound"]


def build_sim_offers(sc) -> list[market.BabelOffer]:
    cfg = sc.config
    table = liveness.published_table(sc.rates, cfg)
    offers = []
    for k, (tok, liability, amount) in enumerate(sc.offers):
        token = sc.names.asset(tok)
        if amount is None:
            offers.append(liveness.size_offer(k, token, liability, cfg.coverage_p, table))
        else:
            offers.append(market.BabelOffer(k.to_bytes(32, "big"), ((token, amount),), liability))
    return offers


def cmd_sim(args) -> int:
    sc = parse_sim_config(load_json(args.config), seed=args.seed)
    try:
        sc.config.validate()
        offers = build_sim_offers(sc)
        results = liveness.simulate_trials(sc.config, offers, sc.rates, args.trials)
    except liveness.InvalidConfig as e:
        sys.stderr.write(f"invalid config: {e}\n")
        return EXIT_REJECTED
    except market.MarketError as e:
        sys.stderr.write(f"invalid config: {e}\n")
        return EXIT_REJECTED
    summary = liveness.summarize(sc.config, results)
    summary["seed"] = sc.config.seed
    rows = []
    for n, r in enumerate(results):
        for o in r.per_offer:
            rows.append({"trial": n, "seed": sc.config.seed + n, "offerId": o.offer_id,
                         "submittedRound": o.submitted_round,
                         "includedRound": "" if o.included_round is None else o.included_round,
                         "includedBy": o.included_by or "",
                         "settledRound": "" if o.settled_round is None else o.settled_round})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trials.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TRIAL_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    _emit(args, summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed for randomized commands")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="emit JSON instead of CSV")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file (sim: directory)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = argparse.ArgumentParser(prog="babel-ledger", parents=[common], description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", parents=[common], help="apply a scenario's batches and report per rule")
    v.add_argument("scenario")
    v.add_argument("--tick", type=int, default=None)
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("market", parents=[common], help="percentile, minimum amounts and offer values")
    m.add_argument("scenario")
    m.add_argument("--percentile", type=int, default=50)
    m.add_argument("--token", default=None)
    m.set_defaults(func=cmd_market)

    s = sub.add_parser("select", parents=[common], help="block selection on a mempool instance")
    s.add_argument("instance")
    s.add_argument("--mode", choices=["optimal", "approx", "oracle"], default="optimal")
    s.add_argument("--eps", default=None, help="approximation parameter, e.g. 1/2")
    s.add_argument("--compare", action="store_true")
    s.set_defaults(func=cmd_select)

    r = sub.add_parser("sim", parents=[common], help="liveness simulation")
    r.add_argument("config")
    r.add_argument("--trials", type=int, default=100)
    r.set_defaults(func=cmd_sim)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("json", False), ("out", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.command == "market" and not 0 < args.percentile <= 100:
        parser.error("--percentile must lie in (0, 100]")
    if args.command == "sim" and args.trials < 1:
        parser.error("--trials must be positive")
    try:
        return args.func(args)
    except (ScenarioError, UsageError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
