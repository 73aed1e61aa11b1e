"""Conditional validity, full ledger validity and atomic batch application."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .crypto import OPEN_ADDRESS, OPEN_KEY, key_addr, sign, verify
from .ledger import (
    Batch, Ledger, Output, OutputRef, Tx, get_spent_output, tx_id,
)
from .quantities import Quantities, total
from .scripts import (
    AlwaysFalse, AlwaysTrue, ForbidPairProduction, PolicyScript, PrimaryCurrency, SignedBy,
    script_addr,
)

RULE_NAMES = {
    1: "tick within validity interval",
    3: "inputs refer to unspent outputs",
    4: "value is preserved",
    5: "no output is locally double spent",
    6: "all inputs validate",
    7: "validator scripts match output addresses",
    8: "forging",
    9: "all scripts validate",
}
# rule 2 (non-negative outputs) is deliberately absent


@dataclass(frozen=True)
class RuleResult:
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    rules: dict[int, RuleResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rules.values())

    @property
    def failed(self) -> list[int]:
        return sorted(k for k, r in self.rules.items() if not r.ok)

    def to_json(self) -> dict:
        return {
            "overall": self.ok,
            "rules": {
                str(k): {"name": RULE_NAMES[k], "ok": r.ok, "detail": r.detail}
                for k, r in sorted(self.rules.items())
            },
        }


class BatchError(Exception):
    pass


class ConditionalInvalidity(BatchError):
    def __init__(self, tx_index: int, report: ValidationReport):
        super().__init__(f"transaction {tx_index} of batch is not conditionally valid "
                         f"(failed rules {report.failed})")
        self.tx_index = tx_index
        self.report = report

    @property
    def rule(self) -> int:
        return self.report.failed[0]


class ResidualLiability(BatchError):
    def __init__(self, refs: Iterable[OutputRef]):
        self.refs = frozenset(refs)
        super().__init__(f"batch leaves {len(self.refs)} unspent output(s) with liabilities")


class LengthMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# supply change


def policies_with_change(v1: Quantities, v2: Quantities) -> set[bytes]:
    return {a.pid for a in (v1 - v2).support()}


def _supply_change(spent: Sequence[Output], outputs: Sequence[Output]) -> set[bytes]:
    ins = [o.value for o in spent]
    outs = [o.value for o in outputs]
    pos = policies_with_change(total(v.positive_part() for v in ins), total(v.positive_part() for v in outs))
    neg = policies_with_change(total(v.negative_part() for v in ins), total(v.negative_part() for v in outs))
    return pos | neg


def changed_supply(t: Tx, l: Ledger) -> set[bytes]:
    spent = [get_spent_output(i, l) for i in t.inputs]
    return _supply_change(spent, t.outputs)


# ---------------------------------------------------------------------------
# scripts


def run_script(s: PolicyScript, own: bytes, t: Tx, spent: Iterable[Output], *, genesis: bool = False) -> bool:
    if isinstance(s, AlwaysTrue):
        return True
    if isinstance(s, AlwaysFalse):
        return False
    if isinstance(s, SignedBy):
        h = tx_id(t)
        return any(verify(s.key, sig, h) for sig in t.sigs)
    if isinstance(s, ForbidPairProduction):
        spent = list(spent)
        if not run_script(s.inner, own, t, spent, genesis=genesis):
            return False
        ins = total(o.value.positive_part() for o in spent).restrict(own)
        outs = total(o.value.positive_part() for o in t.outputs).restrict(own)
        # supply may only grow through the forge field
        return outs - ins == t.forge.restrict(own)
    if isinstance(s, PrimaryCurrency):
        # pair production allowed; minting only at genesis
        return genesis or not t.forge.restrict(own)
    raise TypeError(f"not a policy script: {s!r}")


# ---------------------------------------------------------------------------
# conditional validity


def check_conditional_validity(t: Tx, l: Ledger, current_tick: int) -> ValidationReport:
    rules: dict[int, RuleResult] = {}
    rules[1] = RuleResult(current_tick in t.validity,
                          "" if current_tick in t.validity else f"tick {current_tick} outside {t.validity}")

    utxo = l.utxo
    missing = [i.output_ref for i in t.inputs if i.output_ref not in utxo]
    rules[3] = RuleResult(not missing, f"not unspent: {missing}" if missing else "")

    refs = [i.output_ref for i in t.inputs]
    dup = len(refs) != len(set(refs))
    rules[5] = RuleResult(not dup, "two inputs share an output reference" if dup else "")

    h = tx_id(t)
    unsigned = [i for i in t.inputs
                if i.key != OPEN_KEY and not any(verify(i.key, sig, h) for sig in t.sigs)]
    rules[6] = RuleResult(not unsigned, f"{len(unsigned)} input(s) lack a signature" if unsigned else "")

    if missing:
        dep = RuleResult(False, "failed dependency: unresolved inputs (rule 3)")
        for k in (4, 7, 8, 9):
            rules[k] = dep
        return ValidationReport(rules)

    spent = [utxo[i.output_ref] for i in sorted(t.inputs)]
    lhs = t.forge + total(o.value for o in spent)
    rhs = total(o.value for o in t.outputs)
    rules[4] = RuleResult(lhs == rhs, "" if lhs == rhs else f"forge+inputs {lhs} != outputs {rhs}")

    bad_addr = []
    for i in t.inputs:
        addr = utxo[i.output_ref].addr
        ok = (i.key == OPEN_KEY and addr == OPEN_ADDRESS) or key_addr(i.key) == addr
        if not ok:
            bad_addr.append(i.output_ref)
    rules[7] = RuleResult(not bad_addr, f"key/address mismatch: {bad_addr}" if bad_addr else "")

    genesis = len(l) == 0
    changed = _supply_change(spent, t.outputs)
    if changed and not genesis:
        have = {script_addr(s) for s in t.scripts}
        lacking = changed - have
        rules[8] = RuleResult(not lacking,
                              f"no script for changed policies {[p.hex()[:8] for p in sorted(lacking)]}"
                              if lacking else "")
    else:
        rules[8] = RuleResult(True)

    failing = [s for s in t.scripts
               if not run_script(s, script_addr(s), t, spent, genesis=genesis)]
    rules[9] = RuleResult(not failing, f"scripts rejected: {failing}" if failing else "")
    return ValidationReport(rules)


def is_conditionally_valid_ledger(l: Ledger, ticks: Sequence[int]) -> bool:
    """``ticks[k]`` is the tick at which ``l.txs[k]`` was admitted (newest first)."""
    if len(ticks) != len(l.txs):
        raise LengthMismatch(f"{len(l.txs)} transactions but {len(ticks)} ticks")
    prefix = Ledger()
    for t, tick in zip(reversed(l.txs), reversed(list(ticks))):
        if not check_conditional_validity(t, prefix, tick).ok:
            return False
        prefix = prefix.cons(t)
    return True


def residual_liabilities(l: Ledger) -> set[OutputRef]:
    return {ref for ref, o in l.utxo.items() if not o.value.is_nonnegative()}


def is_fully_valid_ledger(l: Ledger, ticks: Sequence[int]) -> bool:
    return is_conditionally_valid_ledger(l, ticks) and not residual_liabilities(l)


def apply_batch(l: Ledger, b: Batch, current_tick: int) -> Ledger:
    """Validate ``b`` against ``l`` and return ``b ++ l``; raises BatchError otherwise.

    ``l`` itself is never modified, so a failed batch leaves the caller's ledger as it was.
    """
    if not isinstance(b, Batch):
        b = Batch(b)
    ext = l
    for k, t in enumerate(b.txs):
        report = check_conditional_validity(t, ext, current_tick)
        if not report.ok:
            raise ConditionalInvalidity(k, report)
        ext = ext.cons(t)
    residual = residual_liabilities(ext)
    if residual:
        raise ResidualLiability(residual)
    return ext


def spent_outputs(t: Tx, l: Ledger) -> list[Output]:
    return [get_spent_output(i, l) for i in t.inputs]


def unlock(t: Tx, secrets: Iterable[bytes]) -> Tx:
    """Attach signatures by each secret over the transaction id."""
    h = tx_id(t)
    return t.with_sigs(set(t.sigs) | {sign(s, h) for s in secrets})

