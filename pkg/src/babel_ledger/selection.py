"""Block-issuer transaction selection: Pareto-tuple dynamic program, FPTAS, brute force.

Candidates are processed in descending order of initial value per byte. A
candidate's value may depend on the candidates already selected before it in
that order (the "prefix block"); see :class:`ValueModel`.

Two dominance relations are supported by :func:`select_optimal`:

``"space_value"``
    tuple A dominates B when A uses no more space and has at least as much value.
    Lists are then strictly increasing in both space and value, which bounds
    their length by ``min(S_B + 1, V_o + 1)``. This ignores the remaining
    reserve and the prefix block's effect on later values, so it can discard the
    only tuple that leads to the optimum.

``"full"`` (default)
    additionally requires A to keep at least as much reserve and to carry the
    same same-token counts as B. This is a sound dominance, so the DP is exact.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Literal, Mapping, NamedTuple, Optional, Sequence

from .market import CandidateTransaction

Dominance = Literal["full", "space_value"]
MAX_BRUTE_FORCE = 20


class SelectionError(ValueError):
    pass


class EmptyMempool(SelectionError):
    pass


class TooLarge(SelectionError):
    pass


class TupleNotFound(LookupError):
    pass


@dataclass(frozen=True)
class ValueModel:
    """``constant``: v_i(B) = v_io. ``token_decay``: v_i(B) = floor(v_io * max(0, 1 - alpha*k)),
    k = number of members of B offering i's token."""

    mode: Literal["constant", "token_decay"] = "constant"
    alpha: Fraction = Fraction(0)
    token_of: Mapping[int, Hashable] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if self.mode not in ("constant", "token_decay"):
            raise ValueError(f"unknown value model {self.mode!r}")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def decays(self) -> bool:
        return self.mode == "token_decay" and self.alpha != 0

    def token(self, cand: CandidateTransaction) -> Optional[Hashable]:
        return self.token_of.get(cand.id, cand.token)

    def value_after(self, cand: CandidateTransaction, same_token_count: int) -> int:
        if not self.decays or self.token(cand) is None:
            return cand.initial_value
        factor = max(Fraction(0), 1 - self.alpha * same_token_count)
        return math.floor(cand.initial_value * factor)


CONSTANT = ValueModel()


def value(cand: CandidateTransaction, prefix: Sequence[CandidateTransaction], model: ValueModel) -> int:
    tok = model.token(cand)
    k = 0 if tok is None else sum(1 for p in prefix if p.id != cand.id and model.token(p) == tok)
    return model.value_after(cand, k)


@dataclass(frozen=True)
class SelectionInstance:
    mempool: tuple[CandidateTransaction, ...]
    block_size: int
    reserve: int
    model: ValueModel = CONSTANT

    def __post_init__(self):
        object.__setattr__(self, "mempool", tuple(self.mempool))
        if self.block_size < 1:
            raise ValueError("block size must be positive")
        if self.reserve < 0:
            raise ValueError("reserve must be non-negative")
        ids = [c.id for c in self.mempool]
        if len(ids) != len(set(ids)):
            raise ValueError("candidate ids must be unique")


@dataclass(frozen=True)
class SelectionResult:
    block: list[int]  # ids in processing order
    utility: int
    residual: int


def sort_key(c: CandidateTransaction):
    return (-Fraction(c.initial_value, c.size), c.size, c.id)


def processing_order(cands: Sequence[CandidateTransaction]) -> list[CandidateTransaction]:
    return sorted(cands, key=sort_key)


def utility(block: Sequence[CandidateTransaction], model: ValueModel) -> int:
    """Sum of prefix-dependent values; ``block`` is reordered into processing order."""
    ordered = processing_order(block)
    return sum(value(c, ordered[:k], model) for k, c in enumerate(ordered))


# ---------------------------------------------------------------------------
# dynamic program


class DpTuple(NamedTuple):
    space: int
    value: int
    residual: int
    bit: int
    # same-token counts of the tuple's block, one slot per token (decay models only)
    profile: tuple[int, ...] = ()
    parent: int = -1  # index into the previous list


def dominates(a: DpTuple, b: DpTuple, dominance: Dominance = "space_value") -> bool:
    if not (a.space <= b.space and a.value >= b.value):
        return False
    if dominance == "space_value":
        return True
    return a.residual >= b.residual and a.profile == b.profile


def prune_dominated(tuples: Sequence[DpTuple], dominance: Dominance = "space_value",
                    residual_cap: Optional[int] = None, space_cap: Optional[int] = None) -> list[DpTuple]:
    """Keep the non-dominated tuples, sorted by space.

    Among tuples equal in every compared component the one with the larger
    residual, then participation bit 0, survives.

    With ``"full"`` dominance, ``residual_cap`` is the most reserve any later
    candidate can still use and ``space_cap`` the smallest space at which no
    later candidate fits; larger values compare as equal to the cap.
    """
    if dominance == "space_value" or space_cap is None:
        ranked = sorted(tuples, key=lambda t: (t.space, -t.value, -t.residual, t.bit, t.profile))
    else:
        ranked = sorted(tuples, key=lambda t: (min(t.space, space_cap), -t.value, -t.residual, t.bit, t.profile))
    if dominance == "space_value":
        kept: list[DpTuple] = []
        for t in ranked:
            if not kept or t.value > kept[-1].value:
                kept.append(t)
        return kept
    # Sweep by space; per decay profile keep a (value, residual) staircase of what
    # has been kept so far. O(L log L).
    stairs: dict[tuple[int, ...], tuple[list[int], list[int]]] = {}
    kept = []
    for t in ranked:
        vals, ress = stairs.setdefault(t.profile, ([], []))
        # vals ascending, ress strictly descending
        res = t.residual if residual_cap is None else min(t.residual, residual_cap)
        k = bisect.bisect_left(vals, t.value)
        if k < len(vals) and ress[k] >= res:
            continue
        kept.append(t)
        lo = k
        while lo > 0 and ress[lo - 1] <= res:
            lo -= 1
        hi = k
        while hi < len(vals) and vals[hi] == t.value:
            hi += 1
        vals[lo:hi] = [t.value]
        ress[lo:hi] = [res]
    kept.sort(key=lambda t: (t.space, t.value, t.residual))
    return kept


@dataclass
class DpTable:
    """The lists U[1..n] plus the processing order they refer to (both 1-based in the API)."""

    order: list[CandidateTransaction]
    lists: list[list[DpTuple]]

    def __getitem__(self, j: int) -> list[DpTuple]:
        if not 1 <= j <= len(self.lists):
            raise IndexError(j)
        return self.lists[j - 1]

    def max_len(self) -> int:
        return max((len(u) for u in self.lists), default=0)

    def walk(self, j: int, pos: int) -> list[int]:
        ids: list[int] = []
        i = j
        while i >= 1:
            t = self.lists[i - 1][pos]
            if t.bit:
                ids.append(self.order[i - 1].id)
            pos = t.parent
            i -= 1
        ids.reverse()
        return ids


def get_block(table: DpTable, j: int, target_space: int) -> list[int]:
    """Ids of the block behind the best tuple of U[j] using exactly ``target_space``."""
    matches = [(t.value, t.residual, -k, k) for k, t in enumerate(table[j]) if t.space == target_space]
    if not matches:
        raise TupleNotFound(f"no tuple with space {target_space} in U[{j}]")
    return table.walk(j, max(matches)[3])


ValueFn = Callable[[CandidateTransaction, int], int]


def _make_bound_check(order: Sequence[CandidateTransaction], block_size: int, value_scale: Fraction):
    """``hopeless(t, j, best)``: no completion of ``t`` by candidates after ``j`` reaches ``best``.

    Uses the fractional knapsack bound over initial values divided by
    ``value_scale``; valid because ``order`` is by value per byte, descending.
    """
    sizes = [0]
    values = [0]
    for c in order:
        sizes.append(sizes[-1] + c.size)
        values.append(values[-1] + c.initial_value)
    p, q = value_scale.numerator, value_scale.denominator
    n = len(order)

    def hopeless(t: DpTuple, j: int, best: int) -> bool:
        a = j + 1
        cap = block_size - t.space
        b = bisect.bisect_right(sizes, sizes[a] + cap) - 1
        full = values[b] - values[a]
        if b >= n:
            return (t.value * p + full * q) < best * p
        rem = cap - (sizes[b] - sizes[a])
        c = order[b]
        # t.value + (full + c.v * rem / c.s) / scale < best, in integers
        return t.value * p * c.size + (full * c.size + c.initial_value * rem) * q < best * p * c.size

    return hopeless


def run_dp(order: Sequence[CandidateTransaction], block_size: int, reserve: int, model: ValueModel,
           value_fn: Optional[ValueFn] = None, dominance: Dominance = "full",
           on_list: Optional[Callable[[int, list[DpTuple]], None]] = None,
           value_scale: Fraction = Fraction(1)) -> DpTable:
    """Fill U[1..n] over candidates already in processing order.

    ``value_fn(cand, same_token_count)`` gives the value credited to a tuple when
    ``cand`` is added; it defaults to the model's own values and must never
    exceed ``cand.initial_value / value_scale``. With ``"full"`` dominance,
    tuples whose best completion falls short of an already reachable value are
    dropped as well.
    """
    if value_fn is None:
        value_fn = model.value_after
    n = len(order)
    tokens = sorted({model.token(c) for c in order if model.token(c) is not None}, key=repr) if model.decays else []
    slot = {tok: k for k, tok in enumerate(tokens)}
    # counts past saturation all give value 0
    saturation = math.ceil(1 / model.alpha) if tokens else 0
    remaining_cost = [0] * n
    # space from which no later candidate fits
    space_cap = [0] * n
    live: list[frozenset[int]] = [frozenset()] * n
    for j in range(n - 2, -1, -1):
        nxt = order[j + 1]
        remaining_cost[j] = remaining_cost[j + 1] + nxt.liability_cost
        space_cap[j] = max(space_cap[j + 1], block_size - nxt.size + 1)
        tok = model.token(nxt) if tokens else None
        live[j] = live[j + 1] | {slot[tok]} if tok is not None else live[j + 1]

    def extend(base: DpTuple, parent: int, j: int) -> Optional[DpTuple]:
        c = order[j]
        if base.space + c.size > block_size or base.residual - c.liability_cost < 0:
            return None
        tok = model.token(c) if tokens else None
        count = base.profile[slot[tok]] if tok is not None else 0
        profile = base.profile
        if tok is not None:
            profile = profile[:slot[tok]] + (min(count + 1, saturation),) + profile[slot[tok] + 1:]
        return DpTuple(base.space + c.size, base.value + value_fn(c, count),
                       base.residual - c.liability_cost, 1, profile, parent)

    def project(profile: tuple[int, ...], j: int) -> tuple[int, ...]:
        # counts of tokens with no later candidates are never read again
        return tuple(x if k in live[j] else 0 for k, x in enumerate(profile))

    hopeless = _make_bound_check(order, block_size, Fraction(value_scale)) if dominance == "full" else None
    lists: list[list[DpTuple]] = []
    origin = DpTuple(0, 0, reserve, 0, (0,) * len(tokens), -1)
    for j in range(n):
        if j == 0:
            base = [origin]
        else:
            base = [DpTuple(t.space, t.value, t.residual, 0, t.profile, k) for k, t in enumerate(lists[-1])]
        grown = list(base)
        for k, t in enumerate(base):
            # parent of a bit-0 copy is the copied tuple itself
            new = extend(t, t.parent if j == 0 else k, j)
            if new is not None:
                grown.append(new)
        if tokens and dominance == "full":
            grown = [DpTuple(t.space, t.value, t.residual, t.bit, project(t.profile, j), t.parent) for t in grown]
        if hopeless is not None:
            # every tuple is a feasible block, so the best value among them is reachable
            best = max(t.value for t in grown)
            grown = [t for t in grown if not hopeless(t, j, best)]
        u = prune_dominated(grown, dominance, residual_cap=remaining_cost[j], space_cap=space_cap[j])
        lists.append(u)
        if on_list is not None:
            on_list(j + 1, u)
    return DpTable(list(order), lists)


def _result_from_table(table: DpTable, reserve: int, model: ValueModel) -> SelectionResult:
    if not table.lists:
        return SelectionResult([], 0, reserve)
    last = table.lists[-1]
    best = max(range(len(last)), key=lambda k: (last[k].value, last[k].residual, -last[k].space))
    ids = table.walk(len(table.lists), best)
    by_id = {c.id: c for c in table.order}
    block = [by_id[i] for i in ids]
    return SelectionResult(ids, utility(block, model), reserve - sum(c.liability_cost for c in block))


def select_optimal(inst: SelectionInstance, dominance: Dominance = "full",
                   on_list: Optional[Callable[[int, list[DpTuple]], None]] = None) -> SelectionResult:
    order = processing_order(inst.mempool)
    table = run_dp(order, inst.block_size, inst.reserve, inst.model, dominance=dominance, on_list=on_list)
    return _result_from_table(table, inst.reserve, inst.model)


def optimal_table(inst: SelectionInstance, dominance: Dominance = "full") -> DpTable:
    return run_dp(processing_order(inst.mempool), inst.block_size, inst.reserve, inst.model, dominance=dominance)


def scaling_factor(inst: SelectionInstance, eps: Fraction) -> Fraction:
    """mu = eps * v_omax / n over individually feasible candidates, never below 1."""
    feasible = [c for c in inst.mempool if c.size <= inst.block_size and c.liability_cost <= inst.reserve]
    if not feasible:
        return Fraction(1)
    vmax = max(c.initial_value for c in feasible)
    mu = Fraction(eps) * vmax / len(feasible)
    return max(mu, Fraction(1))


def select_approx(inst: SelectionInstance, eps, dominance: Dominance = "full",
                  on_list: Optional[Callable[[int, list[DpTuple]], None]] = None) -> SelectionResult:
    """Run the DP on values floor(v_i(B)/mu) and report the block's utility in original values."""
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie strictly between 0 and 1")
    if not inst.mempool:
        raise EmptyMempool("approximation needs a nonempty mempool")
    mu = scaling_factor(inst, eps)
    model = inst.model

    def scaled(c: CandidateTransaction, count: int) -> int:
        return math.floor(model.value_after(c, count) / mu)

    order = processing_order(inst.mempool)
    table = run_dp(order, inst.block_size, inst.reserve, model, value_fn=scaled,
                   dominance=dominance, on_list=on_list, value_scale=mu)
    return _result_from_table(table, inst.reserve, model)


def scaled_total_value(inst: SelectionInstance, eps) -> int:
    """V_o' = sum of floor(v_io / mu), the value bound for the scaled DP lists."""
    mu = scaling_factor(inst, Fraction(eps))
    return sum(math.floor(c.initial_value / mu) for c in inst.mempool)


def brute_force(inst: SelectionInstance) -> SelectionResult:
    """Exhaustive oracle; ties go to the lexicographically smallest sorted id tuple."""
    n = len(inst.mempool)
    if n > MAX_BRUTE_FORCE:
        raise TooLarge(f"brute force limited to {MAX_BRUTE_FORCE} candidates, got {n}")
    order = processing_order(inst.mempool)
    best_key = None
    best: Optional[SelectionResult] = None
    for r in range(n + 1):
        for combo in itertools.combinations(order, r):
            if sum(c.size for c in combo) > inst.block_size:
                continue
            cost = sum(c.liability_cost for c in combo)
            if cost > inst.reserve:
                continue
            u = sum(value(c, combo[:k], inst.model) for k, c in enumerate(combo))
            key = (-u, tuple(sorted(c.id for c in combo)))
            if best_key is None or key < best_key:
                best_key = key
                best = SelectionResult([c.id for c in combo], u, inst.reserve - cost)
    assert best is not None
    return best
