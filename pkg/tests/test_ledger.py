import random
import struct

import pytest
from hypothesis import given, strategies as st

from babel_ledger.crypto import OPEN_ADDRESS, OPEN_KEY, key_addr, key_from_name
from babel_ledger.ledger import (
    Batch, IndexOutOfRange, Input, Interval, Ledger, MissingTx, Output, OutputRef, Tx, decode_tx,
    encode_bundle, encode_tx, get_spent_output, lookup_tx, tx_id, unspent_outputs, unspent_tx_outputs,
)
from babel_ledger.quantities import AssetId, Quantities
from babel_ledger.scenario import load_json, parse_ledger_scenario
from babel_ledger.scripts import (
    AlwaysFalse, AlwaysTrue, ForbidPairProduction, PrimaryCurrency, SignedBy, asset, decode_script,
    encode_script,
)
from tests.conftest import GOLDEN, SCENARIOS, bundles

digests = st.binary(min_size=32, max_size=32)
leaf_scripts = st.one_of(st.just(AlwaysTrue()), st.just(AlwaysFalse()), st.just(PrimaryCurrency()),
                         digests.map(SignedBy))
scripts = st.recursive(leaf_scripts, lambda inner: inner.map(ForbidPairProduction), max_leaves=3)
intervals = st.integers(0, 2**64 - 2).flatmap(
    lambda lo: st.one_of(st.just(Interval(lo)), st.integers(lo, 2**64 - 2).map(lambda hi: Interval(lo, hi))))
inputs = st.builds(Input, st.builds(OutputRef, digests, st.integers(0, 2**32 - 1)), digests)
outputs = st.builds(Output, digests, bundles)
txs = st.builds(Tx, st.frozensets(inputs, max_size=4), st.lists(outputs, max_size=4).map(tuple), intervals,
                bundles, st.frozensets(scripts, max_size=3), st.frozensets(digests, max_size=3))


def _funded(*values):
    g = Tx(outputs=[Output(key_addr(key_from_name(f"k{i}")), v) for i, v in enumerate(values)])
    return g, Ledger.from_oldest_first([g])


@given(txs)
def test_encoding_round_trip(t):
    assert decode_tx(encode_tx(t)) == t


@given(scripts)
def test_script_encoding_round_trip(s):
    buf = encode_script(s)
    assert decode_script(buf) == (s, len(buf))


def test_encoding_matches_hand_assembled_bytes():
    pid = bytes([7]) * 32
    a = AssetId(pid, b"tk")
    ref_id, key, addr = bytes([1]) * 32, bytes([2]) * 32, bytes([3]) * 32
    t = Tx({Input(OutputRef(ref_id, 5), key)}, [Output(addr, Quantities({a: -3}))], Interval(4, 9),
           Quantities({a: 2}), {AlwaysTrue()}, {bytes([9]) * 32})
    def bundle(n):
        return struct.pack(">I", 1) + pid + b"\x02tk" + n.to_bytes(16, "big", signed=True)
    expected = (b"\x54" + struct.pack(">I", 1) + ref_id + struct.pack(">I", 5) + key
                + struct.pack(">I", 1) + addr + bundle(-3)
                + struct.pack(">QQ", 4, 9) + bundle(2)
                + struct.pack(">I", 1) + b"\x01"
                + struct.pack(">I", 1) + bytes([9]) * 32)
    assert encode_tx(t) == expected


def test_unbounded_interval_encodes_max_u64():
    assert encode_tx(Tx())[-(4 + 4 + 4 + 16):-(4 + 4 + 4)] == struct.pack(">QQ", 0, 2**64 - 1)


def test_quantity_outside_i128_rejected():
    with pytest.raises(OverflowError):
        encode_bundle(Quantities({AssetId(bytes(32)): 2**127}))
    encode_bundle(Quantities({AssetId(bytes(32)): -(2**127)}))


def test_noncanonical_encoding_rejected():
    a, b = AssetId(bytes([1]) * 32), AssetId(bytes([2]) * 32)
    t = Tx(outputs=[Output(bytes(32), Quantities({a: 1, b: 2}))])
    buf = bytearray(encode_tx(t))
    # swap the two bundle entries so they are out of order
    entry = 32 + 1 + 16
    start = 1 + 4 + 4 + 32 + 4
    e1, e2 = buf[start:start + entry], buf[start + entry:start + 2 * entry]
    buf[start:start + 2 * entry] = e2 + e1
    with pytest.raises(ValueError):
        decode_tx(bytes(buf))
    with pytest.raises(ValueError):
        decode_tx(encode_tx(t) + b"\x00")


def test_txid_deterministic_and_ignores_signatures():
    t = Tx(outputs=[Output(bytes(32), Quantities({AssetId(bytes(32)): 1}))])
    assert tx_id(t) == tx_id(Tx(t.inputs, t.outputs))
    assert tx_id(t.with_sigs({bytes([5]) * 32})) == tx_id(t)


def test_no_collisions_over_perturbed_outputs():
    rng = random.Random(11)
    a = AssetId(bytes([4]) * 32, b"T")
    seen = {}
    for _ in range(10**4):
        v = rng.randint(-10**9, 10**9)
        base = Tx(outputs=[Output(bytes([1]) * 32, Quantities({a: v}))])
        bumped = Tx(outputs=[Output(bytes([1]) * 32, Quantities({a: v + rng.choice([-1, 1]) * rng.randint(1, 99)}))])
        for t in (base, bumped):
            h = tx_id(t)
            assert seen.setdefault(h, t) == t
        assert tx_id(base) != tx_id(bumped)


def test_golden_genesis_txid():
    sc = parse_ledger_scenario(load_json(SCENARIOS / "batch_swap.json"))
    genesis = sc.ledger.oldest_first()[0]
    assert tx_id(genesis).hex() == (GOLDEN / "batch_swap_genesis_txid.txt").read_text().strip()


def test_unspent_tx_outputs_zero_based():
    t = Tx(outputs=[Output(bytes(32), Quantities()), Output(bytes(32), Quantities())])
    h = tx_id(t)
    assert unspent_tx_outputs(t) == {OutputRef(h, 0), OutputRef(h, 1)}
    assert unspent_tx_outputs(Tx()) == set()


@given(st.lists(outputs, max_size=5).map(tuple))
def test_unspent_outputs_of_input_free_tx(outs):
    t = Tx(outputs=outs)
    assert unspent_outputs(Ledger.from_oldest_first([t])) == unspent_tx_outputs(t)
    assert len(unspent_tx_outputs(t)) == len(outs)


def test_unspent_outputs_empty_ledger():
    assert unspent_outputs(Ledger()) == set()


def test_unspent_outputs_follow_recursion():
    g, l = _funded(Quantities({AssetId(bytes(32)): 3}), Quantities({AssetId(bytes(32)): 4}))
    gid = tx_id(g)
    spend = Tx({Input(OutputRef(gid, 0), key_from_name("k0"))}, [Output(bytes(32), Quantities())])
    l2 = l.cons(spend)
    assert unspent_outputs(l2) == {OutputRef(gid, 1), OutputRef(tx_id(spend), 0)}
    # incrementally maintained set equals one rebuilt from scratch
    assert unspent_outputs(Ledger(l2.txs)) == unspent_outputs(l2)


def test_get_spent_output_and_errors():
    g, l = _funded(Quantities({AssetId(bytes(32)): 3}))
    gid = tx_id(g)
    assert get_spent_output(Input(OutputRef(gid, 0), OPEN_KEY), l) == g.outputs[0]
    assert lookup_tx(l, gid) == g
    with pytest.raises(MissingTx):
        lookup_tx(l, bytes(32))
    with pytest.raises(IndexOutOfRange):
        get_spent_output(Input(OutputRef(gid, 1), OPEN_KEY), l)


def test_swap_output_lookup_from_batch_example():
    sc = parse_ledger_scenario(load_json(SCENARIOS / "batch_swap.json"))
    t1, t2 = sc.batches[0].txs
    l = sc.ledger.cons(t1)
    open_input = next(i for i in t2.inputs if i.key == OPEN_KEY)
    o = get_spent_output(open_input, l)
    t1_asset, t2_asset = sc.names.asset("T1"), sc.names.asset("T2")
    assert o.addr == OPEN_ADDRESS
    assert o.value == Quantities({t1_asset: -5, t2_asset: 10})


def test_batch_and_interval_guards():
    with pytest.raises(ValueError):
        Batch([])
    with pytest.raises(ValueError):
        Interval(5, 4)
    assert 3 in Interval(3, 3) and 4 not in Interval(3, 3)
    assert 10**18 in Interval(0)


def test_asset_helper_uses_script_address():
    assert asset(AlwaysTrue(), "T").pid != asset(AlwaysFalse(), "T").pid
