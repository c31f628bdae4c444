import math
import random

import pytest

from conftest import net
from oracles import random_netlist, reference_simulate
from tromux.errors import InputWidthMismatch, KeyLengthMismatch, SemanticError
from tromux.locking import build_keychain, lock_cell
from tromux.simulation import (ToggleProfile, check_equivalence, classify_lcn, simulate,
                               toggle_profile)


def test_and_gate():
    n = net("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n")
    assert simulate(n, [(1, 1)])[0]["y"] == 1
    assert [t["y"] for t in simulate(n, [(0, 0), (0, 1), (1, 0)])] == [0, 0, 0]


def test_dff_sequence():
    n = net("INPUT(d)\nOUTPUT(q)\nq = DFF(d)\n")
    trace = simulate(n, [(1,), (1,), (1,)])
    assert [t["q"] for t in trace] == [0, 1, 1]


def test_initial_state():
    n = net("INPUT(d)\nOUTPUT(q)\nq = DFF(d)\n")
    assert simulate(n, [(0,)], initial_state={"q": 1})[0]["q"] == 1


def test_c17_all_zero(c17):
    # 10, 11, 16, 19 are NANDs with a 0 input, so 1; 22 = NAND(1, 1) = 0 and
    # 23 = NAND(1, 1) = 0
    t = simulate(c17, [(0, 0, 0, 0, 0)])[0]
    assert (t["10"], t["11"], t["16"], t["19"]) == (1, 1, 1, 1)
    assert (t["22"], t["23"]) == (0, 0)
    assert reference_simulate(c17, [dict.fromkeys(c17.pis, 0)]) == [{"22": 0, "23": 0}]


def test_vector_width_mismatch(c17):
    with pytest.raises(InputWidthMismatch):
        simulate(c17, [(0, 0)])


@pytest.mark.parametrize("seed", range(10))
def test_simulate_matches_reference(lib, seed):
    rng = random.Random(seed)
    n = random_netlist(rng, lib, 10, n_pis=4, ff_prob=0.3)
    vectors = [tuple(rng.randrange(2) for _ in n.pis) for _ in range(12)]
    trace = simulate(n, vectors)
    ref = reference_simulate(n, [dict(zip(n.pis, v)) for v in vectors])
    assert [{po: t[po] for po in n.pos} for t in trace] == ref


def test_tie_cell_tpc_zero():
    n = net("INPUT(a)\nOUTPUT(y)\nOUTPUT(z)\ny = TIELO()\nz = NOT(a)\n")
    assert toggle_profile(n, 500).tpc["y"] == 0.0


def test_toggle_ff_tpc_one():
    n = net("OUTPUT(q)\nq = DFF(nq)\nnq = NOT(q)\n")
    p = toggle_profile(n, 1000)
    assert p.tpc["q"] == 1.0 and p.tpc["nq"] == 1.0


def test_random_pi_tpc_half():
    n = net("INPUT(a)\nOUTPUT(y)\ny = BUFF(a)\n")
    cycles = 20000
    p = toggle_profile(n, cycles, seed=3)
    sd = math.sqrt(0.25 / cycles)
    assert abs(p.tpc["a"] - 0.5) < 3 * sd
    assert p.tpc["y"] == p.tpc["a"]


def test_and_tree_is_lcn():
    pis = "".join(f"INPUT(a{i})\n" for i in range(8))
    body = ("x0 = AND(a0, a1, a2, a3)\nx1 = AND(a4, a5, a6, a7)\ny = AND(x0, x1)\nOUTPUT(y)\n")
    n = net(pis + body)
    p = toggle_profile(n, 10000)
    # analytic: 2 * (1/256) * (255/256) per cycle
    assert p.tpc["y"] < 0.1
    lcn, lcc = classify_lcn(p)
    assert "y" in lcn and "y" in lcc


def test_classify_threshold_inclusive():
    p = ToggleProfile({"a": 0.1, "b": 0.11, "c": 0.0}, 100, 1, {"a": "ga", "b": "gb", "c": None})
    lcn, lcc = classify_lcn(p, 0.1)
    assert lcn == {"a", "c"} and lcc == {"ga"}


def test_profile_deterministic_and_bounded(bench):
    n = bench("s27")
    a = toggle_profile(n, 3000, seed=5)
    b = toggle_profile(n, 3000, seed=5)
    assert a.tpc == b.tpc
    assert all(0.0 <= v <= 2.0 for v in a.tpc.values())
    assert toggle_profile(n, 3000, seed=6).tpc != a.tpc


def test_cycles_must_be_positive(c17):
    with pytest.raises(ValueError):
        toggle_profile(c17, 0)


def test_equivalence_reflexive(bench):
    for name in ("c17", "s27", "acc8"):
        n = bench(name)
        v = check_equivalence(n, n, "")
        assert v.equivalent and v.mode == "exhaustive"


def _lock3(c17, bits=None):
    rng = random.Random(4)
    n, recs = c17, []
    for cell in ("10", "16", "23"):
        n, r = lock_cell(n, cell, rng)
        recs.append(r)
    return n, "".join(str(r.key_bit) for r in recs)


def test_c17_locked_three_gates(c17):
    locked, key = _lock3(c17)
    v = check_equivalence(c17, locked, key, "exhaustive")
    assert v.equivalent and v.vectors_tested == 32
    chained = build_keychain(locked, key)
    assert check_equivalence(c17, chained, key, "exhaustive").equivalent


def test_c17_wrong_key_bit_detected(c17):
    locked, key = _lock3(c17)
    wrong = ("1" if key[0] == "0" else "0") + key[1:]
    v = check_equivalence(c17, locked, wrong, "exhaustive")
    assert not v.equivalent
    assert v.mismatch.po in ("22", "23")
    assert v.mismatch.expected != v.mismatch.got


def test_equivalence_errors(c17, bench):
    locked, key = _lock3(c17)
    with pytest.raises(KeyLengthMismatch):
        check_equivalence(c17, locked, key + "0")
    with pytest.raises(SemanticError):
        check_equivalence(bench("c880"), bench("c880"), "", "exhaustive")


def test_random_mode(bench):
    n = bench("c432")
    v = check_equivalence(n, n, "", "auto")
    assert v.mode == "random" and v.vectors_tested == 10000 and v.equivalent
