import itertools
import random

import pytest

from conftest import net
from oracles import reference_simulate
from tromux import load_benchmark
from tromux.errors import KeyLengthMismatch, NoDecomposition, NoKeyGates
from tromux.evaluation import (constant_prop_probe, export_bench, find_key_muxes,
                               local_structure_attack, score_attack)
from tromux.layout import make_floorplan
from tromux.locking import LockingConfig, harden, lock_cell
from tromux.netlist import parse_netlist
from tromux.simulation import simulate

PLAIN = {"AND", "OR", "NAND", "NOR", "NOT", "BUFF", "DFF", "XOR", "XNOR"}


def _gate_types(text):
    return {ln.split("=")[1].split("(")[0].strip() for ln in text.splitlines() if "=" in ln}


def _same_function(a, b, vectors=None):
    pis = list(a.pis)
    if vectors is None:
        vectors = [dict(zip(pis, bits)) for bits in itertools.product((0, 1), repeat=len(pis))]
    assert reference_simulate(a, vectors) == reference_simulate(b, vectors)


# export -----------------------------------------------------------------------
def test_export_mux(lib):
    n = net("INPUT(a)\nINPUT(b)\nINPUT(s)\nOUTPUT(y)\ny = MUX2(a, b, s)\n", lib)
    text = export_bench(n)
    assert _gate_types(text) <= PLAIN
    assert sum(1 for ln in text.splitlines() if "=" in ln) == 4
    _same_function(n, parse_netlist(text, lib))


def test_export_aoi(lib):
    n = net("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = AOI21(a, b, c)\n", lib)
    text = export_bench(n)
    assert "y = NOR(" in text and "AND(" in text
    _same_function(n, parse_netlist(text, lib))


def test_export_nand_fixed_point(c17, lib):
    text = export_bench(c17)
    assert sum(1 for ln in text.splitlines() if "=" in ln) == 6
    assert _gate_types(text) == {"NAND"}


def test_export_constant_fails(lib):
    n = net("OUTPUT(y)\ny = TIEHI()\n", lib)
    with pytest.raises(NoDecomposition):
        export_bench(n)


@pytest.mark.parametrize("name", ["c432", "acc8", "s27"])
def test_export_preserves_function(name, lib):
    n = load_benchmark(name)
    text = export_bench(n)
    assert _gate_types(text) <= PLAIN
    again = parse_netlist(text, lib)
    rng = random.Random(1)
    vectors = [tuple(rng.randrange(2) for _ in n.pis) for _ in range(1000)]
    a = simulate(n, vectors)
    b = simulate(again, vectors)
    assert [{p: t[p] for p in n.pos} for t in a] == [{p: t[p] for p in n.pos} for t in b]


def test_export_locked_exposes_keyinputs(bench, lib):
    n = bench("s27")
    h = harden(n, ["G5"], make_floorplan(n, target_utilization=0.5))
    text = export_bench(h.locked)
    again = parse_netlist(text, lib)
    keys = [f"keyinput{i}" for i in range(len(h.key))]
    assert all(k in again.pis for k in keys)
    assert "__tmx_din" not in again.pis and not any("__tmx_kff" in c for c in again.cells)
    hold = {k: int(b) for k, b in zip(keys, h.key)}
    rng = random.Random(2)
    vectors = [tuple(rng.randrange(2) for _ in n.pis) for _ in range(300)]
    free = [p for p in again.pis if p not in hold]
    assert free == list(n.pis)
    a = simulate(n, vectors)
    b = simulate(again, vectors, hold=hold)
    assert [t["G17"] for t in a] == [t["G17"] for t in b]


def test_export_ff_pseudo_io(bench, lib):
    text = export_bench(bench("s27"), ff_pseudo_io=True)
    again = parse_netlist(text, lib)
    assert not again.ffs()
    assert {"G5", "G6", "G7"} <= set(again.pis)


# attack -----------------------------------------------------------------------
def test_attack_prefers_frequent_edge(lib):
    lines = ["INPUT(a)", "INPUT(b)", "INPUT(__tmx_k0)"]
    for i in range(10):
        lines += [f"OUTPUT(o{i})", f"t{i} = AND2(a, b)", f"o{i} = INV(t{i})"]
    lines += ["OUTPUT(p)", "s = NAND2(a, b)", "p = INV(s)"]
    lines += ["x = NAND2(b, a)", "y = AND2(b, a)", "m = MUX2(x, y, __tmx_k0)",
              "OUTPUT(z)", "z = INV(m)"]
    n = parse_netlist("\n".join(lines) + "\n", lib)
    r = local_structure_attack(n)
    assert r.predictions == {0: 1}
    scored = local_structure_attack(n, true_key="1")
    assert (scored.ac, scored.kpa) == (100.0, 100.0)


def test_attack_needs_key_gates(c17):
    with pytest.raises(NoKeyGates):
        local_structure_attack(c17)


def test_attack_x_when_symmetric(lib):
    n = parse_netlist("INPUT(a)\nINPUT(__tmx_k0)\nOUTPUT(z)\nx = INV(a)\ny = INV(a) @y\n"
                      "m = MUX2(x, y, __tmx_k0)\nz = INV(m)\n", lib)
    assert local_structure_attack(n).predictions == {0: "X"}


def test_attack_on_tromux_is_near_random(bench):
    n = bench("c880")
    kpas = []
    for seed in (1, 2, 3):
        h = harden(n, [], make_floorplan(n, target_utilization=0.5),
                   cfg=LockingConfig(key_seed=seed, verify=False))
        kpas.append(local_structure_attack(h.locked, true_key=h.key).kpa)
    assert 40 <= sum(kpas) / len(kpas) <= 60


# probe ------------------------------------------------------------------------
def test_probe_tromux_and(lib):
    n = net("INPUT(a)\nINPUT(b)\nOUTPUT(z)\ny = AND(a, b)\nz = NOR(y, a)\n", lib)
    for config in (1, 2, 3, 4):
        locked, rec = lock_cell(n, "y", random.Random(0), config=config)
        p = constant_prop_probe(locked, 0)
        assert (p.eliminated_0, p.eliminated_1, p.signal) == (2, 2, 0)


def test_probe_asymmetric_cone(lib):
    text = ("INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(__tmx_k0)\nOUTPUT(z)\n"
            "g1 = NAND(a, b)\ng2 = NOR(b, c)\ng3 = XOR(g1, g2)\ng4 = AND(g3, a)\n"
            "g5 = OR(g4, c)\nz = MUX2(a, g5, __tmx_k0)\n")
    p = constant_prop_probe(parse_netlist(text, lib), 0)
    assert (p.eliminated_0, p.eliminated_1) == (6, 1)
    assert p.signal == 5


def test_probe_flip_flop_boundary(lib):
    # select 0 puts a constant on the D input; it must not cross the flip-flop,
    # so the AND behind it survives and only the MUX goes away
    text = ("INPUT(a)\nINPUT(b)\nINPUT(__tmx_k0)\nOUTPUT(z)\nt = TIELO()\n"
            "m = MUX2(t, b, __tmx_k0)\nq = DFF(m)\nz = AND(q, a)\n")
    p = constant_prop_probe(parse_netlist(text, lib), 0)
    assert (p.eliminated_0, p.eliminated_1) == (1, 2)


def test_probe_every_instance_zero(bench):
    n = bench("acc8")
    h = harden(n, n.ffs()[:3], make_floorplan(n, target_utilization=0.4),
               cfg=LockingConfig(verify=False))
    assert all(constant_prop_probe(h.locked, i).signal == 0 for i in range(len(h.key)))


def test_probe_bad_index(c17):
    locked, _ = lock_cell(c17, "10", random.Random(0))
    with pytest.raises(KeyLengthMismatch):
        constant_prop_probe(locked, 3)


def test_find_key_muxes_skips_keychain(bench):
    n = bench("s27")
    h = harden(n, [], make_floorplan(n, target_utilization=0.5))
    muxes = find_key_muxes(h.locked)
    assert sorted(muxes) == list(range(len(h.key)))
    assert all(m.startswith("__tmx_mux_") for m in muxes.values())


# metrics ------------------------------------------------------------------------
def test_score_all_correct():
    r = score_attack([0, 1, 1, 0], "0110")
    assert (r.ac, r.pc, r.kpa, r.x_count) == (100.0, 100.0, 100.0, 0)


def test_score_single_prediction_boundary():
    preds = ["X"] * 214
    preds[17] = 1
    key = ["0"] * 214
    key[17] = "1"
    r = score_attack(preds, "".join(key))
    assert r.kpa == 100.0 and r.x_count == 213
    assert round(r.ac, 2) == 0.47


def test_score_all_x():
    r = score_attack({0: "X", 1: "X"}, "01")
    assert (r.ac, r.pc, r.kpa) == (0.0, 100.0, None)
    assert r.as_dict()["kpa"] == "--"


def test_score_length_mismatch():
    with pytest.raises(KeyLengthMismatch):
        score_attack([0, 1], "011")
