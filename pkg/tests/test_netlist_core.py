import pytest

from conftest import C17, net
from oracles import eval_expr
from tromux import benchmark_names, load_benchmark
from tromux.errors import (AsymmetricComplement, CombinationalCycle, DuplicateGateType,
                           DuplicateName, MissingDefaultCell, MultipleDrivers, NegativeValue,
                           NotComplementary, UndefinedNet, UnknownGateType, UnknownNet)
from tromux.library import load_library, parse_expr
from tromux.netlist import cone, parse_netlist, write_netlist

MINI = """\
INV,not(a),1,0.02,BUF
BUF,buf(a),1,0.03,INV
NAND2,nand(a,b),3,0.05,AND2
AND2,and(a,b),3,0.06,NAND2
MUX2,mux(a,b,s),2,0.05,-
DFF,dff(d),4,0.08,-
"""


# library ------------------------------------------------------------------
def test_library_complement_pair():
    lib = load_library(MINI)
    assert lib.complement_of("NAND2") == "AND2"
    assert lib.complement_of("AND2") == "NAND2"
    assert lib["NAND2"].kind == "simple"
    assert (lib.inv.name, lib.mux.name, lib.ff.name) == ("INV", "MUX2", "DFF")


def test_library_missing_inv():
    text = "\n".join(ln for ln in MINI.splitlines() if not ln.startswith(("INV", "BUF")))
    with pytest.raises(MissingDefaultCell):
        load_library(text)


def test_library_not_complementary():
    # not(and) and nor disagree on input 01
    text = MINI.replace("NAND2,nand(a,b),3,0.05,AND2", "NOR2,nor(a,b),3,0.05,AND2") \
               .replace("AND2,and(a,b),3,0.06,NAND2", "AND2,and(a,b),3,0.06,NOR2")
    with pytest.raises(NotComplementary):
        load_library(text)


def test_library_errors():
    with pytest.raises(DuplicateGateType):
        load_library(MINI + "INV,not(a),1,0.02,BUF\n")
    with pytest.raises(AsymmetricComplement):
        load_library(MINI.replace("AND2,and(a,b),3,0.06,NAND2", "AND2,and(a,b),3,0.06,-"))
    with pytest.raises(NegativeValue):
        load_library(MINI.replace("0.08", "-0.1"))
    with pytest.raises(NegativeValue):
        load_library(MINI.replace("MUX2,mux(a,b,s),2", "MUX2,mux(a,b,s),0"))


def test_library_round_trip(lib):
    again = load_library(lib.to_text())
    assert [t.name for t in again.types()] == [t.name for t in lib.types()]
    for t in lib.types():
        assert again[t.name].truth_table() == t.truth_table()


def test_default_library_complement_involution(lib):
    for t in lib.types():
        if t.complement:
            assert lib.complement_of(lib.complement_of(t.name)) == t.name


def test_truth_tables_match_interpreter(lib):
    for t in lib.types():
        if t.is_ff:
            continue
        for code, row in enumerate(t.truth_table()):
            env = {p: (code >> i) & 1 for i, p in enumerate(t.pins)}  # pin 0 is the LSB
            assert row == tuple(eval_expr(e, env) for e in t.outputs), t.name


def test_flip_flop_kinds(lib):
    assert lib["DFF"].kind == "ff" and lib["DFFN"].kind == "ff"
    assert lib["DFFQN"].n_outputs == 2
    assert lib.is_lockable("DFFQN") and lib.is_lockable("DFF")
    assert not lib.is_lockable("AOI21") and not lib.is_lockable("MUX2")


def test_parse_expr_shapes():
    assert parse_expr("nand(a, b)") == ("nand", ("var", "a"), ("var", "b"))
    assert parse_expr("not(dff(d))") == ("not", ("dff", ("var", "d")))


# netlist -------------------------------------------------------------------
def test_c17_counts(c17):
    assert len(c17.pis) == 5 and len(c17.pos) == 2
    assert len(c17.cells) == 6
    assert {c.type for c in c17.cells.values()} == {"NAND2"}


def test_empty_circuit(lib):
    n = parse_netlist("INPUT(a)\nOUTPUT(a)\n", lib)
    assert n.pis == ("a",) and n.pos == ("a",) and len(n.cells) == 0


def test_multiple_drivers(lib):
    with pytest.raises(MultipleDrivers):
        parse_netlist("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUFF(a) @g2\n", lib)


def test_netlist_errors(lib):
    with pytest.raises(UndefinedNet):
        parse_netlist("INPUT(a)\nOUTPUT(y)\ny = AND(a, b)\n", lib)
    with pytest.raises(CombinationalCycle):
        parse_netlist("INPUT(a)\nOUTPUT(y)\ny = AND(a, z)\nz = NOT(y)\n", lib)
    with pytest.raises(UnknownGateType):
        parse_netlist("INPUT(a)\nOUTPUT(y)\ny = FOO(a)\n", lib)
    with pytest.raises(DuplicateName):
        parse_netlist("INPUT(a)\nOUTPUT(y)\ny = NOT(a) @g\nz = NOT(a) @g\n", lib)


def test_flip_flop_breaks_cycle(lib):
    n = parse_netlist("INPUT(a)\nOUTPUT(q)\nq = DFF(d)\nd = XOR(a, q)\n", lib)
    assert n.ffs() == ["q"]


def test_generic_names_resolve(lib):
    n = parse_netlist("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nOUTPUT(z)\n"
                      "x = AND(a, b, c)\ny = NOT(x)\nz = BUFF(x)\n", lib)
    assert [n.cells[c].type for c in ("x", "y", "z")] == ["AND3", "INV", "BUF"]


@pytest.mark.parametrize("name", benchmark_names())
def test_round_trip_corpus(name, lib):
    n = load_benchmark(name)
    again = parse_netlist(write_netlist(n), lib, name=name)
    assert again == n


def test_dff_written_with_clock(bench):
    text = write_netlist(bench("s27"))
    assert "CLOCK(" in text and "= DFF(" in text


def test_multi_output_and_instance_names(lib):
    text = "INPUT(d)\nOUTPUT(q)\nOUTPUT(qn)\nq, qn = DFFQN(d) @reg\n"
    n = parse_netlist(text, lib)
    assert n.cells["reg"].outputs == ("q", "qn")
    assert parse_netlist(write_netlist(n), lib) == n


def test_cone_po_fanout_empty(c17):
    assert cone(c17, "22", "fanout") == set()


def test_cone_c17(c17):
    # 10 only reaches 22; 16 and 11 reach both outputs
    assert cone(c17, "10", "fanout") == {"22"}
    assert cone(c17, "11", "fanout") == {"16", "19", "22", "23"}
    assert cone(c17, "22", "fanin") == {"10", "16", "1", "3", "2", "11", "6"}


def test_cone_pi_fanin_empty(c17):
    assert cone(c17, "1", "fanin") == set()


def test_cone_unknown_net(c17):
    with pytest.raises(UnknownNet):
        cone(c17, "nope")


def test_cone_flip_flop_boundary(lib):
    n = net("INPUT(a)\nOUTPUT(y)\nd = NOT(a)\nq = DFF(d)\ny = NOT(q)\n", lib)
    assert cone(n, "a", "fanout") == {"d"}
    assert cone(n, "a", "fanout", through_ff=True) == {"d", "q", "y"}
    assert cone(n, "y", "fanin") == {"q"}
    assert cone(n, "y", "fanin", through_ff=True) == {"q", "d", "a"}


def test_c17_text_matches_bundled(c17):
    bundled = load_benchmark("c17")
    assert sorted(bundled.pis) == sorted(c17.pis)
    assert len(bundled.cells) == 6 and C17
