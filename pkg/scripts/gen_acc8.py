"""Generate acc8.bench: an 8-bit accumulator with overflow, parity and an
enable counter. Stands in for a small ISCAS-89 sequential circuit and mixes
simple, complex (AOI/OAI), MUX2 and two flip-flop flavours (DFF, DFFQN).

    python scripts/gen_acc8.py > src/tromux/data/bench/acc8.bench
"""

lines = []
def g(out, typ, *ins):
    lines.append(f"{out} = {typ}({', '.join(ins)})")

pis = [f"x{i}" for i in range(8)] + ["en", "clr"]
g("nclr", "INV", "clr")
g("nen", "INV", "en")
carry = None
for i in range(8):
    a, x = f"acc{i}", f"x{i}"
    if i == 0:
        g("s0", "XOR2", a, x)
        g("c1", "AND2", a, x)
    else:
        g(f"p{i}", "XOR2", a, x)
        g(f"s{i}", "XNOR2", f"p{i}", f"cn{i}")
        if i % 2:
            g(f"h{i}", "AOI22", a, x, f"p{i}", carry)
            g(f"c{i+1}", "INV", f"h{i}")
        else:
            g(f"ga{i}", "NAND2", a, x)
            g(f"gp{i}", "NAND2", f"p{i}", carry)
            g(f"c{i+1}", "NAND2", f"ga{i}", f"gp{i}")
    carry = f"c{i+1}"
    if i < 7:
        g(f"cn{i+1}", "INV", carry)
    if i % 2 == 0:
        g(f"m{i}", "MUX2", a, f"s{i}", "en")
        g(f"d{i}", "AND2", f"m{i}", "nclr")
    else:
        g(f"nm{i}", "AOI22", f"s{i}", "en", a, "nen")
        g(f"d{i}", "NOR2", f"nm{i}", "clr")
g("o1", "AND2", "en", "c8")
g("o2n", "NOR2", "o1", "ovf")
g("ovf_d", "NOR2", "clr", "o2n")
g("t0", "XOR2", "acc0", "acc1")
g("t1", "XNOR2", "acc2", "acc3")
g("t2", "XOR2", "acc4", "acc5")
g("t3", "XNOR2", "acc6", "acc7")
g("t4", "XOR2", "t0", "t1")
g("t5", "XNOR2", "t2", "t3")
g("par_d", "XNOR2", "t4", "t5")
g("k0", "XOR2", "cnt0", "en")
g("k1", "AND2", "cnt0", "en")
g("k1d", "XOR2", "cnt1", "k1")
g("k2", "AND3", "cnt1", "cnt0", "en")
g("k2n", "INV", "k2")
g("k2d", "XNOR2", "cnt2", "k2n")
g("cd0", "NOR2", "clr", "k0n")
g("k0n", "INV", "k0")
g("cd1", "AND2", "k1d", "nclr")
g("cd2", "AND2", "k2d", "nclr")
g("full", "AND3", "cnt0", "cnt1", "cnt2")
g("ready", "OAI21", "en", "clr", "ovf_n")
g("busy", "NAND3", "full", "ovf_n", "en")

ffs = [f"acc{i} = DFF(d{i})" for i in range(8)]
ffs += ["ovf, ovf_n = DFFQN(ovf_d)", "par = DFF(par_d)",
        "cnt0 = DFF(cd0)", "cnt1 = DFF(cd1)", "cnt2 = DFF(cd2)"]
pos = [f"acc{i}" for i in range(8)] + ["ovf", "par", "full", "ready", "busy"]

print("# acc8: 8-bit accumulator, 13 flip-flops (ISCAS-89 class sequential)")
print("\n".join(f"INPUT({p})" for p in pis))
print("\n".join(f"OUTPUT({p})" for p in pos))
print("CLOCK(clk)")
print("\n".join(ffs + lines))
