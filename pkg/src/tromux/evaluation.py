"""Oracle-less attack harness.

* :func:`export_bench` lowers a locked design to the plain ISCAS gate set
  (AND OR NAND NOR NOT BUFF DFF XOR XNOR) for external tools.
* :func:`local_structure_attack` is a link-prediction attack on key MUXes:
  it learns, from the part of the design that carries no key logic, how
  likely a driver of each cell type is to feed each (sink type, pin), and
  for every key MUX keeps the data input whose driver best explains the
  MUX's sinks.
* :func:`constant_prop_probe` ties one key select to 0 and to 1, simplifies
  the combinational frame and compares how many gates disappear.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import KeyLengthMismatch, NoDecomposition, NoKeyGates, UnknownNet
from .library import Expr
from .netlist import Netlist
from .simulation import KEYCHAIN_DIN, KEYCHAIN_LOAD, parse_key

_KEY_RE = re.compile(r"^__tmx_k(\d+)$")


# export -----------------------------------------------------------------------
_FOLD = {"and": "NAND", "or": "NOR", "xor": "XNOR", "nand": "AND", "nor": "OR", "xnor": "XOR"}


def key_input_name(index: int) -> str:
    return f"keyinput{index}"


def export_bench(n: Netlist, ff_pseudo_io: bool = False) -> str:
    """Lower ``n`` to plain BENCH.

    The keychain is dropped and each key select becomes a primary input
    ``keyinput<i>``. With ``ff_pseudo_io`` every flip-flop is cut: its stored
    value becomes a pseudo primary input and its D net a pseudo output.
    """
    rename: dict[str, str] = {}
    for net in n.nets:
        m = _KEY_RE.match(net)
        if m:
            rename[net] = key_input_name(int(m.group(1)))
    keychain = {c for c in n.cells if c.startswith(("__tmx_kff", "__tmx_kmux"))}
    r = lambda net: rename.get(net, net)  # noqa: E731

    pis = [r(p) for p in n.pis if p not in (KEYCHAIN_DIN, KEYCHAIN_LOAD)]
    for net, new in rename.items():
        if new not in pis:
            pis.append(new)
    pos = [r(p) for p in n.pos]
    lines: list[str] = []

    for name, c in n.cells.items():
        if name in keychain:
            continue
        gt = n.lib[c.type]
        env = {pin: r(net) for pin, net in zip(gt.pins, c.inputs)}
        if gt.is_ff:
            state = next((r(o) for o, e in zip(c.outputs, gt.outputs) if e == ("state",)),
                         f"{name}__state")
            if ff_pseudo_io:
                pis.append(state)
                d = r(c.inputs[0])
                if d not in pos:
                    pos.append(d)
            else:
                lines.append(f"{state} = DFF({r(c.inputs[0])})")
            env["__state__"] = state
            for out, e in zip(c.outputs, gt.outputs):
                if r(out) != state:
                    _lower(e, r(out), env, name, lines)
        else:
            for out, e in zip(c.outputs, gt.outputs):
                _lower(e, r(out), env, name, lines)
    head = [f"INPUT({p})" for p in pis] + [f"OUTPUT({p})" for p in pos]
    return "\n".join(head + lines) + "\n"


def _lower(expr: Expr, target: str, env: dict[str, str], cell: str, lines: list[str]) -> None:
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"{cell}__x{counter[0]}"

    def net_of(e: Expr) -> str:
        if e[0] == "var":
            return env[e[1]]
        if e[0] == "state":
            return env["__state__"]
        out = fresh()
        gate(e, out)
        return out

    def gate(e: Expr, out: str) -> None:
        op = e[0]
        if op == "const":
            raise NoDecomposition(f"{cell}: constant cells have no BENCH equivalent")
        if op in ("var", "state"):
            lines.append(f"{out} = BUFF({net_of(e)})")
        elif op == "not" and e[1][0] in _FOLD:
            inner = e[1]
            if inner[0] in ("xor", "xnor") and len(inner) > 3:
                lines.append(f"{out} = NOT({net_of(inner)})")
            else:
                args = ", ".join(net_of(a) for a in inner[1:])
                lines.append(f"{out} = {_FOLD[inner[0]]}({args})")
        elif op in ("not", "buf"):
            lines.append(f"{out} = {'NOT' if op == 'not' else 'BUFF'}({net_of(e[1])})")
        elif op == "mux":
            a, b, s = (net_of(x) for x in e[1:])
            sn, t0, t1 = fresh(), fresh(), fresh()
            lines.append(f"{sn} = NOT({s})")
            lines.append(f"{t0} = AND({a}, {sn})")
            lines.append(f"{t1} = AND({b}, {s})")
            lines.append(f"{out} = OR({t0}, {t1})")
        elif op in ("xor", "xnor") and len(e) > 3:
            acc = net_of(e[1])
            for a in e[2:-1]:
                nxt = fresh()
                lines.append(f"{nxt} = XOR({acc}, {net_of(a)})")
                acc = nxt
            lines.append(f"{out} = {op.upper()}({acc}, {net_of(e[-1])})")
        else:
            lines.append(f"{out} = {op.upper()}({', '.join(net_of(a) for a in e[1:])})")

    gate(expr, target)


# attack bookkeeping -------------------------------------------------------
@dataclass(frozen=True)
class AttackResult:
    predictions: dict[int, int | str]
    ac: float | None = None
    pc: float | None = None
    kpa: float | None = None
    x_count: int = 0
    correct: int = 0
    total: int = 0

    def as_dict(self) -> dict:
        return {"ac": self.ac, "pc": self.pc, "kpa": self.kpa if self.kpa is not None else "--",
                "x": self.x_count, "correct": self.correct, "total": self.total}


def score_attack(predictions: Mapping[int, int | str] | Sequence[int | str],
                 true_key: str | Sequence[int]) -> AttackResult:
    """Accuracy, precision (X counted correct) and key-prediction accuracy
    (over non-X predictions), all in percent. KPA is ``None`` when every
    prediction is X."""
    bits = parse_key(true_key)
    if not isinstance(predictions, Mapping):
        predictions = dict(enumerate(predictions))
    if set(predictions) != set(range(len(bits))):
        raise KeyLengthMismatch(f"{len(predictions)} predictions for a {len(bits)}-bit key")
    total = len(bits)
    x = sum(1 for v in predictions.values() if v == "X")
    correct = sum(1 for i, v in predictions.items() if v != "X" and int(v) == bits[i])
    ac = 100.0 * correct / total if total else 0.0
    pc = 100.0 * (correct + x) / total if total else 0.0
    kpa = 100.0 * correct / (total - x) if total > x else None
    return AttackResult(dict(predictions), ac, pc, kpa, x, correct, total)


def find_key_muxes(n: Netlist, key_nets: Sequence[str] | None = None) -> dict[int, str]:
    """Key index -> MUX cell whose select pin reads that key net."""
    if key_nets is None:
        idx = {}
        for net in n.nets:
            m = _KEY_RE.match(net)
            if m:
                idx[net] = int(m.group(1))
    else:
        idx = {net: i for i, net in enumerate(key_nets)}
    out = {}
    for net, i in idx.items():
        if net not in n.sinks:
            raise UnknownNet(net)
        for cell, pin in n.sinks[net]:
            gt = n.gate_type(cell)
            if gt.kind == "mux" and pin == 2 and not cell.startswith("__tmx_kmux"):
                out[i] = cell
                break
    if not out:
        raise NoKeyGates("no key-controlled MUX found")
    return out


def _driver_label(n: Netlist, net: str) -> str:
    """Cell type of the driver, with the output pin for multi-output cells."""
    drv = n.driver.get(net)
    if drv is None:
        return "PI"
    cell, idx = drv
    c = n.cells[cell]
    return c.type if len(c.outputs) == 1 else f"{c.type}:{idx}"


def _hypothesis_edges(n: Netlist, mux: str, pin: int) -> list[tuple[str, str, int]]:
    """Edges that stay live when the key MUX is replaced by a wire from data
    input ``pin``: the chosen driver feeding every MUX sink and, when that
    driver is an inverter of the other data input, the edge into it."""
    c = n.cells[mux]
    net = c.inputs[pin]
    label = _driver_label(n, net)
    edges = [(label, n.cells[s].type, p) for s, p in n.sinks[c.outputs[0]]]
    d = n.driver_cell(net)
    if d is not None and n.gate_type(d).kind == "inv" and n.cells[d].inputs[0] == c.inputs[1 - pin]:
        edges.append((_driver_label(n, n.cells[d].inputs[0]), n.cells[d].type, 0))
    return edges


def local_structure_attack(locked: Netlist, key_nets: Sequence[str] | None = None,
                           true_key: str | Sequence[int] | None = None,
                           threshold: float = 0.1) -> AttackResult:
    muxes = find_key_muxes(locked, key_nets)
    hidden = set(muxes.values())
    for mux in muxes.values():
        for net in locked.cells[mux].inputs[:2]:
            d = locked.driver_cell(net)
            if d is not None:
                hidden.add(d)
    hidden |= {c for c in locked.cells if c.startswith(("__tmx_kff", "__tmx_kmux"))}

    counts: Counter = Counter()
    per_driver: Counter = Counter()
    for name, c in locked.cells.items():
        if name in hidden:
            continue
        for out in c.outputs:
            for sink, pin in locked.sinks[out]:
                if sink not in hidden:
                    label = _driver_label(locked, out)
                    counts[(label, locked.cells[sink].type, pin)] += 1
                    per_driver[label] += 1
    vocab = len({(s, p) for _, s, p in counts}) + 1

    def loglik(edges: list[tuple[str, str, int]]) -> float:
        # sum of log P(sink type, pin | driver label), add-one smoothed
        return sum(math.log((counts[e] + 1) / (per_driver[e[0]] + vocab)) for e in edges)

    preds: dict[int, int | str] = {}
    for i, mux in sorted(muxes.items()):
        gap = (loglik(_hypothesis_edges(locked, mux, 0))
               - loglik(_hypothesis_edges(locked, mux, 1)))
        preds[i] = "X" if abs(gap) < threshold else (0 if gap > 0 else 1)
    if true_key is None:
        x = sum(1 for v in preds.values() if v == "X")
        return AttackResult(preds, x_count=x, total=len(preds))
    bits = parse_key(true_key)
    full = {i: preds.get(i, "X") for i in range(len(bits))}
    return score_attack(full, bits)


# constant propagation probe ---------------------------------------------------
@dataclass(frozen=True)
class ProbeResult:
    eliminated_0: int
    eliminated_1: int

    @property
    def signal(self) -> int:
        return abs(self.eliminated_0 - self.eliminated_1)


_C0, _C1 = "__const0", "__const1"


class _Frame:
    """Mutable combinational view: flip-flops are kept as boundaries."""

    def __init__(self, n: Netlist):
        self.lib = n.lib
        self.cells = {name: [c.type, list(c.inputs), list(c.outputs)] for name, c in n.cells.items()}
        self.ff = {name for name in n.cells if n.is_ff(name)}
        self.observed = set(n.pos)
        self.readers: dict[str, set[str]] = {}
        for name, (_, ins, _) in self.cells.items():
            for net in ins:
                self.readers.setdefault(net, set()).add(name)
        self.driver = {o: name for name, (_, _, outs) in self.cells.items() for o in outs}

    def comb_count(self) -> int:
        return len(self.cells) - len(self.ff)

    def substitute(self, old: str, new: str) -> None:
        for r in self.readers.pop(old, set()):
            ins = self.cells[r][1]
            self.cells[r][1] = [new if x == old else x for x in ins]
            self.readers.setdefault(new, set()).add(r)
        if old in self.observed:
            self.observed.discard(old)
            self.observed.add(new)

    def remove(self, name: str) -> None:
        _, ins, outs = self.cells.pop(name)
        for net in ins:
            rs = self.readers.get(net)
            if rs is not None:
                rs.discard(name)
        for o in outs:
            self.driver.pop(o, None)

    def used(self, net: str) -> bool:
        return bool(self.readers.get(net)) or net in self.observed

    def const_pass(self) -> bool:
        changed = False
        for name in list(self.cells):
            if name in self.ff or name not in self.cells:
                continue
            type_, ins, outs = self.cells[name]
            if not any(x in (_C0, _C1) for x in ins) or len(outs) != 1:
                continue
            gt = self.lib[type_]
            free = [i for i, x in enumerate(ins) if x not in (_C0, _C1)]
            fn = gt.output_fn(0)
            rows = []
            for code in range(1 << len(free)):
                args = [1 if x == _C1 else 0 for x in ins]
                for j, i in enumerate(free):
                    args[i] = (code >> j) & 1
                rows.append(fn(1, *args))
            repl = None
            if all(v == rows[0] for v in rows):
                repl = _C1 if rows[0] else _C0
            else:
                for j, i in enumerate(free):
                    if all(v == (code >> j) & 1 for code, v in enumerate(rows)):
                        repl = ins[i]
                        break
            if repl is None:
                continue
            self.remove(name)
            self.substitute(outs[0], repl)
            changed = True
        return changed

    def dead_pass(self) -> bool:
        changed = False
        for name in list(self.cells):
            if name in self.ff:
                continue
            if not any(self.used(o) for o in self.cells[name][2]):
                self.remove(name)
                changed = True
        return changed

    def _depth(self) -> dict[str, int]:
        depth: dict[str, int] = {}

        def visit(name: str) -> int:
            if name in depth:
                return depth[name]
            depth[name] = 0
            if name not in self.ff:
                ds = [self.driver.get(x) for x in self.cells[name][1]]
                depth[name] = 1 + max((visit(d) for d in ds if d is not None), default=0)
            return depth[name]

        for name in self.cells:
            visit(name)
        return depth

    def absorb_pass(self) -> bool:
        # upstream inverters first, so an inverter chain always collapses into
        # the gate that heads it rather than into an intermediate inverter
        changed = False
        invs = [c for c, (t, _, _) in self.cells.items()
                if c not in self.ff and self.lib[t].kind == "inv"]
        depth = self._depth()
        for name in sorted(invs, key=lambda c: (depth[c], c)):
            if name not in self.cells or self.lib[self.cells[name][0]].kind != "inv":
                continue
            type_, ins, outs = self.cells[name]
            src = ins[0]
            d = self.driver.get(src)
            if d is None or src in self.observed or self.readers.get(src) != {name}:
                continue
            dtype, _, douts = self.cells[d]
            comp = self.lib[dtype].complement
            if comp is None or len(douts) != 1:
                continue
            self.remove(name)
            self.cells[d][0] = comp
            self.cells[d][2] = [outs[0]]
            self.driver.pop(src, None)
            self.driver[outs[0]] = d
            self.readers.pop(src, None)
            changed = True
        return changed

    def simplify(self) -> None:
        while self.const_pass() | self.dead_pass() | self.absorb_pass():
            pass


def _eliminated(n: Netlist, mux: str, value: int) -> int:
    f = _Frame(n)
    start = f.comb_count()
    sel = f.cells[mux][1][2]
    f.readers[sel].discard(mux)
    f.cells[mux][1][2] = _C1 if value else _C0
    f.readers.setdefault(f.cells[mux][1][2], set()).add(mux)
    f.simplify()
    return start - f.comb_count()


def constant_prop_probe(locked: Netlist, key_index: int,
                        key_nets: Sequence[str] | None = None) -> ProbeResult:
    muxes = find_key_muxes(locked, key_nets)
    if key_index not in muxes:
        raise KeyLengthMismatch(f"no key gate with index {key_index}")
    mux = muxes[key_index]
    return ProbeResult(_eliminated(locked, mux, 0), _eliminated(locked, mux, 1))

