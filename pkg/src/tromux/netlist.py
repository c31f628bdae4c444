"""Gate-level netlists in an extended BENCH dialect.

Besides the usual ``INPUT(x)``, ``OUTPUT(x)`` and ``y = TYPE(a, b)`` lines the
dialect accepts

* multi-output cells: ``q, qn = DFFQN(d)``
* an explicit instance name when it differs from the first output net:
  ``n1 = NAND2(a, b) @g7``
* the clock net of a sequential design: ``CLOCK(clk)``

Gate types are looked up in a :class:`~tromux.library.CellLibrary`. Generic
ISCAS names are accepted too (``NAND`` with two inputs resolves to ``NAND2``,
``NOT`` to the library inverter, ``BUFF`` to ``BUF``).
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import (CombinationalCycle, DuplicateName, MultipleDrivers, NetlistError,
                     UndefinedNet, UnknownCell, UnknownGateType, UnknownNet)
from .library import CellLibrary, GateType

#: names of cells and nets created by the locking passes start with this
RESERVED_PREFIX = "__tmx_"

_GENERIC = {"NOT": "inv", "INV": "inv", "BUFF": "buf", "BUF": "buf"}


@dataclass(frozen=True)
class Cell:
    name: str
    type: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]


class Netlist:
    """An immutable, validated netlist.

    Use :meth:`edit` to obtain a :class:`NetlistBuilder` seeded with this
    netlist's contents; :meth:`NetlistBuilder.build` validates and freezes a
    new instance.
    """

    def __init__(self, lib: CellLibrary, cells: Iterable[Cell], pis: Iterable[str],
                 pos: Iterable[str], clock: str = "clk", name: str = ""):
        self.lib = lib
        self.name = name
        self.clock = clock
        self.pis: tuple[str, ...] = tuple(pis)
        self.pos: tuple[str, ...] = tuple(pos)
        self.cells: dict[str, Cell] = {}
        for c in cells:
            if c.name in self.cells:
                raise DuplicateName(f"duplicate cell name {c.name}")
            self.cells[c.name] = c
        self._index()
        self._topo = self._levelize()

    # construction helpers -------------------------------------------------
    def _index(self) -> None:
        lib = self.lib
        driver: dict[str, tuple[str, int] | None] = {}
        if len(set(self.pis)) != len(self.pis):
            raise DuplicateName("duplicate primary input")
        for pi in self.pis:
            driver[pi] = None
        for c in self.cells.values():
            gt = lib.get(c.type)
            if gt is None:
                raise UnknownGateType(f"cell {c.name}: unknown gate type {c.type}")
            if len(c.inputs) != gt.n_inputs or len(c.outputs) != gt.n_outputs:
                raise NetlistError(f"cell {c.name}: {c.type} expects {gt.n_inputs} inputs "
                                   f"and {gt.n_outputs} outputs")
            for i, out in enumerate(c.outputs):
                if out in driver:
                    raise MultipleDrivers(f"net {out} has more than one driver")
                driver[out] = (c.name, i)
        sinks: dict[str, list[tuple[str, int]]] = {n: [] for n in driver}
        for c in self.cells.values():
            for pin, net in enumerate(c.inputs):
                if net not in driver:
                    raise UndefinedNet(f"cell {c.name} reads undefined net {net}")
                sinks[net].append((c.name, pin))
        for po in self.pos:
            if po not in driver:
                raise UndefinedNet(f"primary output {po} is undefined")
        self.driver = driver
        self.sinks = sinks
        self._po_set = frozenset(self.pos)

    def _levelize(self) -> list[str]:
        comb = [c for c in self.cells.values() if not self.lib[c.type].is_ff]
        indeg = {}
        for c in comb:
            indeg[c.name] = sum(1 for net in c.inputs if self._comb_driver(net) is not None)
        ready = deque(name for name, d in indeg.items() if d == 0)
        order = []
        while ready:
            name = ready.popleft()
            order.append(name)
            for out in self.cells[name].outputs:
                for sink, _ in self.sinks[out]:
                    if sink in indeg:
                        indeg[sink] -= 1
                        if indeg[sink] == 0:
                            ready.append(sink)
        if len(order) != len(comb):
            stuck = sorted(n for n, d in indeg.items() if d > 0)
            raise CombinationalCycle(f"combinational cycle through {stuck[:5]}")
        return order

    def _comb_driver(self, net: str) -> str | None:
        d = self.driver.get(net)
        if d is None:
            return None
        return None if self.lib[self.cells[d[0]].type].is_ff else d[0]

    # queries --------------------------------------------------------------
    @property
    def nets(self) -> list[str]:
        return list(self.driver)

    def gate_type(self, cell: str) -> GateType:
        return self.lib[self.cells[cell].type]

    def is_ff(self, cell: str) -> bool:
        return self.lib[self.cells[cell].type].is_ff

    def is_po(self, net: str) -> bool:
        return net in self._po_set

    def ffs(self) -> list[str]:
        return [c for c in self.cells if self.is_ff(c)]

    def comb_order(self) -> list[str]:
        """Combinational cells in topological order (flip-flops excluded)."""
        return list(self._topo)

    def driver_cell(self, net: str) -> str | None:
        if net not in self.driver:
            raise UnknownNet(net)
        d = self.driver[net]
        return None if d is None else d[0]

    def fanout_cells(self, net: str) -> list[str]:
        return list(dict.fromkeys(c for c, _ in self.sinks[net]))

    def cell(self, name: str) -> Cell:
        try:
            return self.cells[name]
        except KeyError:
            raise UnknownCell(name) from None

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells.values())

    def edit(self) -> "NetlistBuilder":
        return NetlistBuilder(self.lib, self.cells.values(), self.pis, self.pos,
                              self.clock, self.name)

    def structure(self) -> tuple:
        """Hashable summary used for equality/round-trip checks."""
        return (frozenset(self.cells.values()), self.pis, self.pos)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Netlist) and self.structure() == other.structure()

    def __hash__(self) -> int:
        return hash(self.structure())

    def __repr__(self) -> str:
        return (f"Netlist({self.name or '?'}: {len(self.pis)} PIs, {len(self.pos)} POs, "
                f"{len(self.cells)} cells)")


class NetlistBuilder:
    """Mutable staging area for netlist transformations."""

    def __init__(self, lib: CellLibrary, cells: Iterable[Cell] = (), pis: Iterable[str] = (),
                 pos: Iterable[str] = (), clock: str = "clk", name: str = ""):
        self.lib = lib
        self.cells: dict[str, Cell] = {c.name: c for c in cells}
        self.pis = list(pis)
        self.pos = list(pos)
        self.clock = clock
        self.name = name

    def add(self, name: str, type_: str, inputs: Iterable[str], outputs: Iterable[str]) -> Cell:
        if name in self.cells:
            raise DuplicateName(f"duplicate cell name {name}")
        c = Cell(name, type_, tuple(inputs), tuple(outputs))
        self.cells[name] = c
        return c

    def replace(self, name: str, **changes) -> Cell:
        old = self.cells[name]
        c = Cell(name, changes.get("type", old.type), tuple(changes.get("inputs", old.inputs)),
                 tuple(changes.get("outputs", old.outputs)))
        self.cells[name] = c
        return c

    def remove(self, name: str) -> Cell:
        return self.cells.pop(name)

    def build(self) -> Netlist:
        return Netlist(self.lib, self.cells.values(), self.pis, self.pos, self.clock, self.name)


# BENCH I/O -------------------------------------------------------------------
_IO = re.compile(r"^(INPUT|OUTPUT|CLOCK)\s*\(\s*([^()\s]+)\s*\)$", re.IGNORECASE)
_GATE = re.compile(r"^(.+?)=\s*([A-Za-z_][\w.]*)\s*\((.*)\)\s*(?:@\s*(\S+))?$")


def resolve_type(lib: CellLibrary, name: str, arity: int) -> str:
    if name in lib:
        return name
    upper = name.upper()
    if upper in lib:
        return upper
    if upper in _GENERIC:
        default = lib.inv if _GENERIC[upper] == "inv" else None
        if default is not None:
            return default.name
        bufs = sorted((t for t in lib.types() if t.kind == "buf"), key=lambda t: (t.width, t.name))
        if bufs:
            return bufs[0].name
    if f"{upper}{arity}" in lib:
        return f"{upper}{arity}"
    raise UnknownGateType(f"gate type {name} with {arity} inputs is not in the library")


def parse_netlist(text: str, lib: CellLibrary, name: str = "") -> Netlist:
    pis: list[str] = []
    pos: list[str] = []
    clock = "clk"
    cells: list[Cell] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _IO.match(line)
        if m:
            kw, net = m.group(1).upper(), m.group(2)
            if kw == "INPUT":
                pis.append(net)
            elif kw == "OUTPUT":
                pos.append(net)
            else:
                clock = net
            continue
        m = _GATE.match(line)
        if not m:
            raise NetlistError(f"line {lineno}: cannot parse {raw.strip()!r}")
        outs = tuple(o.strip() for o in m.group(1).split(","))
        args = m.group(3).strip()
        ins = tuple(a.strip() for a in args.split(",")) if args else ()
        if any(not o for o in outs) or any(not a for a in ins):
            raise NetlistError(f"line {lineno}: empty net name")
        type_ = resolve_type(lib, m.group(2), len(ins))
        cname = m.group(4) or outs[0]
        if cname in seen:
            raise DuplicateName(f"line {lineno}: duplicate cell name {cname}")
        seen.add(cname)
        cells.append(Cell(cname, type_, ins, outs))
    return Netlist(lib, cells, pis, pos, clock, name)


def write_netlist(n: Netlist) -> str:
    lines = [f"# {n.name}"] if n.name else []
    lines += [f"INPUT({p})" for p in n.pis]
    lines += [f"OUTPUT({p})" for p in n.pos]
    if any(n.is_ff(c) for c in n.cells):
        lines.append(f"CLOCK({n.clock})")
    for c in n.cells.values():
        stmt = f"{', '.join(c.outputs)} = {c.type}({', '.join(c.inputs)})"
        if c.name != c.outputs[0]:
            stmt += f" @{c.name}"
        lines.append(stmt)
    return "\n".join(lines) + "\n"


def read_netlist(path, lib: CellLibrary) -> Netlist:
    from pathlib import Path
    p = Path(path)
    return parse_netlist(p.read_text(), lib, name=p.stem)


# traversal --------------------------------------------------------------------
def cone(n: Netlist, net: str, direction: str = "fanout", through_ff: bool = False) -> set[str]:
    """Transitive fan-in or fan-out nets of ``net`` (``net`` itself excluded).

    With ``through_ff=False`` the walk stops at flip-flops: a fan-out walk
    reaches the D net but not the Q side, a fan-in walk stops at Q.
    """
    if net not in n.driver:
        raise UnknownNet(net)
    if direction not in ("fanin", "fanout"):
        raise ValueError("direction must be 'fanin' or 'fanout'")
    seen: set[str] = set()
    stack = [net]
    while stack:
        cur = stack.pop()
        if direction == "fanout":
            nxt = []
            for c, _ in n.sinks[cur]:
                if through_ff or not n.is_ff(c):
                    nxt.extend(n.cells[c].outputs)
        else:
            d = n.driver[cur]
            if d is None or (not through_ff and n.is_ff(d[0])):
                nxt = []
            else:
                nxt = list(n.cells[d[0]].inputs)
        for m in nxt:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    seen.discard(net)
    return seen


def is_reserved(name: str) -> bool:
    return name.startswith(RESERVED_PREFIX)
