"""Cell library: gate types, their boolean functions, widths and delays.

Library files are plain text, one gate type per line::

    NAME,FUNCTION,WIDTH,DELAY,COMPLEMENT

``FUNCTION`` is an expression over positional input pins built from
``and or nand nor xor xnor not buf mux dff`` and the constants ``0``/``1``.
Pins are ordered by first appearance. Multi-output cells separate their
output expressions with ``;`` (``dff(d);not(dff(d))`` is a flip-flop with Q
and QN). ``COMPLEMENT`` names the counterpart type or is ``-``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable

from .errors import (AsymmetricComplement, DuplicateGateType, LibraryError,
                     MissingDefaultCell, NegativeValue, NotComplementary)

# expression nodes: ("var", name) | ("const", 0|1) | ("state",) | (op, arg, ...)
Expr = tuple

NARY = {"and", "or", "nand", "nor", "xor", "xnor"}
UNARY = {"not", "buf", "dff"}
KINDS = ("simple", "complex", "ff", "mux", "inv", "buf")

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*|[01]|[(),])")


def parse_expr(text: str) -> Expr:
    tokens = _TOKEN.findall(text)
    if "".join(tokens) != re.sub(r"\s+", "", text):
        raise LibraryError(f"bad function expression: {text!r}")
    pos = 0

    def node() -> Expr:
        nonlocal pos
        if pos >= len(tokens):
            raise LibraryError(f"truncated function expression: {text!r}")
        tok = tokens[pos]
        pos += 1
        if tok in ("0", "1"):
            return ("const", int(tok))
        if pos < len(tokens) and tokens[pos] == "(":
            op = tok.lower()
            pos += 1
            args = [node()]
            while tokens[pos] == ",":
                pos += 1
                args.append(node())
            if tokens[pos] != ")":
                raise LibraryError(f"expected ')' in {text!r}")
            pos += 1
            if op in UNARY and len(args) != 1:
                raise LibraryError(f"{op} takes one argument in {text!r}")
            if op == "mux" and len(args) != 3:
                raise LibraryError(f"mux takes three arguments in {text!r}")
            if op not in NARY | UNARY | {"mux"}:
                raise LibraryError(f"unknown operator {op!r} in {text!r}")
            return (op, *args)
        return ("var", tok)

    expr = node()
    if pos != len(tokens):
        raise LibraryError(f"trailing tokens in {text!r}")
    return expr


def expr_vars(expr: Expr, acc: list[str] | None = None) -> list[str]:
    acc = [] if acc is None else acc
    if expr[0] == "var":
        if expr[1] not in acc:
            acc.append(expr[1])
    elif expr[0] not in ("const", "state"):
        for arg in expr[1:]:
            expr_vars(arg, acc)
    return acc


def _find_dff(expr: Expr) -> list[Expr]:
    if expr[0] == "dff":
        return [expr[1]]
    if expr[0] in ("var", "const", "state"):
        return []
    return [d for arg in expr[1:] for d in _find_dff(arg)]


def _strip_dff(expr: Expr) -> Expr:
    if expr[0] == "dff":
        return ("state",)
    if expr[0] in ("var", "const", "state"):
        return expr
    return (expr[0], *(_strip_dff(a) for a in expr[1:]))


def to_source(expr: Expr, pins: dict[str, str]) -> str:
    """Python source evaluating ``expr`` bit-parallel on ints under mask ``M``."""
    op = expr[0]
    if op == "var":
        return pins[expr[1]]
    if op == "const":
        return "M" if expr[1] else "0"
    if op == "state":
        return "S"
    args = [to_source(a, pins) for a in expr[1:]]
    if op == "buf":
        return args[0]
    if op == "not":
        return f"(M ^ {args[0]})"
    if op == "mux":
        a, b, s = args
        return f"(({a} & (M ^ {s})) | ({b} & {s}))"
    base = {"and": " & ", "nand": " & ", "or": " | ", "nor": " | ",
            "xor": " ^ ", "xnor": " ^ "}[op]
    src = "(" + base.join(args) + ")"
    return f"(M ^ {src})" if op in ("nand", "nor", "xnor") else src


@dataclass(frozen=True)
class GateType:
    name: str
    pins: tuple[str, ...]
    outputs: tuple[Expr, ...]
    width: int
    delay: float
    complement: str | None
    kind: str
    next_state: Expr | None = None
    text: str = ""
    _fns: tuple = field(default=(), compare=False, repr=False)

    @property
    def is_ff(self) -> bool:
        return self.kind == "ff"

    @property
    def n_inputs(self) -> int:
        return len(self.pins)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def output_fn(self, index: int) -> Callable[..., int]:
        """``fn(M, *input_values)`` for combinational types; for flip-flops
        the single argument after ``M`` is the stored state."""
        return self._fns[index]

    def truth_table(self) -> list[tuple[int, ...]]:
        """Output tuples over all input combinations, inputs counted LSB first.

        For flip-flops the enumerated variable is the stored state.
        """
        n = 1 if self.is_ff else self.n_inputs
        rows = []
        for bits in itertools.product((0, 1), repeat=n):
            rows.append(tuple(self.output_fn(i)(1, *bits[::-1]) for i in range(self.n_outputs)))
        return rows


def _make_type(name: str, func: str, width: int, delay: float, complement: str | None) -> GateType:
    outputs = tuple(parse_expr(part) for part in func.split(";"))
    dffs = [d for o in outputs for d in _find_dff(o)]
    if dffs:
        if any(d != dffs[0] for d in dffs) or dffs[0][0] != "var":
            raise LibraryError(f"{name}: flip-flop must store a single input pin")
        kind = "ff"
        pins = (dffs[0][1],)
        next_state = dffs[0]
        outputs = tuple(_strip_dff(o) for o in outputs)
        for o in outputs:
            if expr_vars(o):
                raise LibraryError(f"{name}: flip-flop outputs may depend on state only")
        srcs = [to_source(o, {}) for o in outputs]
        fns = tuple(eval(f"lambda M, S: {s}") for s in srcs)
    else:
        pins = tuple(v for o in outputs for v in expr_vars(o))
        pins = tuple(dict.fromkeys(pins))
        next_state = None
        names = {p: f"p{i}" for i, p in enumerate(pins)}
        args = "".join(f", p{i}" for i in range(len(pins)))
        fns = tuple(eval(f"lambda M{args}: {to_source(o, names)}") for o in outputs)
        single = outputs[0] if len(outputs) == 1 else None
        if single is not None and single[0] == "mux" and all(a[0] == "var" for a in single[1:]) \
                and len(pins) == 3:
            kind = "mux"
        elif single is not None and single[0] == "not" and single[1][0] == "var":
            kind = "inv"
        elif single is not None and single[0] == "buf" and single[1][0] == "var":
            kind = "buf"
        elif complement is not None:
            kind = "simple"
        else:
            kind = "complex"
    return GateType(name, pins, outputs, width, delay, complement, kind, next_state, func, fns)


class CellLibrary:
    """Validated, immutable mapping of gate-type name to :class:`GateType`."""

    def __init__(self, types: dict[str, GateType]):
        self._types = dict(types)
        self._validate()
        self.inv = self._designate("inv", lambda t: t.outputs == (("not", ("var", t.pins[0])),))
        self.mux = self._designate("mux", lambda t: True)
        self.ff = self._designate(
            "ff", lambda t: t.n_outputs == 1 and t.outputs[0] == ("state",))

    def _designate(self, kind: str, pred) -> GateType:
        cands = [t for t in self._types.values() if t.kind == kind and pred(t)]
        if not cands:
            raise MissingDefaultCell(f"library has no {kind.upper()} cell")
        return min(cands, key=lambda t: (t.width, t.delay, t.name))

    def _validate(self) -> None:
        for t in self._types.values():
            if t.complement is None:
                continue
            other = self._types.get(t.complement)
            if other is None or other.complement != t.name:
                raise AsymmetricComplement(f"{t.name} -> {t.complement} is not mirrored")
            if (t.is_ff != other.is_ff or t.n_inputs != other.n_inputs
                    or t.n_outputs != other.n_outputs):
                raise NotComplementary(f"{t.name} and {other.name} differ in shape")
            if t.is_ff and t.next_state != other.next_state:
                raise NotComplementary(f"{t.name} and {other.name} store different values")
            for row_a, row_b in zip(t.truth_table(), other.truth_table()):
                if any(a == b for a, b in zip(row_a, row_b)):
                    raise NotComplementary(f"{t.name} is not the complement of {other.name}")

    def __getitem__(self, name: str) -> GateType:
        return self._types[name]

    def __contains__(self, name: object) -> bool:
        return name in self._types

    def __iter__(self):
        return iter(self._types)

    def __len__(self) -> int:
        return len(self._types)

    def get(self, name: str, default=None):
        return self._types.get(name, default)

    def types(self) -> list[GateType]:
        return list(self._types.values())

    def complement_of(self, name: str) -> str | None:
        return self._types[name].complement

    def is_lockable(self, name: str) -> bool:
        t = self._types[name]
        if t.kind == "ff":
            return True
        return t.kind in ("simple", "inv", "buf") and t.complement is not None

    def width(self, name: str) -> int:
        return self._types[name].width

    def delay(self, name: str) -> float:
        return self._types[name].delay

    def to_text(self) -> str:
        lines = ["# NAME,FUNCTION,WIDTH,DELAY,COMPLEMENT"]
        for t in self._types.values():
            lines.append(f"{t.name},{t.text},{t.width},{t.delay!r},{t.complement or '-'}")
        return "\n".join(lines) + "\n"


def load_library(text: str) -> CellLibrary:
    types: dict[str, GateType] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, _, rest = line.partition(",")
        parts = rest.rsplit(",", 3)
        if len(parts) != 4 or not name:
            raise LibraryError(f"line {lineno}: expected NAME,FUNCTION,WIDTH,DELAY,COMPLEMENT")
        func, width_s, delay_s, comp = (p.strip() for p in parts)
        name = name.strip()
        if name in types:
            raise DuplicateGateType(f"line {lineno}: duplicate gate type {name}")
        try:
            width, delay = int(width_s), float(delay_s)
        except ValueError:
            raise LibraryError(f"line {lineno}: bad width/delay") from None
        if width < 1 or delay < 0:
            raise NegativeValue(f"line {lineno}: width must be >= 1 and delay >= 0")
        types[name] = _make_type(name, func, width, delay, None if comp == "-" else comp)
    return CellLibrary(types)


@lru_cache(maxsize=1)
def default_library() -> CellLibrary:
    return load_library(resources.files("tromux.data").joinpath("default.lib").read_text())
