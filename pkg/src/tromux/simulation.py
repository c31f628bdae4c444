"""Zero-delay, cycle-based logic simulation.

Net values are Python ints used as bit vectors: bit ``j`` of every net belongs
to independent stimulus stream ``j``. One :class:`Simulator` therefore runs
``width`` streams (or, for a combinational design, ``width`` vectors) at
once.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InputWidthMismatch, KeyLengthMismatch, SemanticError
from .netlist import Netlist

log = logging.getLogger(__name__)

KEYCHAIN_DIN = "__tmx_din"
KEYCHAIN_LOAD = "__tmx_load"
EXHAUSTIVE_LIMIT = 20


def key_net(index: int) -> str:
    return f"__tmx_k{index}"


def keychain_ff(index: int) -> str:
    return f"__tmx_kff{index}"


class Simulator:
    """Bit-parallel evaluator for one netlist.

    ``hold`` pins primary inputs to constant 0/1 in every stream; held PIs
    are skipped by :meth:`set_inputs`.
    """

    def __init__(self, n: Netlist, width: int = 1, hold: Mapping[str, int] | None = None):
        self.n = n
        self.width = width
        self.mask = (1 << width) - 1
        self.index = {net: i for i, net in enumerate(n.nets)}
        self.values = [0] * len(self.index)
        hold = dict(hold or {})
        for net in hold:
            if net not in n.pis:
                raise SemanticError(f"held net {net} is not a primary input")
        self.hold = hold
        self.free_pis = [p for p in n.pis if p not in hold]
        self._free_idx = [self.index[p] for p in self.free_pis]
        for net, v in hold.items():
            self.values[self.index[net]] = self.mask if v else 0
        idx = self.index
        self.ops = []
        for name in n.comb_order():
            c = n.cells[name]
            gt = n.lib[c.type]
            ins = tuple(idx[i] for i in c.inputs)
            for k, out in enumerate(c.outputs):
                self.ops.append((gt.output_fn(k), ins, idx[out]))
        self.ff_names = n.ffs()
        self.ff_pos = {name: i for i, name in enumerate(self.ff_names)}
        self.ff_ops = []
        for name in self.ff_names:
            c = n.cells[name]
            gt = n.lib[c.type]
            outs = tuple((gt.output_fn(k), idx[o]) for k, o in enumerate(c.outputs))
            self.ff_ops.append((outs, idx[c.inputs[0]]))
        self.state = [0] * len(self.ff_names)

    def reset(self, state: Mapping[str, int] | None = None) -> None:
        self.state = [0] * len(self.ff_names)
        for name, v in (state or {}).items():
            self.state[self.ff_pos[name]] = self.mask if v else 0

    def set_inputs(self, words: Sequence[int]) -> None:
        if len(words) != len(self._free_idx):
            raise InputWidthMismatch(
                f"expected {len(self._free_idx)} input words, got {len(words)}")
        vals = self.values
        for i, w in zip(self._free_idx, words):
            vals[i] = w & self.mask

    def set_net(self, net: str, word: int) -> None:
        self.values[self.index[net]] = word & self.mask

    def evaluate(self) -> None:
        vals, M = self.values, self.mask
        for (outs, _), st in zip(self.ff_ops, self.state):
            for fn, o in outs:
                vals[o] = fn(M, st)
        for fn, ins, o in self.ops:
            vals[o] = fn(M, *[vals[i] for i in ins])

    def clock(self) -> None:
        vals = self.values
        self.state = [vals[d] for _, d in self.ff_ops]

    def get(self, net: str) -> int:
        return self.values[self.index[net]]


def _bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def simulate(n: Netlist, stimulus: Sequence[Sequence[int]],
             initial_state: Mapping[str, int] | None = None,
             hold: Mapping[str, int] | None = None) -> list[dict[str, int]]:
    """Simulate one stream; returns every net's value in each cycle.

    Cycle ``t`` sees the flip-flop contents at the start of the cycle and
    ``stimulus[t]`` on the (non-held) primary inputs; flip-flops capture
    their D values at the end of the cycle.
    """
    sim = Simulator(n, 1, hold)
    sim.reset(initial_state)
    trace = []
    for t, vec in enumerate(stimulus):
        if len(vec) != len(sim.free_pis):
            raise InputWidthMismatch(
                f"cycle {t}: vector has {len(vec)} bits, design has {len(sim.free_pis)} inputs")
        sim.set_inputs([int(b) for b in vec])
        sim.evaluate()
        trace.append(dict(zip(sim.index, sim.values)))
        sim.clock()
    return trace


# controllability ----------------------------------------------------------
@dataclass(frozen=True)
class ToggleProfile:
    tpc: dict[str, float]
    cycles: int
    seed: int
    drivers: dict[str, str | None] = field(default_factory=dict, compare=False, repr=False)


def toggle_profile(n: Netlist, cycles: int = 10_000, seed: int = 1,
                   hold: Mapping[str, int] | None = None, streams: int = 128) -> ToggleProfile:
    """Toggles per clock cycle of every net under uniform random inputs.

    Each cycle is sampled twice: right after the clock edge (flip-flops
    updated, inputs unchanged) and after the inputs switch to a fresh random
    vector. A net can thus toggle at most twice per cycle. The ``cycles``
    budget is split over ``streams`` parallel runs, each starting from the
    all-zero state.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    width = min(cycles, streams)
    steps = math.ceil(cycles / width)
    sim = Simulator(n, width, hold)
    rng = np.random.default_rng(seed)
    npi = len(sim.free_pis)
    bits = rng.integers(0, 2, size=(steps + 1, npi, width), dtype=np.uint8)
    words = [[_bits_to_int(bits[t, i]) for i in range(npi)] for t in range(steps + 1)]

    sim.set_inputs(words[0])
    sim.evaluate()
    prev = list(sim.values)
    toggles = [0] * len(prev)
    for t in range(steps):
        active = min(width, math.ceil((cycles - t) / steps))
        amask = (1 << active) - 1
        sim.clock()
        for phase in (0, 1):
            if phase:
                sim.set_inputs(words[t + 1])
            sim.evaluate()
            cur = sim.values
            for i, (a, b) in enumerate(zip(prev, cur)):
                if a != b:
                    toggles[i] += ((a ^ b) & amask).bit_count()
            prev = list(cur)
    tpc = {net: toggles[i] / cycles for net, i in sim.index.items()}
    drivers = {net: n.driver_cell(net) for net in n.nets}
    return ToggleProfile(tpc, cycles, seed, drivers)


def classify_lcn(p: ToggleProfile, threshold: float = 0.1) -> tuple[set[str], set[str]]:
    """Low-controllability nets (TPC <= threshold) and the cells driving them."""
    lcn = {net for net, v in p.tpc.items() if v <= threshold}
    lcc = {p.drivers[net] for net in lcn if p.drivers.get(net) is not None}
    return lcn, lcc


# equivalence --------------------------------------------------------------
@dataclass(frozen=True)
class Counterexample:
    inputs: list[dict[str, int]]
    cycle: int
    po: str
    expected: int
    got: int


@dataclass(frozen=True)
class EquivalenceVerdict:
    mode: str
    vectors_tested: int
    mismatch: Counterexample | None = None

    @property
    def equivalent(self) -> bool:
        return self.mismatch is None


def parse_key(key: str | Sequence[int]) -> list[int]:
    if isinstance(key, str):
        key = key.strip()
        if any(ch not in "01" for ch in key):
            raise SemanticError(f"key must be a bitstring, got {key!r}")
        return [int(ch) for ch in key]
    return [int(b) for b in key]


def _key_inputs(locked: Netlist) -> list[str]:
    out, i = [], 0
    pis = set(locked.pis)
    while key_net(i) in pis:
        out.append(key_net(i))
        i += 1
    return out


def keychain_length(locked: Netlist) -> int:
    i = 0
    while keychain_ff(i) in locked.cells:
        i += 1
    return i


def load_key(sim: Simulator, key: Sequence[int]) -> None:
    """Shift ``key`` into the keychain (first bit ends up in stage 0), then
    return every functional flip-flop to its reset value."""
    others = [0] * len(sim.free_pis)
    din = sim.free_pis.index(KEYCHAIN_DIN)
    load = sim.free_pis.index(KEYCHAIN_LOAD)
    sim.reset()
    for bit in key:
        words = list(others)
        words[load] = sim.mask
        words[din] = sim.mask if bit else 0
        sim.set_inputs(words)
        sim.evaluate()
        sim.clock()
    chain = {keychain_ff(i) for i in range(len(key))}
    sim.state = [st if name in chain else 0 for name, st in zip(sim.ff_names, sim.state)]


def check_equivalence(orig: Netlist, locked: Netlist, key: str | Sequence[int],
                      mode: str = "auto", budget: int | None = None,
                      seed: int = 1) -> EquivalenceVerdict:
    """Compare every primary output of ``orig`` and ``locked`` every cycle.

    ``locked`` either carries a keychain (the key is shifted in first, with
    the functional flip-flops held in reset) or exposes its key selects as
    ``__tmx_k<i>`` primary inputs. ``mode`` is ``exhaustive``, ``random`` or
    ``auto`` (exhaustive up to 16 inputs). ``budget`` is the number of cycles
    per stream in exhaustive mode and the number of vectors in random mode.
    """
    bits = parse_key(key)
    sequential = bool(orig.ffs())
    if KEYCHAIN_DIN in locked.pis:
        k = keychain_length(locked)
        hold: dict[str, int] = {}
        extra = {KEYCHAIN_DIN, KEYCHAIN_LOAD}
    else:
        knets = _key_inputs(locked)
        k = len(knets)
        hold = {net: b for net, b in zip(knets, bits)}
        extra = set(knets)
    if k != len(bits):
        raise KeyLengthMismatch(f"design has {k} key bits, key has {len(bits)}")
    functional = [p for p in locked.pis if p not in extra]
    if set(functional) != set(orig.pis):
        raise SemanticError("locked and original designs have different functional inputs")
    if set(locked.pos) != set(orig.pos):
        raise SemanticError("locked and original designs have different outputs")
    npi = len(orig.pis)

    if mode == "auto":
        mode = "exhaustive" if npi <= 16 else "random"
    if mode == "exhaustive":
        if npi > EXHAUSTIVE_LIMIT:
            raise SemanticError(f"exhaustive mode needs <= {EXHAUSTIVE_LIMIT} inputs, got {npi}")
        width = 1 << npi
        cycles = budget or (8 if sequential else 1)
    elif mode == "random":
        total = budget or 10_000
        width = total if not sequential else min(total, 256)
        cycles = math.ceil(total / width)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    a = Simulator(orig, width)
    b = Simulator(locked, width, hold)
    if KEYCHAIN_DIN in locked.pis:
        load_key(b, bits)
    rng = np.random.default_rng(seed)
    order_a = orig.pis
    pos_b = {p: i for i, p in enumerate(b.free_pis)}
    history: list[list[int]] = []
    lanes = np.arange(width, dtype=np.int64)
    for t in range(cycles):
        if mode == "exhaustive":
            stride = (2 * t + 1) % width if width > 1 else 1
            vec = (lanes * stride + t * 0x9E37) % width
            words = [_bits_to_int(((vec >> i) & 1).astype(np.uint8)) for i in range(npi)]
        else:
            words = [_bits_to_int(rng.integers(0, 2, size=width, dtype=np.uint8))
                     for _ in range(npi)]
        history.append(words)
        a.set_inputs(words)
        wb = [0] * len(b.free_pis)
        for name, w in zip(order_a, words):
            wb[pos_b[name]] = w
        b.set_inputs(wb)
        a.evaluate()
        b.evaluate()
        for po in orig.pos:
            diff = a.get(po) ^ b.get(po)
            if diff:
                lane = (diff & -diff).bit_length() - 1
                seq = [{p: (w >> lane) & 1 for p, w in zip(order_a, ws)} for ws in history]
                ce = Counterexample(seq, t, po, (a.get(po) >> lane) & 1, (b.get(po) >> lane) & 1)
                return EquivalenceVerdict(mode, width * (t + 1), ce)
        a.clock()
        b.clock()
    return EquivalenceVerdict(mode, width * cycles, None)
