"""TroMUX key-gate insertion and the two-stage hardening flow.

A TroMUX instance around a gate ``G`` consists of ``G`` itself (kept, or
swapped for its complement ``G'``), an inverter on its output and a 2:1 MUX
whose select is one key bit. The MUX output takes over the original output
net, so sinks and primary outputs keep their names. The four configurations
of a simple gate are::

    id  implemented  MUX in0     MUX in1     correct key
    1   G            direct      inverted    0
    2   G            inverted    direct      1
    3   G'           inverted    direct      0
    4   G'           direct      inverted    1

Flip-flops whose cell has both Q and QN outputs skip the inverter and feed
Q and QN to the MUX directly (ids 1-2 only). Single-output flip-flops are
handled like simple gates, with ids 3-4 available only when the library
pairs the flip-flop with a complementary one.

Until :func:`build_keychain` runs, key selects are exposed as primary inputs
named ``__tmx_k<i>``.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (AlreadyLocked, InsufficientSites, InvariantError, KeyLengthMismatch,
                     SemanticError, UnknownAsset, UnknownCell, UnsupportedCell)
from .layout import Floorplan, occupied_sites, site_usage
from .library import CellLibrary, GateType
from .netlist import Netlist, NetlistBuilder, cone, is_reserved
from .simulation import (KEYCHAIN_DIN, KEYCHAIN_LOAD, ToggleProfile, check_equivalence,
                         classify_lcn, key_net, keychain_ff, toggle_profile)
from .timing import UNCOVERED_SLACK, TimingReport, critical_delay, run_sta, score_formula

log = logging.getLogger(__name__)

SCHEMES = ("tromux", "naive")


@dataclass(frozen=True)
class TroMuxRecord:
    locked_cell: str
    original_type: str
    implemented_type: str
    mux_cell: str
    inv_cell: str | None
    key_index: int
    key_bit: int
    config: int


@dataclass
class LockingConfig:
    alpha: int = 3
    sigma: float | None = None
    key_seed: int = 1
    clock_period: float | None = None
    tpc_threshold: float = 0.1
    cycles: int = 10_000
    tpc_seed: int = 1
    scheme: str = "tromux"
    fallback_slack: float = UNCOVERED_SLACK
    verify: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class HardenedDesign:
    locked: Netlist
    key: str
    records: list[TroMuxRecord]
    report: dict = field(default_factory=dict)


def key_length(open_sites: int, lib: CellLibrary, alpha: int) -> int:
    """Number of TroMUX instances the open sites can absorb."""
    per_instance = lib.inv.width + lib.mux.width + lib.ff.width + alpha
    return max(0, open_sites // per_instance)


def default_sigma(lib: CellLibrary) -> float:
    return lib.inv.delay + lib.mux.delay


def default_period(n: Netlist) -> float:
    """10% above the critical delay, rounded up to 10 ps."""
    return math.ceil(critical_delay(n) * 1.1 * 100 - 1e-9) / 100 or 0.01


# instance construction ----------------------------------------------------
def _is_qqn(gt: GateType) -> bool:
    return gt.is_ff and gt.n_outputs == 2 and set(gt.outputs) == {("state",), ("not", ("state",))}


def n_configs(lib: CellLibrary, type_name: str) -> int:
    gt = lib[type_name]
    if _is_qqn(gt):
        return 2
    return 4 if gt.complement is not None else 2


def draw_config(rng: random.Random, lib: CellLibrary, type_name: str, scheme: str = "tromux") -> int:
    if scheme == "naive":
        return 1
    return rng.randrange(n_configs(lib, type_name)) + 1


def instance_cost(lib: CellLibrary, type_name: str, config: int, keychain: bool = True) -> int:
    """Sites an instance adds, including its keychain stage."""
    gt = lib[type_name]
    cost = lib.mux.width
    if not _is_qqn(gt):
        cost += lib.inv.width
        if config in (3, 4):
            cost += lib[gt.complement].width - gt.width
    if keychain:
        cost += lib.ff.width + lib.mux.width
    return cost


def locked_cells(n: Netlist | NetlistBuilder) -> set[str]:
    return {name[len("__tmx_mux_"):] for name in n.cells if name.startswith("__tmx_mux_")}


def _key_count(pis: Iterable[str]) -> int:
    pis = set(pis)
    i = 0
    while key_net(i) in pis:
        i += 1
    return i


def _used_nets(b: NetlistBuilder) -> set[str]:
    used = set(b.pos)
    for c in b.cells.values():
        used.update(c.inputs)
    return used


def _check_lockable(b: NetlistBuilder, cell: str) -> GateType:
    if cell not in b.cells:
        raise UnknownCell(cell)
    if is_reserved(cell):
        raise UnsupportedCell(f"{cell} is locking hardware")
    if f"__tmx_mux_{cell}" in b.cells:
        raise AlreadyLocked(cell)
    if KEYCHAIN_DIN in b.pis:
        raise SemanticError("cannot lock after the keychain has been built")
    gt = b.lib[b.cells[cell].type]
    if not b.lib.is_lockable(gt.name):
        raise UnsupportedCell(f"{cell} ({gt.name}) has no complement and is not a flip-flop")
    return gt


def _lock_into(b: NetlistBuilder, cell: str, config: int, key_index: int) -> TroMuxRecord:
    lib = b.lib
    gt = _check_lockable(b, cell)
    c = b.cells[cell]
    direct = f"__tmx_n_{cell}"
    mux_name = f"__tmx_mux_{cell}"
    sel = key_net(key_index)
    if sel in b.pis:
        raise SemanticError(f"key input {sel} already exists")
    if _is_qqn(gt):
        used = _used_nets(b)
        slot = next((i for i, o in enumerate(c.outputs) if o in used), 0)
        target = c.outputs[slot]
        other = c.outputs[1 - slot]
        outs = list(c.outputs)
        outs[slot] = direct
        b.replace(cell, outputs=outs)
        in0, in1 = (direct, other) if config == 1 else (other, direct)
        key_bit = 0 if config == 1 else 1
        impl = gt.name
        inv_name = None
    else:
        target = c.outputs[0]
        impl = gt.name if config in (1, 2) else gt.complement
        b.replace(cell, type=impl, outputs=(direct,))
        inv_name = f"__tmx_inv_{cell}"
        inv_out = f"__tmx_ni_{cell}"
        b.add(inv_name, lib.inv.name, (direct,), (inv_out,))
        in0, in1 = (direct, inv_out) if config in (1, 4) else (inv_out, direct)
        key_bit = 0 if config in (1, 3) else 1
    b.add(mux_name, lib.mux.name, (in0, in1, sel), (target,))
    b.pis.append(sel)
    return TroMuxRecord(cell, gt.name, impl, mux_name, inv_name, key_index, key_bit, config)


def lock_cell(n: Netlist, cell: str, rng: random.Random,
              scheme: str = "tromux", config: int | None = None) -> tuple[Netlist, TroMuxRecord]:
    """Wrap ``cell`` in a TroMUX instance with a randomly drawn configuration."""
    b = n.edit()
    gt = _check_lockable(b, cell)
    if config is None:
        config = draw_config(rng, n.lib, gt.name, scheme)
    elif not 1 <= config <= n_configs(n.lib, gt.name):
        raise ValueError(f"configuration {config} not available for {gt.name}")
    rec = _lock_into(b, cell, config, _key_count(b.pis))
    return b.build(), rec


def deferred_targets(n: Netlist, cell: str) -> tuple[list[str], list[str]]:
    """Lockable cells standing in for a complex gate, and unprotected outputs.

    Walks the fan-out depth first, passing through other non-lockable
    combinational cells, and stops at the first lockable cell (simple gate or
    flip-flop) on every path. Cells that are already locked count as covered.
    Returns the not-yet-locked targets in discovery order and the primary
    outputs reached without meeting a lockable cell.
    """
    if cell not in n.cells:
        raise UnknownCell(cell)
    lib = n.lib
    done = locked_cells(n)
    targets: list[str] = []
    unprotected: list[str] = []
    seen = {cell}

    def walk(net: str) -> None:
        if n.is_po(net) and net not in unprotected:
            unprotected.append(net)
        for sink, _ in n.sinks[net]:
            if sink in seen or is_reserved(sink):
                continue
            seen.add(sink)
            if lib.is_lockable(n.cells[sink].type):
                if sink not in done:
                    targets.append(sink)
            else:
                for out in n.cells[sink].outputs:
                    walk(out)

    for out in n.cells[cell].outputs:
        walk(out)
    return targets, unprotected


def lock_complex_deferred(n: Netlist, cell: str, rng: random.Random,
                          scheme: str = "tromux") -> tuple[Netlist, list[TroMuxRecord]]:
    targets, unprotected = deferred_targets(n, cell)
    for po in unprotected:
        log.warning("output %s is reached from %s without a lockable cell", po, cell)
    if not targets:
        log.warning("locking %s: no lockable cell in its fan-out", cell)
    b = n.edit()
    records = []
    for t in targets:
        cfg = draw_config(rng, n.lib, b.cells[t].type, scheme)
        records.append(_lock_into(b, t, cfg, _key_count(b.pis)))
    return b.build(), records


# cell selection -----------------------------------------------------------
def timing_cone(n: Netlist, net: str) -> set[str]:
    """Nets sharing a timing path with ``net``: its fan-in and fan-out cones
    up to flip-flop boundaries, plus the net itself."""
    return cone(n, net, "fanin") | cone(n, net, "fanout") | {net}


def selectable(n: Netlist, exclude: Iterable[str] = ()) -> list[str]:
    skip = locked_cells(n) | set(exclude)
    return [c for c in n.cells if not is_reserved(c) and c not in skip]


def select_cells(n: Netlist, report: TimingReport, profile: ToggleProfile, K: int,
                 sigma: float, candidates: Iterable[str] | None = None,
                 fallback: float = UNCOVERED_SLACK) -> list[str]:
    """Greedy pick of ``K`` cells by cell score with pessimistic slack updates.

    Each round rescoring every remaining candidate, takes the best one (ties
    go to the lexicographically smallest name) and charges ``sigma`` to the
    worst slack of every net on a timing path through each of its outputs.
    """
    pool = sorted(selectable(n) if candidates is None else candidates)
    slack = {net: s for net, s in report.worst_slack.items() if s is not None}
    tpc = profile.tpc
    cones: dict[str, set[str]] = {}
    chosen: list[str] = []
    while len(chosen) < K and pool:
        best, best_score = None, -math.inf
        for c in pool:
            score = 0.0
            for out in n.cells[c].outputs:
                score += score_formula(slack.get(out, fallback), tpc[out])
            if score > best_score:
                best, best_score = c, score
        chosen.append(best)
        pool.remove(best)
        for out in n.cells[best].outputs:
            if out not in cones:
                cones[out] = timing_cone(n, out)
            for m in cones[out]:
                if m in slack:
                    slack[m] -= sigma
    return chosen


# key storage ----------------------------------------------------------------
def build_keychain(n: Netlist, key: str | Sequence[int]) -> Netlist:
    """Replace the exposed key inputs by a loadable shift register.

    Two inputs are added: ``__tmx_din`` feeds the last stage and
    ``__tmx_load`` selects shifting (1) or holding (0). Stage ``i`` drives
    key select ``i``; shifting the key in first-bit-first for ``k`` cycles
    leaves bit ``i`` in stage ``i``.
    """
    k = len(key)
    have = _key_count(n.pis)
    if have != k:
        raise KeyLengthMismatch(f"design exposes {have} key inputs, key has {k} bits")
    if k == 0:
        return n
    lib = n.lib
    b = n.edit()
    keys = {key_net(i) for i in range(k)}
    b.pis = [p for p in b.pis if p not in keys] + [KEYCHAIN_DIN, KEYCHAIN_LOAD]
    for i in range(k):
        src = KEYCHAIN_DIN if i == k - 1 else key_net(i + 1)
        d = f"__tmx_kd{i}"
        b.add(f"__tmx_kmux{i}", lib.mux.name, (key_net(i), src, KEYCHAIN_LOAD), (d,))
        b.add(keychain_ff(i), lib.ff.name, (d,), (key_net(i),))
    return b.build()


# the two-stage flow ---------------------------------------------------------
def harden(n: Netlist, assets: Sequence[str], floorplan: Floorplan,
           lib: CellLibrary | None = None, cfg: LockingConfig | None = None) -> HardenedDesign:
    """Lock the security assets, then fill the open sites with TroMUX
    instances chosen by timing and controllability.

    Stage 2 is repeated on the partially locked design until the key-length
    budget of the remaining open sites drops to zero, so the final layout
    cannot absorb another instance unless the candidates ran out first.
    """
    lib = lib or n.lib
    cfg = cfg or LockingConfig()
    for a in assets:
        if a not in n.cells:
            raise UnknownAsset(f"asset {a} is not a cell of {n.name or 'the design'}")
        if not n.is_ff(a):
            raise UnknownAsset(f"asset {a} is not a flip-flop")
    if len(set(assets)) != len(assets):
        raise UnknownAsset("duplicate asset")
    rng = random.Random(cfg.key_seed)
    period = cfg.clock_period if cfg.clock_period is not None else default_period(n)
    sigma = cfg.sigma if cfg.sigma is not None else default_sigma(lib)
    chain_cost = lib.ff.width + lib.mux.width
    total = floorplan.total_sites
    before = site_usage(n, floorplan, lib)

    base_profile = toggle_profile(n, cfg.cycles, cfg.tpc_seed)
    _, base_lcc = classify_lcn(base_profile, cfg.tpc_threshold)
    base_sta = run_sta(n, period)

    b = n.edit()
    records: list[TroMuxRecord] = []

    def open_sites() -> int:
        return total - sum(lib[c.type].width for c in b.cells.values()) - len(records) * chain_cost

    for a in assets:
        config = draw_config(rng, lib, b.cells[a].type, cfg.scheme)
        if instance_cost(lib, b.cells[a].type, config) > open_sites():
            raise InsufficientSites(f"no room to lock asset {a}; lower the utilization")
        records.append(_lock_into(b, a, config, len(records)))
    ppl_usage = open_sites()

    consumed: set[str] = set()
    deferred: dict[str, list[str]] = {}
    unprotected: set[str] = set()
    rounds = 0
    shortfall = 0
    while True:
        K = key_length(open_sites(), lib, cfg.alpha)
        if K == 0:
            break
        ppl = b.build()
        hold = {key_net(r.key_index): r.key_bit for r in records}
        report = run_sta(ppl, period)
        profile = toggle_profile(ppl, cfg.cycles, cfg.tpc_seed, hold=hold)
        pool = selectable(ppl, consumed)
        if not pool:
            shortfall = K
            break
        chosen = select_cells(ppl, report, profile, K, sigma, pool, cfg.fallback_slack)
        rounds += 1
        done = locked_cells(b)
        locked_now = 0
        for c in chosen:
            consumed.add(c)
            if lib.is_lockable(ppl.cells[c].type):
                targets = [c]
            else:
                targets, unprot = deferred_targets(ppl, c)
                unprotected.update(unprot)
                deferred[c] = []
            for t in targets:
                if t in done:
                    continue
                config = draw_config(rng, lib, b.cells[t].type, cfg.scheme)
                if instance_cost(lib, b.cells[t].type, config) > open_sites():
                    continue
                records.append(_lock_into(b, t, config, len(records)))
                done.add(t)
                consumed.add(t)
                locked_now += 1
                if c in deferred:
                    deferred[c].append(t)
        if len(chosen) < K and not selectable(b.build(), consumed):
            shortfall = K - locked_now
            break

    key = "".join(str(r.key_bit) for r in records)
    exposed = b.build()
    locked = build_keychain(exposed, key)
    after = site_usage(locked, floorplan, lib)
    if after.occupied != before.occupied + sum(
            instance_cost(lib, r.original_type, r.config) for r in records):
        raise InvariantError("site accounting does not add up")

    verdict = None
    if cfg.verify:
        verdict = check_equivalence(n, locked, key, "auto")
        if not verdict.equivalent:
            raise InvariantError(f"locked design is not equivalent: {verdict.mismatch}")

    locked_set = {r.locked_cell for r in records}
    protected_lcc = {c for c in base_lcc if c in locked_set or deferred.get(c)}
    final_sta = run_sta(locked, period)
    report = {
        "design": n.name,
        "scheme": cfg.scheme,
        "clock_period": period,
        "sigma": sigma,
        "alpha": cfg.alpha,
        "floorplan": {"rows": floorplan.rows, "sites_per_row": floorplan.sites_per_row,
                      "total_sites": total},
        "open_sites_before": before.open,
        "open_sites_after": after.open,
        "open_sites_ppl": ppl_usage,
        "utilization_before": before.utilization,
        "utilization_after": after.utilization,
        "locked_assets": sum(1 for a in assets if a in locked_set),
        "assets": len(assets),
        "locked_lcc": len(protected_lcc),
        "lcc": len(base_lcc),
        "key_length": len(key),
        "stage2_rounds": rounds,
        "shortfall": shortfall,
        "deferred_complex": {c: t for c, t in sorted(deferred.items())},
        "unprotected_outputs": sorted(unprotected),
        "wns_before": base_sta.wns,
        "tns_before": base_sta.tns,
        "wns_after": final_sta.wns,
        "tns_after": final_sta.tns,
        "pi_delta": len(locked.pis) - len(n.pis),
        "equivalence": None if verdict is None else {
            "mode": verdict.mode, "vectors": verdict.vectors_tested,
            "equivalent": verdict.equivalent},
    }
    return HardenedDesign(locked, key, records, report)
