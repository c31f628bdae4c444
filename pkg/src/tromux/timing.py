"""Static timing analysis and the timing/controllability cell scores.

Timing paths start at primary inputs (arrival 0) and flip-flop outputs
(arrival = clock-to-Q delay) and end at primary outputs and flip-flop D
inputs (required = clock period). Every gate has one worst-case delay; an
optional per-net extra delay models wires or inserted hardware. Per-net
worst slack is computed by forward/backward longest-path DP, which equals the
minimum over all start-to-end paths through the net.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import UnknownNet
from .netlist import Netlist
from .simulation import ToggleProfile

#: slack assumed for nets that lie on no timing path
UNCOVERED_SLACK = -0.5


@dataclass(frozen=True)
class TimingReport:
    clock_period: float
    worst_slack: dict[str, float | None]
    wns: float
    tns: float
    arrival: dict[str, float | None]
    endpoints: tuple[str, ...] = ()

    def covered(self, net: str) -> bool:
        return self.worst_slack[net] is not None


def run_sta(n: Netlist, clock_period: float, extra_delay: Mapping[str, float] | None = None,
            lib=None) -> TimingReport:
    lib = lib or n.lib
    extra = extra_delay or {}
    arrival: dict[str, float | None] = {net: None for net in n.nets}
    for pi in n.pis:
        arrival[pi] = 0.0 + extra.get(pi, 0.0)
    for ff in n.ffs():
        c = n.cells[ff]
        for out in c.outputs:
            arrival[out] = lib[c.type].delay + extra.get(out, 0.0)
    order = n.comb_order()
    for name in order:
        c = n.cells[name]
        ins = [arrival[i] for i in c.inputs if arrival[i] is not None]
        if not ins:
            continue
        base = max(ins) + lib[c.type].delay
        for out in c.outputs:
            arrival[out] = base + extra.get(out, 0.0)

    required: dict[str, float] = {net: math.inf for net in n.nets}
    endpoints = set(n.pos)
    for ff in n.ffs():
        endpoints.add(n.cells[ff].inputs[0])
    for e in endpoints:
        required[e] = clock_period
    for name in reversed(order):
        c = n.cells[name]
        req = min(required[o] - extra.get(o, 0.0) for o in c.outputs) - lib[c.type].delay
        if req == math.inf:
            continue
        for i in c.inputs:
            if req < required[i]:
                required[i] = req

    slack: dict[str, float | None] = {}
    for net in n.nets:
        a = arrival[net]
        r = required[net]
        slack[net] = None if a is None or r == math.inf else r - a
    covered = [s for s in slack.values() if s is not None]
    wns = min(covered) if covered else 0.0
    tns = 0.0
    ends = tuple(sorted(endpoints))
    for e in ends:
        if arrival[e] is not None:
            s = clock_period - arrival[e]
            if s < 0:
                tns += s
    return TimingReport(clock_period, slack, wns, tns, arrival, ends)


def critical_delay(n: Netlist) -> float:
    """Longest start-to-end arrival time (the smallest period with zero WNS)."""
    rep = run_sta(n, 0.0)
    vals = [rep.arrival[e] for e in rep.endpoints if rep.arrival[e] is not None]
    return max(vals, default=0.0)


def min_slack(net: str, report: TimingReport, fallback: float = UNCOVERED_SLACK) -> float:
    if net not in report.worst_slack:
        raise UnknownNet(net)
    s = report.worst_slack[net]
    return fallback if s is None else s


def score_formula(ms: float, tpc: float) -> float:
    return 1.0 / (1.0 + math.exp(-2.0 * ms)) * (1.0 / (tpc + 1e-3))


def net_score(net: str, report: TimingReport, profile: ToggleProfile,
              fallback: float = UNCOVERED_SLACK) -> float:
    return score_formula(min_slack(net, report, fallback), profile.tpc[net])


def cell_score(cell: str, report: TimingReport, profile: ToggleProfile, n: Netlist,
               fallback: float = UNCOVERED_SLACK) -> float:
    """Sum of the scores of every net the cell drives."""
    return sum(net_score(o, report, profile, fallback) for o in n.cells[cell].outputs)


@dataclass(frozen=True)
class ScoreTable:
    net_scores: dict[str, float]
    cell_scores: dict[str, float]


def score_table(n: Netlist, report: TimingReport, profile: ToggleProfile,
                cells: Iterable[str] | None = None,
                fallback: float = UNCOVERED_SLACK) -> ScoreTable:
    cells = list(n.cells) if cells is None else list(cells)
    nets = {o for c in cells for o in n.cells[c].outputs}
    ns = {net: net_score(net, report, profile, fallback) for net in nets}
    cs = {c: sum(ns[o] for o in n.cells[c].outputs) for c in cells}
    return ScoreTable(ns, cs)
