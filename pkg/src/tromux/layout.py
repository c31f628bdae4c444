"""Row/site accounting standing in for placement.

There are no coordinates: a floorplan is a number of rows times a number
of sites per row, and every cell occupies ``width`` sites.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InsufficientSites
from .library import CellLibrary
from .netlist import Netlist


@dataclass(frozen=True)
class Floorplan:
    rows: int
    sites_per_row: int

    def __post_init__(self):
        if self.rows < 1 or self.sites_per_row < 1:
            raise ValueError("rows and sites_per_row must be positive")

    @property
    def total_sites(self) -> int:
        return self.rows * self.sites_per_row


@dataclass(frozen=True)
class SiteUsage:
    occupied: int
    open: int
    utilization: float


def occupied_sites(n: Netlist, lib: CellLibrary | None = None) -> int:
    lib = lib or n.lib
    return sum(lib[c.type].width for c in n.cells.values())


def site_usage(n: Netlist, fp: Floorplan, lib: CellLibrary | None = None) -> SiteUsage:
    occ = occupied_sites(n, lib)
    total = fp.total_sites
    if occ > total:
        raise InsufficientSites(f"netlist needs {occ} sites, floorplan has {total}")
    return SiteUsage(occ, total - occ, occ / total)


def make_floorplan(n: Netlist, lib: CellLibrary | None = None,
                   target_utilization: float = 0.7) -> Floorplan:
    """Near-square floorplan whose utilization is ``target_utilization``,
    rounded up to a whole row."""
    if not 0 < target_utilization <= 1:
        raise ValueError("target utilization must be in (0, 1]")
    need = max(1, math.ceil(occupied_sites(n, lib) / target_utilization - 1e-9))
    rows = max(1, math.isqrt(need))
    return Floorplan(rows, math.ceil(need / rows))
