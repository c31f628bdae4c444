"""TroMUX logic locking for gate-level netlists."""
from .errors import (InvariantError, ParseError, SemanticError, TromuxError)
from .layout import Floorplan, make_floorplan, site_usage
from .library import CellLibrary, GateType, default_library, load_library
from .locking import (HardenedDesign, LockingConfig, TroMuxRecord, build_keychain, harden,
                      lock_cell, select_cells)
from .netlist import Cell, Netlist, parse_netlist, read_netlist, write_netlist
from .simulation import check_equivalence, simulate, toggle_profile
from .timing import run_sta

__version__ = "0.1.0"


def load_benchmark(name: str) -> Netlist:
    """One of the bundled benchmark netlists, parsed with the default library."""
    from importlib import resources
    text = resources.files("tromux.data").joinpath("bench", f"{name}.bench").read_text()
    return parse_netlist(text, default_library(), name=name)


def benchmark_names() -> list[str]:
    from importlib import resources
    return sorted(p.name[:-6] for p in resources.files("tromux.data").joinpath("bench").iterdir()
                  if p.name.endswith(".bench"))
