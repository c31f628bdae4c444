"""Command-line front end: ``tromux analyze | lock | verify | attack | export``.

Every command prints (or writes with ``-o``) a JSON report with sorted keys.
Wall-clock timings are kept under ``"timings"`` so that everything else is
byte-identical between runs with the same seed.

Exit codes: 0 success, 1 ``verify`` found a mismatch, 2 I/O or parse
error, 3 semantic error (unknown asset, key mismatch, ...), 4 internal
invariant failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import InvariantError, KeyLengthMismatch, ParseError, SemanticError
from .evaluation import constant_prop_probe, export_bench, find_key_muxes, local_structure_attack
from .layout import Floorplan, make_floorplan, site_usage
from .library import CellLibrary, default_library, load_library
from .locking import LockingConfig, default_period, harden
from .netlist import Netlist, parse_netlist, write_netlist
from .simulation import check_equivalence, classify_lcn, parse_key, toggle_profile
from .timing import run_sta

log = logging.getLogger("tromux")

EXIT_OK, EXIT_MISMATCH, EXIT_IO, EXIT_SEMANTIC, EXIT_INVARIANT = 0, 1, 2, 3, 4


class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def __call__(self, stage: str):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.timings[stage] = round(time.perf_counter() - self.t, 4)

        return _Stage()


def _digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


def _read(path: str) -> str:
    return Path(path).read_text()


def _library(args) -> tuple[CellLibrary, str | None]:
    if args.lib is None:
        return default_library(), None
    text = _read(args.lib)
    return load_library(text), text


def _netlist(path: str, lib: CellLibrary) -> tuple[Netlist, str]:
    text = _read(path)
    return parse_netlist(text, lib, name=Path(path).stem), text


def _assets(spec: str | None) -> list[str]:
    if not spec:
        return []
    if spec.startswith("@") or Path(spec).is_file():
        text = _read(spec.lstrip("@"))
        return [a for line in text.splitlines() for a in line.split("#")[0].replace(",", " ").split()]
    return [a for a in spec.split(",") if a]


def _floorplan(args, n: Netlist, lib: CellLibrary) -> Floorplan:
    if args.rows is not None or args.sites_per_row is not None:
        if args.rows is None or args.sites_per_row is None:
            raise SemanticError("--rows and --sites-per-row must be given together")
        return Floorplan(args.rows, args.sites_per_row)
    return make_floorplan(n, lib, args.target_util)


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def write_key(path: str | Path, key: str) -> None:
    """``k=<length>`` header, then the bits in key-index order (bit 0 first,
    which is also the order they are shifted into the keychain)."""
    Path(path).write_text(f"k={len(key)}\n{key}\n")


def read_key(path: str | Path) -> str:
    length = None
    bits = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#")[0].strip()
        if line.startswith("k="):
            length = int(line[2:])
        elif line:
            bits.append(line)
    key = "".join(bits)
    parse_key(key)
    if length is not None and length != len(key):
        raise KeyLengthMismatch(f"key file declares {length} bits but holds {len(key)}")
    return key


def _base(args, digests: dict) -> dict:
    return {"tool_version": __version__, "command": args.command,
            "seed": getattr(args, "seed", None), "inputs": digests}


# commands -------------------------------------------------------------------
def cmd_analyze(args) -> dict:
    timer = _Timer()
    with timer("parse"):
        lib, lib_text = _library(args)
        n, text = _netlist(args.netlist, lib)
    period = args.period if args.period is not None else default_period(n)
    with timer("sta"):
        sta = run_sta(n, period)
    with timer("toggle"):
        prof = toggle_profile(n, args.cycles, args.seed)
    lcn, lcc = classify_lcn(prof, args.tpc_threshold)
    fp = _floorplan(args, n, lib)
    usage = site_usage(n, fp, lib)
    covered = sum(1 for s in sta.worst_slack.values() if s is not None)
    report = _base(args, {"netlist": _digest(text), "library": _digest(lib_text) if lib_text else None})
    report.update({
        "design": n.name,
        "cells": len(n.cells),
        "ffs": len(n.ffs()),
        "pis": len(n.pis),
        "pos": len(n.pos),
        "nets": len(n.nets),
        "clock_period": period,
        "wns": sta.wns,
        "tns": sta.tns,
        "covered_nets": covered,
        "uncovered_nets": len(n.nets) - covered,
        "lcn": len(lcn),
        "lcc": len(lcc),
        "tpc_threshold": args.tpc_threshold,
        "cycles": args.cycles,
        "floorplan": {"rows": fp.rows, "sites_per_row": fp.sites_per_row, "total_sites": fp.total_sites},
        "occupied_sites": usage.occupied,
        "open_sites": usage.open,
        "utilization": usage.utilization,
        "timings": timer.timings,
    })
    return report


def cmd_lock(args) -> dict:
    timer = _Timer()
    with timer("parse"):
        lib, lib_text = _library(args)
        n, text = _netlist(args.netlist, lib)
        assets = _assets(args.assets)
    fp = _floorplan(args, n, lib)
    cfg = LockingConfig(alpha=args.alpha, sigma=args.sigma, key_seed=args.seed,
                        clock_period=args.period, tpc_threshold=args.tpc_threshold,
                        cycles=args.cycles, scheme=args.scheme, verify=not args.no_verify)
    with timer("harden"):
        h = harden(n, assets, fp, lib, cfg)
    prefix = args.output or n.name + "_locked"
    Path(prefix + ".bench").write_text(write_netlist(h.locked))
    write_key(prefix + ".key", h.key)
    report = _base(args, {"netlist": _digest(text), "library": _digest(lib_text) if lib_text else None,
                          "assets": sorted(assets)})
    report.update(h.report)
    report["records"] = [
        {"cell": r.locked_cell, "type": r.original_type, "implemented": r.implemented_type,
         "config": r.config, "key_index": r.key_index} for r in h.records]
    report["outputs"] = {"netlist": prefix + ".bench", "key": prefix + ".key"}
    report["timings"] = timer.timings
    Path(prefix + ".report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def cmd_verify(args) -> dict:
    timer = _Timer()
    lib, lib_text = _library(args)
    orig, t0 = _netlist(args.original, lib)
    locked, t1 = _netlist(args.locked, lib)
    key = read_key(args.key)
    with timer("equivalence"):
        v = check_equivalence(orig, locked, key, args.mode, args.budget, args.seed)
    report = _base(args, {"original": _digest(t0), "locked": _digest(t1)})
    report.update({
        "equivalent": v.equivalent, "mode": v.mode, "vectors": v.vectors_tested,
        "mismatch": None if v.mismatch is None else {
            "cycle": v.mismatch.cycle, "po": v.mismatch.po,
            "expected": v.mismatch.expected, "got": v.mismatch.got},
        "timings": timer.timings})
    return report


def cmd_attack(args) -> dict:
    timer = _Timer()
    lib, _ = _library(args)
    locked, text = _netlist(args.locked, lib)
    key = read_key(args.key) if args.key else None
    with timer("local_structure"):
        res = local_structure_attack(locked, true_key=key, threshold=args.threshold)
    report = _base(args, {"locked": _digest(text)})
    report["local_structure"] = res.as_dict()
    report["predictions"] = "".join(str(res.predictions[i]) for i in sorted(res.predictions))
    if args.probe:
        with timer("constant_prop"):
            sig = [constant_prop_probe(locked, i).signal for i in sorted(find_key_muxes(locked))]
        report["constant_prop"] = {"bits": len(sig), "nonzero": sum(1 for s in sig if s),
                                   "max_signal": max(sig, default=0)}
    report["timings"] = timer.timings
    return report


def cmd_export(args) -> dict:
    lib, _ = _library(args)
    n, text = _netlist(args.netlist, lib)
    out = export_bench(n, ff_pseudo_io=args.ff_pseudo_io)
    if args.output:
        Path(args.output).write_text(out)
    else:
        sys.stdout.write(out)
    return {}


# argument parsing -----------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tromux", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tromux {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--lib", help="cell library file (default: bundled library)")
        sp.add_argument("--seed", type=int, default=1)

    def floorplan(sp):
        sp.add_argument("--rows", type=int)
        sp.add_argument("--sites-per-row", type=int)
        sp.add_argument("--target-util", type=float, default=0.7,
                        help="utilization of a generated floorplan (default 0.7)")

    def analysis(sp):
        sp.add_argument("--period", type=float, help="clock period in ns (default: 1.1x critical delay)")
        sp.add_argument("--cycles", type=int, default=10_000)
        sp.add_argument("--tpc-threshold", type=float, default=0.1)

    a = sub.add_parser("analyze", help="timing, toggle activity and site usage")
    a.add_argument("netlist")
    common(a), floorplan(a), analysis(a)
    a.add_argument("-o", "--output")

    lk = sub.add_parser("lock", help="lock assets and fill open sites")
    lk.add_argument("netlist")
    common(lk), floorplan(lk), analysis(lk)
    lk.add_argument("--assets", help="comma-separated flip-flop names, or a file with one name per line")
    lk.add_argument("--alpha", type=int, default=3)
    lk.add_argument("--sigma", type=float, help="slack charge per instance (default: INV+MUX delay)")
    lk.add_argument("--scheme", choices=("tromux", "naive"), default="tromux")
    lk.add_argument("--no-verify", action="store_true")
    lk.add_argument("-o", "--output", help="output prefix")

    v = sub.add_parser("verify", help="check a locked netlist against the original")
    v.add_argument("original")
    v.add_argument("locked")
    v.add_argument("key")
    common(v)
    v.add_argument("--mode", choices=("auto", "exhaustive", "random"), default="auto")
    v.add_argument("--budget", type=int)
    v.add_argument("-o", "--output")

    at = sub.add_parser("attack", help="run the oracle-less attacks")
    at.add_argument("locked")
    at.add_argument("--key", help="true key file, for scoring")
    common(at)
    at.add_argument("--threshold", type=float, default=0.1)
    at.add_argument("--probe", action="store_true", help="also run the constant-propagation probe")
    at.add_argument("-o", "--output")

    ex = sub.add_parser("export", help="write plain BENCH")
    ex.add_argument("netlist")
    common(ex)
    ex.add_argument("--ff-pseudo-io", action="store_true")
    ex.add_argument("-o", "--output")
    return p


COMMANDS = {"analyze": cmd_analyze, "lock": cmd_lock, "verify": cmd_verify,
            "attack": cmd_attack, "export": cmd_export}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        report = COMMANDS[args.command](args)
    except (OSError, ParseError) as e:
        print(f"tromux: error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SemanticError, ValueError) as e:
        print(f"tromux: error: {e}", file=sys.stderr)
        return EXIT_SEMANTIC
    except InvariantError as e:
        print(f"tromux: internal error: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    if args.command == "lock":
        if not args.output:
            print(json.dumps({"key_length": report["key_length"], "outputs": report["outputs"]}))
    elif args.command != "export":
        _emit(report, args.output)
    if args.command == "verify" and not report["equivalent"]:
        return EXIT_MISMATCH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
