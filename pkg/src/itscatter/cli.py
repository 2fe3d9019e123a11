"""Command-line interface.

::

    itscatter run SCENARIO.json [--out-dir DIR] [--modes m1,m2] [--paper-literal]
    itscatter sweep SCENARIO.json --energies 1.0,1.5,2.0 [--jobs N]
    itscatter sweep SCENARIO.json --energies 1.0:3.0:8
    itscatter sweep SCENARIO.json --param profile.omega2.T --values 0.5,1,2,4

Exit status: 0 on success, 1 if any point failed (failures are recorded
in ``summary.csv`` and the manifest), 2 for an invalid scenario or
command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .amplitudes import MODES
from .config import load_scenario, parse_energies, parse_scenario
from .errors import ConfigError
from .runner import execute

log = logging.getLogger("itscatter")


def _parser():
    ap = argparse.ArgumentParser(prog="itscatter",
                                 description="Internal-time reactive scattering probabilities")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config", help="scenario JSON file")
        p.add_argument("--out-dir", help="output directory (default: scenario output_dir or ./out)")
        p.add_argument("--modes", help="comma-separated subset of hermite,legendre,oracle")
        p.add_argument("--paper-literal", action="store_true",
                       help="use the literal ((1-theta)/(m!n!))^1/2 normalisation")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; the pipeline is deterministic")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            p.add_argument("--energies", help="list a,b,c or range start:stop:count")
            p.add_argument("--param", help="dotted scenario key to sweep instead of energy")
            p.add_argument("--values", help="comma-separated values for --param")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        sc = load_scenario(args.config)
        raw = dict(sc.raw)
        if args.modes:
            modes = [m.strip() for m in args.modes.split(",") if m.strip()]
            bad = [m for m in modes if m not in MODES]
            if bad:
                raise ConfigError(f"unknown mode(s) {bad}")
            raw["modes"] = modes
            sc = parse_scenario(json.dumps(raw))
        out = Path(args.out_dir or sc.output_dir or "out")
        convention = "literal" if args.paper_literal else "theta-hermite"
        param = None
        energies = [None]
        if args.command == "sweep":
            if args.param:
                if args.values is None:
                    raise ConfigError("--param needs --values")
                values = [json.loads(v) for v in args.values.split(",") if v.strip()]
                param = (args.param, values)
            elif args.energies is not None:
                energies = parse_energies(args.energies)
            else:
                energies = list(sc.energies)
            for e in energies:
                if e is not None and not e > 0:
                    raise ConfigError("sweep energies must be positive", energy=e)
            if param is None and sc.system is None and energies:
                log.warning("analytic profile: energies do not change the profile")
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    records, manifest = execute(raw, energies, out, convention=convention, jobs=args.jobs,
                                param=param, command=args.command, seed=args.seed)
    for w in manifest["warnings"]:
        log.warning(w)
    failed = [r for r in records if r["status"] != "ok"]
    for r in failed:
        print(f"{sc.name}: point {r['index']} (E_k={r['E_k']}): {r['message']}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
