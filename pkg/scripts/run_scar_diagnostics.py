#!/usr/bin/env python3
"""Scar diagnostics for the constrained flip model: eigenstate overlaps with
the alternating product state and survival-probability revivals.

Usage: python scripts/run_scar_diagnostics.py [--out OUT] [--n N]
"""

import argparse
import pathlib
import tempfile

from ergoprobe.cli import main as ergoprobe_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/scars")
    ap.add_argument("--n", type=int, default=16,
                    help="chain length (constrained dimension grows like Fibonacci)")
    args = ap.parse_args()
    cfgfile = pathlib.Path(tempfile.mkdtemp()) / "override.ini"
    cfgfile.write_text(f"[model]\nn_sites = {args.n}\n")
    return ergoprobe_main(["pxp", "--preset", "fig1f", "--config", str(cfgfile),
                           "--out", args.out])


if __name__ == "__main__":
    raise SystemExit(main())
