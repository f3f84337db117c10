#!/usr/bin/env python3
"""Fluctuation-dissipation records: coupling scan, disorder scan, system-size
scan at fixed disorder, and the constrained-model prefactor fit.

Usage: python scripts/run_fdt_scan.py [--out OUT] [--threads K]
"""

import argparse

from ergoprobe.cli import main as ergoprobe_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/fdt")
    ap.add_argument("--threads", type=int, default=2)
    args = ap.parse_args()
    runs = [
        (["flucts", "--preset", "fig3a"], "coupling_scan"),
        (["flucts", "--preset", "fig3b"], "disorder_scan"),
        (["flucts", "--preset", "fig4"], "size_scan"),
        (["pxp", "--preset", "fig3c"], "constrained_chi"),
    ]
    for argv, sub in runs:
        rc = ergoprobe_main(argv + ["--out", f"{args.out}/{sub}",
                                    "--threads", str(args.threads)])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
