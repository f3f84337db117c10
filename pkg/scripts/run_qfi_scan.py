#!/usr/bin/env python3
"""QFI dynamics across the three scenarios: coupling scan, disorder scan,
and the scarred-vs-thermal comparison in the constrained model.

Usage: python scripts/run_qfi_scan.py [--out OUT] [--threads K]
"""

import argparse

from ergoprobe.cli import main as ergoprobe_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/qfi")
    ap.add_argument("--threads", type=int, default=2)
    args = ap.parse_args()
    runs = [
        (["qfi", "--preset", "fig2a"], "coupling_scan"),
        (["qfi", "--preset", "fig2b"], "disorder_scan"),
        (["pxp", "--preset", "fig2c"], "scars"),
    ]
    for argv, sub in runs:
        rc = ergoprobe_main(argv + ["--out", f"{args.out}/{sub}",
                                    "--threads", str(args.threads)])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
