#!/usr/bin/env python3
"""Level-spacing statistics across the integrable transition and the MBL
disorder scan (the two spectral-statistics figures).

Usage: python scripts/run_level_statistics.py [--out OUT] [--n N]
"""

import argparse

from ergoprobe.cli import main as ergoprobe_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/levels")
    ap.add_argument("--n", type=int, default=None, help="override chain length")
    ap.add_argument("--threads", type=int, default=2)
    args = ap.parse_args()

    for preset, sub in (("fig1a", "coupling_scan"), ("fig1b", "disorder_scan")):
        argv = ["levels", "--preset", preset, "--out", f"{args.out}/{sub}",
                "--threads", str(args.threads)]
        if args.n is not None:
            import tempfile, pathlib
            cfgfile = pathlib.Path(tempfile.mkdtemp()) / "override.ini"
            cfgfile.write_text(f"[model]\nn_sites = {args.n}\n")
            argv += ["--config", str(cfgfile)]
        rc = ergoprobe_main(argv)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
