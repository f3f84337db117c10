"""Command-line entry point.

Subcommands select the analysis; model parameters come from a preset
(--preset) overlaid by a config file (--config) and the global flags.
`selftest` runs a quick oracle suite and needs no configuration.
"""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, ScenarioConfig, ScenarioKind, config_from_preset, load_config

_SUBCOMMANDS = {
    "levels": "level-spacing statistics and the spacing-ratio scan",
    "entropy": "entanglement-entropy growth over a disorder scan",
    "dos": "density of states at the initial-state energy over a scan",
    "qfi": "quantum Fisher information traces and regime fits",
    "flucts": "long-time fluctuations and the fluctuation-dissipation records",
    "pxp": "constrained-model diagnostics (overlaps, survival, qfi, fdt)",
    "selftest": "run the built-in oracle checks and exit",
}

_DEFAULT_PRESET = {
    "levels": "fig1a",
    "entropy": "fig1c",
    "dos": "fig1d",
    "qfi": "fig2a",
    "flucts": "fig3a",
    "pxp": "fig2c",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergoprobe",
        description="Exact-diagonalization diagnostics of ergodicity breaking")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        if name == "selftest":
            continue
        p.add_argument("--preset", default=None,
                       help=f"parameter preset ({', '.join(sorted(PRESETS))})")
        p.add_argument("--config", default=None, help="INI config file overlay")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker pool size")
    return parser


def resolve_config(args) -> ScenarioConfig:
    preset = args.preset or _DEFAULT_PRESET[args.command]
    cfg = config_from_preset(preset)
    if args.config:
        cfg = load_config(args.config, base=cfg)
    cfg.analysis = args.command
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return run_selftest()
    from .scenarios import run_scenario

    cfg = resolve_config(args)
    report = run_scenario(cfg)
    n_ok = sum(1 for t in report.tasks if t.status == "ok")
    print(f"{args.command}: {n_ok}/{len(report.tasks)} tasks ok; "
          f"outputs in {report.out_dir}")
    if not report.ok:
        print(f"{report.failures} task(s) failed; see manifest.json", file=sys.stderr)
        return 2
    return 0


def run_selftest() -> int:
    """Fast oracle suite: each check prints one pass/fail line."""
    import numpy as np

    from .evolve import TimeGrid, long_time_fluctuations
    from .hilbert import StateVector, apply_pauli, basis_state, build_constrained_basis, build_full_basis
    from .models import SpinChainParams, assemble, build_bath, build_coupling, build_probe, site_operator
    from .probes import (GeneratorObservable, fdt_predict, fit_chi, FDTRecord,
                         loschmidt_qfi_check, qfi_trace, qfi_trace_reference)
    from .spectra import diagonalize, r_statistic, sample_goe

    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    def constrained_enumeration():
        b = build_constrained_basis(10)
        brute = [s for s in range(1 << 10) if s & (s >> 1) == 0]
        assert list(b.states) == brute

    def pauli_algebra():
        b = build_full_basis(5)
        rng = np.random.default_rng(0)
        amp = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        psi = StateVector(b, amp / np.linalg.norm(amp))
        lhs = apply_pauli(b, 3, "x", apply_pauli(b, 3, "y", psi))
        rhs = apply_pauli(b, 3, "z", psi)
        assert np.allclose(lhs.amplitudes, 1j * rhs.amplitudes, atol=1e-12)

    def eigh_residual():
        rng = np.random.default_rng(1)
        a = rng.standard_normal((200, 200))
        h = (a + a.T) / 2
        es = diagonalize(h)
        es.verify(h)

    def r_endpoints():
        rng = np.random.default_rng(2)
        e = np.cumsum(rng.exponential(size=20001))
        assert abs(r_statistic(e, window=1.0).mean_r - 0.386) < 0.01
        assert abs(r_statistic(sample_goe(800, 3), window=0.6).mean_r - 0.53) < 0.02

    def qfi_equivalence():
        rng = np.random.default_rng(4)
        a = rng.standard_normal((16, 16))
        es = diagonalize((a + a.T) / 2)
        es.basis = build_full_basis(4)
        gen = GeneratorObservable.from_eigensystem(es, np.diag(np.sign(np.arange(16) % 2 - 0.5)))
        amp = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        psi = StateVector(es.basis, amp / np.linalg.norm(amp))
        grid = TimeGrid(np.geomspace(0.01, 20, 12))
        fast = qfi_trace(es, psi, gen, grid).values
        slow = qfi_trace_reference(es, psi, gen, grid).values
        assert np.max(np.abs(fast - slow) / np.maximum(np.abs(slow), 1e-12)) < 1e-8

    def loschmidt_two_level():
        basis = build_full_basis(1)
        from .models import HamiltonianMatrix

        def builder(lam):
            return HamiltonianMatrix(basis, np.array([[-1.0, lam], [lam, 1.0]]), "toy")

        dev = loschmidt_qfi_check(builder, 0.0, basis_state(basis, 0),
                                  TimeGrid.linear(3.0, 20, t_min=0.1), epsilon=1e-5)
        assert dev < 1e-3

    def fluctuation_oracle():
        p = SpinChainParams(7, jx_sb=0.4)
        h = assemble([build_probe(p), build_bath(p), build_coupling(p)])
        es = diagonalize(h)
        rng = np.random.default_rng(5)
        amp = rng.standard_normal(es.dim) + 1j * rng.standard_normal(es.dim)
        psi = StateVector(es.basis, amp / np.linalg.norm(amp))
        o = site_operator(es.basis, 1, "z")
        gaps = np.diff(es.energies)
        horizon = 100.0 / gaps[gaps > 1e-9].min()
        res = long_time_fluctuations(es, psi, o, horizon=horizon, n_samples=4096)
        assert abs(res.value - res.closed_form) < 0.05 * res.closed_form

    def fdt_round_trip():
        recs = [FDTRecord("t", 8, 0.0, i, fdt_predict(1.0, d, g, 1.0), g, d, 1.0)
                for i, (d, g) in enumerate([(100, 0.1), (300, 0.2), (900, 0.4)])]
        chi, _ = fit_chi(recs)
        assert abs(chi - 1.0) < 1e-10

    check("constrained basis enumeration == brute force", constrained_enumeration)
    check("pauli algebra sigma_x sigma_y = i sigma_z", pauli_algebra)
    check("eigendecomposition residual", eigh_residual)
    check("spacing-ratio endpoints (Poisson 0.386 / GOE 0.53)", r_endpoints)
    check("derivative-state QFI == triple sum", qfi_equivalence)
    check("Loschmidt finite difference -> QFI", loschmidt_two_level)
    check("temporal fluctuations -> closed form", fluctuation_oracle)
    check("fluctuation-dissipation round trip", fdt_round_trip)

    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, ok, msg in checks:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}{('  ' + msg) if msg else ''}")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} selftest checks passed")
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
