import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from ergoprobe.config import (
    InitialStateKind,
    InitialStateSpec,
    PRESETS,
    ScenarioKind,
    config_from_preset,
    load_config,
)
from ergoprobe.errors import DimensionCapError
from ergoprobe.hilbert import build_constrained_basis, build_full_basis
from ergoprobe.models import (
    SpinChainParams,
    assemble,
    build_bath,
    build_coupling,
    build_disorder,
    build_probe,
    draw_disorder,
    site_operator,
)
from ergoprobe.probes import microcanonical_variance
from ergoprobe.scenarios import (
    UncoupledSpinSystem,
    aggregate,
    check_dimension,
    make_initial_state,
    neel_config,
    random_superposition_state,
    resolve_spin_params,
    run_scenario,
)
from ergoprobe.spectra import diagonalize


def small_cfg(preset, **overrides):
    cfg = config_from_preset(preset)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


class TestConfig:
    def test_presets_parse(self):
        for name in PRESETS:
            cfg = config_from_preset(name)
            assert cfg.scan_values

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            config_from_preset("fig9z")

    def test_file_overlay(self, tmp_path):
        p = tmp_path / "run.ini"
        p.write_text("[model]\nn_sites = 8\n[ensemble]\nn_realizations = 2\n")
        cfg = load_config(p, base=config_from_preset("fig1b"))
        assert cfg.n_sites == 8
        assert cfg.n_realizations == 2
        assert cfg.scenario is ScenarioKind.MBL

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[model]\nn_site = 8\n")
        with pytest.raises(ValueError, match="unknown key"):
            load_config(p)

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[models]\nn_sites = 8\n")
        with pytest.raises(ValueError, match="unknown config section"):
            load_config(p)

    def test_alpha0_resolution(self):
        spec = InitialStateSpec(alpha0=100)
        assert spec.resolve_alpha0(256) == 100
        with pytest.raises(ValueError):
            spec.resolve_alpha0(64)
        frac = InitialStateSpec(alpha0_fraction=0.671)
        assert frac.resolve_alpha0(1024) == round(0.671 * 1024)


class TestScanResolution:
    def test_coupling_scan_scales_both_contacts(self):
        cfg = config_from_preset("fig1a")
        p = resolve_spin_params(cfg, 0.001, seed=3)
        assert p.jx_sb == pytest.approx(0.001)
        assert p.jz_sb == pytest.approx(0.0005)  # preset ratio jz/jx = 0.5
        p = resolve_spin_params(cfg, 0.4, seed=3)
        assert p.jz_sb == pytest.approx(0.2)

    def test_disorder_scan(self):
        cfg = config_from_preset("fig1b")
        p = resolve_spin_params(cfg, 3.5, seed=9)
        assert p.w_disorder == 3.5
        assert p.disorder_seed == 9

    def test_dimension_guard(self):
        cfg = small_cfg("fig1b", dimension_cap=512)
        with pytest.raises(DimensionCapError):
            check_dimension(cfg, 1024)


class TestUncoupledSystem:
    def test_matches_dense_diagonalization(self):
        # product-structure spectrum == dense spectrum of the assembled H0
        p = SpinChainParams(7, b_probe=0.11, bx_bath=0.3, jx_bath=1.0,
                            jz_sb=0.0, jx_sb=0.0, w_disorder=1.3, disorder_seed=5)
        real, hd = build_disorder(p)
        h0 = assemble([build_probe(p), build_bath(p), hd])
        dense = np.linalg.eigvalsh(h0.entries)
        fast = UncoupledSpinSystem.build(p, real.fields)
        assert np.allclose(fast.energies, dense, atol=1e-10)

    def test_eigenstate_is_dense_eigenvector(self):
        p = SpinChainParams(6, b_probe=0.05, jz_sb=0.0, jx_sb=0.0)
        basis = build_full_basis(6)
        h0 = assemble([build_probe(p, basis), build_bath(p, basis)])
        fast = UncoupledSpinSystem.build(p, None)
        for ordinal in (0, 17, 40):
            psi = fast.eigenstate(ordinal, basis)
            hv = h0.entries @ psi.amplitudes
            assert np.allclose(hv, fast.energies[ordinal] * psi.amplitudes, atol=1e-10)

    def test_window_variance_matches_probes_route(self):
        p = SpinChainParams(7, b_probe=0.01, jz_sb=0.0, jx_sb=0.0,
                            w_disorder=0.7, disorder_seed=2)
        real, hd = build_disorder(p)
        h0 = assemble([build_probe(p), build_bath(p), hd])
        es0 = diagonalize(h0)
        fast = UncoupledSpinSystem.build(p, real.fields)
        basis = build_full_basis(7)
        psi0 = fast.eigenstate(60, basis)
        o = site_operator(basis, 1, "z")
        slow = microcanonical_variance(es0, psi0, o, mode="window",
                                       window_fraction=0.05)
        e0 = fast.energies[60]
        quick = fast.sigma_z1_window_variance(e0, 0.05)
        assert quick == pytest.approx(slow, abs=1e-9)


class TestInitialStates:
    def test_neel_configuration(self):
        assert neel_config(4) == 0b0101  # sites 1 and 3 up
        assert neel_config(4, primed=True) == 0b1010
        basis = build_full_basis(4)
        psi = make_initial_state(InitialStateSpec(kind=InitialStateKind.NEEL_Z2), basis)
        assert psi.amplitudes[5] == 1.0
        assert np.count_nonzero(psi.amplitudes) == 1

    def test_eigenstate_index_ground_state(self):
        p = SpinChainParams(6, jz_sb=0.0, jx_sb=0.0)
        fast = UncoupledSpinSystem.build(p, None)
        basis = build_full_basis(6)
        spec = InitialStateSpec(kind=InitialStateKind.EIGENSTATE_INDEX, alpha0=0)
        psi = make_initial_state(spec, basis, uncoupled=fast)
        h0 = assemble([build_probe(p, basis), build_bath(p, basis)])
        val = np.vdot(psi.amplitudes, h0.entries @ psi.amplitudes).real
        assert val == pytest.approx(fast.energies[0], abs=1e-10)

    def test_probe_product_states(self):
        p = SpinChainParams(6, jz_sb=0.0, jx_sb=0.0)
        fast = UncoupledSpinSystem.build(p, None)
        basis = build_full_basis(6)
        z = make_initial_state(InitialStateSpec(
            kind=InitialStateKind.PROBE_UP_Z_BATH_EIGENSTATE), basis, uncoupled=fast)
        o = site_operator(basis, 1, "z").entries
        assert np.vdot(z.amplitudes, o @ z.amplitudes).real == pytest.approx(1.0)
        x = make_initial_state(InitialStateSpec(
            kind=InitialStateKind.PROBE_UP_X_BATH_EIGENSTATE), basis, uncoupled=fast)
        assert np.vdot(x.amplitudes, o @ x.amplitudes).real == pytest.approx(0.0, abs=1e-12)
        sx = site_operator(basis, 1, "x").entries
        assert np.vdot(x.amplitudes, sx @ x.amplitudes).real == pytest.approx(1.0)

    def test_random_superposition_reproducible(self):
        basis = build_constrained_basis(10)
        from ergoprobe.models import PXPParams, build_qmbs
        es = diagonalize(build_qmbs(PXPParams(10, 0.4), basis))
        s1, idx1 = random_superposition_state(es, basis, 16, seed=9)
        s2, idx2 = random_superposition_state(es, basis, 16, seed=9)
        assert np.array_equal(s1.amplitudes, s2.amplitudes)
        assert np.array_equal(idx1, idx2)
        s3, _ = random_superposition_state(es, basis, 16, seed=10)
        assert not np.array_equal(s1.amplitudes, s3.amplitudes)
        assert abs(s1.norm() - 1.0) < 1e-12

    def test_random_superposition_avoids_scars(self):
        basis = build_constrained_basis(10)
        from ergoprobe.models import PXPParams, build_qmbs
        es = diagonalize(build_qmbs(PXPParams(10, 0.4), basis))
        _, idx = random_superposition_state(es, basis, 16, seed=9)
        z2_row = np.abs(es.vectors[basis.index_of(neel_config(10)), :])
        # chosen states all have smaller overlap than the median pool state
        assert z2_row[idx].max() < np.median(z2_row)

    def test_random_product_configuration(self):
        from ergoprobe.scenarios import random_product_configuration
        basis = build_constrained_basis(10)
        psi = random_product_configuration(basis, probe_site=5, seed=3)
        o = site_operator(basis, 5, "z").entries
        assert np.vdot(psi.amplitudes, o @ psi.amplitudes).real == pytest.approx(1.0)
        psi2 = random_product_configuration(basis, probe_site=5, seed=3)
        assert np.array_equal(psi.amplitudes, psi2.amplitudes)


class TestAggregate:
    def test_known_values(self):
        recs = [{"g": 1, "x": v} for v in (1.0, 2.0, 3.0)]
        rows = aggregate(recs, ["g"], "x")
        assert rows[0]["mean"] == pytest.approx(2.0)
        assert rows[0]["stderr"] == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-12)

    def test_identical_records(self):
        recs = [{"g": 0, "x": 0.7}] * 30
        rows = aggregate(recs, ["g"], "x")
        assert rows[0]["mean"] == pytest.approx(0.7)
        assert rows[0]["stderr"] == 0.0
        assert rows[0]["n"] == 30

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            aggregate([], ["g"], "x")


class TestRunScenario:
    def test_levels_execution_contract(self, tmp_path):
        cfg = small_cfg("fig1b", n_sites=8, scan_values=[0.5, 4.0],
                        n_realizations=3, out_dir=str(tmp_path / "run"))
        report = run_scenario(cfg)
        assert report.ok
        lines = (tmp_path / "run" / "r_statistic.csv").read_text().splitlines()
        assert lines[0] == "W_or_J,mean_r,stderr,n_realizations"
        assert len(lines) == 3
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["library_version"]
        assert len(manifest["tasks"]) == 6
        seeds = {t["seed"] for t in manifest["tasks"]}
        assert seeds == {cfg.base_seed + r for r in range(3)}

    def test_rerun_byte_identical(self, tmp_path):
        def run(where, threads):
            cfg = small_cfg("fig1b", n_sites=8, scan_values=[1.0],
                            n_realizations=4, threads=threads,
                            out_dir=str(tmp_path / where))
            assert run_scenario(cfg).ok
            return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                    for p in sorted((tmp_path / where).glob("*.csv"))}

        a = run("a", 1)
        b = run("b", 2)
        assert a == b

    def test_failures_recorded_run_continues(self, tmp_path):
        # dimension cap trips for the larger size; the smaller one completes
        cfg = small_cfg("fig1b", n_sites=8, scan_values=[1.0],
                        n_realizations=2, out_dir=str(tmp_path / "run"))
        cfg.scan_parameter = "n_sites"
        cfg.scan_values = [8, 12]
        cfg.dimension_cap = 300
        report = run_scenario(cfg)
        assert not report.ok
        assert report.failures == 2
        statuses = {(t.scan_value, t.status) for t in report.tasks}
        assert (8.0, "ok") in statuses
        assert (12.0, "failed") in statuses
        assert (tmp_path / "run" / "r_statistic.csv").exists()

    def test_flucts_csv_columns(self, tmp_path):
        cfg = small_cfg("fig3a", n_sites=7, scan_values=[0.4],
                        out_dir=str(tmp_path / "f"))
        report = run_scenario(cfg)
        assert report.ok
        header = (tmp_path / "f" / "fdt_records.csv").read_text().splitlines()[0]
        assert header == ("scenario,N,W_or_J,seed,delta2,gamma,dos,delta_O2,"
                          "predicted_delta2,chi_used")
        fl = (tmp_path / "f" / "fluctuations.csv").read_text().splitlines()
        assert fl[0] == "mode,T,value,closed_form"

    def test_unknown_analysis(self, tmp_path):
        cfg = small_cfg("fig1b", out_dir=str(tmp_path / "x"))
        cfg.analysis = "nope"
        with pytest.raises(ValueError, match="unknown analysis"):
            run_scenario(cfg)


class TestCLI:
    def test_parser_and_tiny_run(self, tmp_path, capsys):
        from ergoprobe.cli import main

        ini = tmp_path / "cfg.ini"
        ini.write_text(
            "[model]\nn_sites = 8\n[scan]\nvalues = 0.5\n"
            "[ensemble]\nn_realizations = 2\n")
        rc = main(["levels", "--preset", "fig1b", "--config", str(ini),
                   "--seed", "3", "--out", str(tmp_path / "out"), "--threads", "2"])
        assert rc == 0
        assert (tmp_path / "out" / "r_statistic.csv").exists()
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["base_seed"] == 3

    def test_draw_disorder_matches_builder(self):
        p = SpinChainParams(5, w_disorder=1.5, disorder_seed=11)
        real, ham = build_disorder(p)
        assert np.array_equal(draw_disorder(p).fields, real.fields)
